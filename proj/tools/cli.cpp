#include "cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <set>

#include <fmt/format.h>

#include "int2int/config.hpp"
#include "int2int/corpus.hpp"
#include "int2int/errors.hpp"
#include "int2int/logparse.hpp"
#include "int2int/trainer.hpp"

namespace int2int::cli {

namespace {

template <typename V>
CLI::Option* add_field(CLI::App* app, const std::string& names, V& value, const std::string& help) {
    if constexpr (std::is_same_v<V, bool>) {
        // Accepts "--flag", "--flag true" and "--flag false".
        return app->add_option(names, value, help)->expected(0, 1)->default_str("true");
    } else {
        return app->add_option(names, value, help)->capture_default_str();
    }
}

std::string flag_names(const std::string& field) {
    std::string names = "--" + field;
    for (const auto& [alias, canonical] : flag_aliases()) {
        if (canonical == field) names += ",--" + alias;
    }
    return names;
}

/// Registers the run-configuration flags whose names pass `keep`.
template <typename Keep>
void register_config(CLI::App* app, RunConfig& c, Keep keep) {
#define INT2INT_REGISTER(type, name, def, help) \
    if (keep(#name)) add_field(app, flag_names(#name), c.name, help);
    INT2INT_RUN_CONFIG_FIELDS(INT2INT_REGISTER)
#undef INT2INT_REGISTER
}

const std::set<std::string>& task_fields() {
    static const std::set<std::string> f = {"operation", "base", "min_int", "max_int", "modulo", "dim1",
                                            "dim2",      "max_class", "max_len", "num_workers", "env_base_seed"};
    return f;
}

int run_train(RunConfig cfg, std::ostream& err) {
    for (const auto& f : cfg.ignored_flags()) err << "notice: --" << f << " is accepted for compatibility and ignored\n";
    Trainer trainer(std::move(cfg));
    if (trainer.config().eval_only) {
        trainer.evaluate();
    } else {
        trainer.run();
    }
    return kExitOk;
}

struct DatagenOptions {
    RunConfig task;
    std::int64_t count = 10000;
    std::string output;
    std::vector<std::string> inputs;
    std::string input;
    std::int64_t seed = 0;
    std::string output_prefix;
    std::int64_t valid_size = 10000;
    std::int64_t test_size = 10000;
    bool dedupe = true;
};

std::vector<std::filesystem::path> as_paths(const std::vector<std::string>& v) {
    return {v.begin(), v.end()};
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Integer arithmetic with transformers: training, corpus tools and log parsing", "int2int"};
    app.require_subcommand(1);

    RunConfig train_cfg;
    auto* train = app.add_subcommand("train", "train or evaluate a model");
    register_config(train, train_cfg, [](const char*) { return true; });

    DatagenOptions d;
    auto* datagen = app.add_subcommand("datagen", "generate and prepare corpus files");
    datagen->require_subcommand(1);
    auto* gen = datagen->add_subcommand("generate", "write generated examples");
    register_config(gen, d.task, [](const char* n) { return task_fields().count(n) > 0; });
    gen->add_option("--count", d.count, "number of examples")->capture_default_str();
    gen->add_option("--output", d.output, "output file")->required();
    auto* concat = datagen->add_subcommand("concat", "concatenate files");
    concat->add_option("inputs", d.inputs, "input files")->required();
    concat->add_option("--output", d.output, "output file")->required();
    auto* shuffle = datagen->add_subcommand("shuffle", "seeded permutation of lines");
    shuffle->add_option("--input", d.input, "input file")->required();
    shuffle->add_option("--output", d.output, "output file")->required();
    shuffle->add_option("--seed", d.seed, "permutation seed (negative: random)")->capture_default_str();
    auto* dedupe = datagen->add_subcommand("dedupe", "drop repeated lines, keeping first occurrences");
    dedupe->add_option("--input", d.input, "input file")->required();
    dedupe->add_option("--output", d.output, "output file")->required();
    auto* split = datagen->add_subcommand("split", "first lines to .valid, last lines to .test, rest to .train");
    split->add_option("--input", d.input, "input file")->required();
    split->add_option("--output_prefix", d.output_prefix, "prefix of the three output files")->required();
    split->add_option("--valid_size", d.valid_size, "validation lines")->capture_default_str();
    split->add_option("--test_size", d.test_size, "test lines")->capture_default_str();
    auto* pipeline = datagen->add_subcommand("pipeline", "concat, shuffle, dedupe and split");
    pipeline->add_option("inputs", d.inputs, "input files")->required();
    pipeline->add_option("--output_prefix", d.output_prefix, "prefix of the output files")->required();
    pipeline->add_option("--seed", d.seed, "shuffle seed (negative: random)")->capture_default_str();
    pipeline->add_option("--valid_size", d.valid_size, "validation lines")->capture_default_str();
    pipeline->add_option("--test_size", d.test_size, "test lines")->capture_default_str();
    add_field(pipeline, "--dedupe", d.dedupe, "drop repeated lines")->capture_default_str();

    std::vector<std::string> log_paths;
    std::string table_out, steps_out, plot_metric, plot_out;
    auto* logparse = app.add_subcommand("logparse", "per-epoch metric tables from train.log files");
    logparse->add_option("paths", log_paths, "train.log files or experiment directories")->required();
    logparse->add_option("--output", table_out, "metric table file (default: standard output)");
    logparse->add_option("--steps", steps_out, "training report table file");
    logparse->add_option("--plot", plot_metric, "metric to plot against the epoch");
    logparse->add_option("--plot_output", plot_out, "plot file (default: standard output)");

    std::vector<std::string> argv_rev(args.rbegin(), args.rend());
    if (!argv_rev.empty()) argv_rev.pop_back();
    try {
        app.parse(argv_rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    }

    try {
        if (train->parsed()) return run_train(train_cfg, err);
        if (gen->parsed()) {
            d.task.task_spec().validate();
            const Task task(d.task.task_spec());
            if (d.count < 0) throw ConfigError("--count must be >= 0");
            const auto lines = generate_corpus(task, static_cast<std::size_t>(d.count), d.task.env_base_seed,
                                               static_cast<int>(d.task.num_workers), d.task.max_len);
            write_lines(d.output, lines);
            out << "wrote " << lines.size() << " lines to " << d.output << "\n";
        } else if (concat->parsed()) {
            const auto lines = concat_files(as_paths(d.inputs));
            write_lines(d.output, lines);
            out << "wrote " << lines.size() << " lines to " << d.output << "\n";
        } else if (shuffle->parsed()) {
            const auto lines = shuffle_lines(read_lines(d.input), d.seed);
            write_lines(d.output, lines);
            out << "wrote " << lines.size() << " lines to " << d.output << "\n";
        } else if (dedupe->parsed()) {
            const auto in = read_lines(d.input);
            const auto lines = dedupe_lines(in);
            write_lines(d.output, lines);
            out << "wrote " << lines.size() << " lines to " << d.output << " (" << in.size() - lines.size()
                << " duplicates dropped)\n";
        } else if (split->parsed()) {
            if (d.valid_size < 0 || d.test_size < 0) throw ConfigError("split sizes must be >= 0");
            const auto s = split_lines(read_lines(d.input), static_cast<std::size_t>(d.valid_size),
                                       static_cast<std::size_t>(d.test_size));
            write_lines(d.output_prefix + ".valid", s.valid);
            write_lines(d.output_prefix + ".test", s.test);
            write_lines(d.output_prefix + ".train", s.train);
            out << fmt::format("valid {} / test {} / train {} lines\n", s.valid.size(), s.test.size(), s.train.size());
        } else if (pipeline->parsed()) {
            if (d.valid_size < 0 || d.test_size < 0) throw ConfigError("split sizes must be >= 0");
            const auto r = run_pipeline(as_paths(d.inputs), d.output_prefix, d.seed,
                                        static_cast<std::size_t>(d.valid_size), static_cast<std::size_t>(d.test_size),
                                        d.dedupe);
            out << fmt::format("raw {} lines, {} duplicates dropped; valid {} / test {} / train {} lines\n", r.raw,
                               r.duplicates, r.valid, r.test, r.train);
        } else if (logparse->parsed()) {
            std::vector<ParsedLog> logs;
            for (const auto& p : log_paths) {
                logs.push_back(parse_log_file(p));
                for (const auto& w : logs.back().warnings) err << "warning: " << p << ": " << w << "\n";
            }
            auto emit = [&](const std::string& path, const std::string& text) {
                if (path.empty()) {
                    out << text;
                    return;
                }
                std::ofstream f(path);
                if (!f) throw IoError("cannot write " + path);
                f << text;
            };
            emit(table_out, metrics_table(logs));
            if (!steps_out.empty()) emit(steps_out, steps_table(logs));
            if (!plot_metric.empty()) emit(plot_out, text_plot(logs, plot_metric));
        }
        return kExitOk;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

}  // namespace int2int::cli
