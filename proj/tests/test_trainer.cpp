#include <doctest.h>

#include <fstream>

#include "int2int/corpus.hpp"
#include "int2int/errors.hpp"
#include "int2int/logparse.hpp"
#include "int2int/trainer.hpp"
#include "support/temp_dir.hpp"

using namespace int2int;
using int2int::testing::TempDir;

namespace {

RunConfig tiny_config(const TempDir& dir, const std::string& id) {
    RunConfig c;
    c.dump_path = dir.path().string();
    c.exp_name = "t";
    c.exp_id = id;
    c.base = 10;
    c.max_int = 100;
    c.n_enc_layers = c.n_dec_layers = 1;
    c.enc_emb_dim = c.dec_emb_dim = 16;
    c.n_enc_heads = c.n_dec_heads = 2;
    c.epoch_size = 64;
    c.batch_size = 16;
    c.eval_size = 48;
    c.max_epoch = 1;
    c.env_base_seed = 7;
    c.max_output_len = 8;
    c.optimizer = "adam,lr=0.001";
    return c;
}

RunConfig deterministic(RunConfig c) {
    c.deterministic = true;
    return c;
}

void write_corpus(const std::filesystem::path& p, std::size_t n, std::int64_t seed) {
    TaskSpec spec;
    spec.base = 10;
    spec.max_int = 100;
    write_lines(p, generate_corpus(Task(spec), n, seed, 1));
}

}  // namespace

TEST_CASE("metric goals and stopping criteria") {
    const auto up = parse_metric_goal("valid_arithmetic_acc");
    CHECK_FALSE(up.lower_is_better);
    CHECK(up.improves(0.5, std::nullopt));
    CHECK(up.improves(0.6, 0.5));
    CHECK_FALSE(up.improves(0.5, 0.5));
    const auto down = parse_metric_goal("_valid_arithmetic_xe_loss");
    CHECK(down.lower_is_better);
    CHECK(down.metric == "valid_arithmetic_xe_loss");
    CHECK(down.spelled() == "_valid_arithmetic_xe_loss");
    CHECK(down.improves(0.4, 0.5));
    CHECK(parse_validation_metrics("valid_arithmetic_acc,_valid_arithmetic_xe_loss").size() == 2);
    CHECK(parse_validation_metrics("").empty());

    const auto crit = parse_stopping_criterion("valid_arithmetic_acc,2");
    REQUIRE(crit);
    CHECK(crit->patience == 2);
    CHECK_FALSE(parse_stopping_criterion(""));
    CHECK_THROWS_AS(parse_stopping_criterion("valid_arithmetic_acc"), ParseError);
    CHECK_THROWS_AS(parse_stopping_criterion("valid_arithmetic_acc,0"), ParseError);
    CHECK_THROWS_AS(parse_stopping_criterion("valid_arithmetic_acc,x"), ParseError);

    StoppingTracker t(crit);
    CHECK_FALSE(t.update({{"valid_arithmetic_acc", 0.5}}));
    CHECK_FALSE(t.update({{"valid_arithmetic_acc", 0.4}}));
    CHECK(t.update({{"valid_arithmetic_acc", 0.5}}));
    CHECK_THROWS_AS(t.update({{"other", 1.0}}), ParseError);
    CHECK_FALSE(StoppingTracker().update({}));
}

TEST_CASE("random experiment ids") {
    const auto a = random_exp_id(), b = random_exp_id();
    CHECK(a.size() == 10);
    CHECK(a != b);
    for (char ch : a) CHECK(((ch >= 'a' && ch <= 'z') || (ch >= '0' && ch <= '9')));
}

TEST_CASE("a training epoch writes its files and a parseable log") {
    TempDir dir;
    auto c = tiny_config(dir, "files");
    c.max_epoch = 2;
    c.save_periodic = 2;
    c.validation_metrics = "valid_arithmetic_acc,_valid_arithmetic_xe_loss";
    c.eval_verbose = 1;
    c.export_pred = true;
    c.report_loss_every = 1;
    std::vector<EpochSummary> summaries;
    {
        Trainer t(c, false);
        summaries = t.run();
        CHECK(t.state().epoch == 2);
        CHECK(t.state().step == 8);
    }
    REQUIRE(summaries.size() == 2);
    const auto exp = dir / "t" / "files";
    for (const char* f : {"params.txt", "train.log", "checkpoint", "checkpoint-2", "best-valid_arithmetic_acc",
                          "best-_valid_arithmetic_xe_loss", "eval.valid.0", "eval.valid.1", "pred_hist.valid.1"})
        CHECK_MESSAGE(std::filesystem::exists(exp / f), f);
    CHECK_FALSE(std::filesystem::exists(exp / "checkpoint-1"));

    const auto log = parse_log_file(exp);
    CHECK(log.exp_id == "files");
    REQUIRE(log.epochs.size() == 2);
    CHECK(log.steps.size() == 8);
    for (std::size_t e = 0; e < 2; ++e) CHECK(log.epochs[e] == summaries[e].metrics);
    CHECK(log.warnings.empty());
}

TEST_CASE("stopping criterion ends the run") {
    TempDir dir;
    auto c = tiny_config(dir, "stop");
    c.max_epoch = 50;
    c.optimizer = "sgd,lr=1e-9";
    c.stopping_criterion = "valid_arithmetic_acc,1";
    Trainer t(c, false);
    const auto s = t.run();
    CHECK(s.size() < 50);
    CHECK(s.back().stop);
}

TEST_CASE("resuming after three epochs matches five straight epochs") {
    TempDir dir;
    auto straight = deterministic(tiny_config(dir, "straight"));
    straight.max_epoch = 5;
    std::vector<double> expected;
    {
        Trainer t(straight, false);
        t.run();
        expected = t.state().epoch_losses;
    }
    auto split = deterministic(tiny_config(dir, "split"));
    split.max_epoch = 3;
    {
        Trainer t(split, false);
        t.run();
        CHECK(t.state().epoch_losses.size() == 3);
    }
    split.max_epoch = 5;
    Trainer t(split, false);
    CHECK(t.resumed());
    t.run();
    REQUIRE(t.state().epoch_losses.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) CHECK(t.state().epoch_losses[i] == expected[i]);
}

TEST_CASE("four accumulated batches of 16 equal one batch of 64") {
    TempDir dir;
    auto big = deterministic(tiny_config(dir, "big"));
    big.batch_size = 64;
    auto acc = deterministic(tiny_config(dir, "acc"));
    acc.batch_size = 16;
    acc.accumulate_gradients = 4;
    Trainer a(big, false), b(acc, false);
    CHECK(a.parameter_snapshot() == b.parameter_snapshot());
    for (int epoch = 0; epoch < 3; ++epoch) {
        const auto sa = a.run_epoch(), sb = b.run_epoch();
        CHECK(sa.steps == 1);
        CHECK(sb.steps == 1);
        REQUIRE(a.parameter_snapshot() == b.parameter_snapshot());
    }
}

TEST_CASE("training from files, streamed and two-class") {
    TempDir dir;
    write_corpus(dir / "train", 300, 1);
    write_corpus(dir / "valid", 40, 2);
    write_corpus(dir / "test", 30, 3);
    for (int mode = 0; mode < 3; ++mode) {
        auto c = tiny_config(dir, "file" + std::to_string(mode));
        c.operation = "data";
        c.train_data = (dir / "train").string();
        c.eval_data = (dir / "valid").string() + "," + (dir / "test").string();
        if (mode == 1) {
            c.batch_load = true;
            c.reload_size = 50;
        }
        if (mode == 2) {
            c.two_classes = true;
            c.first_class_size = 20;
            c.first_class_prob = 0.5;
        }
        Trainer t(c, false);
        const auto s = t.run_epoch();
        CHECK(s.metrics.count("valid_arithmetic_acc") == 1);
        CHECK(s.metrics.count("test_arithmetic_acc") == 1);
        REQUIRE(t.last_results().size() == 2);
        CHECK(t.last_results()[0].second.n == 40);
        CHECK(t.last_results()[1].second.n == 30);
    }
}

TEST_CASE("files with unknown tokens are rejected") {
    TempDir dir;
    write_lines(dir / "bad", {"+ 1 + x\t+ 1"});
    auto c = tiny_config(dir, "bad");
    c.operation = "data";
    c.train_data = (dir / "bad").string();
    c.eval_data = (dir / "bad").string();
    CHECK_THROWS_AS(Trainer(c, false), UnknownToken);
}

TEST_CASE("evaluation of a saved experiment") {
    TempDir dir;
    auto c = tiny_config(dir, "src");
    c.validation_metrics = "valid_arithmetic_acc";
    MetricsRecord trained;
    {
        Trainer t(c, false);
        trained = t.run().back().metrics;
    }
    auto e = tiny_config(dir, "eval");
    e.eval_from_exp = (dir / "t" / "src").string();
    e.validation_metrics = "valid_arithmetic_acc";
    e.eval_only = true;
    e.n_enc_layers = 3;  // replaced by the stored model settings
    Trainer t(e, false);
    CHECK(t.config().n_enc_layers == 1);
    const auto m = t.evaluate();
    CHECK(m.at("valid_arithmetic_acc") == trained.at("valid_arithmetic_acc"));

    auto r = tiny_config(dir, "reload");
    r.reload_model = (dir / "t" / "src" / "checkpoint").string();
    r.eval_only = true;
    Trainer tr(r, false);
    CHECK_FALSE(tr.resumed());
    CHECK(tr.evaluate().at("valid_arithmetic_xe_loss") == trained.at("valid_arithmetic_xe_loss"));
}

TEST_CASE("exporting generated data appends one epoch per epoch") {
    TempDir dir;
    auto c = tiny_config(dir, "export");
    c.export_data = true;
    c.max_epoch = 3;
    c.epoch_size = 25;
    Trainer t(c, false);
    t.run();
    const auto lines = read_lines(dir / "t" / "export" / "data.prefix");
    CHECK(lines.size() == 75);
    for (const auto& l : lines) CHECK(l.find('\t') != std::string::npos);
}
