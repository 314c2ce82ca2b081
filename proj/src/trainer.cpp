#include "int2int/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "int2int/checkpoint.hpp"
#include "int2int/dataset.hpp"
#include "int2int/errors.hpp"
#include "int2int/logging.hpp"
#include "int2int/logparse.hpp"
#include "int2int/optimizer.hpp"

namespace int2int {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Metric goals and stopping

bool MetricGoal::improves(double value, std::optional<double> best) const {
    if (!best) return true;
    return lower_is_better ? value < *best : value > *best;
}

MetricGoal parse_metric_goal(std::string_view text) {
    MetricGoal g;
    if (!text.empty() && text.front() == '_') {
        g.lower_is_better = true;
        text.remove_prefix(1);
    }
    if (text.empty()) throw ParseError("empty metric name");
    g.metric = std::string(text);
    return g;
}

std::vector<MetricGoal> parse_validation_metrics(const std::string& text) {
    std::vector<MetricGoal> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(parse_metric_goal(item));
    }
    return out;
}

std::optional<StoppingCriterion> parse_stopping_criterion(const std::string& text) {
    if (text.empty()) return std::nullopt;
    const auto comma = text.find(',');
    if (comma == std::string::npos) throw ParseError("stopping criterion must read metric,patience: " + text);
    StoppingCriterion c;
    c.goal = parse_metric_goal(std::string_view(text).substr(0, comma));
    const std::string patience = text.substr(comma + 1);
    std::size_t used = 0;
    try {
        c.patience = std::stoll(patience, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != patience.size() || c.patience < 1) {
        throw ParseError("stopping criterion patience must be a positive integer: " + text);
    }
    return c;
}

bool StoppingTracker::update(const MetricsRecord& metrics) {
    if (!criterion_) return false;
    const auto it = metrics.find(criterion_->goal.metric);
    if (it == metrics.end()) throw ParseError("unknown stopping metric \"" + criterion_->goal.metric + "\"");
    if (criterion_->goal.improves(it->second, best_)) {
        best_ = it->second;
        since_ = 0;
    } else {
        ++since_;
    }
    return since_ >= criterion_->patience;
}

std::string random_exp_id() {
    static constexpr std::string_view chars = "abcdefghijklmnopqrstuvwxyz0123456789";
    std::random_device rd;
    std::uniform_int_distribution<std::size_t> pick(0, chars.size() - 1);
    std::string id;
    for (int i = 0; i < 10; ++i) id += chars[pick(rd)];
    return id;
}

namespace {

std::int64_t resolve_seed(std::int64_t seed) {
    if (seed >= 0) return seed;
    std::random_device rd;
    return static_cast<std::int64_t>((static_cast<std::uint64_t>(rd()) << 31) ^ rd()) & 0x3fffffffffffffffLL;
}

std::string engine_state(const std::mt19937_64& e) {
    std::ostringstream os;
    os << e;
    return os.str();
}

void set_engine_state(std::mt19937_64& e, const std::string& s) {
    std::istringstream is(s);
    is >> e;
    if (!is) throw IntegrityError("bad random engine state");
}

/// Copies the model and task fields of `src` into `dst`.
void adopt_model_fields(RunConfig& dst, const RunConfig& src) {
#define INT2INT_COPY(name) dst.name = src.name;
    INT2INT_COPY(operation)
    INT2INT_COPY(base)
    INT2INT_COPY(min_int)
    INT2INT_COPY(max_int)
    INT2INT_COPY(modulo)
    INT2INT_COPY(dim1)
    INT2INT_COPY(dim2)
    INT2INT_COPY(max_class)
    INT2INT_COPY(n_eval_metrics)
    INT2INT_COPY(n_error_metrics)
    INT2INT_COPY(architecture)
    INT2INT_COPY(n_enc_layers)
    INT2INT_COPY(n_dec_layers)
    INT2INT_COPY(enc_emb_dim)
    INT2INT_COPY(dec_emb_dim)
    INT2INT_COPY(n_enc_heads)
    INT2INT_COPY(n_dec_heads)
    INT2INT_COPY(n_enc_hidden_layers)
    INT2INT_COPY(n_dec_hidden_layers)
    INT2INT_COPY(gelu_activation)
    INT2INT_COPY(enc_has_pos_emb)
    INT2INT_COPY(dec_has_pos_emb)
    INT2INT_COPY(sinusoidal_embeddings)
    INT2INT_COPY(share_inout_emb)
    INT2INT_COPY(enc_loop_idx)
    INT2INT_COPY(dec_loop_idx)
    INT2INT_COPY(enc_loops)
    INT2INT_COPY(dec_loops)
    INT2INT_COPY(xav_init)
    INT2INT_COPY(max_positions)
    INT2INT_COPY(precision)
#undef INT2INT_COPY
}

std::size_t loss_tokens(const Batch& batch, nn::Architecture arch) {
    if (arch == nn::Architecture::encoder_decoder) return batch.target_tokens();
    std::size_t n = 0;
    for (auto len : batch.output_lengths) n += len;
    return n;
}

void check_vocabulary(const ExampleSet& set, const Vocabulary& vocab) {
    for (std::size_t i = 0; i < set.examples.size(); ++i) {
        for (const auto* side : {&set.examples[i].input, &set.examples[i].output}) {
            for (const auto& tok : *side) {
                if (!vocab.contains(tok)) {
                    throw UnknownToken("\"" + tok + "\" in example " + std::to_string(i + 1) + " of " + set.source);
                }
            }
        }
    }
}

/// Where training examples come from.
class TrainingSource {
public:
    TrainingSource(const RunConfig& cfg, const Task& task, const Vocabulary& vocab, std::int64_t seed,
                   RunLogger& log)
        : rng_(seed, 0, 0) {
        if (!cfg.train_data.empty()) {
            if (cfg.batch_load) {
                mode_ = Mode::stream;
                reader_ = std::make_unique<StreamingExampleReader>(cfg.train_data,
                                                                   static_cast<std::size_t>(cfg.reload_size), cfg.max_len);
                return;
            }
            ReadReport report;
            set_ = read_examples(cfg.train_data, cfg.reload_data_size, cfg.max_len, &report);
            check_vocabulary(set_, vocab);
            log.info(fmt::format("Loaded {} training examples from {} ({} malformed, {} longer than max_len skipped)",
                                 set_.size(), cfg.train_data, report.malformed, report.too_long));
            SamplerConfig sc;
            if (cfg.two_classes) {
                sc.mode = SamplerMode::two_class;
                sc.first_class_size = static_cast<std::size_t>(cfg.first_class_size);
                sc.first_class_prob = cfg.first_class_prob;
            }
            sampler_ = std::make_unique<ExampleSampler>(sc, set_.size());
            mode_ = Mode::memory;
            return;
        }
        const bool parallel = cfg.num_workers > 1 && !cfg.deterministic;
        if (parallel) {
            mode_ = Mode::parallel;
            parallel_ = std::make_unique<ParallelGenerator>(task, seed, 0, static_cast<int>(cfg.num_workers), cfg.max_len);
        } else {
            mode_ = Mode::generated;
            stream_ = std::make_unique<GeneratedStream>(task, RngStream(seed, 0, 0), Split::train, cfg.max_len);
        }
    }

    Example next() {
        switch (mode_) {
            case Mode::memory: return set_.examples[sampler_->next_index(rng_)];
            case Mode::stream: return reader_->next();
            case Mode::generated: return stream_->next();
            case Mode::parallel: return parallel_->next();
        }
        throw ConfigError("no training source");
    }

    std::vector<Example> take(std::size_t n) {
        std::vector<Example> out;
        out.reserve(n);
        for (std::size_t i = 0; i < n; ++i) out.push_back(next());
        return out;
    }

    [[nodiscard]] std::uint64_t skipped() const { return stream_ ? stream_->skipped_too_long() : 0; }

    [[nodiscard]] json save() const {
        json j;
        j["rng"] = rng_.state();
        if (sampler_) j["cursor"] = sampler_->cursor();
        if (reader_) j["consumed"] = reader_->consumed();
        if (stream_) j["stream_rng"] = stream_->rng().state();
        return j;
    }

    void restore(const json& j) {
        rng_.set_state(j.at("rng").get<std::string>());
        if (sampler_ && j.contains("cursor")) sampler_->set_cursor(j.at("cursor").get<std::size_t>());
        if (reader_ && j.contains("consumed")) reader_->skip(j.at("consumed").get<std::uint64_t>());
        if (stream_ && j.contains("stream_rng")) stream_->rng().set_state(j.at("stream_rng").get<std::string>());
    }

private:
    enum class Mode { memory, stream, generated, parallel };
    Mode mode_ = Mode::generated;
    RngStream rng_;
    ExampleSet set_;
    std::unique_ptr<ExampleSampler> sampler_;
    std::unique_ptr<StreamingExampleReader> reader_;
    std::unique_ptr<GeneratedStream> stream_;
    std::unique_ptr<ParallelGenerator> parallel_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Implementation

struct Trainer::Impl {
    virtual ~Impl() = default;
    virtual EpochSummary run_epoch() = 0;
    virtual MetricsRecord evaluate() = 0;
    [[nodiscard]] virtual std::vector<std::pair<std::string, std::vector<double>>> parameter_snapshot() const = 0;
    [[nodiscard]] virtual std::size_t parameter_count() const = 0;

    RunConfig cfg;
    std::filesystem::path dir;
    TrainerState state;
    bool resumed = false;
    std::vector<std::pair<std::string, EvalResult>> last;
};

namespace {

template <typename T>
class TrainerImpl final : public Trainer::Impl {
public:
    TrainerImpl(RunConfig config, std::filesystem::path exp_dir, std::optional<CheckpointData> resume,
                std::optional<CheckpointData> init_model, bool echo)
        : task_(config.task_spec()),
          vocab_(task_.vocabulary()),
          logger_(exp_dir / "train.log", echo) {
        cfg = std::move(config);
        dir = std::move(exp_dir);
        seed_ = resolve_seed(cfg.env_base_seed);
        if (resume && resume->metadata.contains("seed")) seed_ = resume->metadata.at("seed").get<std::int64_t>();

        log_header();
        if (cfg.deterministic && cfg.num_workers > 1) logger_.info("Deterministic mode: using a single data worker");
        for (const auto& f : cfg.ignored_flags()) logger_.info("--" + f + " is accepted for compatibility and ignored");

        model_ = std::make_unique<nn::Seq2SeqModel<T>>(cfg.model_config(), vocab_.size(), RngStream(seed_, -1, 0).next());
        optimizer_ = std::make_unique<Optimizer<T>>(cfg.optimizer_config(), model_->parameters().all());
        dropout_rng_.seed(RngStream(seed_, -2, 0).next());
        eval_rng_ = RngStream(seed_, -3, 0);
        goals_ = parse_validation_metrics(cfg.validation_metrics);
        tracker_ = StoppingTracker(parse_stopping_criterion(cfg.stopping_criterion));
        logger_.info(fmt::format("Number of parameters: {}", model_->parameter_count()));

        if (!cfg.eval_only && !cfg.export_data) source_ = std::make_unique<TrainingSource>(cfg, task_, vocab_, seed_, logger_);
        if (cfg.export_data && !source_) {
            source_ = std::make_unique<TrainingSource>(cfg, task_, vocab_, seed_, logger_);
        }
        load_eval_files();

        if (resume) {
            restore(*resume);
            resumed = true;
            logger_.info(fmt::format("Resumed from epoch {} (step {})", state.epoch, state.step));
        } else if (init_model) {
            load_parameters(*init_model);
            logger_.info("Initialized model parameters from a saved model");
        }
    }

    EpochSummary run_epoch() override {
        EpochSummary s;
        s.epoch = state.epoch;
        logger_.info(fmt::format("============ Starting epoch {} ... ============", s.epoch));
        if (cfg.export_data) {
            export_epoch();
            ++state.epoch;
            s.stop = state.epoch >= cfg.max_epoch;
            return s;
        }
        const auto steps_before = state.step;
        s.train_loss = train_epoch();
        s.steps = state.step - steps_before;
        logger_.info(fmt::format("============ End of epoch {} ============", s.epoch));

        s.metrics = evaluate_all(s.epoch);
        s.metrics["epoch"] = static_cast<double>(s.epoch);
        s.metrics["train_loss"] = s.train_loss;
        logger_.info(format_metrics_line(s.metrics));
        state.epoch_losses.push_back(s.train_loss);
        ++state.epoch;

        std::vector<std::string> improved;
        for (const auto& g : goals_) {
            const auto it = s.metrics.find(g.metric);
            if (it == s.metrics.end()) throw ParseError("unknown validation metric \"" + g.metric + "\"");
            const auto key = g.spelled();
            const auto best = state.best_metrics.count(key) ? std::optional<double>(state.best_metrics[key]) : std::nullopt;
            if (g.improves(it->second, best)) {
                state.best_metrics[key] = it->second;
                improved.push_back(key);
                logger_.info(fmt::format("New best value for {}: {}", key, it->second));
            }
        }
        const bool patience_out = tracker_.update(s.metrics);
        if (patience_out) logger_.info(fmt::format("Stopping criterion reached after epoch {}", s.epoch));
        s.stop = patience_out || state.epoch >= cfg.max_epoch;

        const auto ck = make_checkpoint();
        for (const auto& key : improved) save(ck, dir / ("best-" + key));
        save(ck, dir / "checkpoint");
        if (cfg.save_periodic > 0 && state.epoch % cfg.save_periodic == 0) {
            save(ck, dir / ("checkpoint-" + std::to_string(state.epoch)));
        }
        logger_.flush();
        return s;
    }

    MetricsRecord evaluate() override {
        MetricsRecord m = evaluate_all(state.epoch);
        m["epoch"] = static_cast<double>(state.epoch);
        logger_.info(format_metrics_line(m));
        logger_.flush();
        return m;
    }

    [[nodiscard]] std::vector<std::pair<std::string, std::vector<double>>> parameter_snapshot() const override {
        std::vector<std::pair<std::string, std::vector<double>>> out;
        for (const auto* p : model_->parameters().all()) {
            std::vector<double> v(static_cast<std::size_t>(p->value.size()));
            for (Eigen::Index i = 0; i < p->value.size(); ++i) v[static_cast<std::size_t>(i)] = static_cast<double>(p->value.data()[i]);
            out.emplace_back(p->name, std::move(v));
        }
        return out;
    }

    [[nodiscard]] std::size_t parameter_count() const override { return model_->parameter_count(); }

private:
    void log_header() {
        json j = cfg;
        for (const auto& [k, v] : j.items()) logger_.info(fmt::format("{}: {}", k, v.dump()));
        logger_.info(fmt::format("Random seed: {}", seed_));
        logger_.info(fmt::format("Experiment directory: {}", dir.string()));
        std::string words;
        for (const auto& t : vocab_.tokens()) words += (words.empty() ? "" : " ") + t;
        logger_.info(fmt::format("Vocabulary ({} tokens): {}", vocab_.size(), words));
    }

    void load_eval_files() {
        const auto paths = cfg.eval_paths();
        for (std::size_t i = 0; i < paths.size(); ++i) {
            ReadReport report;
            auto set = read_examples(paths[i], cfg.eval_data_size, cfg.max_len, &report);
            check_vocabulary(set, vocab_);
            std::vector<EvalItem> items;
            items.reserve(set.size());
            for (auto& ex : set.examples) items.push_back({std::move(ex), std::nullopt});
            logger_.info(fmt::format("Loaded {} evaluation examples ({}) from {}", items.size(), eval_set_prefix(i),
                                     paths[i]));
            eval_files_.emplace_back(eval_set_prefix(i), std::move(items));
        }
    }

    // -- training ----------------------------------------------------------

    double train_epoch() {
        const auto epoch_size = static_cast<std::size_t>(cfg.epoch_size);
        const auto batch_size = static_cast<std::size_t>(cfg.batch_size);
        const auto accumulate = static_cast<std::size_t>(cfg.accumulate_gradients);
        std::vector<std::vector<Example>> window;
        std::size_t processed = 0;
        double loss_total = 0.0;
        std::size_t updates = 0;
        report_start_ = std::chrono::steady_clock::now();
        while (processed < epoch_size) {
            const std::size_t n = std::min(batch_size, epoch_size - processed);
            window.push_back(source_->take(n));
            processed += n;
            if (window.size() == accumulate || processed == epoch_size) {
                loss_total += optimize(window);
                ++updates;
                window.clear();
            }
        }
        return updates ? loss_total / static_cast<double>(updates) : 0.0;
    }

    /// One optimizer update from the batches of an accumulation window.
    /// Returns the mean token loss over the window.
    double optimize(const std::vector<std::vector<Example>>& window) {
        const auto arch = model_->config().architecture;
        const auto chunk = static_cast<std::size_t>(cfg.reduction_chunk());
        std::vector<Batch> batches;
        std::size_t tokens = 0;
        std::uint64_t examples = 0, words = 0;
        for (const auto& examples_in_batch : window) {
            const std::span<const Example> all(examples_in_batch);
            const std::size_t step = chunk > 0 ? chunk : all.size();
            for (std::size_t start = 0; start < all.size(); start += step) {
                batches.push_back(make_batch(all.subspan(start, std::min(step, all.size() - start)), vocab_));
                const auto& b = batches.back();
                tokens += loss_tokens(b, arch);
                examples += b.size();
                for (std::size_t i = 0; i < b.size(); ++i) words += b.input_lengths[i] + b.output_lengths[i];
            }
        }
        if (tokens == 0) throw ConfigError("training window has no target tokens");
        const T scale = T(1) / static_cast<T>(tokens);
        const nn::ForwardContext ctx{true, &dropout_rng_};
        double loss_sum = 0.0;
        for (const auto& b : batches) {
            nn::ForwardTrace<T> trace;
            loss_sum += model_->forward_loss(b, ctx, &trace).sum;
            model_->backward(trace, scale);
        }
        if (cfg.clip_grad_norm > 0.0) clip_gradients(model_->parameters().all(), cfg.clip_grad_norm);
        optimizer_->step();
        ++state.step;
        state.examples += examples;
        state.words += words;

        const double loss = loss_sum / static_cast<double>(tokens);
        report_loss_ += loss;
        ++report_steps_;
        report_examples_ += examples;
        report_words_ += words;
        if (state.step % cfg.report_loss_every == 0) {
            const auto now = std::chrono::steady_clock::now();
            const double secs = std::max(std::chrono::duration<double>(now - report_start_).count(), 1e-9);
            logger_.info(format_step_line(state.step, static_cast<double>(report_examples_) / secs,
                                          static_cast<double>(report_words_) / secs,
                                          report_loss_ / static_cast<double>(report_steps_), optimizer_->current_lr()));
            report_start_ = now;
            report_loss_ = 0.0;
            report_steps_ = 0;
            report_examples_ = 0;
            report_words_ = 0;
        }
        return loss;
    }

    void export_epoch() {
        std::ofstream out(dir / "data.prefix", std::ios::binary | std::ios::app);
        if (!out) throw IoError("cannot write " + (dir / "data.prefix").string());
        for (std::int64_t i = 0; i < cfg.epoch_size; ++i) {
            const Example ex = source_->next();
            out << write_example(ex.input, ex.output);
        }
        if (!out) throw IoError("write failed for " + (dir / "data.prefix").string());
        state.examples += static_cast<std::uint64_t>(cfg.epoch_size);
        logger_.info(fmt::format("Exported {} examples to {} ({} in total)", cfg.epoch_size,
                                 (dir / "data.prefix").string(), state.examples));
    }

    // -- evaluation ----------------------------------------------------------

    std::vector<EvalItem> generated_eval_set() {
        std::vector<EvalItem> items;
        items.reserve(static_cast<std::size_t>(cfg.eval_size));
        while (static_cast<std::int64_t>(items.size()) < cfg.eval_size) {
            const Sample s = task_.generate(eval_rng_, Split::valid);
            Example ex = make_example(task_, s);
            if (cfg.max_len > 0 && (static_cast<std::int64_t>(ex.input.size()) > cfg.max_len ||
                                    static_cast<std::int64_t>(ex.output.size()) > cfg.max_len)) {
                continue;
            }
            items.push_back({std::move(ex), s.problem});
        }
        return items;
    }

    MetricsRecord evaluate_all(std::int64_t epoch) {
        last.clear();
        MetricsRecord metrics;
        const auto ecfg = cfg.eval_config();
        auto sink = [this](const std::string& line) { logger_.info(line); };
        auto run_set = [&](const std::string& prefix, const std::vector<EvalItem>& items) {
            logger_.info(fmt::format("Evaluating {} ({} examples)", prefix, items.size()));
            EvalResult r = evaluate_dataset(*model_, vocab_, task_, std::span<const EvalItem>(items), prefix, ecfg, sink);
            for (const auto& [k, v] : r.metrics) metrics[k] = v;
            if (cfg.eval_verbose > 0) {
                export_predictions(dir / fmt::format("eval.{}.{}", prefix, epoch), items, r);
            }
            if (cfg.export_pred) {
                std::ofstream out(dir / fmt::format("pred_hist.{}.{}", prefix, epoch));
                out << format_histogram(r.histogram);
            }
            last.emplace_back(prefix, std::move(r));
        };
        if (!eval_files_.empty()) {
            for (const auto& [prefix, items] : eval_files_) run_set(prefix, items);
        } else if (task_.has_generator() && cfg.eval_size > 0) {
            run_set(eval_set_prefix(0), generated_eval_set());
        }
        return metrics;
    }

    // -- checkpoints -----------------------------------------------------------

    CheckpointData make_checkpoint() const {
        CheckpointData ck;
        ck.metadata["config"] = cfg;
        ck.metadata["seed"] = seed_;
        ck.metadata["precision"] = cfg.precision;
        json st;
        st["epoch"] = state.epoch;
        st["step"] = state.step;
        st["examples"] = state.examples;
        st["words"] = state.words;
        st["best_metrics"] = state.best_metrics;
        st["epoch_losses"] = state.epoch_losses;
        st["optimizer_steps"] = optimizer_->step_count();
        if (tracker_.best()) st["stop_best"] = *tracker_.best();
        st["stop_since"] = tracker_.epochs_without_improvement();
        ck.metadata["state"] = st;
        ck.metadata["rng"] = {{"dropout", engine_state(dropout_rng_)}, {"eval", eval_rng_.state()}};
        if (source_) ck.metadata["source"] = source_->save();
        ck.vocabulary = vocab_.tokens();
        for (const auto* p : model_->parameters().all()) ck.arrays.push_back(NamedArray::from_matrix("param:" + p->name, p->value));
        for (const auto& [name, m] : const_cast<Optimizer<T>&>(*optimizer_).state_arrays()) {
            ck.arrays.push_back(NamedArray::from_matrix("opt:" + name, *m));
        }
        return ck;
    }

    void save(const CheckpointData& ck, const std::filesystem::path& path) {
        write_checkpoint(path, ck);
        logger_.info("Saved " + path.string());
    }

    void load_parameters(const CheckpointData& ck) {
        if (ck.vocabulary != vocab_.tokens()) throw IntegrityError("checkpoint vocabulary differs from the task vocabulary");
        for (auto* p : model_->parameters().all()) {
            const auto* a = ck.find("param:" + p->name);
            if (!a) throw IntegrityError("checkpoint lacks parameter " + p->name);
            a->to_matrix(p->value);
        }
    }

    void restore(const CheckpointData& ck) {
        load_parameters(ck);
        for (const auto& [name, m] : optimizer_->state_arrays()) {
            const auto* a = ck.find("opt:" + name);
            if (!a) throw IntegrityError("checkpoint lacks optimizer state " + name);
            a->to_matrix(*m);
        }
        const auto& st = ck.metadata.at("state");
        state.epoch = st.at("epoch").get<std::int64_t>();
        state.step = st.at("step").get<std::int64_t>();
        state.examples = st.at("examples").get<std::uint64_t>();
        state.words = st.at("words").get<std::uint64_t>();
        state.best_metrics = st.at("best_metrics").get<std::map<std::string, double>>();
        state.epoch_losses = st.at("epoch_losses").get<std::vector<double>>();
        optimizer_->set_step_count(st.at("optimizer_steps").get<std::int64_t>());
        tracker_.restore(st.contains("stop_best") ? std::optional<double>(st.at("stop_best").get<double>()) : std::nullopt,
                         st.at("stop_since").get<std::int64_t>());
        const auto& rng = ck.metadata.at("rng");
        set_engine_state(dropout_rng_, rng.at("dropout").get<std::string>());
        eval_rng_.set_state(rng.at("eval").get<std::string>());
        if (source_ && ck.metadata.contains("source")) source_->restore(ck.metadata.at("source"));
    }

    Task task_;
    Vocabulary vocab_;
    RunLogger logger_;
    std::int64_t seed_ = 0;
    std::unique_ptr<nn::Seq2SeqModel<T>> model_;
    std::unique_ptr<Optimizer<T>> optimizer_;
    std::mt19937_64 dropout_rng_;
    RngStream eval_rng_;
    std::vector<MetricGoal> goals_;
    StoppingTracker tracker_;
    std::unique_ptr<TrainingSource> source_;
    std::vector<std::pair<std::string, std::vector<EvalItem>>> eval_files_;

    std::chrono::steady_clock::time_point report_start_;
    double report_loss_ = 0.0;
    std::int64_t report_steps_ = 0;
    std::uint64_t report_examples_ = 0;
    std::uint64_t report_words_ = 0;
};

/// Checkpoint of an experiment directory: best-<goal> for the first goal
/// that has one, else the last checkpoint.
std::filesystem::path experiment_checkpoint(const std::filesystem::path& exp, const std::vector<MetricGoal>& goals) {
    for (const auto& g : goals) {
        const auto p = exp / ("best-" + g.spelled());
        if (std::filesystem::exists(p)) return p;
    }
    const auto p = exp / "checkpoint";
    if (!std::filesystem::exists(p)) throw FileError("no checkpoint in " + exp.string());
    return p;
}

}  // namespace

// ---------------------------------------------------------------------------

Trainer::Trainer(RunConfig config, bool echo) {
    config.validate();
    std::optional<CheckpointData> resume;
    std::optional<CheckpointData> init_model;

    if (!config.eval_from_exp.empty()) {
        const auto path = experiment_checkpoint(config.eval_from_exp, parse_validation_metrics(config.validation_metrics));
        init_model = read_checkpoint(path);
        RunConfig stored = init_model->metadata.at("config").get<RunConfig>();
        adopt_model_fields(config, stored);
        config.validate();
    }
    if (config.exp_id.empty()) config.exp_id = random_exp_id();
    const auto dir = std::filesystem::path(config.dump_path) / config.exp_name / config.exp_id;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

    if (config.eval_from_exp.empty()) {
        if (!config.reload_checkpoint.empty()) {
            resume = read_checkpoint(config.reload_checkpoint);
        } else if (std::filesystem::exists(dir / "checkpoint") && !config.export_data) {
            resume = read_checkpoint(dir / "checkpoint");
        }
        if (!resume && !config.reload_model.empty()) init_model = read_checkpoint(config.reload_model);
    }
    if (resume) {
        const auto stored = resume->metadata.at("config").get<RunConfig>();
        if (stored.precision != config.precision) throw ConfigError("checkpoint precision differs from --precision");
    }

    {
        std::ofstream params(dir / "params.txt");
        if (!params) throw IoError("cannot write " + (dir / "params.txt").string());
        params << json(config).dump(2) << '\n';
    }

    if (config.precision == "float") {
        impl_ = std::make_unique<TrainerImpl<float>>(config, dir, std::move(resume), std::move(init_model), echo);
    } else {
        impl_ = std::make_unique<TrainerImpl<double>>(config, dir, std::move(resume), std::move(init_model), echo);
    }
}

Trainer::~Trainer() = default;

const RunConfig& Trainer::config() const { return impl_->cfg; }
const std::filesystem::path& Trainer::exp_dir() const { return impl_->dir; }
const TrainerState& Trainer::state() const { return impl_->state; }
bool Trainer::resumed() const { return impl_->resumed; }
EpochSummary Trainer::run_epoch() { return impl_->run_epoch(); }
MetricsRecord Trainer::evaluate() { return impl_->evaluate(); }
const std::vector<std::pair<std::string, EvalResult>>& Trainer::last_results() const { return impl_->last; }
std::size_t Trainer::parameter_count() const { return impl_->parameter_count(); }

std::vector<std::pair<std::string, std::vector<double>>> Trainer::parameter_snapshot() const {
    return impl_->parameter_snapshot();
}

std::vector<EpochSummary> Trainer::run() {
    std::vector<EpochSummary> out;
    while (impl_->state.epoch < impl_->cfg.max_epoch) {
        out.push_back(run_epoch());
        if (out.back().stop) break;
    }
    return out;
}

}  // namespace int2int
