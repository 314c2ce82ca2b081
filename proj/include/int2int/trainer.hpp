#pragma once

// The training loop: experiment directory, data sources, optimizer steps
// with accumulation, end-of-epoch evaluation, checkpoints, best-model saves
// and stopping.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "int2int/config.hpp"
#include "int2int/evaluator.hpp"

namespace int2int {

/// A metric name, optionally prefixed with "_" for lower-is-better.
struct MetricGoal {
    std::string metric;
    bool lower_is_better = false;

    [[nodiscard]] bool improves(double value, std::optional<double> best) const;
    [[nodiscard]] std::string spelled() const { return (lower_is_better ? "_" : "") + metric; }
};

MetricGoal parse_metric_goal(std::string_view text);
/// Comma-separated goals; empty input gives none. Throws ParseError.
std::vector<MetricGoal> parse_validation_metrics(const std::string& text);

struct StoppingCriterion {
    MetricGoal goal;
    std::int64_t patience = 0;
};

/// "metric,patience"; empty input gives nullopt. Throws ParseError.
std::optional<StoppingCriterion> parse_stopping_criterion(const std::string& text);

/// Counts epochs without improvement of one metric.
class StoppingTracker {
public:
    StoppingTracker() = default;
    explicit StoppingTracker(std::optional<StoppingCriterion> criterion) : criterion_(std::move(criterion)) {}

    /// True when the criterion's patience is exhausted. Throws ParseError
    /// when the metric is absent from `metrics`.
    bool update(const MetricsRecord& metrics);

    [[nodiscard]] std::optional<double> best() const { return best_; }
    [[nodiscard]] std::int64_t epochs_without_improvement() const { return since_; }
    void restore(std::optional<double> best, std::int64_t since) {
        best_ = best;
        since_ = since;
    }

private:
    std::optional<StoppingCriterion> criterion_;
    std::optional<double> best_;
    std::int64_t since_ = 0;
};

struct TrainerState {
    std::int64_t epoch = 0;  // completed epochs
    std::int64_t step = 0;   // optimizer updates
    std::uint64_t examples = 0;
    std::uint64_t words = 0;
    std::map<std::string, double> best_metrics;  // keyed by spelled goal
    std::vector<double> epoch_losses;
};

struct EpochSummary {
    std::int64_t epoch = 0;
    double train_loss = 0.0;
    std::int64_t steps = 0;
    MetricsRecord metrics;
    bool stop = false;
};

/// Random 10-character [a-z0-9] experiment id.
std::string random_exp_id();

class Trainer {
public:
    /// Resolves and creates the experiment directory, writes params.txt,
    /// builds the model, and resumes from a checkpoint when one is found.
    explicit Trainer(RunConfig config, bool echo = true);
    ~Trainer();
    Trainer(const Trainer&) = delete;
    Trainer& operator=(const Trainer&) = delete;

    [[nodiscard]] const RunConfig& config() const;
    [[nodiscard]] const std::filesystem::path& exp_dir() const;
    [[nodiscard]] const TrainerState& state() const;
    [[nodiscard]] bool resumed() const;

    /// One epoch: training, evaluation, best-model and checkpoint saves.
    EpochSummary run_epoch();
    /// Epochs until max_epoch or the stopping criterion.
    std::vector<EpochSummary> run();
    /// Evaluates every evaluation set once and logs the metrics.
    MetricsRecord evaluate();

    /// Results of the latest evaluation, one per set, in set order.
    [[nodiscard]] const std::vector<std::pair<std::string, EvalResult>>& last_results() const;
    /// Every parameter as doubles, in creation order.
    [[nodiscard]] std::vector<std::pair<std::string, std::vector<double>>> parameter_snapshot() const;
    [[nodiscard]] std::size_t parameter_count() const;

    struct Impl;

private:
    std::unique_ptr<Impl> impl_;
};

}  // namespace int2int
