#pragma once

// Writer and reader of the metric lines in train.log, and the tables built
// from them.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "int2int/evaluator.hpp"

namespace int2int {

inline constexpr std::string_view kMetricsTag = "__log__:";

/// "__log__:" followed by the record as one-line JSON. Doubles are written
/// in shortest round-trip form, so parsing restores them exactly.
std::string format_metrics_line(const MetricsRecord& metrics);

/// Training report line, without the logger prefix.
std::string format_step_line(std::int64_t step, double examples_per_s, double words_per_s, double loss, double lr);

struct StepRecord {
    std::int64_t step = 0;
    double examples_per_s = 0.0;
    double words_per_s = 0.0;
    double loss = 0.0;
    double lr = 0.0;
};

struct ParsedLog {
    std::string exp_id;
    std::vector<MetricsRecord> epochs;
    std::vector<StepRecord> steps;
    std::vector<std::string> warnings;
};

/// Lines that look like metric or step lines but do not parse produce a
/// warning; every other line is ignored.
ParsedLog parse_log(std::istream& in, std::string exp_id);

/// Accepts a train.log path or an experiment directory. The experiment id is
/// the name of the directory holding the log. Throws FileError.
ParsedLog parse_log_file(const std::filesystem::path& path);

/// Comma-separated table: exp_id, epoch, set, then one column per metric
/// (sorted). One row per epoch and metric prefix (valid, test, ..., train).
std::string metrics_table(const std::vector<ParsedLog>& logs);

/// Comma-separated table of the training report lines.
std::string steps_table(const std::vector<ParsedLog>& logs);

/// Character plot of one metric against the epoch, one series per log.
std::string text_plot(const std::vector<ParsedLog>& logs, const std::string& metric, int width = 60, int height = 16);

/// Splits "valid_arithmetic_acc_1" into ("valid", "acc_1"); keys without the
/// "_arithmetic_" infix belong to the "train" set.
std::pair<std::string, std::string> split_metric_key(const std::string& key);

}  // namespace int2int
