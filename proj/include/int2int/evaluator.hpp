#pragma once

// Decoding (greedy and beam search) and the evaluation metrics.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "int2int/dataset.hpp"
#include "int2int/generators.hpp"
#include "int2int/model.hpp"

namespace int2int {

/// Generated ids after the start marker; `finished` means the last id is the
/// end marker.
struct Hypothesis {
    IdSeq tokens;
    double log_prob = 0.0;
    bool finished = false;

    /// Log-probability per generated token.
    [[nodiscard]] double score() const {
        return tokens.empty() ? log_prob : log_prob / static_cast<double>(tokens.size());
    }
};

/// `max_output_len` counts both markers, so at most max_output_len - 1 ids
/// are generated per sequence.
template <typename T>
std::vector<Hypothesis> greedy_decode(const nn::Seq2SeqModel<T>& model, const Batch& batch, std::size_t max_output_len,
                                      TokenId eos);

/// Beam search over each row of `batch`. Results are ranked best first by
/// `score()`; unfinished hypotheses appear only when the length cap is hit.
template <typename T>
std::vector<std::vector<Hypothesis>> beam_search(const nn::Seq2SeqModel<T>& model, const Batch& batch,
                                                 std::size_t beam_size, std::size_t max_output_len, TokenId eos);

enum class Verdict { perfect, correct, wrong, malformed };
std::string_view verdict_name(Verdict v);

/// `predicted` excludes both markers. Unterminated decodes are malformed.
Verdict check_prediction(std::span<const Token> predicted, bool terminated, std::span<const Token> reference,
                         const Task& task, const MathObject* problem, Evaluation* evaluation = nullptr);

using MetricsRecord = std::map<std::string, double>;

/// One evaluation item: the example and, for generated sets, its problem.
struct EvalItem {
    Example example;
    std::optional<MathObject> problem;
};

struct EvalConfig {
    std::size_t batch_size = 128;
    bool beam_search = false;
    std::size_t beam_size = 1;
    std::size_t max_output_len = 512;
    int eval_verbose = 0;
    bool eval_verbose_print = false;
    bool export_pred = false;
};

struct EvalRecord {
    TokenSeq prediction;
    Verdict verdict = Verdict::malformed;
    std::optional<int> reference_class;
    std::optional<int> predicted_class;
    std::vector<std::pair<double, TokenSeq>> beam;  // (score, tokens) when exported
};

/// Reference class -> predicted class -> count. Predictions with no class
/// (malformed, or outside the class range) are counted under -1.
using PredictionHistogram = std::map<int, std::map<int, std::size_t>>;

struct EvalResult {
    MetricsRecord metrics;
    std::vector<EvalRecord> records;
    PredictionHistogram histogram;
    std::size_t n = 0;
    std::size_t perfect = 0;
    std::size_t well_formed = 0;  // non-perfect, parseable
    std::size_t valid = 0;        // perfect or verified
    std::map<int, std::pair<std::size_t, std::size_t>> per_class;  // class -> (valid, total)
};

using LogSink = std::function<void(const std::string&)>;

/// Teacher-forced loss, decoding of non-perfect examples, verification and
/// per-class accounting. Emits the batch and summary log lines to `log`.
template <typename T>
EvalResult evaluate_dataset(const nn::Seq2SeqModel<T>& model, const Vocabulary& vocab, const Task& task,
                            std::span<const EvalItem> items, const std::string& prefix, const EvalConfig& config,
                            const LogSink& log);

/// Tab-separated records: input, reference, prediction, verdict, then beam
/// entries "score|tokens" when present.
void export_predictions(const std::filesystem::path& path, std::span<const EvalItem> items,
                        const EvalResult& result);
std::string format_histogram(const PredictionHistogram& histogram);

}  // namespace int2int
