#include "int2int/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "int2int/errors.hpp"

namespace int2int {

namespace {

/// Log-softmax of one logits row, in double.
template <typename Row>
std::vector<double> log_softmax(const Row& row) {
    const Eigen::Index v = row.size();
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < v; ++j) mx = std::max(mx, static_cast<double>(row(j)));
    double z = 0.0;
    for (Eigen::Index j = 0; j < v; ++j) z += std::exp(static_cast<double>(row(j)) - mx);
    const double lz = mx + std::log(z);
    std::vector<double> out(static_cast<std::size_t>(v));
    for (Eigen::Index j = 0; j < v; ++j) out[static_cast<std::size_t>(j)] = static_cast<double>(row(j)) - lz;
    return out;
}

/// First index of the maximum.
std::size_t argmax(const std::vector<double>& v) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < v.size(); ++j) {
        if (v[j] > v[best]) best = j;
    }
    return best;
}

}  // namespace

// ---------------------------------------------------------------------------
// Decoding

template <typename T>
std::vector<Hypothesis> greedy_decode(const nn::Seq2SeqModel<T>& model, const Batch& batch, std::size_t max_output_len,
                                      TokenId eos) {
    if (max_output_len < 3) throw ConfigError("max_output_len must be >= 3");
    const std::size_t n = batch.size();
    const std::size_t max_new = max_output_len - 1;
    std::vector<Hypothesis> out(n);

    if (model.config().architecture == nn::Architecture::encoder_only) {
        const auto logits = model.encoder_only_logits(batch.input_ids, batch.input_lengths);
        const std::size_t width = batch.input_ids.cols;
        for (std::size_t b = 0; b < n; ++b) {
            const std::size_t limit = std::min(batch.input_lengths[b], max_output_len);
            for (std::size_t t = 1; t < limit; ++t) {
                const auto lp = log_softmax(logits.row(static_cast<Eigen::Index>(b * width + t)));
                const auto tok = static_cast<TokenId>(argmax(lp));
                out[b].tokens.push_back(tok);
                out[b].log_prob += lp[static_cast<std::size_t>(tok)];
                if (tok == eos) {
                    out[b].finished = true;
                    break;
                }
            }
        }
        return out;
    }

    const auto memory = model.encode(batch.input_ids, batch.input_lengths);
    auto state = model.start_decoding(memory, batch.input_lengths);
    std::vector<std::size_t> active(n);  // example decoded by each state row
    for (std::size_t b = 0; b < n; ++b) active[b] = b;
    std::vector<TokenId> feed(n, eos);
    for (std::size_t cur = 1; cur <= max_new && !active.empty(); ++cur) {
        const auto logits = model.decode_step(state, feed);
        std::vector<std::size_t> keep_rows;
        std::vector<std::size_t> still;
        std::vector<TokenId> next_feed;
        for (std::size_t r = 0; r < active.size(); ++r) {
            auto& h = out[active[r]];
            const auto lp = log_softmax(logits.row(static_cast<Eigen::Index>(r)));
            const auto tok = static_cast<TokenId>(argmax(lp));
            h.tokens.push_back(tok);
            h.log_prob += lp[static_cast<std::size_t>(tok)];
            if (tok == eos) {
                h.finished = true;
            } else {
                keep_rows.push_back(r);
                still.push_back(active[r]);
                next_feed.push_back(tok);
            }
        }
        if (keep_rows.size() != active.size()) state.select(keep_rows);
        active = std::move(still);
        feed = std::move(next_feed);
    }
    return out;
}

template <typename T>
std::vector<std::vector<Hypothesis>> beam_search(const nn::Seq2SeqModel<T>& model, const Batch& batch,
                                                 std::size_t beam_size, std::size_t max_output_len, TokenId eos) {
    if (beam_size < 1) throw ConfigError("beam_size must be >= 1");
    if (model.config().architecture == nn::Architecture::encoder_only) {
        // No autoregressive choice to search over: the argmax read-out is the only hypothesis.
        std::vector<std::vector<Hypothesis>> out;
        for (auto& h : greedy_decode(model, batch, max_output_len, eos)) out.push_back({std::move(h)});
        return out;
    }
    if (max_output_len < 3) throw ConfigError("max_output_len must be >= 3");
    const std::size_t max_new = max_output_len - 1;
    const auto memory = model.encode(batch.input_ids, batch.input_lengths);
    const auto in_width = static_cast<Eigen::Index>(batch.input_ids.cols);

    struct Candidate {
        double total;
        std::size_t hyp;
        double lp;
        TokenId token;
    };
    auto better = [](const Candidate& a, const Candidate& b) {
        if (a.total != b.total) return a.total > b.total;
        if (a.hyp != b.hyp) return a.hyp < b.hyp;
        if (a.lp != b.lp) return a.lp > b.lp;
        return a.token < b.token;
    };
    auto by_score = [](const Hypothesis& a, const Hypothesis& b) { return a.score() > b.score(); };

    std::vector<std::vector<Hypothesis>> results;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        std::vector<Hypothesis> live(1);
        std::vector<Hypothesis> finished;
        const std::vector<std::size_t> in_length{batch.input_lengths[b]};
        auto state = model.start_decoding(memory.middleRows(static_cast<Eigen::Index>(b) * in_width, in_width), in_length);
        std::vector<TokenId> feed{eos};
        for (std::size_t cur = 1; cur <= max_new; ++cur) {
            const std::size_t k = live.size();
            const auto logits = model.decode_step(state, feed);

            std::vector<Candidate> cands;
            for (std::size_t i = 0; i < k; ++i) {
                const auto lp = log_softmax(logits.row(static_cast<Eigen::Index>(i)));
                for (std::size_t v = 0; v < lp.size(); ++v) {
                    cands.push_back({live[i].log_prob + lp[v], i, lp[v], static_cast<TokenId>(v)});
                }
            }
            const std::size_t keep = std::min(cands.size(), beam_size + k);
            std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(), better);

            std::vector<Hypothesis> next;
            std::vector<std::size_t> rows;
            feed.clear();
            for (std::size_t c = 0; c < keep && next.size() < beam_size; ++c) {
                Hypothesis h = live[cands[c].hyp];
                h.tokens.push_back(cands[c].token);
                h.log_prob = cands[c].total;
                if (cands[c].token == eos) {
                    h.finished = true;
                    finished.push_back(std::move(h));
                } else {
                    next.push_back(std::move(h));
                    rows.push_back(cands[c].hyp);
                    feed.push_back(cands[c].token);
                }
            }
            std::stable_sort(finished.begin(), finished.end(), by_score);
            if (finished.size() > beam_size) finished.resize(beam_size);
            if (finished.size() >= beam_size) break;
            live = std::move(next);
            if (live.empty()) break;
            state.select(rows);
            if (cur == max_new) {
                for (auto& h : live) finished.push_back(std::move(h));
            }
        }
        std::stable_sort(finished.begin(), finished.end(), by_score);
        if (finished.size() > beam_size) finished.resize(beam_size);
        results.push_back(std::move(finished));
    }
    return results;
}

// ---------------------------------------------------------------------------
// Verification

std::string_view verdict_name(Verdict v) {
    switch (v) {
        case Verdict::perfect: return "perfect";
        case Verdict::correct: return "correct";
        case Verdict::wrong: return "wrong";
        case Verdict::malformed: return "malformed";
    }
    return "?";
}

Verdict check_prediction(std::span<const Token> predicted, bool terminated, std::span<const Token> reference,
                         const Task& task, const MathObject* problem, Evaluation* evaluation) {
    if (!terminated) return Verdict::malformed;
    if (std::equal(predicted.begin(), predicted.end(), reference.begin(), reference.end())) return Verdict::perfect;
    MathObject guess;
    try {
        guess = task.decode_solution(predicted);
    } catch (const Error&) {
        return Verdict::malformed;
    }
    const MathObject truth = task.decode_solution(reference);
    const MathObject none = std::vector<std::int64_t>{};
    const auto ev = task.evaluate(problem ? *problem : none, truth, guess);
    if (evaluation) *evaluation = ev;
    return ev.base ? Verdict::correct : Verdict::wrong;
}

// ---------------------------------------------------------------------------
// Dataset evaluation

namespace {

struct TeacherForced {
    double loss_sum = 0.0;
    std::size_t tokens = 0;
    std::vector<bool> perfect;
};

template <typename T>
TeacherForced teacher_forced(const nn::Seq2SeqModel<T>& model, const Batch& batch) {
    TeacherForced tf;
    tf.perfect.assign(batch.size(), true);
    auto score_row = [&](const auto& row, TokenId target, std::size_t b) {
        const auto lp = log_softmax(row);
        tf.loss_sum -= lp[static_cast<std::size_t>(target)];
        ++tf.tokens;
        if (static_cast<TokenId>(argmax(lp)) != target) tf.perfect[b] = false;
    };
    if (model.config().architecture == nn::Architecture::encoder_only) {
        const auto logits = model.encoder_only_logits(batch.input_ids, batch.input_lengths);
        const std::size_t width = batch.input_ids.cols;
        for (std::size_t b = 0; b < batch.size(); ++b) {
            if (batch.output_lengths[b] > batch.input_lengths[b]) {
                throw ConfigError("encoder-only model: output longer than input");
            }
            for (std::size_t t = 0; t < batch.output_lengths[b]; ++t) {
                score_row(logits.row(static_cast<Eigen::Index>(b * width + t)), batch.output_ids(b, t), b);
            }
        }
        return tf;
    }
    const auto memory = model.encode(batch.input_ids, batch.input_lengths);
    const std::size_t width = batch.output_ids.cols - 1;
    IdMatrix prefix(batch.size(), width, 0);
    std::vector<std::size_t> lengths;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        for (std::size_t t = 0; t < width; ++t) prefix(b, t) = batch.output_ids(b, t);
        lengths.push_back(batch.output_lengths[b] - 1);
    }
    const auto logits = model.decode(memory, batch.input_ids, batch.input_lengths, prefix, lengths);
    for (std::size_t b = 0; b < batch.size(); ++b) {
        for (std::size_t t = 0; t + 1 < batch.output_lengths[b]; ++t) {
            score_row(logits.row(static_cast<Eigen::Index>(b * width + t)), batch.output_ids(b, t + 1), b);
        }
    }
    return tf;
}

std::optional<int> class_of(const Task& task, const MathObject* problem, std::span<const Token> tokens) {
    try {
        const MathObject none = std::vector<std::int64_t>{};
        const auto value = task.decode_solution(tokens);
        return task.code_class(problem ? *problem : none, value);
    } catch (const Error&) {
        return std::nullopt;
    }
}

TokenSeq strip_end(const Vocabulary& vocab, const Hypothesis& h) {
    IdSeq ids = h.tokens;
    if (h.finished && !ids.empty()) ids.pop_back();
    return ids_to_tokens(ids, vocab);
}

std::string pct(std::size_t a, std::size_t b) { return fmt::format("{:.2f}", b ? 100.0 * a / b : 0.0); }

}  // namespace

template <typename T>
EvalResult evaluate_dataset(const nn::Seq2SeqModel<T>& model, const Vocabulary& vocab, const Task& task,
                            std::span<const EvalItem> items, const std::string& prefix, const EvalConfig& config,
                            const LogSink& log) {
    EvalResult r;
    r.n = items.size();
    r.records.resize(items.size());
    const int n_eval = task.spec().n_eval_metrics;
    const int n_error = task.spec().n_error_metrics;
    std::vector<double> eval_sums(static_cast<std::size_t>(n_eval), 0.0);
    std::vector<double> error_sums(static_cast<std::size_t>(n_error), 0.0);
    double loss_sum = 0.0;
    std::size_t loss_tokens = 0;
    const std::size_t bs = std::max<std::size_t>(config.batch_size, 1);
    const bool use_beam = config.beam_search && config.beam_size > 1;
    const bool keep_beam = config.eval_verbose > 0;

    for (std::size_t start = 0; start < items.size(); start += bs) {
        const std::size_t end = std::min(items.size(), start + bs);
        std::vector<Example> examples;
        for (std::size_t i = start; i < end; ++i) examples.push_back(items[i].example);
        const Batch batch = make_batch(examples, vocab);
        const auto tf = teacher_forced(model, batch);
        loss_sum += tf.loss_sum;
        loss_tokens += tf.tokens;

        const std::size_t n_perfect = static_cast<std::size_t>(std::count(tf.perfect.begin(), tf.perfect.end(), true));
        log(fmt::format("({}/{}) Found {}/{} valid top-1 predictions. Generating solutions ...", end, items.size(),
                        n_perfect, end - start));

        std::vector<std::size_t> to_decode;
        for (std::size_t j = 0; j < examples.size(); ++j) {
            if (!tf.perfect[j] || (config.eval_verbose == 2 && use_beam)) to_decode.push_back(j);
        }
        std::vector<std::vector<Hypothesis>> decoded;
        if (!to_decode.empty()) {
            std::vector<Example> sub;
            for (auto j : to_decode) sub.push_back(examples[j]);
            const Batch sub_batch = make_batch(sub, vocab);
            if (use_beam) {
                decoded = beam_search(model, sub_batch, config.beam_size, config.max_output_len, vocab.eos_id());
            } else {
                for (auto& h : greedy_decode(model, sub_batch, config.max_output_len, vocab.eos_id())) {
                    decoded.push_back({std::move(h)});
                }
            }
        }

        std::size_t found = 0;
        std::size_t d = 0;
        for (std::size_t j = 0; j < examples.size(); ++j) {
            const std::size_t i = start + j;
            const auto& item = items[i];
            const MathObject* problem = item.problem ? &*item.problem : nullptr;
            const auto& reference = item.example.output;
            auto& rec = r.records[i];
            rec.reference_class = class_of(task, problem, reference);
            const bool decoded_here = d < to_decode.size() && to_decode[d] == j;
            const std::vector<Hypothesis>* hyps = decoded_here ? &decoded[d++] : nullptr;
            if (hyps && keep_beam && (!tf.perfect[j] || config.eval_verbose == 2)) {
                for (const auto& h : *hyps) rec.beam.emplace_back(h.score(), strip_end(vocab, h));
            }

            bool valid = false;
            std::vector<double> best_eval(static_cast<std::size_t>(n_eval), 0.0);
            if (tf.perfect[j]) {
                rec.verdict = Verdict::perfect;
                rec.prediction = reference;
                rec.predicted_class = rec.reference_class;
                ++r.perfect;
                valid = true;
            } else {
                bool top = true;
                for (const auto& h : *hyps) {
                    const TokenSeq tokens = strip_end(vocab, h);
                    Evaluation ev;
                    const Verdict v = check_prediction(tokens, h.finished, reference, task, problem, &ev);
                    if (top) {
                        rec.prediction = tokens;
                        rec.verdict = v == Verdict::perfect ? Verdict::correct : v;
                        if (v != Verdict::malformed) {
                            ++r.well_formed;
                            rec.predicted_class = class_of(task, problem, tokens);
                        }
                        for (std::size_t e = 0; e < ev.error_metrics.size() && e < error_sums.size(); ++e) {
                            error_sums[e] += ev.error_metrics[e];
                        }
                    }
                    if (v == Verdict::perfect || v == Verdict::correct) {
                        valid = true;
                        if (!top) rec.verdict = Verdict::correct;
                    }
                    for (std::size_t e = 0; e < ev.eval_metrics.size() && e < best_eval.size(); ++e) {
                        best_eval[e] = std::max(best_eval[e], ev.eval_metrics[e]);
                    }
                    top = false;
                }
            }
            for (std::size_t e = 0; e < best_eval.size(); ++e) eval_sums[e] += valid ? 1.0 : best_eval[e];
            if (valid) {
                ++r.valid;
                ++found;
            }
            if (rec.reference_class) {
                auto& pc = r.per_class[*rec.reference_class];
                pc.first += valid ? 1 : 0;
                pc.second += 1;
                r.histogram[*rec.reference_class][rec.predicted_class.value_or(-1)] += 1;
            }
        }
        log(fmt::format("    Found {}/{} solutions in beam hypotheses.", found, end - start));
    }

    const double n = static_cast<double>(std::max<std::size_t>(r.n, 1));
    const std::string base = prefix + "_arithmetic";
    r.metrics[base + "_xe_loss"] = loss_tokens ? loss_sum / static_cast<double>(loss_tokens) : 0.0;
    r.metrics[base + "_perfect"] = static_cast<double>(r.perfect) / n;
    r.metrics[base + "_correct"] = static_cast<double>(r.well_formed) / n;
    r.metrics[base + "_acc"] = static_cast<double>(r.valid) / n;
    for (const auto& [cls, counts] : r.per_class) {
        r.metrics[base + "_acc_" + std::to_string(cls)] =
            static_cast<double>(counts.first) / static_cast<double>(counts.second);
    }
    for (std::size_t e = 0; e < eval_sums.size(); ++e) {
        r.metrics[base + "_acc_eval" + std::to_string(e + 1)] = eval_sums[e] / n;
    }
    for (std::size_t e = 0; e < error_sums.size(); ++e) {
        r.metrics[base + "_acc_error" + std::to_string(e + 1)] = error_sums[e] / n;
    }

    log(fmt::format("{}/{} ({}%) examples were evaluated correctly.", r.valid, r.n, pct(r.valid, r.n)));
    for (const auto& [cls, counts] : r.per_class) {
        log(fmt::format("{}: {} / {} ({}%)", cls, counts.first, counts.second, pct(counts.first, counts.second)));
    }
    if (config.eval_verbose_print) {
        for (std::size_t i = 0; i < items.size(); ++i) {
            log(fmt::format("{}\t{}\t{}\t{}", join_tokens(items[i].example.input), join_tokens(items[i].example.output),
                            join_tokens(r.records[i].prediction), verdict_name(r.records[i].verdict)));
        }
    }
    if (config.export_pred) log("Prediction histogram (reference class: predicted class=count)\n" + format_histogram(r.histogram));
    return r;
}

void export_predictions(const std::filesystem::path& path, std::span<const EvalItem> items, const EvalResult& result) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& rec = result.records[i];
        out << join_tokens(items[i].example.input) << '\t' << join_tokens(items[i].example.output) << '\t'
            << join_tokens(rec.prediction) << '\t' << verdict_name(rec.verdict);
        for (const auto& [score, tokens] : rec.beam) out << '\t' << fmt::format("{:.6f}", score) << '|' << join_tokens(tokens);
        out << '\n';
    }
    if (!out) throw IoError("write failed for " + path.string());
}

std::string format_histogram(const PredictionHistogram& histogram) {
    std::string s;
    for (const auto& [ref, row] : histogram) {
        s += std::to_string(ref) + ":";
        for (const auto& [pred, count] : row) {
            s += " " + (pred < 0 ? std::string("invalid") : std::to_string(pred)) + "=" + std::to_string(count);
        }
        s += "\n";
    }
    return s;
}

template std::vector<Hypothesis> greedy_decode(const nn::Seq2SeqModel<float>&, const Batch&, std::size_t, TokenId);
template std::vector<Hypothesis> greedy_decode(const nn::Seq2SeqModel<double>&, const Batch&, std::size_t, TokenId);
template std::vector<std::vector<Hypothesis>> beam_search(const nn::Seq2SeqModel<float>&, const Batch&, std::size_t,
                                                          std::size_t, TokenId);
template std::vector<std::vector<Hypothesis>> beam_search(const nn::Seq2SeqModel<double>&, const Batch&, std::size_t,
                                                          std::size_t, TokenId);
template EvalResult evaluate_dataset(const nn::Seq2SeqModel<float>&, const Vocabulary&, const Task&,
                                     std::span<const EvalItem>, const std::string&, const EvalConfig&, const LogSink&);
template EvalResult evaluate_dataset(const nn::Seq2SeqModel<double>&, const Vocabulary&, const Task&,
                                     std::span<const EvalItem>, const std::string&, const EvalConfig&, const LogSink&);

}  // namespace int2int
