#pragma once

// Run configuration: every command-line flag of `train`, with its default.
// The field list is written once and drives the flag parser, params.txt and
// the copy stored in checkpoints.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "int2int/evaluator.hpp"
#include "int2int/generators.hpp"
#include "int2int/model.hpp"
#include "int2int/optimizer.hpp"

namespace int2int {

// X(type, name, default, help)
#define INT2INT_RUN_CONFIG_FIELDS(X)                                                                                \
    /* experiment */                                                                                              \
    X(std::string, dump_path, "./dumped", "root directory of experiments")                                         \
    X(std::string, exp_name, "debug", "experiment name")                                                           \
    X(std::string, exp_id, "", "experiment id (random when empty)")                                                \
    X(std::string, reload_checkpoint, "", "checkpoint to resume from")                                             \
    X(std::string, reload_model, "", "checkpoint whose parameters initialize the model")                           \
    X(std::int64_t, save_periodic, 0, "also save checkpoint-<epoch> every N epochs (0: off)")                      \
    X(std::string, validation_metrics, "", "comma-separated metrics whose best values are saved")                  \
    X(std::string, stopping_criterion, "", "metric,patience")                                                      \
    X(std::int64_t, max_epoch, 100000, "maximum number of epochs")                                                 \
    X(std::int64_t, epoch_size, 300000, "training examples per epoch")                                             \
    X(std::int64_t, batch_size, 32, "examples per batch")                                                          \
    X(std::int64_t, micro_batch_size, -1,                                                                          \
      "examples per forward/backward chunk (0: whole batch, -1: 0, or 8 in deterministic mode)")                   \
    X(std::string, optimizer, "adam,lr=0.0001", "optimizer spec")                                                  \
    X(double, clip_grad_norm, 0.0, "clip gradients to this global norm (0: off)")                                  \
    X(std::int64_t, accumulate_gradients, 1, "batches per optimizer step")                                         \
    X(std::int64_t, report_loss_every, 200, "optimizer steps between loss reports")                                \
    X(std::int64_t, env_base_seed, -1, "base random seed (negative: random)")                                      \
    X(bool, deterministic, false, "single worker, fixed seeds, fixed reduction order")                             \
    X(std::string, precision, "double", "double or float")                                                         \
    X(bool, export_data, false, "write generated examples to data.prefix instead of training")                     \
    /* data */                                                                                                    \
    X(std::string, train_data, "", "training corpus")                                                              \
    X(std::string, eval_data, "", "comma-separated evaluation corpora")                                            \
    X(std::int64_t, reload_data_size, -1, "training examples read from train_data (-1: all)")                      \
    X(std::int64_t, eval_data_size, -1, "examples read from each eval file (-1: all)")                             \
    X(bool, batch_load, false, "stream the training file in order")                                                \
    X(std::int64_t, reload_size, 1000000, "examples per streamed chunk")                                           \
    X(bool, two_classes, false, "oversample the first examples of the training set")                               \
    X(std::int64_t, first_class_size, 0, "size of the oversampled prefix")                                         \
    X(double, first_class_prob, 0.0, "probability of drawing from the prefix")                                     \
    X(std::int64_t, max_len, 256, "maximum tokens per side (-1: no limit)")                                        \
    X(std::int64_t, num_workers, 1, "data generation threads")                                                     \
    /* task */                                                                                                    \
    X(std::string, operation, "gcd", "task")                                                                       \
    X(std::int64_t, base, 1000, "integer encoding base")                                                           \
    X(std::int64_t, min_int, 1, "smallest operand")                                                                \
    X(std::int64_t, max_int, 1000000, "largest operand")                                                           \
    X(std::int64_t, modulo, 67, "modulus of modular tasks")                                                        \
    X(std::int64_t, dim1, 5, "matrix rows")                                                                        \
    X(std::int64_t, dim2, 5, "matrix columns")                                                                     \
    X(std::int64_t, max_class, 100, "largest reported output class")                                               \
    X(std::int64_t, n_eval_metrics, 0, "number of additional evaluation metrics")                                  \
    X(std::int64_t, n_error_metrics, 0, "number of error metrics")                                                 \
    /* model */                                                                                                   \
    X(std::string, architecture, "encoder_decoder", "encoder_decoder or encoder_only")                             \
    X(std::int64_t, n_enc_layers, 4, "encoder layers")                                                             \
    X(std::int64_t, n_dec_layers, 4, "decoder layers")                                                             \
    X(std::int64_t, enc_emb_dim, 256, "encoder dimension")                                                         \
    X(std::int64_t, dec_emb_dim, 256, "decoder dimension")                                                         \
    X(std::int64_t, n_enc_heads, 8, "encoder attention heads")                                                     \
    X(std::int64_t, n_dec_heads, 8, "decoder attention heads")                                                     \
    X(std::int64_t, n_enc_hidden_layers, 1, "encoder feed-forward hidden layers")                                  \
    X(std::int64_t, n_dec_hidden_layers, 1, "decoder feed-forward hidden layers")                                  \
    X(bool, gelu_activation, false, "GELU instead of ReLU")                                                        \
    X(double, dropout, 0.0, "dropout")                                                                             \
    X(double, attention_dropout, 0.0, "attention dropout")                                                         \
    X(bool, enc_has_pos_emb, true, "encoder positional embeddings")                                                \
    X(bool, dec_has_pos_emb, true, "decoder positional embeddings")                                                \
    X(bool, sinusoidal_embeddings, false, "fixed sinusoidal positions")                                            \
    X(bool, share_inout_emb, true, "tie decoder input and output embeddings")                                      \
    X(std::int64_t, enc_loop_idx, -1, "shared encoder layer (-1: none, -2: all)")                                  \
    X(std::int64_t, dec_loop_idx, -1, "shared decoder layer (-1: none, -2: all)")                                  \
    X(std::int64_t, enc_loops, 1, "encoder loop iterations")                                                       \
    X(std::int64_t, dec_loops, 1, "decoder loop iterations")                                                       \
    X(bool, xav_init, false, "Xavier initialization")                                                              \
    X(std::int64_t, max_positions, 512, "positional table size")                                                   \
    /* evaluation */                                                                                              \
    X(std::int64_t, eval_size, 10000, "generated evaluation examples")                                             \
    X(std::int64_t, batch_size_eval, 128, "evaluation batch size")                                                 \
    X(bool, beam_search, false, "beam search decoding")                                                            \
    X(std::int64_t, beam_size, 1, "beam width")                                                                    \
    X(std::int64_t, max_output_len, 512, "decoded length cap, both markers included")                              \
    X(std::int64_t, eval_verbose, 0, "0: no prediction file, 1: file, 2: file with beams of perfect answers")     \
    X(bool, eval_verbose_print, false, "also write predictions to the log")                                        \
    X(bool, export_pred, false, "report the prediction histogram up to max_class")                                 \
    X(bool, eval_only, false, "evaluate the reloaded model and exit")                                              \
    X(std::string, eval_from_exp, "", "experiment directory to evaluate")                                          \
    /* accepted for compatibility, ignored */                                                                     \
    X(bool, cpu, false, "no-op")                                                                                   \
    X(std::int64_t, local_gpu, -1, "no-op")                                                                        \
    X(std::int64_t, local_rank, -1, "no-op")                                                                       \
    X(bool, fp16, false, "no-op")                                                                                  \
    X(std::int64_t, amp, -1, "no-op")

struct RunConfig {
#define INT2INT_DECLARE_FIELD(type, name, def, help) type name = def;
    INT2INT_RUN_CONFIG_FIELDS(INT2INT_DECLARE_FIELD)
#undef INT2INT_DECLARE_FIELD

    /// Throws ConfigError (or ParseError for the optimizer spec).
    void validate() const;

    [[nodiscard]] nn::ModelConfig model_config() const;
    [[nodiscard]] TaskSpec task_spec() const;
    [[nodiscard]] EvalConfig eval_config() const;
    [[nodiscard]] OptimizerConfig optimizer_config() const;
    [[nodiscard]] std::vector<std::string> eval_paths() const;
    /// Chunk size of forward/backward passes; 0 means whole batches.
    [[nodiscard]] std::int64_t reduction_chunk() const;
    /// Names of compatibility flags that were set away from their defaults.
    [[nodiscard]] std::vector<std::string> ignored_flags() const;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Chunk size used by deterministic mode when --micro_batch_size is -1.
inline constexpr std::int64_t kDeterministicChunk = 8;

void to_json(nlohmann::json& j, const RunConfig& c);
/// Missing keys keep their defaults; unknown keys throw ConfigError.
void from_json(const nlohmann::json& j, RunConfig& c);

/// Alternative flag spellings: alias -> canonical field name.
const std::vector<std::pair<std::string, std::string>>& flag_aliases();

}  // namespace int2int
