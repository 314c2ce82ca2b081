#pragma once

// Transformer encoder-decoder and encoder-only models with exact analytic
// gradients. All layers are post-norm. Activations of a batch of B sequences
// padded to width L are stored as (B*L) x dim row-major matrices.

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "int2int/dataset.hpp"

namespace int2int::nn {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;
using Index = Eigen::Index;

enum class Architecture { encoder_decoder, encoder_only };
enum class Activation { relu, gelu };
enum class Positional { learned, sinusoidal, none };
enum class InitScheme { kaiming_uniform, xavier };

struct ModelConfig {
    Architecture architecture = Architecture::encoder_decoder;
    int n_enc_layers = 4;
    int n_dec_layers = 4;
    int enc_emb_dim = 256;
    int dec_emb_dim = 256;
    int n_enc_heads = 8;
    int n_dec_heads = 8;
    int n_enc_hidden_layers = 1;
    int n_dec_hidden_layers = 1;
    Activation activation = Activation::relu;
    double dropout = 0.0;
    double attention_dropout = 0.0;
    Positional enc_positional = Positional::learned;
    Positional dec_positional = Positional::learned;
    bool share_inout_emb = true;
    int enc_loop_idx = -1;
    int dec_loop_idx = -1;
    int enc_loops = 1;
    int dec_loops = 1;
    InitScheme init = InitScheme::kaiming_uniform;
    int max_positions = 512;

    /// Throws ConfigError on inconsistent settings.
    void validate() const;
};

/// Layer-norm epsilon and the width multiplier of feed-forward blocks.
inline constexpr double kLayerNormEps = 1e-5;
inline constexpr int kFeedForwardMultiplier = 4;
/// Standard deviations of the initial position embeddings, and of token
/// embeddings and output projections. The latter is small so that the output
/// distribution starts close to uniform.
inline constexpr double kEmbeddingInitStd = 0.02;
inline constexpr double kTokenInitStd = 0.005;

std::vector<double> sinusoidal_embedding(int position, int dim);

template <typename T>
struct Parameter {
    std::string name;
    Matrix<T> value;
    Matrix<T> grad;
};

/// Owns every trainable array. Addresses are stable for the store's lifetime.
template <typename T>
class ParameterStore {
public:
    Parameter<T>& create(std::string name, Index rows, Index cols);

    [[nodiscard]] std::vector<Parameter<T>*> all() const;
    [[nodiscard]] Parameter<T>* find(std::string_view name) const;
    [[nodiscard]] std::size_t scalar_count() const;
    void zero_grad();

private:
    std::vector<std::unique_ptr<Parameter<T>>> params_;
};

/// Dropout switch and its random source. Dropout is active only when
/// `training` is set and a generator is supplied.
struct ForwardContext {
    bool training = false;
    std::mt19937_64* rng = nullptr;
};

struct LossValue {
    double sum = 0.0;        // summed token cross-entropy
    std::size_t tokens = 0;  // non-pad target positions
    [[nodiscard]] double mean() const { return tokens ? sum / static_cast<double>(tokens) : 0.0; }
};

/// Mean cross-entropy over rows whose target is >= 0, and its exact
/// gradient with respect to the logits.
template <typename T>
struct CrossEntropy {
    T loss;
    Matrix<T> grad;
};
template <typename T>
CrossEntropy<T> cross_entropy_loss(const Matrix<T>& logits, std::span<const TokenId> targets);

namespace detail {
template <typename T>
struct ModelTrace;
template <typename T>
struct Layers;
}  // namespace detail

/// Cached activations of one training forward pass.
template <typename T>
class ForwardTrace {
public:
    ForwardTrace();
    ~ForwardTrace();
    ForwardTrace(ForwardTrace&&) noexcept;
    ForwardTrace& operator=(ForwardTrace&&) noexcept;

    detail::ModelTrace<T>& get() { return *impl_; }

private:
    std::unique_ptr<detail::ModelTrace<T>> impl_;
};

namespace detail {
template <typename T>
struct DecoderCache;
}  // namespace detail

template <typename T>
class Seq2SeqModel;

/// Keys and values cached by incremental decoding. Each row is one partial
/// output sequence attached to one encoded input; rows are computed one at a
/// time, so a row's results do not depend on the other rows.
template <typename T>
class DecoderState {
public:
    DecoderState();
    ~DecoderState();
    DecoderState(const DecoderState& other);
    DecoderState& operator=(const DecoderState& other);
    DecoderState(DecoderState&&) noexcept;
    DecoderState& operator=(DecoderState&&) noexcept;

    [[nodiscard]] std::size_t rows() const;
    /// Tokens fed so far to `row`.
    [[nodiscard]] std::size_t length(std::size_t row) const;
    /// Keeps the listed rows in order; a row may be listed more than once.
    void select(std::span<const std::size_t> rows);

private:
    friend class Seq2SeqModel<T>;
    std::unique_ptr<detail::DecoderCache<T>> impl_;
};

template <typename T>
class Seq2SeqModel {
public:
    Seq2SeqModel(const ModelConfig& config, std::size_t vocab_size, std::uint64_t seed);
    ~Seq2SeqModel();
    Seq2SeqModel(const Seq2SeqModel&) = delete;
    Seq2SeqModel& operator=(const Seq2SeqModel&) = delete;

    [[nodiscard]] const ModelConfig& config() const { return config_; }
    [[nodiscard]] std::size_t vocab_size() const { return vocab_size_; }
    [[nodiscard]] ParameterStore<T>& parameters() { return store_; }
    [[nodiscard]] const ParameterStore<T>& parameters() const { return store_; }
    [[nodiscard]] std::size_t parameter_count() const { return store_.scalar_count(); }

    /// Teacher-forced summed loss. When `trace` is given, activations are
    /// cached so that `backward` can run.
    LossValue forward_loss(const Batch& batch, const ForwardContext& ctx, ForwardTrace<T>* trace);

    /// Adds the gradient of `scale * loss.sum` to every parameter gradient.
    void backward(ForwardTrace<T>& trace, T scale);

    /// Encoder output for framed, padded ids; (B*width) x enc_dim.
    [[nodiscard]] Matrix<T> encode(const IdMatrix& ids, std::span<const std::size_t> lengths) const;

    /// Next-token logits for every prefix position; (B*prefix width) x vocab.
    [[nodiscard]] Matrix<T> decode(const Matrix<T>& memory, const IdMatrix& input_ids,
                                   std::span<const std::size_t> input_lengths, const IdMatrix& prefix,
                                   std::span<const std::size_t> prefix_lengths) const;

    /// Incremental decoding over `memory` (as returned by `encode`), one row
    /// per input example.
    [[nodiscard]] DecoderState<T> start_decoding(const Matrix<T>& memory,
                                                 std::span<const std::size_t> input_lengths) const;
    /// Feeds one token to every row; returns the next-token logits, rows x vocab.
    [[nodiscard]] Matrix<T> decode_step(DecoderState<T>& state, std::span<const TokenId> tokens) const;

    /// Encoder-only per-position logits; (B*width) x vocab.
    [[nodiscard]] Matrix<T> encoder_only_logits(const IdMatrix& ids, std::span<const std::size_t> lengths) const;

private:
    ModelConfig config_;
    std::size_t vocab_size_;
    ParameterStore<T> store_;
    std::unique_ptr<detail::Layers<T>> layers_;
};

extern template class ParameterStore<float>;
extern template class ParameterStore<double>;
extern template class DecoderState<float>;
extern template class DecoderState<double>;
extern template class Seq2SeqModel<float>;
extern template class Seq2SeqModel<double>;

}  // namespace int2int::nn
