#pragma once

// Central finite-difference oracle for model gradients.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "int2int/model.hpp"

namespace int2int::testing {

struct ArrayError {
    std::string name;
    double rel_error = 0.0;
    double max_abs_grad = 0.0;
};

/// Scale floor for arrays whose exact gradient vanishes (the key bias of an
/// attention block cannot change a softmax); keeps round-off from reading as error.
inline constexpr double kGradientScaleFloor = 1e-6;

/// Relative error of one array: max |a - n| / max(max |a|, max |n|, floor).
inline double relative_error(const nn::Matrix<double>& analytic, const nn::Matrix<double>& numeric) {
    const double diff = (analytic - numeric).cwiseAbs().maxCoeff();
    const double scale =
        std::max({analytic.cwiseAbs().maxCoeff(), numeric.cwiseAbs().maxCoeff(), kGradientScaleFloor});
    return diff / scale;
}

inline std::vector<ArrayError> finite_difference_check(nn::Seq2SeqModel<double>& model, const Batch& batch,
                                                       double h = 1e-5) {
    auto& store = model.parameters();
    store.zero_grad();
    nn::ForwardTrace<double> trace;
    const nn::ForwardContext ctx;
    const auto loss = model.forward_loss(batch, ctx, &trace);
    model.backward(trace, 1.0 / static_cast<double>(loss.tokens));

    std::vector<ArrayError> out;
    for (auto* p : store.all()) {
        nn::Matrix<double> numeric(p->value.rows(), p->value.cols());
        for (nn::Index i = 0; i < p->value.size(); ++i) {
            double& w = p->value.data()[i];
            const double saved = w;
            w = saved + h;
            const double plus = model.forward_loss(batch, ctx, nullptr).mean();
            w = saved - h;
            const double minus = model.forward_loss(batch, ctx, nullptr).mean();
            w = saved;
            numeric.data()[i] = (plus - minus) / (2 * h);
        }
        out.push_back({p->name, relative_error(p->grad, numeric), p->grad.cwiseAbs().maxCoeff()});
    }
    return out;
}

/// Random ragged batch over ids [3, vocab) with pad id 0 and `<s>` id 1 framing.
inline Batch random_batch(std::size_t vocab, std::size_t batch, std::size_t in_width, std::size_t out_width,
                          std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<TokenId> tok(3, static_cast<TokenId>(vocab) - 1);
    Batch b;
    b.input_ids = IdMatrix(batch, in_width, 0);
    b.output_ids = IdMatrix(batch, out_width, 0);
    for (std::size_t r = 0; r < batch; ++r) {
        const std::size_t in_len = std::max<std::size_t>(3, in_width - r % 3);
        const std::size_t out_len = std::max<std::size_t>(3, out_width - r % 2);
        for (std::size_t c = 0; c < in_len; ++c) b.input_ids(r, c) = (c == 0 || c + 1 == in_len) ? 1 : tok(rng);
        for (std::size_t c = 0; c < out_len; ++c) b.output_ids(r, c) = (c == 0 || c + 1 == out_len) ? 1 : tok(rng);
        b.input_lengths.push_back(in_len);
        b.output_lengths.push_back(out_len);
    }
    return b;
}

inline nn::ModelConfig tiny_config() {
    nn::ModelConfig c;
    c.n_enc_layers = 2;
    c.n_dec_layers = 2;
    c.enc_emb_dim = 16;
    c.dec_emb_dim = 16;
    c.n_enc_heads = 2;
    c.n_dec_heads = 2;
    c.activation = nn::Activation::gelu;
    c.max_positions = 8;
    return c;
}

}  // namespace int2int::testing
