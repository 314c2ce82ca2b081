#include "int2int/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "int2int/errors.hpp"

namespace int2int::nn {

void ModelConfig::validate() const {
    auto check_stack = [](const char* name, int layers, int dim, int heads, int hidden, int loop_idx, int loops,
                          Positional positional) {
        const std::string n(name);
        if (layers < 1) throw ConfigError(n + ": number of layers must be >= 1");
        if (dim < 1 || heads < 1) throw ConfigError(n + ": embedding dimension and heads must be >= 1");
        if (dim % heads != 0) throw ConfigError(n + ": embedding dimension must be divisible by the number of heads");
        if (hidden < 1) throw ConfigError(n + ": hidden layer count must be >= 1");
        if (loop_idx < -2 || loop_idx >= layers) throw ConfigError(n + ": loop index out of range");
        if (loop_idx != -1 && loops < 1) throw ConfigError(n + ": loop count must be >= 1");
        if (positional == Positional::sinusoidal && dim % 2 != 0) {
            throw ConfigError(n + ": sinusoidal embeddings need an even dimension");
        }
    };
    check_stack("encoder", n_enc_layers, enc_emb_dim, n_enc_heads, n_enc_hidden_layers, enc_loop_idx, enc_loops,
                enc_positional);
    if (architecture == Architecture::encoder_decoder) {
        check_stack("decoder", n_dec_layers, dec_emb_dim, n_dec_heads, n_dec_hidden_layers, dec_loop_idx, dec_loops,
                    dec_positional);
    }
    if (!(dropout >= 0.0 && dropout < 1.0) || !(attention_dropout >= 0.0 && attention_dropout < 1.0)) {
        throw ConfigError("dropout probabilities must be in [0, 1)");
    }
    if (max_positions < 1) throw ConfigError("max_positions must be >= 1");
}

std::vector<double> sinusoidal_embedding(int position, int dim) {
    std::vector<double> out(static_cast<std::size_t>(dim));
    for (int i = 0; 2 * i < dim; ++i) {
        const double freq = std::pow(10000.0, -2.0 * i / dim);
        out[static_cast<std::size_t>(2 * i)] = std::sin(position * freq);
        if (2 * i + 1 < dim) out[static_cast<std::size_t>(2 * i + 1)] = std::cos(position * freq);
    }
    return out;
}

// ---------------------------------------------------------------------------
// ParameterStore

template <typename T>
Parameter<T>& ParameterStore<T>::create(std::string name, Index rows, Index cols) {
    auto p = std::make_unique<Parameter<T>>();
    p->name = std::move(name);
    p->value = Matrix<T>::Zero(rows, cols);
    p->grad = Matrix<T>::Zero(rows, cols);
    params_.push_back(std::move(p));
    return *params_.back();
}

template <typename T>
std::vector<Parameter<T>*> ParameterStore<T>::all() const {
    std::vector<Parameter<T>*> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p.get());
    return out;
}

template <typename T>
Parameter<T>* ParameterStore<T>::find(std::string_view name) const {
    for (const auto& p : params_) {
        if (p->name == name) return p.get();
    }
    return nullptr;
}

template <typename T>
std::size_t ParameterStore<T>::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
    return n;
}

template <typename T>
void ParameterStore<T>::zero_grad() {
    for (auto& p : params_) p->grad.setZero();
}

// ---------------------------------------------------------------------------
// Cross-entropy

template <typename T>
CrossEntropy<T> cross_entropy_loss(const Matrix<T>& logits, std::span<const TokenId> targets) {
    CrossEntropy<T> out{T(0), Matrix<T>::Zero(logits.rows(), logits.cols())};
    std::size_t count = 0;
    double total = 0.0;
    for (Index r = 0; r < logits.rows(); ++r) {
        const TokenId t = targets[static_cast<std::size_t>(r)];
        if (t < 0) continue;
        const T mx = logits.row(r).maxCoeff();
        auto e = (logits.row(r).array() - mx).exp();
        const T z = e.sum();
        total += static_cast<double>(std::log(z) + mx - logits(r, t));
        out.grad.row(r) = e / z;
        out.grad(r, t) -= T(1);
        ++count;
    }
    if (count) {
        out.loss = static_cast<T>(total / static_cast<double>(count));
        out.grad /= static_cast<T>(count);
    }
    return out;
}

template CrossEntropy<float> cross_entropy_loss(const Matrix<float>&, std::span<const TokenId>);
template CrossEntropy<double> cross_entropy_loss(const Matrix<double>&, std::span<const TokenId>);

namespace detail {

template <typename T>
using Mat = Matrix<T>;
template <typename T>
using ColVec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

// Sequence layout of one stack: batch rows of `width` positions each.
template <typename T>
struct SeqInfo {
    Index batch = 0;
    Index width = 0;
    std::vector<std::size_t> lengths;
    ColVec<T> row_mask;  // 1 for real tokens, 0 for padding

    SeqInfo() = default;
    SeqInfo(Index b, Index w, std::span<const std::size_t> lens)
        : batch(b), width(w), lengths(lens.begin(), lens.end()), row_mask(b * w) {
        for (Index i = 0; i < b; ++i) {
            for (Index t = 0; t < w; ++t) {
                row_mask(i * w + t) = static_cast<std::size_t>(t) < lengths[static_cast<std::size_t>(i)] ? T(1) : T(0);
            }
        }
    }
};

template <typename T>
struct Memory {
    const Mat<T>* values = nullptr;
    const SeqInfo<T>* seq = nullptr;
};

template <typename T>
void init_uniform(Mat<T>& m, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(dist(rng));
}

template <typename T>
void init_normal(Mat<T>& m, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(dist(rng));
}

/// Inverted dropout; the scaled keep mask is recorded when `mask` is given.
template <typename T>
void apply_dropout(Mat<T>& x, double p, const ForwardContext& ctx, Mat<T>* mask) {
    if (!(ctx.training && ctx.rng && p > 0.0)) {
        if (mask) mask->resize(0, 0);
        return;
    }
    Mat<T> m(x.rows(), x.cols());
    std::bernoulli_distribution keep(1.0 - p);
    const T scale = static_cast<T>(1.0 / (1.0 - p));
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = keep(*ctx.rng) ? scale : T(0);
    x.array() *= m.array();
    if (mask) *mask = std::move(m);
}

template <typename T>
void apply_mask(Mat<T>& dx, const Mat<T>& mask) {
    if (mask.size()) dx.array() *= mask.array();
}

// ---------------------------------------------------------------------------
// Linear: y = x W + b, W is in x out.

template <typename T>
struct Linear {
    Parameter<T>* weight = nullptr;
    Parameter<T>* bias = nullptr;

    static Linear create(ParameterStore<T>& store, const std::string& name, Index in, Index out, InitScheme init,
                         std::mt19937_64& rng) {
        Linear l;
        l.weight = &store.create(name + ".weight", in, out);
        l.bias = &store.create(name + ".bias", 1, out);
        if (init == InitScheme::xavier) {
            init_uniform(l.weight->value, std::sqrt(6.0 / static_cast<double>(in + out)), rng);
        } else {
            const double bound = 1.0 / std::sqrt(static_cast<double>(in));
            init_uniform(l.weight->value, bound, rng);
            init_uniform(l.bias->value, bound, rng);
        }
        return l;
    }

    Mat<T> forward(const Mat<T>& x) const {
        Mat<T> y(x.rows(), weight->value.cols());
        y.noalias() = x * weight->value;
        y.rowwise() += bias->value.row(0);
        return y;
    }

    Mat<T> backward(const Mat<T>& x, const Mat<T>& dy) const {
        weight->grad.noalias() += x.transpose() * dy;
        bias->grad.row(0) += dy.colwise().sum();
        Mat<T> dx(dy.rows(), weight->value.rows());
        dx.noalias() = dy * weight->value.transpose();
        return dx;
    }
};

// ---------------------------------------------------------------------------
// LayerNorm

template <typename T>
struct LayerNormCache {
    Mat<T> xhat;
    ColVec<T> rstd;
};

template <typename T>
struct LayerNorm {
    Parameter<T>* gamma = nullptr;
    Parameter<T>* beta = nullptr;

    static LayerNorm create(ParameterStore<T>& store, const std::string& name, Index dim) {
        LayerNorm ln;
        ln.gamma = &store.create(name + ".weight", 1, dim);
        ln.beta = &store.create(name + ".bias", 1, dim);
        ln.gamma->value.setOnes();
        return ln;
    }

    Mat<T> forward(const Mat<T>& x, LayerNormCache<T>* cache) const {
        const Index n = x.rows();
        Mat<T> xhat(n, x.cols());
        ColVec<T> rstd(n);
        for (Index i = 0; i < n; ++i) {
            const T mean = x.row(i).mean();
            xhat.row(i) = x.row(i).array() - mean;
            const T var = xhat.row(i).squaredNorm() / static_cast<T>(x.cols());
            rstd(i) = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
            xhat.row(i) *= rstd(i);
        }
        Mat<T> y = (xhat.array().rowwise() * gamma->value.row(0).array()).rowwise() + beta->value.row(0).array();
        if (cache) {
            cache->xhat = std::move(xhat);
            cache->rstd = std::move(rstd);
        }
        return y;
    }

    Mat<T> backward(const LayerNormCache<T>& c, const Mat<T>& dy) const {
        gamma->grad.row(0) += (dy.array() * c.xhat.array()).colwise().sum().matrix();
        beta->grad.row(0) += dy.colwise().sum();
        Mat<T> dxhat = dy.array().rowwise() * gamma->value.row(0).array();
        Mat<T> dx(dy.rows(), dy.cols());
        const T inv_d = T(1) / static_cast<T>(dy.cols());
        for (Index i = 0; i < dy.rows(); ++i) {
            const T m1 = dxhat.row(i).sum() * inv_d;
            const T m2 = dxhat.row(i).dot(c.xhat.row(i)) * inv_d;
            dx.row(i) = c.rstd(i) * (dxhat.row(i).array() - m1 - c.xhat.row(i).array() * m2);
        }
        return dx;
    }
};

// ---------------------------------------------------------------------------
// Activations

template <typename T>
Mat<T> activate(const Mat<T>& z, Activation act) {
    if (act == Activation::relu) return z.cwiseMax(T(0));
    const T inv_sqrt2 = static_cast<T>(1.0 / std::sqrt(2.0));
    return z.unaryExpr([inv_sqrt2](T v) { return T(0.5) * v * (T(1) + std::erf(v * inv_sqrt2)); });
}

template <typename T>
void activation_backward(Mat<T>& dy, const Mat<T>& z, Activation act) {
    if (act == Activation::relu) {
        dy.array() *= (z.array() > T(0)).template cast<T>();
        return;
    }
    const T inv_sqrt2 = static_cast<T>(1.0 / std::sqrt(2.0));
    const T inv_sqrt2pi = static_cast<T>(1.0 / std::sqrt(2.0 * M_PI));
    dy.array() *= z.unaryExpr([=](T v) {
                       return T(0.5) * (T(1) + std::erf(v * inv_sqrt2)) + v * std::exp(T(-0.5) * v * v) * inv_sqrt2pi;
                   }).array();
}

// ---------------------------------------------------------------------------
// Feed-forward block: dim -> 4 dim (-> 4 dim)* -> dim

template <typename T>
struct FeedForwardCache {
    std::vector<Mat<T>> inputs;
    std::vector<Mat<T>> pre_activations;
};

template <typename T>
struct FeedForward {
    std::vector<Linear<T>> linears;
    Activation activation = Activation::relu;

    static FeedForward create(ParameterStore<T>& store, const std::string& name, Index dim, int hidden_layers,
                              Activation act, InitScheme init, std::mt19937_64& rng) {
        FeedForward f;
        f.activation = act;
        const Index hidden = kFeedForwardMultiplier * dim;
        f.linears.push_back(Linear<T>::create(store, name + ".lin0", dim, hidden, init, rng));
        for (int i = 1; i < hidden_layers; ++i) {
            f.linears.push_back(Linear<T>::create(store, name + ".lin" + std::to_string(i), hidden, hidden, init, rng));
        }
        f.linears.push_back(
            Linear<T>::create(store, name + ".lin" + std::to_string(hidden_layers), hidden, dim, init, rng));
        return f;
    }

    Mat<T> forward(const Mat<T>& x, FeedForwardCache<T>* cache) const {
        Mat<T> h = x;
        const std::size_t n = linears.size();
        for (std::size_t k = 0; k < n; ++k) {
            Mat<T> z = linears[k].forward(h);
            if (k + 1 < n) {
                Mat<T> a = activate(z, activation);
                if (cache) {
                    cache->inputs.push_back(std::move(h));
                    cache->pre_activations.push_back(std::move(z));
                }
                h = std::move(a);
            } else {
                if (cache) cache->inputs.push_back(std::move(h));
                h = std::move(z);
            }
        }
        return h;
    }

    Mat<T> backward(const FeedForwardCache<T>& c, Mat<T> dy) const {
        for (std::size_t k = linears.size(); k-- > 0;) {
            if (k + 1 < linears.size()) activation_backward(dy, c.pre_activations[k], activation);
            dy = linears[k].backward(c.inputs[k], dy);
        }
        return dy;
    }
};

// ---------------------------------------------------------------------------
// Multi-head attention with key-padding and optional causal masks.

template <typename T>
struct AttentionCache {
    Mat<T> q_in;
    Mat<T> kv_in;  // empty for self-attention (same as q_in)
    Mat<T> q, k, v;
    Mat<T> probs;  // (B*H*Lq) x Lk
    Mat<T> drop;
    Mat<T> context;
};

template <typename T>
struct MultiHeadAttention {
    Linear<T> q_proj, k_proj, v_proj, out_proj;
    Index heads = 1;
    Index dim = 0;

    static MultiHeadAttention create(ParameterStore<T>& store, const std::string& name, Index dim, Index kv_dim,
                                     Index heads, InitScheme init, std::mt19937_64& rng) {
        MultiHeadAttention a;
        a.heads = heads;
        a.dim = dim;
        a.q_proj = Linear<T>::create(store, name + ".q", dim, dim, init, rng);
        a.k_proj = Linear<T>::create(store, name + ".k", kv_dim, dim, init, rng);
        a.v_proj = Linear<T>::create(store, name + ".v", kv_dim, dim, init, rng);
        a.out_proj = Linear<T>::create(store, name + ".out", dim, dim, init, rng);
        return a;
    }

    /// `kv_in` may alias `q_in` (self-attention).
    Mat<T> forward(const Mat<T>& q_in, Index lq, const Mat<T>& kv_in, const SeqInfo<T>& kv_seq, bool causal,
                   double p_drop, const ForwardContext& ctx, AttentionCache<T>* cache) const {
        const Index lk = kv_seq.width;
        const Index batch = kv_seq.batch;
        const Index dh = dim / heads;
        const T scale = T(1) / std::sqrt(static_cast<T>(dh));
        const bool self = &q_in == &kv_in;

        Mat<T> q = q_proj.forward(q_in);
        Mat<T> k = k_proj.forward(kv_in);
        Mat<T> v = v_proj.forward(kv_in);
        Mat<T> probs(batch * heads * lq, lk);
        Mat<T> context(batch * lq, dim);
        const bool use_drop = ctx.training && ctx.rng && p_drop > 0.0;
        Mat<T> drop;
        if (use_drop) drop.resize(probs.rows(), lk);
        std::bernoulli_distribution keep(1.0 - p_drop);
        const T drop_scale = use_drop ? static_cast<T>(1.0 / (1.0 - p_drop)) : T(1);

        Mat<T> scores(lq, lk);
        for (Index b = 0; b < batch; ++b) {
            const auto valid = static_cast<Index>(std::min<std::size_t>(kv_seq.lengths[static_cast<std::size_t>(b)],
                                                                        static_cast<std::size_t>(lk)));
            for (Index h = 0; h < heads; ++h) {
                // Only the `valid` key columns take part, so padding width never
                // changes the shape (and summation order) of these products.
                auto p = probs.block((b * heads + h) * lq, 0, lq, lk);
                p.setZero();
                auto ctx_block = context.block(b * lq, h * dh, lq, dh);
                if (valid == 0) {
                    ctx_block.setZero();
                    continue;
                }
                auto s = scores.leftCols(valid);
                s.noalias() = q.block(b * lq, h * dh, lq, dh) * k.block(b * lk, h * dh, valid, dh).transpose();
                for (Index i = 0; i < lq; ++i) {
                    const Index limit = causal ? std::min(valid, i + 1) : valid;
                    const T mx = s.row(i).head(limit).maxCoeff();
                    p.row(i).head(limit) = ((s.row(i).head(limit).array() - mx) * scale).exp();
                    p.row(i).head(limit) /= p.row(i).head(limit).sum();
                }
                const auto pv = p.leftCols(valid);
                if (use_drop) {
                    auto d = drop.block((b * heads + h) * lq, 0, lq, lk);
                    for (Index i = 0; i < d.rows(); ++i) {
                        for (Index j = 0; j < d.cols(); ++j) d(i, j) = keep(*ctx.rng) ? drop_scale : T(0);
                    }
                    ctx_block.noalias() = (pv.array() * d.leftCols(valid).array()).matrix() *
                                          v.block(b * lk, h * dh, valid, dh);
                } else {
                    ctx_block.noalias() = pv * v.block(b * lk, h * dh, valid, dh);
                }
            }
        }
        Mat<T> out = out_proj.forward(context);
        if (cache) {
            cache->q_in = q_in;
            if (!self) cache->kv_in = kv_in;
            cache->q = std::move(q);
            cache->k = std::move(k);
            cache->v = std::move(v);
            cache->probs = std::move(probs);
            cache->drop = std::move(drop);
            cache->context = std::move(context);
        }
        return out;
    }

    /// For self-attention `dkv_in` receives nothing and `dq_in` the full input gradient.
    void backward(const AttentionCache<T>& c, const Mat<T>& dout, Index lq, const SeqInfo<T>& kv_seq, Mat<T>& dq_in,
                  Mat<T>& dkv_in) const {
        const Index lk = kv_seq.width;
        const Index batch = kv_seq.batch;
        const Index dh = dim / heads;
        const T scale = T(1) / std::sqrt(static_cast<T>(dh));
        const bool self = c.kv_in.size() == 0;

        Mat<T> dctx = out_proj.backward(c.context, dout);
        Mat<T> dq = Mat<T>::Zero(c.q.rows(), c.q.cols());
        Mat<T> dk = Mat<T>::Zero(c.k.rows(), c.k.cols());
        Mat<T> dv = Mat<T>::Zero(c.v.rows(), c.v.cols());
        Mat<T> dp(lq, lk), ds(lq, lk);
        for (Index b = 0; b < batch; ++b) {
            for (Index h = 0; h < heads; ++h) {
                const auto p = c.probs.block((b * heads + h) * lq, 0, lq, lk);
                const auto dc = dctx.block(b * lq, h * dh, lq, dh);
                dp.noalias() = dc * c.v.block(b * lk, h * dh, lk, dh).transpose();
                if (c.drop.size()) {
                    const auto d = c.drop.block((b * heads + h) * lq, 0, lq, lk);
                    dv.block(b * lk, h * dh, lk, dh).noalias() += (p.array() * d.array()).matrix().transpose() * dc;
                    dp.array() *= d.array();
                } else {
                    dv.block(b * lk, h * dh, lk, dh).noalias() += p.transpose() * dc;
                }
                const ColVec<T> row_dot = (dp.array() * p.array()).rowwise().sum();
                ds = (p.array() * (dp.array().colwise() - row_dot.array())) * scale;
                dq.block(b * lq, h * dh, lq, dh).noalias() += ds * c.k.block(b * lk, h * dh, lk, dh);
                dk.block(b * lk, h * dh, lk, dh).noalias() += ds.transpose() * c.q.block(b * lq, h * dh, lq, dh);
            }
        }
        if (self) {
            dq_in = q_proj.backward(c.q_in, dq);
            dq_in += k_proj.backward(c.q_in, dk);
            dq_in += v_proj.backward(c.q_in, dv);
        } else {
            dq_in = q_proj.backward(c.q_in, dq);
            dkv_in = k_proj.backward(c.kv_in, dk);
            dkv_in += v_proj.backward(c.kv_in, dv);
        }
    }
};

// ---------------------------------------------------------------------------
// Transformer layer (post-norm)

template <typename T>
struct LayerCache {
    AttentionCache<T> self;
    Mat<T> self_drop;
    LayerNormCache<T> ln_self;
    AttentionCache<T> cross;
    Mat<T> cross_drop;
    LayerNormCache<T> ln_cross;
    FeedForwardCache<T> ffn;
    Mat<T> ffn_drop;
    LayerNormCache<T> ln_ffn;
};

template <typename T>
struct TransformerLayer {
    MultiHeadAttention<T> self_attn;
    LayerNorm<T> ln_self;
    std::optional<MultiHeadAttention<T>> cross_attn;
    LayerNorm<T> ln_cross;
    FeedForward<T> ffn;
    LayerNorm<T> ln_ffn;

    Mat<T> forward(const Mat<T>& x, const SeqInfo<T>& seq, const Memory<T>* memory, bool causal, double p_drop,
                   double p_attn_drop, const ForwardContext& ctx, LayerCache<T>* c) const {
        Mat<T> a = self_attn.forward(x, seq.width, x, seq, causal, p_attn_drop, ctx, c ? &c->self : nullptr);
        apply_dropout(a, p_drop, ctx, c ? &c->self_drop : nullptr);
        a += x;
        Mat<T> h = ln_self.forward(a, c ? &c->ln_self : nullptr);
        if (cross_attn) {
            Mat<T> m = cross_attn->forward(h, seq.width, *memory->values, *memory->seq, false, p_attn_drop, ctx,
                                           c ? &c->cross : nullptr);
            apply_dropout(m, p_drop, ctx, c ? &c->cross_drop : nullptr);
            m += h;
            h = ln_cross.forward(m, c ? &c->ln_cross : nullptr);
        }
        Mat<T> f = ffn.forward(h, c ? &c->ffn : nullptr);
        apply_dropout(f, p_drop, ctx, c ? &c->ffn_drop : nullptr);
        f += h;
        Mat<T> y = ln_ffn.forward(f, c ? &c->ln_ffn : nullptr);
        y.array().colwise() *= seq.row_mask.array();
        return y;
    }

    Mat<T> backward(const LayerCache<T>& c, Mat<T> dy, const SeqInfo<T>& seq, const Memory<T>* memory,
                    Mat<T>* dmemory) const {
        dy.array().colwise() *= seq.row_mask.array();
        Mat<T> dsum = ln_ffn.backward(c.ln_ffn, dy);
        Mat<T> df = dsum;
        apply_mask(df, c.ffn_drop);
        Mat<T> dh = dsum + ffn.backward(c.ffn, std::move(df));
        if (cross_attn) {
            Mat<T> dsum2 = ln_cross.backward(c.ln_cross, dh);
            Mat<T> dm = dsum2;
            apply_mask(dm, c.cross_drop);
            Mat<T> dq, dkv;
            cross_attn->backward(c.cross, dm, seq.width, *memory->seq, dq, dkv);
            *dmemory += dkv;
            dh = dsum2 + dq;
        }
        Mat<T> dsum3 = ln_self.backward(c.ln_self, dh);
        Mat<T> da = dsum3;
        apply_mask(da, c.self_drop);
        Mat<T> dq, unused;
        self_attn.backward(c.self, da, seq.width, seq, dq, unused);
        return dsum3 + dq;
    }
};

// ---------------------------------------------------------------------------
// Embeddings + layer stack

template <typename T>
struct StackTrace {
    SeqInfo<T> seq;
    std::vector<TokenId> ids;
    LayerNormCache<T> ln_emb;
    Mat<T> emb_drop;
    std::vector<LayerCache<T>> layers;
};

template <typename T>
struct TransformerStack {
    Parameter<T>* tokens = nullptr;     // vocab x dim
    Parameter<T>* positions = nullptr;  // max_positions x dim when learned
    Mat<T> sinusoids;                   // max_positions x dim when sinusoidal
    Positional positional = Positional::learned;
    LayerNorm<T> ln_emb;
    std::vector<TransformerLayer<T>> layers;
    std::vector<std::size_t> schedule;  // layer index per application
    bool causal = false;
    double dropout = 0.0;
    double attention_dropout = 0.0;
    Index dim = 0;
    Index max_positions = 0;

    Mat<T> embed(const IdMatrix& ids, const SeqInfo<T>& seq, const ForwardContext& ctx, StackTrace<T>* trace) const {
        if (seq.width > max_positions) {
            throw PositionOverflow("sequence width " + std::to_string(seq.width) + " exceeds max_positions " +
                                   std::to_string(max_positions));
        }
        const Index vocab = tokens->value.rows();
        Mat<T> h(seq.batch * seq.width, dim);
        for (Index b = 0; b < seq.batch; ++b) {
            for (Index t = 0; t < seq.width; ++t) {
                const TokenId id = ids(static_cast<std::size_t>(b), static_cast<std::size_t>(t));
                if (id < 0 || id >= vocab) throw UnknownId(std::to_string(id));
                const Index r = b * seq.width + t;
                h.row(r) = tokens->value.row(id);
                if (positional == Positional::learned) {
                    h.row(r) += positions->value.row(t);
                } else if (positional == Positional::sinusoidal) {
                    h.row(r) += sinusoids.row(t);
                }
            }
        }
        Mat<T> y = ln_emb.forward(h, trace ? &trace->ln_emb : nullptr);
        apply_dropout(y, dropout, ctx, trace ? &trace->emb_drop : nullptr);
        y.array().colwise() *= seq.row_mask.array();
        if (trace) trace->ids = ids.data;
        return y;
    }

    Mat<T> forward(const IdMatrix& ids, const SeqInfo<T>& seq, const Memory<T>* memory, const ForwardContext& ctx,
                   StackTrace<T>* trace) const {
        Mat<T> h = embed(ids, seq, ctx, trace);
        if (trace) {
            trace->seq = seq;
            trace->layers.clear();
            trace->layers.resize(schedule.size());
        }
        for (std::size_t s = 0; s < schedule.size(); ++s) {
            h = layers[schedule[s]].forward(h, seq, memory, causal, dropout, attention_dropout, ctx,
                                            trace ? &trace->layers[s] : nullptr);
        }
        return h;
    }

    void backward(const StackTrace<T>& trace, Mat<T> dy, const Memory<T>* memory, Mat<T>* dmemory) const {
        const auto& seq = trace.seq;
        for (std::size_t s = schedule.size(); s-- > 0;) {
            dy = layers[schedule[s]].backward(trace.layers[s], std::move(dy), seq, memory, dmemory);
        }
        dy.array().colwise() *= seq.row_mask.array();
        apply_mask(dy, trace.emb_drop);
        Mat<T> dh = ln_emb.backward(trace.ln_emb, dy);
        for (Index b = 0; b < seq.batch; ++b) {
            for (Index t = 0; t < seq.width; ++t) {
                const Index r = b * seq.width + t;
                if (seq.row_mask(r) == T(0)) continue;
                tokens->grad.row(trace.ids[static_cast<std::size_t>(r)]) += dh.row(r);
                if (positional == Positional::learned) positions->grad.row(t) += dh.row(r);
            }
        }
    }
};

std::vector<std::size_t> loop_schedule(int n_layers, int loop_idx, int loops) {
    std::vector<std::size_t> order;
    const auto n = static_cast<std::size_t>(n_layers);
    if (loop_idx == -1) {
        for (std::size_t i = 0; i < n; ++i) order.push_back(i);
    } else if (loop_idx == -2) {
        for (int l = 0; l < loops; ++l) {
            for (std::size_t i = 0; i < n; ++i) order.push_back(i);
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const int reps = static_cast<int>(i) == loop_idx ? loops : 1;
            for (int r = 0; r < reps; ++r) order.push_back(i);
        }
    }
    return order;
}

template <typename T>
TransformerStack<T> make_stack(ParameterStore<T>& store, const std::string& name, std::size_t vocab, int n_layers,
                               int dim, int heads, int hidden_layers, Positional positional, int loop_idx, int loops,
                               bool is_decoder, int memory_dim, const ModelConfig& cfg, std::mt19937_64& rng) {
    TransformerStack<T> s;
    s.dim = dim;
    s.max_positions = cfg.max_positions;
    s.positional = positional;
    s.causal = is_decoder;
    s.dropout = cfg.dropout;
    s.attention_dropout = cfg.attention_dropout;
    s.tokens = &store.create(name + ".embeddings", static_cast<Index>(vocab), dim);
    init_normal(s.tokens->value, kTokenInitStd, rng);
    if (positional == Positional::learned) {
        s.positions = &store.create(name + ".position_embeddings", cfg.max_positions, dim);
        init_normal(s.positions->value, kEmbeddingInitStd, rng);
    } else if (positional == Positional::sinusoidal) {
        s.sinusoids.resize(cfg.max_positions, dim);
        for (int p = 0; p < cfg.max_positions; ++p) {
            const auto row = sinusoidal_embedding(p, dim);
            for (int j = 0; j < dim; ++j) s.sinusoids(p, j) = static_cast<T>(row[static_cast<std::size_t>(j)]);
        }
    }
    s.ln_emb = LayerNorm<T>::create(store, name + ".layer_norm_emb", dim);
    for (int i = 0; i < n_layers; ++i) {
        const std::string ln = name + ".layers." + std::to_string(i);
        TransformerLayer<T> layer;
        layer.self_attn = MultiHeadAttention<T>::create(store, ln + ".attention", dim, dim, heads, cfg.init, rng);
        layer.ln_self = LayerNorm<T>::create(store, ln + ".layer_norm1", dim);
        if (is_decoder) {
            layer.cross_attn =
                MultiHeadAttention<T>::create(store, ln + ".encoder_attention", dim, memory_dim, heads, cfg.init, rng);
            layer.ln_cross = LayerNorm<T>::create(store, ln + ".layer_norm15", dim);
        }
        layer.ffn = FeedForward<T>::create(store, ln + ".ffn", dim, hidden_layers, cfg.activation, cfg.init, rng);
        layer.ln_ffn = LayerNorm<T>::create(store, ln + ".layer_norm2", dim);
        s.layers.push_back(std::move(layer));
    }
    s.schedule = loop_schedule(n_layers, loop_idx, loops);
    return s;
}

template <typename T>
struct Layers {
    TransformerStack<T> encoder;
    std::optional<TransformerStack<T>> decoder;
    Parameter<T>* out_weight = nullptr;  // vocab x dim
    Parameter<T>* out_bias = nullptr;    // 1 x vocab

    Mat<T> project(const Mat<T>& h) const {
        Mat<T> logits(h.rows(), out_weight->value.rows());
        logits.noalias() = h * out_weight->value.transpose();
        logits.rowwise() += out_bias->value.row(0);
        return logits;
    }

    Mat<T> project_backward(const Mat<T>& h, const Mat<T>& dlogits) const {
        out_weight->grad.noalias() += dlogits.transpose() * h;
        out_bias->grad.row(0) += dlogits.colwise().sum();
        Mat<T> dh(h.rows(), h.cols());
        dh.noalias() = dlogits * out_weight->value;
        return dh;
    }
};

template <typename T>
struct ModelTrace {
    StackTrace<T> enc;
    StackTrace<T> dec;
    Mat<T> memory;
    Mat<T> hidden;
    Mat<T> probs;
    std::vector<TokenId> targets;
};

/// Cross-attention keys and values of every input example, per layer application.
template <typename T>
struct CrossCache {
    std::vector<std::vector<Mat<T>>> keys;    // [example][application], valid x dim
    std::vector<std::vector<Mat<T>>> values;
};

template <typename T>
struct DecoderRow {
    std::size_t example = 0;
    Index length = 0;
    std::vector<Mat<T>> keys;  // [application], capacity x dim, first `length` rows used
    std::vector<Mat<T>> values;
};

template <typename T>
struct DecoderCache {
    std::shared_ptr<const CrossCache<T>> cross;
    std::vector<DecoderRow<T>> rows;
};

/// Single-query attention of a 1 x dim query over the first `n` key rows.
template <typename T>
Mat<T> attend_one(const Mat<T>& q, const Mat<T>& k, const Mat<T>& v, Index n, Index heads) {
    const Index dim = q.cols();
    const Index dh = dim / heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));
    Mat<T> context(1, dim);
    RowVector<T> s(n);
    for (Index h = 0; h < heads; ++h) {
        s.noalias() = q.block(0, h * dh, 1, dh) * k.block(0, h * dh, n, dh).transpose();
        const T mx = s.maxCoeff();
        s = ((s.array() - mx) * scale).exp();
        s /= s.sum();
        context.block(0, h * dh, 1, dh).noalias() = s * v.block(0, h * dh, n, dh);
    }
    return context;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// ForwardTrace

template <typename T>
ForwardTrace<T>::ForwardTrace() : impl_(std::make_unique<detail::ModelTrace<T>>()) {}
template <typename T>
ForwardTrace<T>::~ForwardTrace() = default;
template <typename T>
ForwardTrace<T>::ForwardTrace(ForwardTrace&&) noexcept = default;
template <typename T>
ForwardTrace<T>& ForwardTrace<T>::operator=(ForwardTrace&&) noexcept = default;

// ---------------------------------------------------------------------------
// Seq2SeqModel

template <typename T>
Seq2SeqModel<T>::Seq2SeqModel(const ModelConfig& config, std::size_t vocab_size, std::uint64_t seed)
    : config_(config), vocab_size_(vocab_size), layers_(std::make_unique<detail::Layers<T>>()) {
    config_.validate();
    if (vocab_size == 0) throw ConfigError("empty vocabulary");
    std::mt19937_64 rng(seed);
    auto& L = *layers_;
    const auto& c = config_;
    L.encoder = detail::make_stack<T>(store_, "encoder", vocab_size, c.n_enc_layers, c.enc_emb_dim, c.n_enc_heads,
                                      c.n_enc_hidden_layers, c.enc_positional, c.enc_loop_idx, c.enc_loops, false, 0,
                                      c, rng);
    if (c.architecture == Architecture::encoder_decoder) {
        L.decoder = detail::make_stack<T>(store_, "decoder", vocab_size, c.n_dec_layers, c.dec_emb_dim, c.n_dec_heads,
                                          c.n_dec_hidden_layers, c.dec_positional, c.dec_loop_idx, c.dec_loops, true,
                                          c.enc_emb_dim, c, rng);
        if (c.share_inout_emb) {
            L.out_weight = L.decoder->tokens;
        } else {
            L.out_weight = &store_.create("decoder.output.weight", static_cast<Index>(vocab_size), c.dec_emb_dim);
            detail::init_normal(L.out_weight->value, kTokenInitStd, rng);
        }
        L.out_bias = &store_.create("decoder.output.bias", 1, static_cast<Index>(vocab_size));
    } else {
        L.out_weight = &store_.create("head.weight", static_cast<Index>(vocab_size), c.enc_emb_dim);
        detail::init_normal(L.out_weight->value, kTokenInitStd, rng);
        L.out_bias = &store_.create("head.bias", 1, static_cast<Index>(vocab_size));
    }
}

template <typename T>
Seq2SeqModel<T>::~Seq2SeqModel() = default;

namespace {

IdMatrix columns(const IdMatrix& m, std::size_t begin, std::size_t count) {
    IdMatrix out(m.rows, count, 0);
    for (std::size_t r = 0; r < m.rows; ++r) {
        for (std::size_t c = 0; c < count; ++c) out(r, c) = m(r, begin + c);
    }
    return out;
}

}  // namespace

template <typename T>
LossValue Seq2SeqModel<T>::forward_loss(const Batch& batch, const ForwardContext& ctx, ForwardTrace<T>* trace) {
    using detail::SeqInfo;
    auto& L = *layers_;
    detail::ModelTrace<T>* t = trace ? &trace->get() : nullptr;
    const auto B = static_cast<Index>(batch.size());
    const SeqInfo<T> in_seq(B, static_cast<Index>(batch.input_ids.cols), batch.input_lengths);

    Matrix<T> hidden;
    std::vector<TokenId> targets;
    if (config_.architecture == Architecture::encoder_decoder) {
        Matrix<T> memory = L.encoder.forward(batch.input_ids, in_seq, nullptr, ctx, t ? &t->enc : nullptr);
        const std::size_t width = batch.output_ids.cols - 1;
        std::vector<std::size_t> dec_lengths;
        for (auto len : batch.output_lengths) dec_lengths.push_back(len - 1);
        const SeqInfo<T> dec_seq(B, static_cast<Index>(width), dec_lengths);
        const IdMatrix dec_in = columns(batch.output_ids, 0, width);
        targets.assign(static_cast<std::size_t>(B) * width, -1);
        for (std::size_t b = 0; b < batch.size(); ++b) {
            for (std::size_t p = 0; p + 1 < batch.output_lengths[b]; ++p) {
                targets[b * width + p] = batch.output_ids(b, p + 1);
            }
        }
        if (t) {
            t->enc.seq = in_seq;
            t->memory = std::move(memory);
        }
        const Matrix<T>& mem_ref = t ? t->memory : memory;
        const detail::Memory<T> mem{&mem_ref, t ? &t->enc.seq : &in_seq};
        hidden = L.decoder->forward(dec_in, dec_seq, &mem, ctx, t ? &t->dec : nullptr);
    } else {
        const std::size_t width = batch.input_ids.cols;
        targets.assign(static_cast<std::size_t>(B) * width, -1);
        for (std::size_t b = 0; b < batch.size(); ++b) {
            if (batch.output_lengths[b] > batch.input_lengths[b]) {
                throw ConfigError("encoder-only model: output longer than input");
            }
            for (std::size_t p = 0; p < batch.output_lengths[b]; ++p) targets[b * width + p] = batch.output_ids(b, p);
        }
        hidden = L.encoder.forward(batch.input_ids, in_seq, nullptr, ctx, t ? &t->enc : nullptr);
    }

    Matrix<T> logits = L.project(hidden);
    LossValue loss;
    Matrix<T> probs;
    if (t) probs.resize(logits.rows(), logits.cols());
    for (Index r = 0; r < logits.rows(); ++r) {
        const TokenId target = targets[static_cast<std::size_t>(r)];
        if (target < 0) continue;
        const T mx = logits.row(r).maxCoeff();
        const T z = (logits.row(r).array() - mx).exp().sum();
        loss.sum += static_cast<double>(std::log(z) + mx - logits(r, target));
        ++loss.tokens;
        if (t) probs.row(r) = (logits.row(r).array() - mx).exp() / z;
    }
    if (t) {
        t->hidden = std::move(hidden);
        t->probs = std::move(probs);
        t->targets = std::move(targets);
    }
    return loss;
}

template <typename T>
void Seq2SeqModel<T>::backward(ForwardTrace<T>& trace, T scale) {
    auto& L = *layers_;
    auto& t = trace.get();
    Matrix<T> dlogits = Matrix<T>::Zero(t.probs.rows(), t.probs.cols());
    for (Index r = 0; r < dlogits.rows(); ++r) {
        const TokenId target = t.targets[static_cast<std::size_t>(r)];
        if (target < 0) continue;
        dlogits.row(r) = t.probs.row(r) * scale;
        dlogits(r, target) -= scale;
    }
    Matrix<T> dh = L.project_backward(t.hidden, dlogits);
    if (config_.architecture == Architecture::encoder_decoder) {
        Matrix<T> dmemory = Matrix<T>::Zero(t.memory.rows(), t.memory.cols());
        const detail::Memory<T> mem{&t.memory, &t.enc.seq};
        L.decoder->backward(t.dec, std::move(dh), &mem, &dmemory);
        L.encoder.backward(t.enc, std::move(dmemory), nullptr, nullptr);
    } else {
        L.encoder.backward(t.enc, std::move(dh), nullptr, nullptr);
    }
}

template <typename T>
Matrix<T> Seq2SeqModel<T>::encode(const IdMatrix& ids, std::span<const std::size_t> lengths) const {
    // One example at a time: matrix products then see the same shapes whatever
    // the batch, so results are bitwise independent of batching.
    if (lengths.size() != ids.rows) throw ConfigError("one length per sequence expected");
    const auto& enc = layers_->encoder;
    const std::size_t width = ids.cols;
    if (static_cast<Index>(width) > enc.max_positions) {
        throw PositionOverflow("sequence width " + std::to_string(width) + " exceeds max_positions " +
                               std::to_string(enc.max_positions));
    }
    Matrix<T> out = Matrix<T>::Zero(static_cast<Index>(ids.rows * width), enc.dim);
    for (std::size_t b = 0; b < ids.rows; ++b) {
        const std::size_t len = std::min(lengths[b], width);
        if (len == 0) continue;
        IdMatrix one(1, len, 0);
        std::copy_n(ids.row(b).begin(), len, one.data.begin());
        const std::vector<std::size_t> one_len{len};
        const detail::SeqInfo<T> seq(1, static_cast<Index>(len), one_len);
        out.middleRows(static_cast<Index>(b * width), static_cast<Index>(len)) =
            enc.forward(one, seq, nullptr, ForwardContext{}, nullptr);
    }
    return out;
}

template <typename T>
Matrix<T> Seq2SeqModel<T>::decode(const Matrix<T>& memory, const IdMatrix& input_ids,
                                  std::span<const std::size_t> input_lengths, const IdMatrix& prefix,
                                  std::span<const std::size_t> prefix_lengths) const {
    if (!layers_->decoder) throw ConfigError("model has no decoder");
    const detail::SeqInfo<T> mem_seq(static_cast<Index>(input_ids.rows), static_cast<Index>(input_ids.cols),
                                     input_lengths);
    const detail::SeqInfo<T> seq(static_cast<Index>(prefix.rows), static_cast<Index>(prefix.cols), prefix_lengths);
    const detail::Memory<T> mem{&memory, &mem_seq};
    Matrix<T> h = layers_->decoder->forward(prefix, seq, &mem, ForwardContext{}, nullptr);
    return layers_->project(h);
}

template <typename T>
Matrix<T> Seq2SeqModel<T>::encoder_only_logits(const IdMatrix& ids, std::span<const std::size_t> lengths) const {
    const Matrix<T> h = encode(ids, lengths);
    Matrix<T> logits(h.rows(), static_cast<Index>(vocab_size_));
    const auto width = static_cast<Index>(ids.cols);
    logits.rowwise() = layers_->out_bias->value.row(0);
    for (std::size_t b = 0; b < ids.rows; ++b) {
        const auto len = static_cast<Index>(std::min(lengths[b], ids.cols));
        if (len == 0) continue;
        const auto first = static_cast<Index>(b) * width;
        logits.middleRows(first, len) = layers_->project(h.middleRows(first, len));
    }
    return logits;
}

// ---------------------------------------------------------------------------
// Incremental decoding

template <typename T>
DecoderState<T>::DecoderState() : impl_(std::make_unique<detail::DecoderCache<T>>()) {}
template <typename T>
DecoderState<T>::~DecoderState() = default;
template <typename T>
DecoderState<T>::DecoderState(const DecoderState& other)
    : impl_(std::make_unique<detail::DecoderCache<T>>(*other.impl_)) {}
template <typename T>
DecoderState<T>& DecoderState<T>::operator=(const DecoderState& other) {
    if (this != &other) impl_ = std::make_unique<detail::DecoderCache<T>>(*other.impl_);
    return *this;
}
template <typename T>
DecoderState<T>::DecoderState(DecoderState&&) noexcept = default;
template <typename T>
DecoderState<T>& DecoderState<T>::operator=(DecoderState&&) noexcept = default;

template <typename T>
std::size_t DecoderState<T>::rows() const {
    return impl_->rows.size();
}

template <typename T>
std::size_t DecoderState<T>::length(std::size_t row) const {
    return static_cast<std::size_t>(impl_->rows.at(row).length);
}

template <typename T>
void DecoderState<T>::select(std::span<const std::size_t> rows) {
    auto& old = impl_->rows;
    for (auto r : rows) {
        if (r >= old.size()) throw std::out_of_range("decoder row " + std::to_string(r));
    }
    // Rows listed once are moved, repeated ones copied.
    std::vector<std::size_t> uses(old.size(), 0);
    for (auto r : rows) ++uses[r];
    std::vector<detail::DecoderRow<T>> next;
    next.reserve(rows.size());
    for (auto r : rows) {
        if (--uses[r] == 0) {
            next.push_back(std::move(old[r]));
        } else {
            next.push_back(old[r]);
        }
    }
    old = std::move(next);
}

template <typename T>
DecoderState<T> Seq2SeqModel<T>::start_decoding(const Matrix<T>& memory,
                                                std::span<const std::size_t> input_lengths) const {
    if (!layers_->decoder) throw ConfigError("model has no decoder");
    const auto& dec = *layers_->decoder;
    const std::size_t n = input_lengths.size();
    if (n == 0 || memory.rows() % static_cast<Index>(n) != 0) throw ConfigError("memory does not match the batch");
    const Index width = memory.rows() / static_cast<Index>(n);

    auto cross = std::make_shared<detail::CrossCache<T>>();
    cross->keys.resize(n);
    cross->values.resize(n);
    DecoderState<T> state;
    for (std::size_t b = 0; b < n; ++b) {
        const Index valid = std::min<Index>(static_cast<Index>(input_lengths[b]), width);
        const Matrix<T> mem = memory.middleRows(static_cast<Index>(b) * width, valid);
        for (auto layer : dec.schedule) {
            const auto& attn = *dec.layers[layer].cross_attn;
            cross->keys[b].push_back(attn.k_proj.forward(mem));
            cross->values[b].push_back(attn.v_proj.forward(mem));
        }
        detail::DecoderRow<T> row;
        row.example = b;
        row.keys.assign(dec.schedule.size(), Matrix<T>());
        row.values.assign(dec.schedule.size(), Matrix<T>());
        state.impl_->rows.push_back(std::move(row));
    }
    state.impl_->cross = std::move(cross);
    return state;
}

template <typename T>
Matrix<T> Seq2SeqModel<T>::decode_step(DecoderState<T>& state, std::span<const TokenId> tokens) const {
    if (!layers_->decoder) throw ConfigError("model has no decoder");
    const auto& dec = *layers_->decoder;
    auto& cache = *state.impl_;
    if (tokens.size() != cache.rows.size()) throw ConfigError("one token per decoder row expected");
    const Index vocab = dec.tokens->value.rows();
    Matrix<T> logits(static_cast<Index>(tokens.size()), static_cast<Index>(vocab_size_));

    for (std::size_t r = 0; r < tokens.size(); ++r) {
        auto& row = cache.rows[r];
        const Index t = row.length;
        if (t >= dec.max_positions) {
            throw PositionOverflow("decoded length " + std::to_string(t + 1) + " exceeds max_positions " +
                                   std::to_string(dec.max_positions));
        }
        const TokenId id = tokens[r];
        if (id < 0 || id >= vocab) throw UnknownId(std::to_string(id));
        Matrix<T> x = dec.tokens->value.row(id);
        if (dec.positional == Positional::learned) {
            x += dec.positions->value.row(t);
        } else if (dec.positional == Positional::sinusoidal) {
            x += dec.sinusoids.row(t);
        }
        Matrix<T> h = dec.ln_emb.forward(x, nullptr);

        for (std::size_t s = 0; s < dec.schedule.size(); ++s) {
            const auto& layer = dec.layers[dec.schedule[s]];
            const auto& sa = layer.self_attn;
            auto& keys = row.keys[s];
            auto& values = row.values[s];
            if (keys.rows() <= t) {
                const Index cap = std::max<Index>(8, 2 * keys.rows());
                keys.conservativeResize(cap, h.cols());
                values.conservativeResize(cap, h.cols());
            }
            keys.row(t) = sa.k_proj.forward(h);
            values.row(t) = sa.v_proj.forward(h);
            Matrix<T> a = sa.out_proj.forward(detail::attend_one(sa.q_proj.forward(h), keys, values, t + 1, sa.heads));
            a += h;
            h = layer.ln_self.forward(a, nullptr);

            const auto& ca = *layer.cross_attn;
            const auto& ck = cache.cross->keys[row.example][s];
            const auto& cv = cache.cross->values[row.example][s];
            Matrix<T> m = ck.rows() == 0 ? Matrix<T>(Matrix<T>::Zero(1, h.cols()))
                                         : detail::attend_one(ca.q_proj.forward(h), ck, cv, ck.rows(), ca.heads);
            m = ca.out_proj.forward(m);
            m += h;
            h = layer.ln_cross.forward(m, nullptr);

            Matrix<T> f = layer.ffn.forward(h, nullptr);
            f += h;
            h = layer.ln_ffn.forward(f, nullptr);
        }
        logits.row(static_cast<Index>(r)) = layers_->project(h);
        ++row.length;
    }
    return logits;
}

template class DecoderState<float>;
template class DecoderState<double>;
template class ParameterStore<float>;
template class ParameterStore<double>;
template class ForwardTrace<float>;
template class ForwardTrace<double>;
template class Seq2SeqModel<float>;
template class Seq2SeqModel<double>;

}  // namespace int2int::nn
