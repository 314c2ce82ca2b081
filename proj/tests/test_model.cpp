#include <doctest.h>

#include <cmath>
#include <numeric>

#include "int2int/errors.hpp"
#include "int2int/model.hpp"
#include "support/grad_check.hpp"

using namespace int2int;
using namespace int2int::nn;
using int2int::testing::finite_difference_check;
using int2int::testing::random_batch;
using int2int::testing::tiny_config;

namespace {

double worst(const std::vector<int2int::testing::ArrayError>& errs, std::string* name = nullptr) {
    double w = 0;
    for (const auto& e : errs) {
        if (e.rel_error > w) {
            w = e.rel_error;
            if (name) *name = e.name;
        }
    }
    return w;
}

void expect_gradients(const ModelConfig& cfg, std::uint64_t seed) {
    Seq2SeqModel<double> model(cfg, 12, seed);
    const std::size_t out_width = cfg.architecture == Architecture::encoder_only ? 3 : 4;
    const Batch batch = random_batch(12, 3, 5, out_width, seed + 1);
    const auto errs = finite_difference_check(model, batch);
    std::string name;
    const double w = worst(errs, &name);
    INFO("worst array: " << name << " rel error " << w);
    CHECK(w <= 1e-4);
}

}  // namespace

TEST_CASE("sinusoidal embedding at position zero alternates 0 and 1") {
    const auto e = sinusoidal_embedding(0, 8);
    for (std::size_t i = 0; i < e.size(); ++i) CHECK(e[i] == (i % 2 == 0 ? 0.0 : 1.0));
}

TEST_CASE("sinusoidal embeddings are bounded and distinct per position") {
    const int dim = 4;
    std::vector<std::vector<double>> rows;
    for (int p = 0; p < 10000; ++p) {
        rows.push_back(sinusoidal_embedding(p, dim));
        for (double v : rows.back()) CHECK_LE(std::abs(v), 1.0);
    }
    std::sort(rows.begin(), rows.end());
    CHECK(std::adjacent_find(rows.begin(), rows.end()) == rows.end());
}

TEST_CASE("cross-entropy of uniform logits is ln V") {
    Matrix<double> logits = Matrix<double>::Zero(3, 7);
    const std::vector<TokenId> targets{0, 3, -1};
    const auto ce = cross_entropy_loss(logits, std::span<const TokenId>(targets));
    CHECK(ce.loss == doctest::Approx(std::log(7.0)).epsilon(1e-12));
    CHECK(ce.grad.row(2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("cross-entropy gradient matches finite differences") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0, 1);
    Matrix<double> logits(4, 6);
    for (Index i = 0; i < logits.size(); ++i) logits.data()[i] = n(rng);
    const std::vector<TokenId> targets{1, -1, 5, 0};
    const auto ce = cross_entropy_loss(logits, std::span<const TokenId>(targets));
    Matrix<double> numeric(4, 6);
    const double h = 1e-5;
    for (Index i = 0; i < logits.size(); ++i) {
        Matrix<double> lp = logits, lm = logits;
        lp.data()[i] += h;
        lm.data()[i] -= h;
        numeric.data()[i] = (cross_entropy_loss(lp, std::span<const TokenId>(targets)).loss -
                             cross_entropy_loss(lm, std::span<const TokenId>(targets)).loss) /
                            (2 * h);
    }
    CHECK(int2int::testing::relative_error(ce.grad, numeric) <= 1e-6);
}

TEST_CASE("extreme correct logits give vanishing loss") {
    Matrix<double> logits = Matrix<double>::Zero(1, 5);
    logits(0, 2) = 100;
    const std::vector<TokenId> t{2};
    CHECK(cross_entropy_loss(logits, std::span<const TokenId>(t)).loss < 1e-40);
}

TEST_CASE("encoder-decoder gradients match finite differences") {
    expect_gradients(tiny_config(), 11);
}

TEST_CASE("encoder-decoder gradients with relu and separate output projection") {
    auto cfg = tiny_config();
    cfg.activation = Activation::relu;
    cfg.share_inout_emb = false;
    cfg.init = InitScheme::xavier;
    expect_gradients(cfg, 12);
}

TEST_CASE("gradients with sinusoidal embeddings and shared layers") {
    auto cfg = tiny_config();
    cfg.enc_positional = Positional::sinusoidal;
    cfg.dec_positional = Positional::sinusoidal;
    cfg.enc_loop_idx = -2;
    cfg.dec_loop_idx = -2;
    cfg.enc_loops = 3;
    cfg.dec_loops = 3;
    expect_gradients(cfg, 13);
}

TEST_CASE("gradients with one looped layer, extra hidden layers and distinct widths") {
    auto cfg = tiny_config();
    cfg.enc_loop_idx = 1;
    cfg.enc_loops = 2;
    cfg.n_enc_hidden_layers = 2;
    cfg.dec_emb_dim = 8;
    cfg.enc_positional = Positional::none;
    expect_gradients(cfg, 14);
}

TEST_CASE("encoder-only gradients match finite differences") {
    auto cfg = tiny_config();
    cfg.architecture = Architecture::encoder_only;
    expect_gradients(cfg, 15);
    cfg.enc_positional = Positional::sinusoidal;
    cfg.enc_loop_idx = -2;
    cfg.enc_loops = 3;
    expect_gradients(cfg, 16);
}

namespace {

IdMatrix ids_row(std::initializer_list<TokenId> ids, std::size_t width) {
    IdMatrix m(1, width, 0);
    std::size_t c = 0;
    for (auto id : ids) m(0, c++) = id;
    return m;
}

}  // namespace

TEST_CASE("encoder output shape and padding mask") {
    const auto cfg = tiny_config();
    Seq2SeqModel<double> model(cfg, 12, 3);
    IdMatrix ids(2, 6, 0);
    const std::vector<TokenId> row0{1, 4, 5, 6, 1, 0};
    const std::vector<TokenId> row1{1, 7, 8, 9, 10, 1};
    for (std::size_t c = 0; c < 6; ++c) {
        ids(0, c) = row0[c];
        ids(1, c) = row1[c];
    }
    const std::vector<std::size_t> lengths{5, 6};
    const auto out = model.encode(ids, lengths);
    CHECK(out.rows() == 12);
    CHECK(out.cols() == cfg.enc_emb_dim);

    IdMatrix changed = ids;
    changed(0, 5) = 9;
    const auto out2 = model.encode(changed, lengths);
    CHECK((out.topRows(5).array() == out2.topRows(5).array()).all());
    CHECK((out.bottomRows(6).array() == out2.bottomRows(6).array()).all());
}

TEST_CASE("decoder is causal and logits have vocabulary width") {
    const auto cfg = tiny_config();
    Seq2SeqModel<double> model(cfg, 12, 4);
    const auto in = ids_row({1, 4, 5, 1}, 4);
    const std::vector<std::size_t> in_len{4};
    const auto mem = model.encode(in, in_len);
    const auto prefix = ids_row({1, 6, 7, 8}, 4);
    const std::vector<std::size_t> p_len{4};
    const auto logits = model.decode(mem, in, in_len, prefix, p_len);
    CHECK(logits.rows() == 4);
    CHECK(logits.cols() == 12);

    auto later = prefix;
    later(0, 2) = 11;
    later(0, 3) = 3;
    const auto logits2 = model.decode(mem, in, in_len, later, p_len);
    CHECK((logits.topRows(2).array() == logits2.topRows(2).array()).all());
    CHECK_FALSE((logits.row(2).array() == logits2.row(2).array()).all());
}

TEST_CASE("without positions the encoder is permutation equivariant") {
    auto cfg = tiny_config();
    cfg.enc_positional = Positional::none;
    Seq2SeqModel<double> model(cfg, 12, 5);
    const std::vector<TokenId> seq{1, 4, 5, 6, 7, 1};
    const std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
    IdMatrix a(1, 6, 0), b(1, 6, 0);
    for (std::size_t i = 0; i < 6; ++i) {
        a(0, i) = seq[i];
        b(0, i) = seq[perm[i]];
    }
    const std::vector<std::size_t> len{6};
    const auto oa = model.encode(a, len), ob = model.encode(b, len);
    for (std::size_t i = 0; i < 6; ++i)
        CHECK((ob.row(static_cast<Index>(i)) - oa.row(static_cast<Index>(perm[i]))).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("learned positions distinguish repeated tokens") {
    Seq2SeqModel<double> model(tiny_config(), 12, 6);
    const auto ids = ids_row({1, 5, 5, 1}, 4);
    const std::vector<std::size_t> len{4};
    const auto out = model.encode(ids, len);
    CHECK((out.row(1) - out.row(2)).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("sequences wider than max_positions overflow") {
    Seq2SeqModel<double> model(tiny_config(), 12, 7);
    IdMatrix ids(1, 9, 4);
    const std::vector<std::size_t> len{9};
    CHECK_THROWS_AS((void)model.encode(ids, len), PositionOverflow);
}

TEST_CASE("one pass of a fully shared stack equals the unshared stack") {
    auto shared = tiny_config();
    shared.n_enc_layers = 1;
    shared.enc_loop_idx = -2;
    shared.enc_loops = 1;
    auto plain = shared;
    plain.enc_loop_idx = -1;
    Seq2SeqModel<double> a(shared, 12, 8), b(plain, 12, 8);
    const auto ids = ids_row({1, 4, 5, 6, 1}, 5);
    const std::vector<std::size_t> len{5};
    CHECK((a.encode(ids, len).array() == b.encode(ids, len).array()).all());
}

TEST_CASE("encoder-only logits cover every position") {
    auto cfg = tiny_config();
    cfg.architecture = Architecture::encoder_only;
    Seq2SeqModel<double> model(cfg, 12, 9);
    const auto ids = ids_row({1, 4, 5, 1}, 4);
    const std::vector<std::size_t> len{4};
    const auto logits = model.encoder_only_logits(ids, len);
    CHECK(logits.rows() == 4);
    CHECK(logits.cols() == 12);
}

TEST_CASE("initialization is deterministic per seed") {
    Seq2SeqModel<double> a(tiny_config(), 12, 21), b(tiny_config(), 12, 21), c(tiny_config(), 12, 22);
    const auto pa = a.parameters().all(), pb = b.parameters().all(), pc = c.parameters().all();
    bool any_diff = false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i]->name == pb[i]->name);
        CHECK((pa[i]->value.array() == pb[i]->value.array()).all());
        if (!(pa[i]->value.array() == pc[i]->value.array()).all()) any_diff = true;
    }
    CHECK(any_diff);
    for (auto* p : pa) {
        if (p->name.find("layer_norm") != std::string::npos && p->name.ends_with(".weight"))
            CHECK((p->value.array() == 1.0).all());
        if (p->name.find("layer_norm") != std::string::npos && p->name.ends_with(".bias"))
            CHECK((p->value.array() == 0.0).all());
    }
}

TEST_CASE("parameter count follows the layer formula") {
    // Per layer of width d with one hidden feed-forward layer of width 4d:
    // attention 4(d^2 + d), feed-forward 8d^2 + 5d, two layer norms 4d;
    // decoder layers add cross-attention 4(d^2 + d) and a third norm 2d.
    auto expected = [](std::size_t V, std::size_t d, std::size_t P, std::size_t ne, std::size_t nd, bool share) {
        const std::size_t enc_layer = 4 * (d * d + d) + 8 * d * d + 5 * d + 4 * d;
        const std::size_t dec_layer = enc_layer + 4 * (d * d + d) + 2 * d;
        const std::size_t embed = V * d + P * d + 2 * d;
        return 2 * embed + ne * enc_layer + nd * dec_layer + (share ? 0 : V * d) + V;
    };
    for (int d : {16, 32, 64}) {
        auto cfg = tiny_config();
        cfg.enc_emb_dim = cfg.dec_emb_dim = d;
        for (bool share : {true, false}) {
            cfg.share_inout_emb = share;
            Seq2SeqModel<float> m(cfg, 12, 1);
            CHECK(m.parameter_count() == expected(12, d, 8, 2, 2, share));
        }
    }
    auto big = tiny_config();
    big.enc_emb_dim = big.dec_emb_dim = 256;
    const double c1 = static_cast<double>(expected(12, 256, 8, 2, 2, true));
    const double c2 = static_cast<double>(expected(12, 512, 8, 2, 2, true));
    CHECK(c2 / c1 == doctest::Approx(4.0).epsilon(0.01));
    CHECK(expected(12, 64, 8, 4, 4, true) - expected(12, 64, 8, 2, 2, true) ==
          2 * (expected(12, 64, 8, 3, 3, true) - expected(12, 64, 8, 2, 2, true)));
}

TEST_CASE("shared output projection reuses the token embedding") {
    Seq2SeqModel<double> shared(tiny_config(), 12, 2);
    auto cfg = tiny_config();
    cfg.share_inout_emb = false;
    Seq2SeqModel<double> separate(cfg, 12, 2);
    CHECK(separate.parameter_count() - shared.parameter_count() == 12 * 16);
    CHECK(shared.parameters().find("decoder.output.weight") == nullptr);
    CHECK(separate.parameters().find("decoder.output.weight") != nullptr);
}

TEST_CASE("zero loss scale leaves gradients at zero") {
    Seq2SeqModel<double> model(tiny_config(), 12, 31);
    const auto batch = random_batch(12, 3, 5, 4, 32);
    model.parameters().zero_grad();
    ForwardTrace<double> trace;
    model.forward_loss(batch, ForwardContext{}, &trace);
    model.backward(trace, 0.0);
    for (auto* p : model.parameters().all()) CHECK(p->grad.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("duplicating every example leaves the averaged gradient unchanged") {
    Seq2SeqModel<double> model(tiny_config(), 12, 41);
    const auto batch = random_batch(12, 3, 5, 4, 42);
    Batch twice = batch;
    twice.input_ids = IdMatrix(6, batch.input_ids.cols, 0);
    twice.output_ids = IdMatrix(6, batch.output_ids.cols, 0);
    twice.input_lengths.clear();
    twice.output_lengths.clear();
    for (std::size_t r = 0; r < 6; ++r) {
        for (std::size_t c = 0; c < batch.input_ids.cols; ++c) twice.input_ids(r, c) = batch.input_ids(r % 3, c);
        for (std::size_t c = 0; c < batch.output_ids.cols; ++c) twice.output_ids(r, c) = batch.output_ids(r % 3, c);
        twice.input_lengths.push_back(batch.input_lengths[r % 3]);
        twice.output_lengths.push_back(batch.output_lengths[r % 3]);
    }
    auto grads = [&model](const Batch& b) {
        model.parameters().zero_grad();
        ForwardTrace<double> trace;
        const auto loss = model.forward_loss(b, ForwardContext{}, &trace);
        model.backward(trace, 1.0 / static_cast<double>(loss.tokens));
        std::vector<Matrix<double>> g;
        for (auto* p : model.parameters().all()) g.push_back(p->grad);
        return g;
    };
    const auto g1 = grads(batch), g2 = grads(twice);
    for (std::size_t i = 0; i < g1.size(); ++i) CHECK((g1[i] - g2[i]).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("incremental decoding matches full-prefix decoding") {
    for (int loop_idx : {-1, 0}) {
        auto cfg = tiny_config();
        cfg.n_dec_layers = 2;
        cfg.dec_loop_idx = loop_idx;
        cfg.dec_loops = 2;
        Seq2SeqModel<double> model(cfg, 12, 21);
        IdMatrix in(2, 5, 0);
        const std::vector<TokenId> a{1, 4, 5, 6, 1}, b{1, 7, 1};
        for (std::size_t i = 0; i < a.size(); ++i) in(0, i) = a[i];
        for (std::size_t i = 0; i < b.size(); ++i) in(1, i) = b[i];
        const std::vector<std::size_t> in_len{5, 3};
        const auto mem = model.encode(in, in_len);
        IdMatrix prefix(2, 4, 0);
        const std::vector<TokenId> pa{1, 6, 7, 8}, pb{1, 9, 10, 3};
        for (std::size_t i = 0; i < 4; ++i) {
            prefix(0, i) = pa[i];
            prefix(1, i) = pb[i];
        }
        const std::vector<std::size_t> p_len{4, 4};
        const auto full = model.decode(mem, in, in_len, prefix, p_len);

        auto state = model.start_decoding(mem, in_len);
        CHECK(state.rows() == 2);
        for (std::size_t t = 0; t < 4; ++t) {
            const std::vector<TokenId> feed{pa[t], pb[t]};
            const auto step = model.decode_step(state, feed);
            for (Index r = 0; r < 2; ++r) {
                const double diff = (step.row(r) - full.row(r * 4 + static_cast<Index>(t))).cwiseAbs().maxCoeff();
                CHECK(diff <= 1e-12);
            }
        }
        CHECK(state.length(0) == 4);
    }
}

TEST_CASE("selecting decoder rows reorders and copies their caches") {
    const auto cfg = tiny_config();
    Seq2SeqModel<double> model(cfg, 12, 22);
    IdMatrix in(2, 3, 0);
    in(0, 0) = 1; in(0, 1) = 4; in(0, 2) = 1;
    in(1, 0) = 1; in(1, 1) = 5; in(1, 2) = 1;
    const std::vector<std::size_t> in_len{3, 3};
    const auto mem = model.encode(in, in_len);
    auto state = model.start_decoding(mem, in_len);
    (void)model.decode_step(state, std::vector<TokenId>{1, 1});
    auto copy = state;
    const std::vector<std::size_t> rows{1, 1, 0};
    state.select(rows);
    CHECK(state.rows() == 3);
    const auto after = model.decode_step(state, std::vector<TokenId>{6, 6, 6});
    const auto ref = model.decode_step(copy, std::vector<TokenId>{6, 6});
    CHECK((after.row(0).array() == ref.row(1).array()).all());
    CHECK((after.row(1).array() == ref.row(1).array()).all());
    CHECK((after.row(2).array() == ref.row(0).array()).all());
    CHECK_THROWS_AS(state.select(std::vector<std::size_t>{3}), std::out_of_range);
}
