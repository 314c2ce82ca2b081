#include <doctest.h>

#include <cmath>

#include "int2int/errors.hpp"
#include "int2int/optimizer.hpp"

using namespace int2int;
using namespace int2int::nn;

namespace {

struct Scalars {
    ParameterStore<double> store;
    Parameter<double>* w;
    Parameter<double>* v;

    Scalars(double w0, double v0) {
        w = &store.create("w", 1, 1);
        v = &store.create("v", 1, 2);
        w->value(0, 0) = w0;
        v->value.setConstant(v0);
    }
    void set_grads(double gw, double gv) {
        w->grad(0, 0) = gw;
        v->grad.setConstant(gv);
    }
};

}  // namespace

TEST_CASE("optimizer spec parsing") {
    const auto adam = parse_optimizer("adam,lr=1e-4");
    CHECK(adam.kind == OptimizerKind::adam);
    CHECK(adam.lr == 1e-4);
    CHECK(adam.beta1 == 0.9);
    CHECK(adam.beta2 == 0.999);
    CHECK(adam.eps == 1e-8);

    const auto ada = parse_optimizer("adagrad,lr=0.1,lr_decay=0.05");
    CHECK(ada.kind == OptimizerKind::adagrad);
    CHECK(ada.lr == 0.1);
    CHECK(ada.lr_decay == 0.05);

    const auto warm = parse_optimizer("adam_inverse_sqrt,lr=0.001,warmup_updates=100");
    CHECK(warm.schedule == Schedule::inverse_sqrt);
    CHECK(warm.warmup_steps == 100);

    CHECK_THROWS_AS(parse_optimizer("frobnicate,lr=1"), ParseError);
    CHECK_THROWS_AS(parse_optimizer("adam,lr"), ParseError);
    CHECK_THROWS_AS(parse_optimizer("adam,lr=abc"), ParseError);
    CHECK_THROWS_AS(parse_optimizer("adam,colour=1"), ParseError);
}

TEST_CASE("sgd step is w minus lr times g") {
    Scalars s(1.0, 2.0);
    Optimizer<double> opt(parse_optimizer("sgd,lr=0.1"), s.store.all());
    s.set_grads(0.5, -1.0);
    opt.step();
    CHECK(s.w->value(0, 0) == doctest::Approx(0.95));
    CHECK(s.v->value(0, 1) == doctest::Approx(2.1));
    CHECK(s.w->grad(0, 0) == 0.0);
}

TEST_CASE("adam first step moves each scalar by about lr") {
    for (double g : {1e-3, 0.5, -7.0}) {
        Scalars s(1.0, 0.0);
        Optimizer<double> opt(parse_optimizer("adam,lr=0.01"), s.store.all());
        s.set_grads(g, 0.0);
        opt.step();
        // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
        const double expected = 1.0 - 0.01 * g / (std::abs(g) + 1e-8);
        CHECK(s.w->value(0, 0) == doctest::Approx(expected).epsilon(1e-12));
        CHECK(s.v->value(0, 0) == 0.0);
    }
}

TEST_CASE("zero gradients leave parameters unchanged") {
    for (const char* spec : {"sgd,lr=0.1,momentum=0.9", "adam,lr=0.01", "adagrad,lr=0.1"}) {
        Scalars s(1.5, -2.0);
        Optimizer<double> opt(parse_optimizer(spec), s.store.all());
        s.set_grads(0.0, 0.0);
        opt.step();
        CHECK(s.w->value(0, 0) == 1.5);
        CHECK(s.v->value(0, 0) == -2.0);
    }
}

TEST_CASE("adamw decays weights independently of the gradient") {
    Scalars s(2.0, 0.0);
    Optimizer<double> opt(parse_optimizer("adamw,lr=0.1,weight_decay=0.5"), s.store.all());
    s.set_grads(0.0, 0.0);
    opt.step();
    CHECK(s.w->value(0, 0) == doctest::Approx(2.0 * (1 - 0.1 * 0.5)));
}

TEST_CASE("learning-rate schedules") {
    auto c = parse_optimizer("adam,lr=1e-4");
    for (std::int64_t step : {1, 10, 1000}) CHECK(effective_lr(step, c) == 1e-4);

    c = parse_optimizer("adam_inverse_sqrt,lr=0.001,warmup_updates=100");
    CHECK(effective_lr(50, c) == doctest::Approx(0.0005));
    CHECK(effective_lr(100, c) == doctest::Approx(0.001));
    CHECK(effective_lr(400, c) == doctest::Approx(0.0005));

    c = parse_optimizer("adam_cosine,lr=0.001,warmup_updates=10,max_steps=110");
    CHECK(effective_lr(10, c) == doctest::Approx(0.001));
    CHECK(effective_lr(60, c) == doctest::Approx(0.0005));
    CHECK(effective_lr(110, c) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("gradient clipping") {
    Scalars s(0.0, 0.0);
    const auto params = s.store.all();
    // norm of (gw, gv, gv) = sqrt(64 + 18 + 18) = 10
    s.set_grads(8.0, std::sqrt(18.0));
    CHECK(clip_gradients(params, 5.0) == doctest::Approx(10.0));
    CHECK(s.w->grad(0, 0) == doctest::Approx(4.0));
    CHECK(s.v->grad(0, 0) == doctest::Approx(std::sqrt(18.0) / 2));

    s.set_grads(0.0, std::sqrt(4.5));
    clip_gradients(params, 5.0);
    CHECK(s.v->grad(0, 0) == doctest::Approx(std::sqrt(4.5)));

    s.set_grads(300.0, -170.0);
    clip_gradients(params, 5.0);
    CHECK(global_grad_norm(params) <= 5.0 + 1e-9);

    s.set_grads(300.0, -170.0);
    clip_gradients(params, 0.0);
    CHECK(s.w->grad(0, 0) == 300.0);
}
