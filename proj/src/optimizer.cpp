#include "int2int/optimizer.hpp"

#include <charconv>
#include <cmath>
#include <numbers>

#include "int2int/errors.hpp"

namespace int2int {

namespace {

double parse_number(std::string_view key, std::string_view text) {
    double v = 0.0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end) {
        throw ParseError("optimizer parameter " + std::string(key) + ": not a number: '" + std::string(text) + "'");
    }
    return v;
}

std::int64_t parse_count(std::string_view key, std::string_view text) {
    const double v = parse_number(key, text);
    if (v < 0 || v != std::floor(v)) throw ParseError("optimizer parameter " + std::string(key) + " must be a count");
    return static_cast<std::int64_t>(v);
}

}  // namespace

std::string_view optimizer_name(OptimizerKind kind) {
    switch (kind) {
        case OptimizerKind::sgd: return "sgd";
        case OptimizerKind::adam: return "adam";
        case OptimizerKind::adamw: return "adamw";
        case OptimizerKind::adagrad: return "adagrad";
    }
    return "?";
}

OptimizerConfig parse_optimizer(std::string_view spec) {
    OptimizerConfig c;
    const auto comma = spec.find(',');
    std::string name(spec.substr(0, comma));
    for (auto [suffix, schedule] : {std::pair{"_inverse_sqrt", Schedule::inverse_sqrt},
                                    std::pair{"_cosine", Schedule::cosine}}) {
        const std::string s(suffix);
        if (name.size() > s.size() && name.ends_with(s)) {
            name.resize(name.size() - s.size());
            c.schedule = schedule;
        }
    }
    if (name == "sgd") {
        c.kind = OptimizerKind::sgd;
    } else if (name == "adam") {
        c.kind = OptimizerKind::adam;
    } else if (name == "adamw") {
        c.kind = OptimizerKind::adamw;
        c.weight_decay = 0.01;
    } else if (name == "adagrad") {
        c.kind = OptimizerKind::adagrad;
        c.eps = 1e-10;
    } else {
        throw ParseError("unknown optimizer '" + name + "'");
    }

    std::string_view rest = comma == std::string_view::npos ? std::string_view{} : spec.substr(comma + 1);
    while (!rest.empty()) {
        const auto next = rest.find(',');
        const std::string_view item = rest.substr(0, next);
        rest = next == std::string_view::npos ? std::string_view{} : rest.substr(next + 1);
        const auto eq = item.find('=');
        if (eq == std::string_view::npos || eq == 0 || eq + 1 == item.size()) {
            throw ParseError("malformed optimizer parameter '" + std::string(item) + "'");
        }
        const std::string_view key = item.substr(0, eq);
        const std::string_view value = item.substr(eq + 1);
        if (key == "lr") {
            c.lr = parse_number(key, value);
        } else if (key == "momentum") {
            c.momentum = parse_number(key, value);
        } else if (key == "beta1") {
            c.beta1 = parse_number(key, value);
        } else if (key == "beta2") {
            c.beta2 = parse_number(key, value);
        } else if (key == "eps") {
            c.eps = parse_number(key, value);
        } else if (key == "weight_decay") {
            c.weight_decay = parse_number(key, value);
        } else if (key == "lr_decay") {
            c.lr_decay = parse_number(key, value);
        } else if (key == "initial_accumulator_value") {
            c.initial_accumulator = parse_number(key, value);
        } else if (key == "warmup_steps" || key == "warmup_updates") {
            c.warmup_steps = parse_count(key, value);
        } else if (key == "max_steps" || key == "max_updates") {
            c.max_steps = parse_count(key, value);
        } else if (key == "schedule") {
            if (value == "none") {
                c.schedule = Schedule::none;
            } else if (value == "inverse_sqrt") {
                c.schedule = Schedule::inverse_sqrt;
            } else if (value == "cosine") {
                c.schedule = Schedule::cosine;
            } else {
                throw ParseError("unknown schedule '" + std::string(value) + "'");
            }
        } else {
            throw ParseError("unknown optimizer parameter '" + std::string(key) + "'");
        }
    }
    if (!(c.lr > 0)) throw ParseError("learning rate must be positive");
    if (c.kind != OptimizerKind::sgd && c.momentum != 0.0) throw ParseError("momentum applies to sgd only");
    if (!(c.beta1 >= 0 && c.beta1 < 1 && c.beta2 >= 0 && c.beta2 < 1)) throw ParseError("betas must be in [0, 1)");
    if (c.schedule == Schedule::cosine && c.max_steps <= c.warmup_steps) {
        throw ParseError("cosine schedule needs max_steps > warmup_steps");
    }
    return c;
}

double effective_lr(std::int64_t step, const OptimizerConfig& c) {
    const auto s = static_cast<double>(std::max<std::int64_t>(step, 1));
    const auto w = static_cast<double>(c.warmup_steps);
    if (c.warmup_steps > 0 && s <= w) return c.lr * s / w;
    switch (c.schedule) {
        case Schedule::none:
            return c.lr;
        case Schedule::inverse_sqrt:
            return c.lr * std::sqrt(std::max(w, 1.0) / s);
        case Schedule::cosine: {
            const double progress = std::min(1.0, (s - w) / (static_cast<double>(c.max_steps) - w));
            return c.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
        }
    }
    return c.lr;
}

template <typename T>
double global_grad_norm(const std::vector<nn::Parameter<T>*>& params) {
    double sq = 0.0;
    for (const auto* p : params) sq += p->grad.template cast<double>().squaredNorm();
    return std::sqrt(sq);
}

template <typename T>
double clip_gradients(const std::vector<nn::Parameter<T>*>& params, double max_norm) {
    const double norm = global_grad_norm(params);
    if (max_norm > 0 && norm > max_norm) {
        const T scale = static_cast<T>(max_norm / norm);
        for (auto* p : params) p->grad *= scale;
    }
    return norm;
}

template double global_grad_norm(const std::vector<nn::Parameter<float>*>&);
template double global_grad_norm(const std::vector<nn::Parameter<double>*>&);
template double clip_gradients(const std::vector<nn::Parameter<float>*>&, double);
template double clip_gradients(const std::vector<nn::Parameter<double>*>&, double);

template <typename T>
Optimizer<T>::Optimizer(OptimizerConfig config, std::vector<nn::Parameter<T>*> params)
    : config_(config), params_(std::move(params)) {
    for (const auto* p : params_) {
        first_.push_back(nn::Matrix<T>::Constant(p->value.rows(), p->value.cols(),
                                                 config_.kind == OptimizerKind::adagrad
                                                     ? static_cast<T>(config_.initial_accumulator)
                                                     : T(0)));
        if (config_.kind == OptimizerKind::adam || config_.kind == OptimizerKind::adamw) {
            second_.push_back(nn::Matrix<T>::Zero(p->value.rows(), p->value.cols()));
        }
    }
}

template <typename T>
void Optimizer<T>::step() {
    ++steps_;
    const double lr = effective_lr(steps_, config_);
    const auto& c = config_;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& w = params_[i]->value;
        auto& g = params_[i]->grad;
        switch (c.kind) {
            case OptimizerKind::sgd: {
                if (c.weight_decay != 0) g += static_cast<T>(c.weight_decay) * w;
                if (c.momentum != 0) {
                    auto& buf = first_[i];
                    if (steps_ == 1) {
                        buf = g;
                    } else {
                        buf = static_cast<T>(c.momentum) * buf + g;
                    }
                    w -= static_cast<T>(lr) * buf;
                } else {
                    w -= static_cast<T>(lr) * g;
                }
                break;
            }
            case OptimizerKind::adam:
            case OptimizerKind::adamw: {
                if (c.kind == OptimizerKind::adamw) {
                    w *= static_cast<T>(1.0 - lr * c.weight_decay);
                } else if (c.weight_decay != 0) {
                    g += static_cast<T>(c.weight_decay) * w;
                }
                auto& m = first_[i];
                auto& v = second_[i];
                m = static_cast<T>(c.beta1) * m + static_cast<T>(1 - c.beta1) * g;
                v = static_cast<T>(c.beta2) * v + static_cast<T>(1 - c.beta2) * g.cwiseAbs2();
                const double bc1 = 1 - std::pow(c.beta1, static_cast<double>(steps_));
                const double bc2 = 1 - std::pow(c.beta2, static_cast<double>(steps_));
                const T step_size = static_cast<T>(lr / bc1);
                const T inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
                const T eps = static_cast<T>(c.eps);
                w.array() -= step_size * m.array() / ((v.array().sqrt() * inv_sqrt_bc2) + eps);
                break;
            }
            case OptimizerKind::adagrad: {
                if (c.weight_decay != 0) g += static_cast<T>(c.weight_decay) * w;
                const double clr = lr / (1.0 + static_cast<double>(steps_ - 1) * c.lr_decay);
                auto& sum = first_[i];
                sum += g.cwiseAbs2();
                w.array() -= static_cast<T>(clr) * g.array() / (sum.array().sqrt() + static_cast<T>(c.eps));
                break;
            }
        }
        g.setZero();
    }
}

template <typename T>
std::vector<std::pair<std::string, nn::Matrix<T>*>> Optimizer<T>::state_arrays() {
    std::vector<std::pair<std::string, nn::Matrix<T>*>> out;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        out.emplace_back(params_[i]->name + ".opt_first", &first_[i]);
        if (!second_.empty()) out.emplace_back(params_[i]->name + ".opt_second", &second_[i]);
    }
    return out;
}

template class Optimizer<float>;
template class Optimizer<double>;

}  // namespace int2int
