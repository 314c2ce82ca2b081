#pragma once

// Optimizers, learning-rate schedules and gradient clipping.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "int2int/model.hpp"

namespace int2int {

enum class OptimizerKind { sgd, adam, adamw, adagrad };
enum class Schedule { none, inverse_sqrt, cosine };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adam;
    double lr = 1e-4;
    double momentum = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    double lr_decay = 0.0;
    double initial_accumulator = 0.0;
    std::int64_t warmup_steps = 0;
    Schedule schedule = Schedule::none;
    std::int64_t max_steps = 0;  // cosine horizon
};

/// "name,key=value,..." e.g. "adam,lr=1e-4". The name may carry a schedule
/// suffix ("adam_inverse_sqrt", "adam_cosine"). Throws ParseError.
OptimizerConfig parse_optimizer(std::string_view spec);
std::string_view optimizer_name(OptimizerKind kind);

/// Learning rate for optimizer step `step` (1-based).
double effective_lr(std::int64_t step, const OptimizerConfig& config);

template <typename T>
double global_grad_norm(const std::vector<nn::Parameter<T>*>& params);

/// Scales every gradient by max_norm / norm when the global L2 norm exceeds
/// max_norm (disabled when max_norm <= 0). Returns the pre-clip norm.
template <typename T>
double clip_gradients(const std::vector<nn::Parameter<T>*>& params, double max_norm);

template <typename T>
class Optimizer {
public:
    Optimizer(OptimizerConfig config, std::vector<nn::Parameter<T>*> params);

    /// Applies one update from the current gradients, then zeroes them.
    void step();

    [[nodiscard]] const OptimizerConfig& config() const { return config_; }
    [[nodiscard]] std::int64_t step_count() const { return steps_; }
    void set_step_count(std::int64_t s) { steps_ = s; }
    [[nodiscard]] double current_lr() const { return effective_lr(std::max<std::int64_t>(steps_, 1), config_); }

    /// Per-parameter state arrays, named "<param>.<slot>", for checkpoints.
    [[nodiscard]] std::vector<std::pair<std::string, nn::Matrix<T>*>> state_arrays();

private:
    OptimizerConfig config_;
    std::vector<nn::Parameter<T>*> params_;
    std::vector<nn::Matrix<T>> first_;   // momentum buffer / Adam m / Adagrad sum
    std::vector<nn::Matrix<T>> second_;  // Adam v
    std::int64_t steps_ = 0;
};

extern template class Optimizer<float>;
extern template class Optimizer<double>;

}  // namespace int2int
