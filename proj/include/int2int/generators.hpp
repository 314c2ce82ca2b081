#pragma once

// Problem generators, exact solvers and prediction verifiers for the built-in
// integer arithmetic tasks.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "int2int/tokenizer.hpp"

namespace int2int {

enum class Operation {
    gcd,
    modular_add,
    modular_mul,
    fraction_add,
    fraction_product,
    fraction_simplify,
    fraction_compare,
    fraction_determinant,
    fraction_round,
    matrix_rank,
    data,  // examples come from files; no generator
};

Operation parse_operation(std::string_view name);
std::string_view operation_name(Operation op);

struct TaskSpec {
    Operation operation = Operation::gcd;
    std::int64_t min_int = 1;
    std::int64_t max_int = 1'000'000;
    std::int64_t modulo = 67;
    std::int64_t base = 1000;
    int dim1 = 5;
    int dim2 = 5;
    int max_class = 100;
    int n_eval_metrics = 0;
    int n_error_metrics = 0;

    /// Throws ConfigError on inconsistent settings.
    void validate() const;
};

struct Fraction {
    std::int64_t num = 0;
    std::int64_t den = 1;

    friend bool operator==(const Fraction&, const Fraction&) = default;
    [[nodiscard]] bool in_lowest_terms() const;
};

struct IntMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<std::int64_t> entries;  // row-major

    IntMatrix() = default;
    IntMatrix(int r, int c) : rows(r), cols(c), entries(static_cast<std::size_t>(r) * c, 0) {}
    static IntMatrix identity(int n);

    std::int64_t& operator()(int r, int c) { return entries[static_cast<std::size_t>(r) * cols + c]; }
    std::int64_t operator()(int r, int c) const { return entries[static_cast<std::size_t>(r) * cols + c]; }
    friend bool operator==(const IntMatrix&, const IntMatrix&) = default;
};

/// Seeded random stream. Equal seed components give equal draw sequences; a
/// negative base seed draws the seed from the OS entropy source.
class RngStream {
public:
    RngStream() : RngStream(0, 0, 0) {}
    RngStream(std::int64_t base_seed, std::int64_t worker_id, std::int64_t rank);

    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
    double uniform_real();
    bool bernoulli(double p);
    std::uint64_t next() { return engine_(); }
    std::mt19937_64& engine() { return engine_; }

    [[nodiscard]] std::string state() const;
    void set_state(const std::string& state);

private:
    std::mt19937_64 engine_;
};

RngStream init_rng(std::int64_t base_seed, std::int64_t worker_id, std::int64_t rank);

using MathObject = std::variant<std::int64_t, Fraction, IntMatrix, std::vector<std::int64_t>>;

struct Sample {
    MathObject problem;
    MathObject solution;
};

enum class Split { train, valid };

// Exact solvers -------------------------------------------------------------

std::int64_t solve_gcd(std::int64_t a, std::int64_t b);

enum class ModularOp { add, mul };
std::int64_t solve_modular(ModularOp op, std::int64_t a, std::int64_t b, std::int64_t modulus);

enum class FractionOp { add, product, simplify, compare, determinant, round };
using FractionResult = std::variant<Fraction, std::int64_t>;

Fraction fraction_add(Fraction f1, Fraction f2);
Fraction fraction_product(Fraction f1, Fraction f2);
Fraction fraction_simplify(Fraction f);
std::int64_t fraction_compare(Fraction f1, Fraction f2);
/// a*d - b*c for f1 = a/b, f2 = c/d.
std::int64_t fraction_determinant(Fraction f1, Fraction f2);
/// floor(a/b) for a > b > 0.
std::int64_t fraction_round(std::int64_t a, std::int64_t b);
FractionResult solve_fraction(FractionOp op, Fraction f1, std::optional<Fraction> f2 = std::nullopt);

/// Exact rank by fraction-free (Bareiss) elimination over 128-bit integers.
int solve_matrix_rank(const IntMatrix& m);

// Verification ---------------------------------------------------------------

struct Evaluation {
    int base = 0;
    std::vector<double> eval_metrics;
    std::vector<double> error_metrics;
};

/// Binds a TaskSpec to its sampler, tokenizers and verifier.
class Task {
public:
    explicit Task(TaskSpec spec);

    [[nodiscard]] const TaskSpec& spec() const { return spec_; }
    [[nodiscard]] Operation operation() const { return spec_.operation; }
    [[nodiscard]] bool has_generator() const { return spec_.operation != Operation::data; }

    [[nodiscard]] EncoderSpec input_spec() const;
    [[nodiscard]] EncoderSpec output_spec() const;
    [[nodiscard]] Vocabulary vocabulary() const;

    /// One draw; nullopt when the draw is rejected.
    std::optional<Sample> sample(RngStream& rng, Split split) const;
    /// Retries until a valid pair is produced.
    Sample generate(RngStream& rng, Split split) const;

    [[nodiscard]] TokenSeq encode_problem(const MathObject& problem) const;
    [[nodiscard]] TokenSeq encode_solution(const MathObject& solution) const;
    /// Throws MalformedSequence when the tokens do not describe a solution.
    [[nodiscard]] MathObject decode_solution(std::span<const Token> tokens) const;

    [[nodiscard]] Evaluation evaluate(const MathObject& problem, const MathObject& solution,
                                      const MathObject& predicted) const;
    [[nodiscard]] std::optional<int> code_class(const MathObject& problem, const MathObject& solution) const;

    /// True when every solution is encoded in no more tokens than its problem.
    [[nodiscard]] bool outputs_fit_in_inputs() const;

private:
    TaskSpec spec_;
};

}  // namespace int2int
