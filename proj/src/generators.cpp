#include "int2int/generators.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <sstream>

#include "int2int/errors.hpp"

namespace int2int {

namespace {

constexpr std::array<std::pair<std::string_view, Operation>, 11> kOperationNames = {{
    {"gcd", Operation::gcd},
    {"modular_add", Operation::modular_add},
    {"modular_mul", Operation::modular_mul},
    {"fraction_add", Operation::fraction_add},
    {"fraction_product", Operation::fraction_product},
    {"fraction_simplify", Operation::fraction_simplify},
    {"fraction_compare", Operation::fraction_compare},
    {"fraction_determinant", Operation::fraction_determinant},
    {"fraction_round", Operation::fraction_round},
    {"matrix_rank", Operation::matrix_rank},
    {"data", Operation::data},
}};

std::int64_t abs64(std::int64_t v) {
    if (v == std::numeric_limits<std::int64_t>::min()) throw DegenerateInput("integer magnitude overflow");
    return v < 0 ? -v : v;
}

std::int64_t narrow(__int128 v) {
    if (v > std::numeric_limits<std::int64_t>::max() || v < std::numeric_limits<std::int64_t>::min()) {
        throw DegenerateInput("result does not fit in 64 bits");
    }
    return static_cast<std::int64_t>(v);
}

Fraction reduce(__int128 num, __int128 den) {
    if (den == 0) throw DegenerateInput("zero denominator");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    __int128 a = num < 0 ? -num : num;
    __int128 b = den;
    while (b != 0) {
        const __int128 t = a % b;
        a = b;
        b = t;
    }
    const __int128 g = a == 0 ? 1 : a;
    return {narrow(num / g), narrow(den / g)};
}

void check_fraction(Fraction f) {
    if (f.den == 0) throw DegenerateInput("zero denominator");
}

/// Number of base-`base` digits of |v| (1 for zero).
int digit_count(std::int64_t v, std::int64_t base) {
    std::uint64_t m = v < 0 ? std::uint64_t{0} - static_cast<std::uint64_t>(v) : static_cast<std::uint64_t>(v);
    int n = 1;
    while (m >= static_cast<std::uint64_t>(base)) {
        m /= static_cast<std::uint64_t>(base);
        ++n;
    }
    return n;
}

}  // namespace

Operation parse_operation(std::string_view name) {
    for (const auto& [n, op] : kOperationNames) {
        if (n == name) return op;
    }
    throw ConfigError("unknown operation \"" + std::string(name) + "\"");
}

std::string_view operation_name(Operation op) {
    for (const auto& [n, o] : kOperationNames) {
        if (o == op) return n;
    }
    return "unknown";
}

void TaskSpec::validate() const {
    if (min_int > max_int) throw ConfigError("min_int must not exceed max_int");
    if (modulo < 2) throw ConfigError("modulo must be >= 2");
    if (base < 2) throw ConfigError("base must be >= 2");
    if (dim1 < 1 || dim2 < 1) throw ConfigError("matrix dimensions must be >= 1");
    if (max_class < 0) throw ConfigError("max_class must be >= 0");
    if (n_eval_metrics < 0 || n_eval_metrics > 2) throw ConfigError("n_eval_metrics must be in [0, 2]");
    if (n_error_metrics < 0 || n_error_metrics > 1) throw ConfigError("n_error_metrics must be in [0, 1]");
    switch (operation) {
        case Operation::fraction_round:
            if (max_int < 2) throw ConfigError("fraction_round needs max_int >= 2");
            break;
        case Operation::fraction_add:
        case Operation::fraction_product:
        case Operation::fraction_compare:
        case Operation::fraction_determinant:
        case Operation::fraction_simplify:
            if (min_int == 0 && max_int == 0) throw ConfigError("fraction operands cannot all be zero");
            break;
        case Operation::matrix_rank: {
            // Bareiss intermediates are minors; Hadamard bound must fit in 127 bits.
            const int k = std::min(dim1, dim2);
            const double bound_bits =
                k * (std::log2(static_cast<double>(std::max<std::int64_t>(max_int, 1))) + 0.5 * std::log2(k));
            if (bound_bits > 120.0) throw ConfigError("matrix too large for exact 128-bit rank computation");
            if (max_int < 0) throw ConfigError("matrix_rank needs max_int >= 0");
            break;
        }
        default:
            break;
    }
}

bool Fraction::in_lowest_terms() const {
    const std::uint64_t magnitude =
        num < 0 ? std::uint64_t{0} - static_cast<std::uint64_t>(num) : static_cast<std::uint64_t>(num);
    return den > 0 && std::gcd(magnitude, static_cast<std::uint64_t>(den)) == 1;
}

IntMatrix IntMatrix::identity(int n) {
    IntMatrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1;
    return m;
}

// ---------------------------------------------------------------------------
// RngStream

RngStream::RngStream(std::int64_t base_seed, std::int64_t worker_id, std::int64_t rank) {
    if (base_seed < 0) {
        std::random_device rd;
        std::seed_seq seq{rd(), rd(), rd(), rd()};
        engine_.seed(seq);
    } else {
        std::seed_seq seq{static_cast<std::uint64_t>(worker_id), static_cast<std::uint64_t>(rank),
                          static_cast<std::uint64_t>(base_seed)};
        engine_.seed(seq);
    }
}

std::int64_t RngStream::uniform_int(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
}

double RngStream::uniform_real() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

bool RngStream::bernoulli(double p) { return uniform_real() < p; }

std::string RngStream::state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
}

void RngStream::set_state(const std::string& state) {
    std::istringstream is(state);
    is >> engine_;
    if (!is) throw IntegrityError("invalid random generator state");
}

RngStream init_rng(std::int64_t base_seed, std::int64_t worker_id, std::int64_t rank) {
    return RngStream(base_seed, worker_id, rank);
}

// ---------------------------------------------------------------------------
// Solvers

std::int64_t solve_gcd(std::int64_t a, std::int64_t b) {
    if (a == 0 && b == 0) throw DegenerateInput("gcd(0, 0) is undefined");
    std::int64_t x = abs64(a);
    std::int64_t y = abs64(b);
    while (y != 0) {
        const std::int64_t t = x % y;
        x = y;
        y = t;
    }
    return x;
}

std::int64_t solve_modular(ModularOp op, std::int64_t a, std::int64_t b, std::int64_t modulus) {
    if (modulus < 2) throw DegenerateInput("modulus must be >= 2");
    auto residue = [modulus](std::int64_t v) {
        std::int64_t r = v % modulus;
        return r < 0 ? r + modulus : r;
    };
    const __int128 ra = residue(a);
    const __int128 rb = residue(b);
    const __int128 r = op == ModularOp::add ? ra + rb : ra * rb;
    return static_cast<std::int64_t>(r % modulus);
}

Fraction fraction_add(Fraction f1, Fraction f2) {
    check_fraction(f1);
    check_fraction(f2);
    const __int128 num = static_cast<__int128>(f1.num) * f2.den + static_cast<__int128>(f2.num) * f1.den;
    const __int128 den = static_cast<__int128>(f1.den) * f2.den;
    return reduce(num, den);
}

Fraction fraction_product(Fraction f1, Fraction f2) {
    check_fraction(f1);
    check_fraction(f2);
    return reduce(static_cast<__int128>(f1.num) * f2.num, static_cast<__int128>(f1.den) * f2.den);
}

Fraction fraction_simplify(Fraction f) {
    check_fraction(f);
    return reduce(f.num, f.den);
}

std::int64_t fraction_compare(Fraction f1, Fraction f2) {
    check_fraction(f1);
    check_fraction(f2);
    // Compare a/b > c/d with both denominators made positive.
    __int128 a = f1.num, b = f1.den, c = f2.num, d = f2.den;
    if (b < 0) {
        a = -a;
        b = -b;
    }
    if (d < 0) {
        c = -c;
        d = -d;
    }
    return a * d > c * b ? 1 : 0;
}

std::int64_t fraction_determinant(Fraction f1, Fraction f2) {
    check_fraction(f1);
    check_fraction(f2);
    return narrow(static_cast<__int128>(f1.num) * f2.den - static_cast<__int128>(f1.den) * f2.num);
}

std::int64_t fraction_round(std::int64_t a, std::int64_t b) {
    if (b <= 0 || a <= b) throw DegenerateInput("fraction_round requires a > b > 0");
    return a / b;
}

FractionResult solve_fraction(FractionOp op, Fraction f1, std::optional<Fraction> f2) {
    auto second = [&f2]() {
        if (!f2) throw DegenerateInput("operation needs two fractions");
        return *f2;
    };
    switch (op) {
        case FractionOp::add: return fraction_add(f1, second());
        case FractionOp::product: return fraction_product(f1, second());
        case FractionOp::simplify: return fraction_simplify(f1);
        case FractionOp::compare: return fraction_compare(f1, second());
        case FractionOp::determinant: return fraction_determinant(f1, second());
        case FractionOp::round: return fraction_round(f1.num, f1.den);
    }
    throw DegenerateInput("unknown fraction operation");
}

int solve_matrix_rank(const IntMatrix& m) {
    if (m.rows < 1 || m.cols < 1 || m.entries.size() != static_cast<std::size_t>(m.rows) * m.cols) {
        throw DegenerateInput("malformed matrix");
    }
    std::vector<__int128> a(m.entries.begin(), m.entries.end());
    auto at = [&a, cols = m.cols](int r, int c) -> __int128& { return a[static_cast<std::size_t>(r) * cols + c]; };

    __int128 prev = 1;
    int rank = 0;
    for (int c = 0; c < m.cols && rank < m.rows; ++c) {
        int pivot = -1;
        for (int r = rank; r < m.rows; ++r) {
            if (at(r, c) != 0) {
                pivot = r;
                break;
            }
        }
        if (pivot < 0) continue;
        if (pivot != rank) {
            for (int j = 0; j < m.cols; ++j) std::swap(at(pivot, j), at(rank, j));
        }
        const __int128 p = at(rank, c);
        for (int i = rank + 1; i < m.rows; ++i) {
            for (int j = c + 1; j < m.cols; ++j) {
                __int128 lhs = 0, rhs = 0, diff = 0;
                if (__builtin_mul_overflow(p, at(i, j), &lhs) ||
                    __builtin_mul_overflow(at(i, c), at(rank, j), &rhs) ||
                    __builtin_sub_overflow(lhs, rhs, &diff)) {
                    throw DegenerateInput("overflow in fraction-free elimination");
                }
                at(i, j) = diff / prev;
            }
            at(i, c) = 0;
        }
        prev = p;
        ++rank;
    }
    return rank;
}

// ---------------------------------------------------------------------------
// Task

Task::Task(TaskSpec spec) : spec_(spec) { spec_.validate(); }

EncoderSpec Task::input_spec() const {
    if (spec_.operation == Operation::matrix_rank) {
        NumberArraySpec s;
        s.max_dim = std::max(spec_.dim1, spec_.dim2);
        s.dim_prefix = "V";
        s.tensor_dim = 2;
        s.code = ElementCode::positional;
        s.positional.base = spec_.base;
        return s;
    }
    return PositionalIntSpec{spec_.base};
}

EncoderSpec Task::output_spec() const { return PositionalIntSpec{spec_.base}; }

Vocabulary Task::vocabulary() const { return build_vocabulary(input_spec(), output_spec(), spec_.base); }

std::optional<Sample> Task::sample(RngStream& rng, Split /*split*/) const {
    const auto lo = spec_.min_int;
    const auto hi = spec_.max_int;
    auto draw = [&rng, lo, hi]() { return rng.uniform_int(lo, hi); };
    using Ints = std::vector<std::int64_t>;

    switch (spec_.operation) {
        case Operation::gcd: {
            const auto a = draw(), b = draw();
            if (a == 0 && b == 0) return std::nullopt;
            return Sample{Ints{a, b}, solve_gcd(a, b)};
        }
        case Operation::modular_add:
        case Operation::modular_mul: {
            const auto a = draw(), b = draw();
            const auto op = spec_.operation == Operation::modular_add ? ModularOp::add : ModularOp::mul;
            return Sample{Ints{a, b}, solve_modular(op, a, b, spec_.modulo)};
        }
        case Operation::fraction_add:
        case Operation::fraction_product:
        case Operation::fraction_compare:
        case Operation::fraction_determinant: {
            const auto a = draw(), b = draw(), c = draw(), d = draw();
            if (b == 0 || d == 0) return std::nullopt;
            const Fraction f1{a, b}, f2{c, d};
            MathObject solution;
            switch (spec_.operation) {
                case Operation::fraction_add: solution = fraction_add(f1, f2); break;
                case Operation::fraction_product: solution = fraction_product(f1, f2); break;
                case Operation::fraction_compare: solution = fraction_compare(f1, f2); break;
                default: solution = fraction_determinant(f1, f2); break;
            }
            return Sample{Ints{a, b, c, d}, solution};
        }
        case Operation::fraction_simplify: {
            const auto a = draw(), b = draw();
            if (b == 0) return std::nullopt;
            return Sample{Ints{a, b}, fraction_simplify({a, b})};
        }
        case Operation::fraction_round: {
            const auto x = rng.uniform_int(std::max<std::int64_t>(lo, 1), hi);
            const auto y = rng.uniform_int(std::max<std::int64_t>(lo, 1), hi);
            if (x == y) return std::nullopt;
            const auto a = std::max(x, y), b = std::min(x, y);
            return Sample{Ints{a, b}, fraction_round(a, b)};
        }
        case Operation::matrix_rank: {
            IntMatrix m(spec_.dim1, spec_.dim2);
            for (auto& e : m.entries) e = rng.uniform_int(-hi, hi);
            const auto rank = static_cast<std::int64_t>(solve_matrix_rank(m));
            return Sample{std::move(m), rank};
        }
        case Operation::data:
            throw ConfigError("operation \"data\" has no generator");
    }
    return std::nullopt;
}

Sample Task::generate(RngStream& rng, Split split) const {
    while (true) {
        try {
            if (auto s = sample(rng, split)) return std::move(*s);
        } catch (const DegenerateInput&) {
            // Retry with fresh draws.
        }
    }
}

TokenSeq Task::encode_problem(const MathObject& problem) const {
    if (const auto* m = std::get_if<IntMatrix>(&problem)) {
        const auto& spec = std::get<NumberArraySpec>(input_spec());
        return encode_number_array(IntArray{{m->rows, m->cols}, m->entries}, spec);
    }
    const PositionalIntSpec pos{spec_.base};
    TokenSeq out;
    std::visit(
        [&](const auto& p) {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, std::int64_t>) {
                append_positional_int(out, p, pos);
            } else if constexpr (std::is_same_v<P, Fraction>) {
                append_positional_int(out, p.num, pos);
                append_positional_int(out, p.den, pos);
            } else if constexpr (std::is_same_v<P, std::vector<std::int64_t>>) {
                for (auto v : p) append_positional_int(out, v, pos);
            }
        },
        problem);
    return out;
}

TokenSeq Task::encode_solution(const MathObject& solution) const {
    const PositionalIntSpec pos{spec_.base};
    TokenSeq out;
    std::visit(
        [&](const auto& s) {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, std::int64_t>) {
                append_positional_int(out, s, pos);
            } else if constexpr (std::is_same_v<S, Fraction>) {
                append_positional_int(out, s.num, pos);
                append_positional_int(out, s.den, pos);
            } else if constexpr (std::is_same_v<S, std::vector<std::int64_t>>) {
                for (auto v : s) append_positional_int(out, v, pos);
            } else {
                throw ConfigError("matrix solutions are not supported");
            }
        },
        solution);
    return out;
}

MathObject Task::decode_solution(std::span<const Token> tokens) const {
    const PositionalIntSpec pos{spec_.base};
    if (tokens.empty()) throw MalformedSequence("empty prediction");
    switch (spec_.operation) {
        case Operation::fraction_add:
        case Operation::fraction_product:
        case Operation::fraction_simplify: {
            const auto values = parse_positional_ints(tokens, pos);
            if (values.size() != 2) throw MalformedSequence("expected a fraction (two integers)");
            if (values[1] == 0) throw MalformedSequence("zero denominator");
            return Fraction{values[0], values[1]};
        }
        case Operation::data: {
            // File data: a single bare digit token, or a run of signed integers.
            if (tokens.size() == 1 && is_digit_token(tokens[0], spec_.base)) {
                return parse_symbolic_int(tokens, SymbolicIntSpec{0, spec_.base - 1, ""});
            }
            auto values = parse_positional_ints(tokens, pos);
            if (values.size() == 1) return values.front();
            return values;
        }
        default:
            return parse_positional_int(tokens, pos);
    }
}

namespace {

std::optional<double> scalar_value(const MathObject& obj) {
    if (const auto* v = std::get_if<std::int64_t>(&obj)) return static_cast<double>(*v);
    if (const auto* f = std::get_if<Fraction>(&obj)) return static_cast<double>(f->num) / static_cast<double>(f->den);
    return std::nullopt;
}

}  // namespace

Evaluation Task::evaluate(const MathObject& /*problem*/, const MathObject& solution,
                          const MathObject& predicted) const {
    Evaluation result;
    // Every built-in task has a unique canonical solution, so correctness is
    // structural equality with the reference.
    result.base = predicted == solution ? 1 : 0;

    const auto truth = scalar_value(solution);
    const auto guess = scalar_value(predicted);
    auto within = [&](double rel) {
        if (!truth || !guess) return 0.0;
        return std::abs(*guess - *truth) <= rel * std::max(std::abs(*truth), 1.0) ? 1.0 : 0.0;
    };
    if (spec_.n_eval_metrics >= 1) result.eval_metrics.push_back(within(0.01));
    if (spec_.n_eval_metrics >= 2) result.eval_metrics.push_back(within(0.1));
    if (spec_.n_error_metrics >= 1) {
        const bool sign_error = truth && guess && *truth != 0 && ((*truth > 0) != (*guess > 0));
        result.error_metrics.push_back(sign_error ? 1.0 : 0.0);
    }
    return result;
}

std::optional<int> Task::code_class(const MathObject& /*problem*/, const MathObject& solution) const {
    switch (spec_.operation) {
        case Operation::gcd:
        case Operation::modular_add:
        case Operation::modular_mul:
        case Operation::matrix_rank:
        case Operation::fraction_compare:
        case Operation::data: {
            const auto* v = std::get_if<std::int64_t>(&solution);
            if (!v || *v < 0) return std::nullopt;
            return static_cast<int>(std::min<std::int64_t>(*v, spec_.max_class));
        }
        default:
            return std::nullopt;
    }
}

bool Task::outputs_fit_in_inputs() const {
    switch (spec_.operation) {
        case Operation::gcd:
        case Operation::fraction_simplify:
        case Operation::fraction_round:
        case Operation::fraction_compare:
        case Operation::matrix_rank:
        case Operation::data:
            return true;
        case Operation::modular_add:
        case Operation::modular_mul:
            // Shortest input is two single-digit integers (4 tokens).
            return 1 + digit_count(spec_.modulo - 1, spec_.base) <= 4;
        default:
            return false;
    }
}

}  // namespace int2int
