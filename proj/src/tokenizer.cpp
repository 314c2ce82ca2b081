#include "int2int/tokenizer.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <tuple>

#include "int2int/errors.hpp"

namespace int2int {

namespace {

bool parse_decimal(std::string_view text, std::int64_t& value) {
    if (text.empty()) return false;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    return ec == std::errc() && ptr == text.data() + text.size();
}

std::string describe(std::span<const Token> seq) {
    std::string out = "\"";
    out += join_tokens(seq);
    out += "\"";
    return out;
}

}  // namespace

bool is_digit_token(std::string_view token, std::int64_t base) {
    if (token.empty() || token.size() > 19) return false;
    if (!std::all_of(token.begin(), token.end(), [](char c) { return c >= '0' && c <= '9'; })) return false;
    if (token.size() > 1 && token.front() == '0') return false;
    std::int64_t value = 0;
    if (!parse_decimal(token, value)) return false;
    return value < base;
}

// ---------------------------------------------------------------------------
// Positional integers

void append_positional_int(TokenSeq& out, std::int64_t value, const PositionalIntSpec& spec) {
    if (spec.base < 2) throw OutOfRange("positional base must be >= 2");
    out.emplace_back(value >= 0 ? kPlusToken : kMinusToken);
    // Work on the magnitude as unsigned so INT64_MIN is representable.
    std::uint64_t magnitude = value >= 0 ? static_cast<std::uint64_t>(value)
                                         : std::uint64_t{0} - static_cast<std::uint64_t>(value);
    const auto base = static_cast<std::uint64_t>(spec.base);
    const std::size_t first_digit = out.size();
    do {
        out.push_back(std::to_string(magnitude % base));
        magnitude /= base;
    } while (magnitude != 0);
    std::reverse(out.begin() + static_cast<std::ptrdiff_t>(first_digit), out.end());
}

TokenSeq encode_positional_int(std::int64_t value, const PositionalIntSpec& spec) {
    TokenSeq out;
    append_positional_int(out, value, spec);
    return out;
}

std::int64_t parse_positional_int(std::span<const Token> seq, std::size_t& pos,
                                  const PositionalIntSpec& spec) {
    if (pos >= seq.size()) throw MalformedSequence("expected a sign token, found end of sequence");
    const Token& sign = seq[pos];
    if (sign != kPlusToken && sign != kMinusToken) {
        throw MalformedSequence("expected a sign token, found \"" + sign + "\" in " + describe(seq));
    }
    const bool negative = sign == kMinusToken;
    std::size_t cursor = pos + 1;
    const auto base = static_cast<unsigned __int128>(spec.base);
    unsigned __int128 magnitude = 0;
    std::size_t n_digits = 0;
    bool leading_zero = false;
    while (cursor < seq.size() && seq[cursor] != kPlusToken && seq[cursor] != kMinusToken) {
        const Token& tok = seq[cursor];
        if (!is_digit_token(tok, spec.base)) {
            throw MalformedSequence("\"" + tok + "\" is not a base-" + std::to_string(spec.base) +
                                    " digit in " + describe(seq));
        }
        std::int64_t digit = 0;
        parse_decimal(tok, digit);
        if (n_digits == 0 && digit == 0) leading_zero = true;
        magnitude = magnitude * base + static_cast<unsigned __int128>(digit);
        if (magnitude > static_cast<unsigned __int128>(std::numeric_limits<std::int64_t>::max()) + 1) {
            throw MalformedSequence("integer overflow in " + describe(seq));
        }
        ++n_digits;
        ++cursor;
    }
    if (n_digits == 0) throw MalformedSequence("sign without digits in " + describe(seq));
    if (leading_zero && (n_digits > 1 || negative)) {
        throw MalformedSequence("non-canonical zero or leading zero in " + describe(seq));
    }
    if (!negative && magnitude > static_cast<unsigned __int128>(std::numeric_limits<std::int64_t>::max())) {
        throw MalformedSequence("integer overflow in " + describe(seq));
    }
    pos = cursor;
    if (negative) {
        return static_cast<std::int64_t>(std::uint64_t{0} - static_cast<std::uint64_t>(magnitude));
    }
    return static_cast<std::int64_t>(magnitude);
}

std::int64_t parse_positional_int(std::span<const Token> seq, const PositionalIntSpec& spec) {
    std::size_t pos = 0;
    const std::int64_t value = parse_positional_int(seq, pos, spec);
    if (pos != seq.size()) throw MalformedSequence("trailing tokens after integer in " + describe(seq));
    return value;
}

std::vector<std::int64_t> parse_positional_ints(std::span<const Token> seq, const PositionalIntSpec& spec) {
    std::vector<std::int64_t> values;
    std::size_t pos = 0;
    while (pos < seq.size()) values.push_back(parse_positional_int(seq, pos, spec));
    return values;
}

// ---------------------------------------------------------------------------
// Symbolic integers

TokenSeq encode_symbolic_int(std::int64_t value, const SymbolicIntSpec& spec) {
    if (value < spec.min || value > spec.max) {
        throw OutOfRange(std::to_string(value) + " outside [" + std::to_string(spec.min) + ", " +
                         std::to_string(spec.max) + "]");
    }
    return {spec.prefix + std::to_string(value)};
}

std::int64_t parse_symbolic_int(std::span<const Token> seq, std::size_t& pos, const SymbolicIntSpec& spec) {
    if (pos >= seq.size()) throw MalformedSequence("expected a symbolic token, found end of sequence");
    std::string_view tok = seq[pos];
    if (!tok.starts_with(spec.prefix)) throw MalformedSequence("unknown symbolic token \"" + seq[pos] + "\"");
    tok.remove_prefix(spec.prefix.size());
    std::int64_t value = 0;
    if (!parse_decimal(tok, value) || std::to_string(value) != tok) {
        throw MalformedSequence("unknown symbolic token \"" + seq[pos] + "\"");
    }
    if (value < spec.min || value > spec.max) {
        throw MalformedSequence("symbolic value out of range: \"" + seq[pos] + "\"");
    }
    ++pos;
    return value;
}

std::int64_t parse_symbolic_int(std::span<const Token> seq, const SymbolicIntSpec& spec) {
    std::size_t pos = 0;
    const std::int64_t value = parse_symbolic_int(seq, pos, spec);
    if (pos != seq.size()) throw MalformedSequence("trailing tokens after symbol in " + describe(seq));
    return value;
}

// ---------------------------------------------------------------------------
// Number arrays

TokenSeq encode_number_array(const IntArray& array, const NumberArraySpec& spec) {
    if (static_cast<int>(array.shape.size()) != spec.tensor_dim) {
        throw OutOfRange("array has " + std::to_string(array.shape.size()) + " dimensions, expected " +
                         std::to_string(spec.tensor_dim));
    }
    std::size_t count = 1;
    for (int dim : array.shape) {
        if (dim < 1 || dim > spec.max_dim) {
            throw OutOfRange("array dimension " + std::to_string(dim) + " outside [1, " +
                             std::to_string(spec.max_dim) + "]");
        }
        count *= static_cast<std::size_t>(dim);
    }
    if (count != array.values.size()) throw OutOfRange("array shape does not match element count");

    TokenSeq out;
    for (int dim : array.shape) out.push_back(spec.dim_prefix + std::to_string(dim));
    for (std::int64_t v : array.values) {
        if (spec.code == ElementCode::positional) {
            append_positional_int(out, v, spec.positional);
        } else {
            auto sym = encode_symbolic_int(v, spec.symbolic);
            out.push_back(std::move(sym.front()));
        }
    }
    return out;
}

IntArray parse_number_array(std::span<const Token> seq, std::size_t& pos, const NumberArraySpec& spec) {
    IntArray array;
    std::size_t count = 1;
    std::size_t cursor = pos;
    for (int d = 0; d < spec.tensor_dim; ++d) {
        if (cursor >= seq.size()) throw MalformedSequence("missing dimension token");
        std::string_view tok = seq[cursor];
        std::int64_t dim = 0;
        if (!tok.starts_with(spec.dim_prefix) ||
            !parse_decimal(tok.substr(spec.dim_prefix.size()), dim) ||
            std::to_string(dim) != tok.substr(spec.dim_prefix.size()) || dim < 1 || dim > spec.max_dim) {
            throw MalformedSequence("unknown dimension token \"" + seq[cursor] + "\"");
        }
        array.shape.push_back(static_cast<int>(dim));
        count *= static_cast<std::size_t>(dim);
        ++cursor;
    }
    array.values.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        if (cursor >= seq.size()) throw MalformedSequence("array has fewer elements than its dimensions declare");
        if (spec.code == ElementCode::positional) {
            array.values.push_back(parse_positional_int(seq, cursor, spec.positional));
        } else {
            array.values.push_back(parse_symbolic_int(seq, cursor, spec.symbolic));
        }
    }
    pos = cursor;
    return array;
}

IntArray parse_number_array(std::span<const Token> seq, const NumberArraySpec& spec) {
    std::size_t pos = 0;
    IntArray array = parse_number_array(seq, pos, spec);
    if (pos != seq.size()) throw MalformedSequence("array has more elements than its dimensions declare");
    return array;
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary(std::vector<Token> tokens) : tokens_(std::move(tokens)) {
    index_.reserve(tokens_.size());
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        auto [it, inserted] = index_.emplace(tokens_[i], static_cast<TokenId>(i));
        if (!inserted) throw ConfigError("duplicate vocabulary token \"" + tokens_[i] + "\"");
    }
    auto lookup = [this](std::string_view t) {
        auto it = index_.find(std::string(t));
        return it == index_.end() ? TokenId{-1} : it->second;
    };
    pad_id_ = lookup(kPadToken);
    eos_id_ = lookup(kEosToken);
    unk_id_ = lookup(kUnkToken);
}

bool Vocabulary::contains(std::string_view token) const { return index_.contains(std::string(token)); }

TokenId Vocabulary::id(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) throw UnknownToken("\"" + std::string(token) + "\"");
    return it->second;
}

const Token& Vocabulary::token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) throw UnknownId(std::to_string(id));
    return tokens_[static_cast<std::size_t>(id)];
}

namespace {

struct DeclaredToken {
    std::string prefix;
    std::int64_t value;
    auto operator<=>(const DeclaredToken&) const = default;
    [[nodiscard]] std::string str() const { return prefix + std::to_string(value); }
};

void declare(const EncoderSpec& spec, std::vector<DeclaredToken>& out) {
    auto symbolic = [&out](const SymbolicIntSpec& s) {
        for (std::int64_t v = s.min; v <= s.max; ++v) out.push_back({s.prefix, v});
    };
    auto positional = [&out](const PositionalIntSpec& s) {
        for (std::int64_t v = 0; v < s.base; ++v) out.push_back({"", v});
    };
    std::visit(
        [&](const auto& s) {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, PositionalIntSpec>) {
                positional(s);
            } else if constexpr (std::is_same_v<S, SymbolicIntSpec>) {
                symbolic(s);
            } else {
                for (int d = 1; d <= s.max_dim; ++d) out.push_back({s.dim_prefix, d});
                if (s.code == ElementCode::positional) {
                    positional(s.positional);
                } else {
                    symbolic(s.symbolic);
                }
            }
        },
        spec);
}

}  // namespace

Vocabulary build_vocabulary(const EncoderSpec& input_spec, const EncoderSpec& output_spec, std::int64_t base) {
    if (base < 2) throw ConfigError("base must be >= 2");
    std::vector<Token> tokens = {std::string(kPadToken), std::string(kEosToken), std::string(kUnkToken),
                                 std::string(kPlusToken), std::string(kMinusToken),
                                 "(", ")", "<sep>"};
    for (int i = 0; i < 10; ++i) tokens.push_back("<SPECIAL_" + std::to_string(i) + ">");
    for (std::int64_t d = 0; d < base; ++d) tokens.push_back(std::to_string(d));

    std::vector<DeclaredToken> declared;
    declare(input_spec, declared);
    declare(output_spec, declared);
    std::sort(declared.begin(), declared.end());
    declared.erase(std::unique(declared.begin(), declared.end()), declared.end());

    std::unordered_map<std::string, bool> present;
    for (const auto& t : tokens) present.emplace(t, true);
    for (const auto& d : declared) {
        std::string s = d.str();
        if (present.emplace(s, true).second) tokens.push_back(std::move(s));
    }
    return Vocabulary(std::move(tokens));
}

IdSeq tokens_to_ids(std::span<const Token> seq, const Vocabulary& vocab) {
    IdSeq ids;
    ids.reserve(seq.size());
    for (const auto& tok : seq) ids.push_back(vocab.id(tok));
    return ids;
}

TokenSeq ids_to_tokens(std::span<const TokenId> ids, const Vocabulary& vocab) {
    TokenSeq seq;
    seq.reserve(ids.size());
    for (TokenId id : ids) seq.push_back(vocab.token(id));
    return seq;
}

TokenSeq split_tokens(std::string_view text) {
    TokenSeq out;
    if (text.empty()) return out;
    std::size_t start = 0;
    while (true) {
        const std::size_t end = text.find(' ', start);
        out.emplace_back(text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    return out;
}

std::string join_tokens(std::span<const Token> seq) {
    std::string out;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (i) out += ' ';
        out += seq[i];
    }
    return out;
}

}  // namespace int2int
