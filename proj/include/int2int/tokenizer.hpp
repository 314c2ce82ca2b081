#pragma once

// Integer tokenizers and the global vocabulary.
//
// Integers are written either positionally (a sign token followed by base-B
// digits, most significant first) or symbolically (one token per value in a
// bounded range). Arrays carry their dimensions as prefix tokens and then the
// row-major elements.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace int2int {

using Token = std::string;
using TokenSeq = std::vector<Token>;
using TokenId = std::int32_t;
using IdSeq = std::vector<TokenId>;

inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kEosToken = "<s>";
inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kPlusToken = "+";
inline constexpr std::string_view kMinusToken = "-";

struct PositionalIntSpec {
    std::int64_t base = 10;
};

struct SymbolicIntSpec {
    std::int64_t min = 0;
    std::int64_t max = 1;
    std::string prefix;
};

enum class ElementCode { positional, symbolic };

struct NumberArraySpec {
    int max_dim = 100;
    std::string dim_prefix = "V";
    int tensor_dim = 1;
    ElementCode code = ElementCode::positional;
    PositionalIntSpec positional;
    SymbolicIntSpec symbolic;
};

using EncoderSpec = std::variant<PositionalIntSpec, SymbolicIntSpec, NumberArraySpec>;

/// Dense integer array; `shape` has one entry per tensor dimension.
struct IntArray {
    std::vector<int> shape;
    std::vector<std::int64_t> values;

    friend bool operator==(const IntArray&, const IntArray&) = default;
};

TokenSeq encode_positional_int(std::int64_t value, const PositionalIntSpec& spec);
void append_positional_int(TokenSeq& out, std::int64_t value, const PositionalIntSpec& spec);

/// Parses one integer starting at `pos` and advances `pos` past it.
std::int64_t parse_positional_int(std::span<const Token> seq, std::size_t& pos,
                                  const PositionalIntSpec& spec);
/// Parses a sequence holding exactly one integer.
std::int64_t parse_positional_int(std::span<const Token> seq, const PositionalIntSpec& spec);
/// Parses a concatenation of integers; the whole sequence must be consumed.
std::vector<std::int64_t> parse_positional_ints(std::span<const Token> seq,
                                                const PositionalIntSpec& spec);

TokenSeq encode_symbolic_int(std::int64_t value, const SymbolicIntSpec& spec);
std::int64_t parse_symbolic_int(std::span<const Token> seq, std::size_t& pos,
                                const SymbolicIntSpec& spec);
std::int64_t parse_symbolic_int(std::span<const Token> seq, const SymbolicIntSpec& spec);

TokenSeq encode_number_array(const IntArray& array, const NumberArraySpec& spec);
IntArray parse_number_array(std::span<const Token> seq, std::size_t& pos, const NumberArraySpec& spec);
IntArray parse_number_array(std::span<const Token> seq, const NumberArraySpec& spec);

/// True if `token` is the canonical decimal spelling of a digit in [0, base).
bool is_digit_token(std::string_view token, std::int64_t base);

class Vocabulary {
public:
    Vocabulary() = default;
    explicit Vocabulary(std::vector<Token> tokens);

    [[nodiscard]] std::size_t size() const { return tokens_.size(); }
    [[nodiscard]] const std::vector<Token>& tokens() const { return tokens_; }
    [[nodiscard]] bool contains(std::string_view token) const;
    [[nodiscard]] TokenId id(std::string_view token) const;
    [[nodiscard]] const Token& token(TokenId id) const;

    [[nodiscard]] TokenId pad_id() const { return pad_id_; }
    [[nodiscard]] TokenId eos_id() const { return eos_id_; }
    [[nodiscard]] TokenId unk_id() const { return unk_id_; }

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

private:
    std::vector<Token> tokens_;
    std::unordered_map<std::string, TokenId> index_;
    TokenId pad_id_ = -1;
    TokenId eos_id_ = -1;
    TokenId unk_id_ = -1;
};

/// Structural tokens, signs, separators, specials, digits 0..base-1, then
/// every token declared by the two encoders (sorted by prefix, then value).
Vocabulary build_vocabulary(const EncoderSpec& input_spec, const EncoderSpec& output_spec,
                            std::int64_t base);

IdSeq tokens_to_ids(std::span<const Token> seq, const Vocabulary& vocab);
TokenSeq ids_to_tokens(std::span<const TokenId> ids, const Vocabulary& vocab);

/// Splits on single spaces. An empty string yields an empty sequence.
TokenSeq split_tokens(std::string_view text);
std::string join_tokens(std::span<const Token> seq);

}  // namespace int2int
