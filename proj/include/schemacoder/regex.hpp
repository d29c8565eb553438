#pragma once

#include <bitset>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "schemacoder/errors.hpp"

namespace schemacoder {

class RegexSyntaxError : public Error {
public:
    using Error::Error;
};

// Byte-oriented backtracking regex engine with an explicit step budget.
//
// Supported syntax: literals, '.', character classes with ranges and
// negation, \d \D \w \W \s \S escapes, anchors ^ $, \b \B, capturing and
// (?:...) groups, alternation, and the quantifiers * + ? {m} {m,} {m,n}
// with lazy '?' variants. Matching is always against the full line.
class Regex {
public:
    struct Outcome {
        bool matched = false;
        bool step_limit_hit = false;
    };

    static Regex compile(std::string_view pattern);

    // Full-line match. On success fills `captures` (one entry per group, in
    // group order; unmatched optional groups yield empty strings). `budget`
    // is decremented as the engine runs; when it reaches zero the attempt
    // aborts with step_limit_hit set.
    Outcome full_match(std::string_view line, std::vector<std::string>* captures,
                       std::int64_t& budget) const;

    bool matches(std::string_view line) const;

    int group_count() const { return group_count_; }
    const std::string& pattern() const { return pattern_; }

    // Count of literal characters in the pattern source (escaped literals
    // count once); feeds the specificity score.
    int literal_count() const { return literal_count_; }

private:
    enum class Op : std::uint8_t {
        byte,
        any,
        klass,
        split,
        jump,
        save,
        progress,
        assert_start,
        assert_end,
        assert_word,
        assert_non_word,
        match,
    };

    struct Inst {
        Op op;
        unsigned char byte = 0;
        std::int32_t x = 0;
        std::int32_t y = 0;
    };

    Regex() = default;

    std::string pattern_;
    std::vector<Inst> prog_;
    std::vector<std::bitset<256>> classes_;
    int group_count_ = 0;
    int loop_count_ = 0;
    int literal_count_ = 0;

    // Prefilters derived from the parse tree.
    std::size_t min_len_ = 0;
    std::size_t max_len_ = 0;  // SIZE_MAX when unbounded
    bool nullable_ = false;
    bool first_any_ = false;
    std::bitset<256> first_bytes_;

    friend class RegexCompiler;
};

}  // namespace schemacoder
