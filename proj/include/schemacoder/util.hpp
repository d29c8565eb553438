#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace schemacoder {

// Backend-independent token estimate: ceil(byte_length / 4).
inline std::size_t estimate_tokens(std::string_view text) {
    return (text.size() + 3) / 4;
}

inline std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hash_hex(std::string_view data);

std::string to_lower(std::string_view s);

std::string trim(std::string_view s);

bool is_blank(std::string_view s);

// Splits on '\n'; a trailing newline does not produce an empty last element.
std::vector<std::string> split_lines(std::string_view text);

// Collapses runs of whitespace to a single space and trims both ends.
std::string normalize_whitespace(std::string_view s);

// Deterministic xorshift-based generator. Used wherever seeded sampling must
// be stable across standard library implementations.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, n); n must be > 0.
    std::uint64_t next_below(std::uint64_t n) { return next() % n; }

    // Uniform double in [0, 1).
    double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

}  // namespace schemacoder
