#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace iclmia {

// Base class for all toolkit errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// FNV-1a 64-bit hash over the exact bytes of the input.
std::uint64_t fnv1a64(std::string_view bytes);

// splitmix64 step; also used to mix seed components into one stream seed.
std::uint64_t splitmix64(std::uint64_t& state);

// Combines seed components into a single 64-bit stream seed.
std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts);

// Counter-based uniform draw in [0, 1). Stateless: the same (seed, counter)
// pair always yields the same value, independent of call order.
double uniform01(std::uint64_t seed, std::uint64_t counter);

// Word = maximal run of non-whitespace characters. This is the single
// tokenizer shared by prefixes, word counts, and frequency tallies.
std::vector<std::string> split_words(std::string_view text);
std::size_t word_count(std::string_view text);

// Words joined by single spaces (collapses interior whitespace).
std::string join_words(const std::vector<std::string>& words);
std::string normalize_words(std::string_view text);

// Removes leading/trailing ASCII whitespace.
std::string trim(std::string_view s);

// Lowercases ASCII letters.
std::string ascii_lower(std::string_view s);

}  // namespace iclmia
