#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace looplab {

using Rng = std::mt19937_64;

/// Uniform index in [0, n). Uses plain modulo so sequences are identical
/// across standard library implementations.
std::size_t uniform_index(Rng& rng, std::size_t n);

/// Uniform real in [0, 1) from the top 53 bits of one draw.
double uniform_unit(Rng& rng);

/// Fisher-Yates shuffle driven by uniform_index.
template <typename T>
void shuffle_in_place(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::swap(items[i - 1], items[uniform_index(rng, i)]);
  }
}

/// Derives an independent stream seed from a base seed and a purpose tag.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                          std::uint64_t index = 0);

std::uint64_t fnv1a(std::string_view text);

/// Shortest round-trip decimal text for a double ("0.1", "3", "-2.5").
std::string format_real(double value);

/// Fixed-point text with the given number of decimals.
std::string format_fixed(double value, int decimals);

/// Integer text after rounding half away from zero.
std::string format_integer(double value);

std::string_view trim(std::string_view text);

std::vector<std::string> split_lines(std::string_view text);

double mean(std::span<const double> values);

/// Standard error of the mean (sample standard deviation / sqrt(n)); 0 for n < 2.
double standard_error(std::span<const double> values);

}  // namespace looplab
