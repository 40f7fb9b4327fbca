#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <unordered_map>
#include <vector>

#include "hsnd/error.hpp"

namespace hsnd {

inline bool is_power_of_two(std::size_t n) { return n && (n & (n - 1)) == 0; }

namespace detail {

// Twiddle factors e^{-2pi i j/n} for j in [0, n/2), computed directly per
// entry so no rounding accumulates across stages.
template <typename T>
const std::vector<std::complex<T>>& twiddle_table(std::size_t n) {
  thread_local std::unordered_map<std::size_t, std::vector<std::complex<T>>> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<std::complex<T>> table(n / 2);
  for (std::size_t j = 0; j < n / 2; ++j) {
    const double ang = -2.0 * M_PI * static_cast<double>(j) / static_cast<double>(n);
    table[j] = std::complex<T>(static_cast<T>(std::cos(ang)),
                               static_cast<T>(std::sin(ang)));
  }
  return cache.emplace(n, std::move(table)).first->second;
}

}  // namespace detail

// In-place iterative radix-2 transform, unnormalized. sign = -1 gives the
// forward DFT convention sum x[n] e^{-2pi i kn/N}; sign = +1 the conjugate.
template <typename T>
void fft_inplace(std::vector<std::complex<T>>& a, int sign) {
  const std::size_t n = a.size();
  if (!is_power_of_two(n)) throw ArgumentError("fft: size must be a power of two");
  if (n < 2) return;

  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  const auto& table = detail::twiddle_table<T>(n);
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t step = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        std::complex<T> w = table[k * step];
        if (sign > 0) w = std::conj(w);
        const std::complex<T> u = a[i + k];
        const std::complex<T> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
      }
    }
  }
}

}  // namespace hsnd
