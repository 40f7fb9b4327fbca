#include "hsnd/signal.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "hsnd/error.hpp"
#include "hsnd/rng.hpp"

namespace hsnd {

void AudioClip::validate() const {
  if (samples.empty()) throw ArgumentError("audio clip is empty");
  if (sample_rate <= 0) throw ArgumentError("audio clip has no sample rate");
  for (float s : samples)
    if (!std::isfinite(s)) throw ArgumentError("audio clip contains non-finite samples");
}

CoordinateGrid make_grid(std::size_t n) {
  if (n < 2) throw ArgumentError("make_grid: need at least 2 points");
  CoordinateGrid grid;
  grid.coords.resize(n);
  const double denom = static_cast<double>(n - 1);
  // Mirrored construction keeps coords[i] == -coords[n-1-i] exact.
  for (std::size_t i = 0; i < n / 2; ++i) {
    const double c = -1.0 + 2.0 * static_cast<double>(i) / denom;
    grid.coords[i] = c;
    grid.coords[n - 1 - i] = -c;
  }
  if (n % 2 == 1) grid.coords[n / 2] = 0.0;
  return grid;
}

void AugmentationConfig::validate() const {
  if (crop_length < 1) throw ArgumentError("augment: crop_length must be positive");
  if (dequantize_bits < 2 || dequantize_bits > 32)
    throw ArgumentError("augment: dequantize_bits out of range");
  if (!(allpass_min > -1.0 && allpass_max < 1.0 && allpass_min <= allpass_max))
    throw ArgumentError("augment: all-pass coefficient range must lie within (-1, 1)");
}

std::vector<float> allpass_filter(const std::vector<float>& x, double a) {
  std::vector<float> y(x.size());
  double prev_x = 0.0, prev_y = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double yn = a * x[n] + prev_x - a * prev_y;
    prev_x = x[n];
    prev_y = yn;
    y[n] = static_cast<float>(yn);
  }
  return y;
}

AudioClip augment(const AudioClip& clip, const AugmentationConfig& cfg,
                  std::uint64_t seed) {
  clip.validate();
  cfg.validate();
  if (cfg.crop_length > clip.length())
    throw ArgumentError("augment: crop_length exceeds clip length");

  std::mt19937_64 rng(seed);

  std::uniform_int_distribution<std::size_t> offset_dist(
      0, clip.length() - cfg.crop_length);
  const std::size_t offset = offset_dist(rng);
  std::vector<float> out(clip.samples.begin() + offset,
                         clip.samples.begin() + offset + cfg.crop_length);

  if (cfg.phase_mangle_enabled) {
    const double a = uniform_real<double>(rng, cfg.allpass_min, cfg.allpass_max);
    out = allpass_filter(out, a);
  }

  const double q = std::ldexp(1.0, -(cfg.dequantize_bits - 1));
  for (float& s : out) {
    const double noisy = s + uniform_real<double>(rng, -q, q);
    s = static_cast<float>(std::clamp(noisy, -1.0, 1.0));
  }

  return AudioClip{std::move(out), clip.sample_rate};
}

}  // namespace hsnd
