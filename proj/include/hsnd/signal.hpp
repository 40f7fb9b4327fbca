#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace hsnd {

// Mono waveform. load_wav and augment guarantee samples in [-1, 1]; values
// produced by network rendering may exceed that range until written out.
struct AudioClip {
  std::vector<float> samples;
  int sample_rate = 0;

  std::size_t length() const { return samples.size(); }
  double duration_seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
  void validate() const;
};

// Uniform grid of time coordinates spanning [-1, 1] inclusive.
struct CoordinateGrid {
  std::vector<double> coords;

  std::size_t count() const { return coords.size(); }
};

CoordinateGrid make_grid(std::size_t n);

struct AugmentationConfig {
  std::size_t crop_length = 0;
  int dequantize_bits = 16;
  bool phase_mangle_enabled = true;
  double allpass_min = -0.9;  // coefficient range for the phase mangle
  double allpass_max = 0.9;

  void validate() const;
};

// Random crop, then optional first-order all-pass (phase mangle), then
// dequantization noise, clamped to [-1, 1]. Deterministic given the seed.
AudioClip augment(const AudioClip& clip, const AugmentationConfig& cfg,
                  std::uint64_t seed);

// First-order all-pass y[n] = a*x[n] + x[n-1] - a*y[n-1] with zero initial
// state. Exposed separately for testability.
std::vector<float> allpass_filter(const std::vector<float>& x, double a);

// RIFF/WAVE PCM-16 reader. Multichannel input is averaged to mono; samples
// are scaled by 2^-15 into [-1, 1).
AudioClip load_wav(const std::filesystem::path& path);

// PCM-16 mono writer; samples are clamped to [-1, 1 - 2^-15] and rounded to
// the nearest step.
void save_wav(const AudioClip& clip, const std::filesystem::path& path);

}  // namespace hsnd
