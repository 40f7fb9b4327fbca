#pragma once

#include <span>

#include "hsnd/error.hpp"

namespace hsnd {

// Reference signal has no energy after mean removal; SI-SNR is undefined.
struct UndefinedMetricError : ArgumentError {
  using ArgumentError::ArgumentError;
};

struct MetricsReport {
  double mse = 0.0;
  double lsd = 0.0;
  double si_snr = 0.0;
};

double mse(std::span<const float> x, std::span<const float> xhat);

// Frame-averaged RMS gap between log10 power spectra; fft 2048, hop 512,
// Hann window, power floor 1e-10.
double lsd(std::span<const float> x, std::span<const float> xhat);

// Scale-invariant SNR in dB, clamped to +100. Both signals are zero-meaned
// before the projection.
double si_snr(std::span<const float> x, std::span<const float> xhat);

MetricsReport compute_metrics(std::span<const float> x, std::span<const float> xhat);

}  // namespace hsnd
