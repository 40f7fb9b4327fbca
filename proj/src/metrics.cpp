#include "hsnd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "hsnd/dsp.hpp"

namespace hsnd {

namespace {

constexpr std::size_t kLsdFft = 2048;
constexpr std::size_t kLsdHop = 512;
constexpr double kLsdPowerFloor = 1e-10;

void check_equal_lengths(std::span<const float> x, std::span<const float> xhat) {
  if (x.size() != xhat.size())
    throw ArgumentError("metrics: signals must have equal length");
  if (x.empty()) throw ArgumentError("metrics: signals are empty");
}

std::vector<double> to_double(std::span<const float> x) {
  return std::vector<double>(x.begin(), x.end());
}

}  // namespace

double mse(std::span<const float> x, std::span<const float> xhat) {
  check_equal_lengths(x, xhat);
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x[i]) - static_cast<double>(xhat[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(x.size());
}

double lsd(std::span<const float> x, std::span<const float> xhat) {
  check_equal_lengths(x, xhat);
  if (x.size() < kLsdFft)
    throw ArgumentError("lsd: signals must be at least 2048 samples");

  const std::vector<double> xd = to_double(x);
  const std::vector<double> hd = to_double(xhat);
  Tensor<double> mx = stft_mag<double>(xd, kLsdFft, kLsdHop);
  Tensor<double> mh = stft_mag<double>(hd, kLsdFft, kLsdHop);

  const std::size_t frames = mx.dim(0), bins = mx.dim(1);
  double frame_acc = 0.0;
  for (std::size_t f = 0; f < frames; ++f) {
    double bin_acc = 0.0;
    for (std::size_t k = 0; k < bins; ++k) {
      const double px = mx(f, k) * mx(f, k) + kLsdPowerFloor;
      const double ph = mh(f, k) * mh(f, k) + kLsdPowerFloor;
      const double d = std::log10(px) - std::log10(ph);
      bin_acc += d * d;
    }
    frame_acc += std::sqrt(bin_acc / static_cast<double>(bins));
  }
  return frame_acc / static_cast<double>(frames);
}

double si_snr(std::span<const float> x, std::span<const float> xhat) {
  check_equal_lengths(x, xhat);
  const std::size_t n = x.size();

  double mean_x = 0.0, mean_h = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_x += x[i];
    mean_h += xhat[i];
  }
  mean_x /= static_cast<double>(n);
  mean_h /= static_cast<double>(n);

  double dot = 0.0, ref_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = x[i] - mean_x;
    const double b = xhat[i] - mean_h;
    dot += a * b;
    ref_sq += a * a;
  }
  if (std::sqrt(ref_sq) < 1e-12)
    throw UndefinedMetricError("si_snr: reference is silent");

  const double scale = dot / ref_sq;
  double s_sq = 0.0, e_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = x[i] - mean_x;
    const double b = xhat[i] - mean_h;
    const double s = scale * a;
    const double e = b - s;
    s_sq += s * s;
    e_sq += e * e;
  }
  if (e_sq == 0.0) return 100.0;
  if (s_sq == 0.0) return -100.0;  // estimate orthogonal to the reference
  return std::min(100.0, 10.0 * std::log10(s_sq / e_sq));
}

MetricsReport compute_metrics(std::span<const float> x, std::span<const float> xhat) {
  return MetricsReport{mse(x, xhat), lsd(x, xhat), si_snr(x, xhat)};
}

}  // namespace hsnd
