#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "hsnd/error.hpp"
#include "hsnd/fft.hpp"
#include "hsnd/tensor.hpp"

namespace hsnd {

struct StftConfig {
  std::vector<std::size_t> fft_sizes{2048, 1024, 512, 256, 128};
  std::size_t n_mels = 128;
  // Window is Hann with length = fft size; hop is fft_size/4 (75% overlap).

  void validate() const {
    if (fft_sizes.empty()) throw ConfigError("stft: need at least one fft size");
    for (std::size_t n : fft_sizes) {
      if (!is_power_of_two(n) || n < 8)
        throw ConfigError("stft: fft sizes must be powers of two >= 8");
    }
    if (n_mels < 1) throw ConfigError("stft: n_mels must be positive");
  }
};

struct FreqWeighting {
  double p = 0.0;
  std::size_t anneal_epochs = 500;
};

struct LossConfig {
  double lambda_t = 1.0;
  double lambda_f = 1.0;
  StftConfig stft;
  FreqWeighting weighting;
  double epsilon = 1e-5;  // log-magnitude stabilizer

  void validate() const {
    if (lambda_t < 0 || lambda_f < 0) throw ConfigError("loss: lambdas must be >= 0");
    if (lambda_t == 0 && lambda_f == 0)
      throw ConfigError("loss: lambda_t and lambda_f cannot both be zero");
    if (weighting.p < 0) throw ConfigError("loss: weighting exponent must be >= 0");
    if (weighting.anneal_epochs < 1)
      throw ConfigError("loss: anneal_epochs must be positive");
    if (epsilon <= 0) throw ConfigError("loss: epsilon must be positive");
    stft.validate();
  }
};

// Keeps sqrt differentiable at zero magnitude.
inline constexpr double kMagEps = 1e-12;

template <typename T>
std::vector<T> hann_window(std::size_t n) {
  std::vector<T> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = static_cast<T>(
        0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) / static_cast<double>(n)));
  return w;
}

inline std::size_t stft_frame_count(std::size_t len, std::size_t fft_size,
                                    std::size_t hop) {
  if (len < fft_size)
    throw ArgumentError("stft: signal shorter than fft size");
  return (len - fft_size) / hop + 1;
}

// Cached per-frame spectra, enough to push loss gradients back to samples.
template <typename T>
struct StftTrace {
  std::size_t fft_size = 0;
  std::size_t hop = 0;
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<std::complex<T>> spectra;  // frames * bins, one-sided
  Tensor<T> mag;                         // [frames, bins]
  std::vector<T> window;
};

// Magnitude spectrogram of Hann-windowed frames starting at sample 0 (no
// center padding). Returns [frames, fft_size/2+1].
template <typename T>
Tensor<T> stft_mag(std::span<const T> samples, std::size_t fft_size,
                   std::size_t hop, StftTrace<T>* trace = nullptr) {
  if (!is_power_of_two(fft_size))
    throw ArgumentError("stft: fft size must be a power of two");
  if (hop < 1) throw ArgumentError("stft: hop must be positive");
  const std::size_t frames = stft_frame_count(samples.size(), fft_size, hop);
  const std::size_t bins = fft_size / 2 + 1;
  const std::vector<T> window = hann_window<T>(fft_size);

  Tensor<T> mag({frames, bins});
  if (trace) {
    trace->fft_size = fft_size;
    trace->hop = hop;
    trace->frames = frames;
    trace->bins = bins;
    trace->spectra.assign(frames * bins, std::complex<T>());
    trace->window = window;
  }

  std::vector<std::complex<T>> buf(fft_size);
  for (std::size_t f = 0; f < frames; ++f) {
    const T* frame = samples.data() + f * hop;
    for (std::size_t n = 0; n < fft_size; ++n)
      buf[n] = std::complex<T>(window[n] * frame[n], T(0));
    fft_inplace(buf, -1);
    for (std::size_t k = 0; k < bins; ++k) {
      const T re = buf[k].real(), im = buf[k].imag();
      mag(f, k) = std::sqrt(re * re + im * im + static_cast<T>(kMagEps));
      if (trace) trace->spectra[f * bins + k] = buf[k];
    }
  }
  if (trace) trace->mag = mag;
  return mag;
}

// Accumulates dL/dsamples given dL/dmag.
template <typename T>
void stft_mag_backward(const StftTrace<T>& trace, const Tensor<T>& gmag,
                       std::span<T> gsamples) {
  const std::size_t N = trace.fft_size, bins = trace.bins;
  std::vector<std::complex<T>> buf(N);
  for (std::size_t f = 0; f < trace.frames; ++f) {
    std::fill(buf.begin(), buf.end(), std::complex<T>());
    for (std::size_t k = 0; k < bins; ++k) {
      const std::complex<T> s = trace.spectra[f * bins + k];
      const T m = trace.mag(f, k);
      const T g = gmag(f, k) / m;
      buf[k] = std::complex<T>(g * s.real(), g * s.imag());
    }
    // dL/dx[n] = w[n] * Re( sum_k (g_re + i g_im) e^{+2pi i kn/N} )
    fft_inplace(buf, +1);
    T* gs = gsamples.data() + f * trace.hop;
    for (std::size_t n = 0; n < N; ++n)
      gs[n] += trace.window[n] * buf[n].real();
  }
}

inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) {
  return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0);
}

// Center frequencies (Hz) of the triangular mel filters, uniform on the mel
// scale between 0 Hz and sample_rate/2.
inline std::vector<double> mel_center_frequencies(std::size_t n_mels,
                                                  int sample_rate) {
  const double m_hi = hz_to_mel(sample_rate / 2.0);
  std::vector<double> centers(n_mels);
  for (std::size_t j = 0; j < n_mels; ++j)
    centers[j] = mel_to_hz(m_hi * static_cast<double>(j + 1) /
                           static_cast<double>(n_mels + 1));
  return centers;
}

// Triangular filters, rows normalized to sum to 1. Shape [n_mels, fft/2+1].
template <typename T>
Tensor<T> mel_filterbank(std::size_t fft_size, std::size_t n_mels,
                         int sample_rate) {
  if (n_mels < 1) throw ArgumentError("mel_filterbank: n_mels must be positive");
  if (n_mels >= fft_size / 2)
    throw ArgumentError("mel_filterbank: n_mels must be < fft_size/2");
  const std::size_t bins = fft_size / 2 + 1;
  const double m_hi = hz_to_mel(sample_rate / 2.0);

  std::vector<double> pts(n_mels + 2);
  for (std::size_t j = 0; j < pts.size(); ++j)
    pts[j] = mel_to_hz(m_hi * static_cast<double>(j) /
                       static_cast<double>(n_mels + 1));

  Tensor<T> bank({n_mels, bins});
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double lo = pts[m], c = pts[m + 1], hi = pts[m + 2];
    double sum = 0.0;
    std::vector<double> row(bins, 0.0);
    for (std::size_t i = 0; i < bins; ++i) {
      const double f = static_cast<double>(i) * sample_rate /
                       static_cast<double>(fft_size);
      if (f <= lo || f >= hi) continue;
      row[i] = f <= c ? (f - lo) / (c - lo) : (hi - f) / (hi - c);
      sum += row[i];
    }
    if (sum <= 0.0)
      throw ConfigError("mel_filterbank: degenerate band " + std::to_string(m) +
                        " (filter narrower than one fft bin)");
    for (std::size_t i = 0; i < bins; ++i)
      bank(m, i) = static_cast<T>(row[i] / sum);
  }
  return bank;
}

// Per-bin emphasis w_i = N * i^p / sum_{j=1..N} j^p, i = 1..N. The weights
// sum to N; p = 0 gives the uniform all-ones weighting.
inline std::vector<double> freq_weights(std::size_t n, double p) {
  if (n < 1) throw ArgumentError("freq_weights: N must be >= 1");
  if (p < 0) throw ArgumentError("freq_weights: p must be >= 0");
  std::vector<double> w(n);
  double sum = 0.0;
  for (std::size_t i = 1; i <= n; ++i)
    sum += std::pow(static_cast<double>(i), p);
  for (std::size_t i = 1; i <= n; ++i)
    w[i - 1] = static_cast<double>(n) * std::pow(static_cast<double>(i), p) / sum;
  return w;
}

// Linear ramp from the uniform weighting to `target` over anneal_epochs.
inline std::vector<double> anneal_weights(const std::vector<double>& target,
                                          std::size_t epoch,
                                          std::size_t anneal_epochs) {
  const double alpha =
      std::min(1.0, static_cast<double>(epoch) / static_cast<double>(anneal_epochs));
  std::vector<double> w(target.size());
  for (std::size_t i = 0; i < target.size(); ++i)
    w[i] = (1.0 - alpha) + alpha * target[i];
  return w;
}

// Multi-resolution mel STFT loss plus L1 time term. Filterbanks and weight
// targets are precomputed once per (config, sample rate).
template <typename T>
class LossEvaluator {
 public:
  LossEvaluator(LossConfig cfg, int sample_rate)
      : cfg_(std::move(cfg)), sample_rate_(sample_rate) {
    cfg_.validate();
    for (std::size_t fft : cfg_.stft.fft_sizes) {
      Resolution r;
      r.fft_size = fft;
      r.hop = fft / 4;
      r.bins = fft / 2 + 1;
      r.n_mels = effective_mels(fft, cfg_.stft.n_mels);
      r.bank = mel_filterbank<T>(fft, r.n_mels, sample_rate);
      r.target_weights = freq_weights(r.bins, cfg_.weighting.p);
      resolutions_.push_back(std::move(r));
    }
  }

  // The paper's 128 mel bins cannot be built at the smaller fft sizes of the
  // default resolution set (the triangles collapse below one bin), so each
  // resolution is capped at fft/16 mel bands.
  static std::size_t effective_mels(std::size_t fft_size, std::size_t n_mels) {
    return std::max<std::size_t>(1, std::min(n_mels, fft_size / 16));
  }

  std::size_t min_length() const {
    std::size_t m = 0;
    for (const auto& r : resolutions_) m = std::max(m, r.fft_size);
    return m;
  }

  std::vector<double> weights_for_epoch(std::size_t fft_size,
                                        std::size_t epoch) const {
    for (const auto& r : resolutions_)
      if (r.fft_size == fft_size)
        return anneal_weights(r.target_weights, epoch, cfg_.weighting.anneal_epochs);
    throw ArgumentError("weights_for_epoch: unknown fft size");
  }

  // Frequency-domain term L_f; accumulates d L_f / d xhat when grad is
  // non-empty.
  T spectral(std::span<const T> x, std::span<const T> xhat, std::size_t epoch,
             std::span<T> grad = {}) const {
    check_lengths(x, xhat);
    const T inv_res = T(1) / static_cast<T>(resolutions_.size());
    T total = T(0);
    for (const auto& r : resolutions_)
      total += resolution_loss(r, x, xhat, epoch, grad, inv_res);
    return total * inv_res;
  }

  // L = lambda_t * MAE + lambda_f * L_f.
  T total(std::span<const T> x, std::span<const T> xhat, std::size_t epoch,
          std::span<T> grad = {}, T* time_term = nullptr,
          T* freq_term = nullptr) const {
    check_lengths(x, xhat);
    const std::size_t n = x.size();
    T lt = T(0);
    if (cfg_.lambda_t != 0) {
      for (std::size_t i = 0; i < n; ++i) lt += std::abs(xhat[i] - x[i]);
      lt /= static_cast<T>(n);
      if (!grad.empty()) {
        const T scale = static_cast<T>(cfg_.lambda_t) / static_cast<T>(n);
        for (std::size_t i = 0; i < n; ++i) {
          const T d = xhat[i] - x[i];
          if (d > T(0))
            grad[i] += scale;
          else if (d < T(0))
            grad[i] -= scale;
        }
      }
    }
    T lf = T(0);
    if (cfg_.lambda_f != 0) {
      if (!grad.empty()) {
        std::vector<T> gtmp(n, T(0));
        lf = spectral(x, xhat, epoch, std::span<T>(gtmp));
        const T lam = static_cast<T>(cfg_.lambda_f);
        for (std::size_t i = 0; i < n; ++i) grad[i] += lam * gtmp[i];
      } else {
        lf = spectral(x, xhat, epoch);
      }
    }
    if (time_term) *time_term = lt;
    if (freq_term) *freq_term = lf;
    return static_cast<T>(cfg_.lambda_t) * lt + static_cast<T>(cfg_.lambda_f) * lf;
  }

  const LossConfig& config() const { return cfg_; }
  int sample_rate() const { return sample_rate_; }

 private:
  struct Resolution {
    std::size_t fft_size, hop, bins, n_mels;
    Tensor<T> bank;                      // [n_mels, bins]
    std::vector<double> target_weights;  // length bins
  };

  void check_lengths(std::span<const T> x, std::span<const T> xhat) const {
    if (x.size() != xhat.size())
      throw ArgumentError("loss: signals must have equal length");
    if (x.size() < min_length())
      throw ArgumentError("loss: signal shorter than the largest fft size");
  }

  // Spectral convergence + log-mel L1 for one resolution.
  T resolution_loss(const Resolution& r, std::span<const T> x,
                    std::span<const T> xhat, std::size_t epoch,
                    std::span<T> grad, T grad_scale) const {
    const std::vector<double> w =
        anneal_weights(r.target_weights, epoch, cfg_.weighting.anneal_epochs);

    Tensor<T> sx = stft_mag<T>(x, r.fft_size, r.hop);
    StftTrace<T> trace;
    Tensor<T> sh = stft_mag<T>(xhat, r.fft_size, r.hop,
                               grad.empty() ? nullptr : &trace);

    const std::size_t frames = sx.dim(0);
    apply_weights(sx, w);
    apply_weights(sh, w);

    Tensor<T> mx = project_mel(r, sx);
    Tensor<T> mh = project_mel(r, sh);

    const std::size_t count = mx.numel();
    double ref_sq = 0.0, diff_sq = 0.0, log_l1 = 0.0;
    const T eps = static_cast<T>(cfg_.epsilon);
    for (std::size_t i = 0; i < count; ++i) {
      const double a = static_cast<double>(mx[i]);
      const double b = static_cast<double>(mh[i]);
      ref_sq += a * a;
      diff_sq += (b - a) * (b - a);
      log_l1 += std::abs(std::log(a + static_cast<double>(eps)) -
                         std::log(b + static_cast<double>(eps)));
    }
    const double ref_norm = std::sqrt(ref_sq);
    const double diff_norm = std::sqrt(diff_sq);
    const bool silent_ref = ref_norm < 1e-8;
    double loss = log_l1 / static_cast<double>(count);
    if (!silent_ref) loss += diff_norm / ref_norm;

    if (!grad.empty()) {
      Tensor<T> gm(mh.shape());
      const double sc_scale =
          (!silent_ref && diff_norm > 0.0) ? 1.0 / (diff_norm * ref_norm) : 0.0;
      for (std::size_t i = 0; i < count; ++i) {
        const double a = static_cast<double>(mx[i]);
        const double b = static_cast<double>(mh[i]);
        double g = sc_scale * (b - a);
        if (a != b) {
          const double sign = a > b ? 1.0 : -1.0;
          g -= sign / ((b + static_cast<double>(eps)) * static_cast<double>(count));
        }
        gm[i] = static_cast<T>(g) * grad_scale;
      }
      // Back through the mel projection and the per-bin weighting.
      Tensor<T> gs({frames, r.bins});
      for (std::size_t t = 0; t < frames; ++t)
        for (std::size_t m = 0; m < r.n_mels; ++m) {
          const T g = gm(t, m);
          if (g == T(0)) continue;
          const T* bm = r.bank.data() + m * r.bins;
          T* gst = gs.data() + t * r.bins;
          for (std::size_t f = 0; f < r.bins; ++f) gst[f] += g * bm[f];
        }
      for (std::size_t t = 0; t < frames; ++t)
        for (std::size_t f = 0; f < r.bins; ++f)
          gs(t, f) *= static_cast<T>(w[f]);
      stft_mag_backward(trace, gs, grad);
    }
    return static_cast<T>(loss);
  }

  static void apply_weights(Tensor<T>& spec, const std::vector<double>& w) {
    const std::size_t frames = spec.dim(0), bins = spec.dim(1);
    for (std::size_t t = 0; t < frames; ++t)
      for (std::size_t f = 0; f < bins; ++f)
        spec(t, f) *= static_cast<T>(w[f]);
  }

  Tensor<T> project_mel(const Resolution& r, const Tensor<T>& spec) const {
    const std::size_t frames = spec.dim(0);
    Tensor<T> out({frames, r.n_mels});
    for (std::size_t t = 0; t < frames; ++t) {
      const T* st = spec.data() + t * r.bins;
      T* ot = out.data() + t * r.n_mels;
      for (std::size_t m = 0; m < r.n_mels; ++m) {
        const T* bm = r.bank.data() + m * r.bins;
        T acc = T(0);
        for (std::size_t f = 0; f < r.bins; ++f) acc += bm[f] * st[f];
        ot[m] = acc;
      }
    }
    return out;
  }

  LossConfig cfg_;
  int sample_rate_;
  std::vector<Resolution> resolutions_;
};

// One-shot wrappers over LossEvaluator.

template <typename T>
T mel_stft_loss(std::span<const T> x, std::span<const T> xhat,
                const LossConfig& cfg, int sample_rate, std::size_t epoch,
                std::span<T> grad_xhat = {}) {
  return LossEvaluator<T>(cfg, sample_rate).spectral(x, xhat, epoch, grad_xhat);
}

template <typename T>
T total_loss(std::span<const T> x, std::span<const T> xhat, const LossConfig& cfg,
             int sample_rate, std::size_t epoch, std::span<T> grad_xhat = {},
             T* time_term = nullptr, T* freq_term = nullptr) {
  return LossEvaluator<T>(cfg, sample_rate)
      .total(x, xhat, epoch, grad_xhat, time_term, freq_term);
}

}  // namespace hsnd
