#include <doctest.h>

#include <random>

#include "hsnd/dsp.hpp"
#include "support.hpp"

using namespace hsnd;
using namespace testsup;

TEST_CASE("stft of silence is zero up to the magnitude stabilizer") {
  std::vector<double> x(256, 0.0);
  Tensor<double> mag = stft_mag<double>(x, 64, 16);
  for (std::size_t i = 0; i < mag.numel(); ++i) CHECK(mag[i] <= 1.1e-6);
}

TEST_CASE("stft concentrates a bin-centered sine at its bin") {
  const std::size_t fft = 256;
  const int sr = 8192;
  const std::size_t k = 19;
  const double freq = static_cast<double>(k) * sr / fft;
  std::vector<double> x = sine_mix(1024, sr, {freq}, {0.8});
  Tensor<double> mag = stft_mag<double>(x, fft, fft / 4);
  for (std::size_t f = 0; f < mag.dim(0); ++f) {
    std::size_t peak = 0;
    for (std::size_t b = 1; b < mag.dim(1); ++b)
      if (mag(f, b) > mag(f, peak)) peak = b;
    CHECK(peak == k);
  }
}

TEST_CASE("stft matches the naive DFT oracle") {
  std::mt19937_64 seeds(21);
  for (int trial = 0; trial < 6; ++trial) {
    const std::size_t fft = 1u << (5 + trial % 3);  // 32, 64, 128
    const std::vector<double> x = white_noise(fft * 3, seeds(), 0.7);
    Tensor<double> mag = stft_mag<double>(x, fft, fft / 4);
    const auto oracle = naive_stft_mag(x, fft, fft / 4);
    REQUIRE(mag.dim(0) == oracle.size());
    double max_err = 0.0;
    for (std::size_t f = 0; f < oracle.size(); ++f)
      for (std::size_t b = 0; b < oracle[f].size(); ++b)
        max_err = std::max(max_err, std::abs(mag(f, b) - oracle[f][b]));
    CHECK(max_err < 1e-6);
  }
}

TEST_CASE("stft rejects clips shorter than the window") {
  std::vector<double> x(63, 0.1);
  CHECK_THROWS_AS(stft_mag<double>(x, 64, 16), ArgumentError);
}

TEST_CASE("stft gradient matches finite differences") {
  std::mt19937_64 rng(22);
  ParamStore<double> proto;
  proto.add("x", random_tensor({96}, rng, -0.5, 0.5));
  auto generic = []<typename T>(ParamStore<T>& ps, bool want_grad) -> T {
    auto& x = ps.at("x");
    StftTrace<T> trace;
    Tensor<T> mag = stft_mag<T>(x.value.vec(), 32, 8, want_grad ? &trace : nullptr);
    if (want_grad) {
      Tensor<T> gm(mag.shape());
      for (std::size_t i = 0; i < gm.numel(); ++i)
        gm[i] = static_cast<T>(mix_coeff(i));
      stft_mag_backward(trace, gm, std::span<T>(x.grad.vec()));
    }
    return mix_sum(mag);
  };
  auto rep = check_grads_dual(proto, generic);
  CHECK(rep.r64.max_rel_err < 1e-6);
  CHECK(rep.r32.max_rel_err < 1e-4);
}

TEST_CASE("mel filterbank rows are normalized and nonnegative") {
  Tensor<double> bank = mel_filterbank<double>(512, 40, 22050);
  for (std::size_t m = 0; m < bank.dim(0); ++m) {
    double sum = 0.0;
    for (std::size_t b = 0; b < bank.dim(1); ++b) {
      CHECK(bank(m, b) >= 0.0);
      sum += bank(m, b);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("each frequency bin feeds at most two mel filters") {
  Tensor<double> bank = mel_filterbank<double>(512, 24, 22050);
  for (std::size_t b = 0; b < bank.dim(1); ++b) {
    int contributors = 0;
    for (std::size_t m = 0; m < bank.dim(0); ++m)
      if (bank(m, b) > 0.0) ++contributors;
    CHECK(contributors <= 2);
  }
}

TEST_CASE("mel centers are monotone and match the formula within half a bin") {
  const std::size_t fft = 512;
  const std::size_t n_mels = 8;
  const int sr = 22050;
  const std::vector<double> centers = mel_center_frequencies(n_mels, sr);
  for (std::size_t i = 1; i < centers.size(); ++i)
    CHECK(centers[i] > centers[i - 1]);

  // Independent evaluation of m = 2595 log10(1 + f/700) on a uniform grid.
  const double hz_per_bin = static_cast<double>(sr) / fft;
  const double mel_top = 2595.0 * std::log10(1.0 + (sr / 2.0) / 700.0);
  for (std::size_t j = 0; j < n_mels; ++j) {
    const double m = mel_top * (j + 1) / (n_mels + 1);
    const double f = 700.0 * (std::pow(10.0, m / 2595.0) - 1.0);
    CHECK(std::abs(centers[j] - f) / hz_per_bin < 0.5);
  }
}

TEST_CASE("mel filterbank rejects misuse") {
  CHECK_THROWS_AS(mel_filterbank<double>(64, 32, 22050), ArgumentError);
  // Enough bands that low triangles collapse below one bin.
  CHECK_THROWS_AS(mel_filterbank<double>(64, 31, 22050), ConfigError);
}

TEST_CASE("freq_weights follows the normalized power law") {
  SUBCASE("p = 0 is exactly uniform") {
    for (std::size_t n : {1u, 7u, 513u}) {
      const auto w = freq_weights(n, 0.0);
      for (double v : w) CHECK(v == 1.0);
    }
  }
  SUBCASE("hand-computed N=4, p=1") {
    const auto w = freq_weights(4, 1.0);
    REQUIRE(w.size() == 4);
    CHECK(w[0] == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(w[1] == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(w[2] == doctest::Approx(1.2).epsilon(1e-12));
    CHECK(w[3] == doctest::Approx(1.6).epsilon(1e-12));
  }
  SUBCASE("weights sum to N across the p grid") {
    for (std::size_t n : {64u, 1025u, 4096u}) {
      for (double p : {0.0, 0.2, 0.5, 1.0}) {
        const auto w = freq_weights(n, p);
        double sum = 0.0;
        for (double v : w) sum += v;
        CHECK(std::abs(sum - static_cast<double>(n)) < 1e-9);
      }
    }
  }
  SUBCASE("negative p is rejected") {
    CHECK_THROWS_AS(freq_weights(8, -0.1), ArgumentError);
  }
}

TEST_CASE("anneal_weights ramps linearly from uniform to target") {
  const auto target = freq_weights(16, 1.0);
  const auto w0 = anneal_weights(target, 0, 500);
  for (double v : w0) CHECK(v == 1.0);

  const auto w_end = anneal_weights(target, 500, 500);
  const auto w_past = anneal_weights(target, 1234, 500);
  for (std::size_t i = 0; i < target.size(); ++i) {
    CHECK(w_end[i] == target[i]);
    CHECK(w_past[i] == target[i]);
  }

  const auto w_mid = anneal_weights(target, 250, 500);
  for (std::size_t i = 0; i < target.size(); ++i)
    CHECK(w_mid[i] == doctest::Approx(0.5 + 0.5 * target[i]).epsilon(1e-12));
}

TEST_CASE("annealed weights stay inside the convex hull") {
  const auto target = freq_weights(33, 0.7);
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<std::size_t> epoch_dist(0, 1000);
  for (int trial = 0; trial < 20; ++trial) {
    const auto w = anneal_weights(target, epoch_dist(rng), 500);
    for (std::size_t i = 0; i < w.size(); ++i) {
      CHECK(w[i] >= std::min(1.0, target[i]) - 1e-12);
      CHECK(w[i] <= std::max(1.0, target[i]) + 1e-12);
    }
  }
}

TEST_CASE("evaluator weights match the anneal composition exactly") {
  LossConfig cfg;
  cfg.stft.fft_sizes = {128, 64};
  cfg.stft.n_mels = 8;
  cfg.weighting.p = 1.0;
  LossEvaluator<float> eval(cfg, 22050);
  for (std::size_t epoch : {0u, 100u, 250u, 500u, 900u}) {
    const auto direct = anneal_weights(freq_weights(65, 1.0), epoch, 500);
    const auto got = eval.weights_for_epoch(128, epoch);
    REQUIRE(got.size() == direct.size());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == direct[i]);
  }
}

TEST_CASE("mel stft loss is zero for identical signals and positive otherwise") {
  LossConfig cfg;
  cfg.stft.fft_sizes = {64, 32};
  cfg.stft.n_mels = 4;
  const std::vector<double> xd = white_noise(256, 31, 0.5);
  const std::vector<float> x = to_float(xd);

  LossEvaluator<float> eval(cfg, 22050);
  CHECK(eval.spectral(x, x, 0) < 1e-6);

  std::vector<float> y = x;
  for (auto& v : y) v += 0.05f;
  CHECK(eval.spectral(x, y, 0) > 0.0);
}

TEST_CASE("mel stft loss skips spectral convergence for a silent reference") {
  LossConfig cfg;
  cfg.stft.fft_sizes = {32};
  cfg.stft.n_mels = 2;
  const std::vector<float> silence(128, 0.0f);
  const std::vector<float> est = to_float(white_noise(128, 33, 0.3));
  LossEvaluator<float> eval(cfg, 22050);
  const float loss = eval.spectral(silence, est, 0);
  CHECK(std::isfinite(loss));
  CHECK(loss > 0.0f);
}

TEST_CASE("mel stft loss gradient matches finite differences") {
  // Strong signals keep the mel cells away from the log floor, where the
  // finite-difference oracle itself loses accuracy to curvature.
  LossConfig cfg;
  cfg.stft.fft_sizes = {64, 32};
  cfg.stft.n_mels = 4;
  cfg.weighting.p = 0.5;
  const std::vector<double> ref = white_noise(256, 35, 0.8);

  std::mt19937_64 rng(36);
  ParamStore<double> proto;
  proto.add("xhat", random_tensor({256}, rng, -0.8, 0.8));

  auto generic = [&, ref]<typename T>(ParamStore<T>& ps, bool want_grad) -> T {
    auto& xhat = ps.at("xhat");
    LossEvaluator<T> eval(cfg, 22050);
    std::vector<T> x(ref.begin(), ref.end());
    return eval.spectral(x, xhat.value.vec(), 123,
                         want_grad ? std::span<T>(xhat.grad.vec()) : std::span<T>());
  };
  auto rep = check_grads_dual(proto, generic);
  CHECK(rep.r64.max_rel_err < 1e-6);
  CHECK(rep.r32.max_rel_err < 1e-4);
}

TEST_CASE("total loss composition") {
  LossConfig cfg;
  cfg.stft.fft_sizes = {32};
  cfg.stft.n_mels = 2;
  const std::vector<float> x = to_float(white_noise(128, 37, 0.4));
  LossEvaluator<float> eval(cfg, 22050);

  SUBCASE("identical signals give zero") {
    CHECK(eval.total(x, x, 0) < 1e-6);
  }
  SUBCASE("lambda_f = 0 reduces to L1; constant offset gives |c|") {
    LossConfig l1 = cfg;
    l1.lambda_f = 0.0;
    LossEvaluator<float> ev(l1, 22050);
    std::vector<float> y = x;
    for (auto& v : y) v += 0.125f;
    CHECK(ev.total(x, y, 0) == doctest::Approx(0.125).epsilon(1e-5));
  }
  SUBCASE("lambda_t = 0 reproduces the spectral term exactly") {
    LossConfig lf = cfg;
    lf.lambda_t = 0.0;
    LossEvaluator<float> ev(lf, 22050);
    std::vector<float> y = x;
    for (auto& v : y) v *= 0.7f;
    CHECK(ev.total(x, y, 0) == eval.spectral(x, y, 0));
  }
  SUBCASE("component outputs add up") {
    std::vector<float> y = x;
    for (auto& v : y) v = 0.9f * v + 0.01f;
    float lt = 0, lf = 0;
    const float total = eval.total(x, y, 0, {}, &lt, &lf);
    CHECK(total == doctest::Approx(lt + lf).epsilon(1e-6));
    CHECK(total > 0.0f);
  }
  SUBCASE("both lambdas zero is rejected") {
    LossConfig bad = cfg;
    bad.lambda_t = bad.lambda_f = 0.0;
    CHECK_THROWS_AS(LossEvaluator<float>(bad, 22050), ConfigError);
  }
}

TEST_CASE("total loss separates identical from offset signals") {
  LossConfig cfg;
  cfg.stft.fft_sizes = {64};
  cfg.stft.n_mels = 4;
  LossEvaluator<double> eval(cfg, 22050);
  const std::vector<double> x = white_noise(128, 39, 0.4);
  for (double delta : {1e-3, 0.1, -0.2}) {
    std::vector<double> y = x;
    for (auto& v : y) v += delta;
    CHECK(eval.total(x, y, 0) > 1e-6);
  }
}
