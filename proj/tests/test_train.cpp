#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "hsnd/checkpoint.hpp"
#include "hsnd/metrics.hpp"
#include "hsnd/optim.hpp"
#include "hsnd/train.hpp"
#include "support.hpp"

using namespace hsnd;
using namespace testsup;

namespace {

// Loss settings small enough for 512-sample desk clips.
LossConfig desk_loss() {
  LossConfig cfg;
  cfg.stft.fft_sizes = {256, 128, 64};
  cfg.stft.n_mels = 16;
  return cfg;
}

HypernetworkSpec tiny_hyper(std::size_t input_len = 512) {
  HypernetworkSpec h;
  h.input_len = input_len;
  h.encoder_strides = {2, 4, 5, 8};
  h.encoder_channels = {8, 8, 8, 16};
  h.head_hidden = {48};
  h.target.kind = NetworkKind::Fmlp;
  h.target.embedding_l = 10;
  h.target.hidden_widths = {10, 10, 10, 10, 10};
  return h;
}

std::vector<AudioClip> synth_dataset(std::size_t count, std::size_t len,
                                     std::uint64_t seed) {
  std::vector<AudioClip> out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> freq(80.0, 1400.0);
  std::uniform_real_distribution<double> amp(0.25, 0.45);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<double> x(len, 0.0);
    for (int tone = 0; tone < 2; ++tone) {
      const double f = freq(rng), a = amp(rng), p = phase(rng);
      for (std::size_t t = 0; t < len; ++t)
        x[t] += a * std::sin(2.0 * M_PI * f * t / 22050.0 + p);
    }
    out.push_back(make_clip(x, 22050));
  }
  return out;
}

}  // namespace

TEST_CASE("one-cycle schedule hits its pinned anchor points") {
  OneCycleSchedule s;
  const double max_lr = 1e-3;
  const std::size_t total = 1000;

  CHECK(one_cycle_lr(0, total, max_lr, s) == doctest::Approx(max_lr / 25.0));
  CHECK(one_cycle_lr(300, total, max_lr, s) == doctest::Approx(max_lr));
  const double last = one_cycle_lr(total - 1, total, max_lr, s);
  CHECK(std::abs(last - max_lr / 1e4) <= 1e-12 * (max_lr / 1e4));

  CHECK_THROWS_AS(one_cycle_lr(total, total, max_lr, s), ArgumentError);
}

TEST_CASE("one-cycle schedule is continuous across the whole run") {
  OneCycleSchedule s;
  const double max_lr = 3e-4;
  const std::size_t total = 500;
  double prev = one_cycle_lr(0, total, max_lr, s);
  double peak = prev;
  for (std::size_t step = 1; step < total; ++step) {
    const double lr = one_cycle_lr(step, total, max_lr, s);
    // Warmup slope is (1-1/25)/0.3 ~ 3.2 max/total and the cosine peaks
    // near pi/2 / 0.7 ~ 2.2 max/total, so 4 max/total bounds every jump.
    CHECK(std::abs(lr - prev) <= 4.0 * max_lr / static_cast<double>(total));
    peak = std::max(peak, lr);
    prev = lr;
  }
  CHECK(peak == doctest::Approx(max_lr));
}

TEST_CASE("fitting a constant-zero clip reaches negligible error quickly") {
  AudioClip clip{std::vector<float>(256, 0.0f), 22050};
  TargetNetworkSpec spec;
  spec.kind = NetworkKind::Fmlp;
  spec.embedding_l = 4;
  spec.hidden_widths = {8, 8};

  TrainConfig cfg;
  cfg.loss = desk_loss();
  cfg.fit_steps = 200;
  cfg.max_lr = 0.1;  // trivial landscape; the big step lets Adam settle fast
  cfg.seed = 5;
  FitResult fit = fit_individual_inr(clip, spec, cfg);
  CHECK(fit.final_loss < 1e-6);
}

TEST_CASE("fit loss on a pure sine decays without divergence") {
  const std::vector<double> x = sine_mix(512, 8000.0, {200.0}, {0.6});
  AudioClip clip = make_clip(x, 8000);
  TargetNetworkSpec spec;
  spec.kind = NetworkKind::Siren;
  spec.hidden_widths = {16, 16, 16};
  spec.omega0 = 300.0;
  spec.omega_i = 30.0;

  TrainConfig cfg;
  cfg.loss = desk_loss();
  cfg.fit_steps = 600;
  cfg.max_lr = 3e-4;
  cfg.seed = 6;
  FitResult fit = fit_individual_inr(clip, spec, cfg);

  // Smoothed over 50-step windows the curve must not increase.
  const auto& curve = fit.loss_curve;
  REQUIRE(curve.size() == 600);
  auto window_mean = [&](std::size_t start) {
    double acc = 0.0;
    for (std::size_t i = start; i < start + 50; ++i) acc += curve[i];
    return acc / 50.0;
  };
  double prev = window_mean(0);
  for (std::size_t start = 50; start + 50 <= curve.size(); start += 50) {
    const double cur = window_mean(start);
    CHECK(cur <= prev * 1.05);  // small slack for optimizer noise
    prev = cur;
  }
  CHECK(fit.final_loss < curve.front());
}

TEST_CASE("fit is bit-reproducible under a fixed seed") {
  const std::vector<double> x = sine_mix(300, 8000.0, {350.0}, {0.5});
  AudioClip clip = make_clip(x, 8000);
  TargetNetworkSpec spec;
  spec.kind = NetworkKind::Fmlp;
  spec.embedding_l = 4;
  spec.hidden_widths = {8, 8};

  TrainConfig cfg;
  cfg.loss = desk_loss();
  cfg.fit_steps = 120;
  cfg.max_lr = 1e-3;
  cfg.seed = 7;
  FitResult a = fit_individual_inr(clip, spec, cfg);
  FitResult b = fit_individual_inr(clip, spec, cfg);
  CHECK(a.final_loss == b.final_loss);
  const auto& ta = a.params.at("theta").value;
  const auto& tb = b.params.at("theta").value;
  for (std::size_t i = 0; i < ta.numel(); ++i) CHECK(ta[i] == tb[i]);
}

TEST_CASE("fit aborts with a divergence error when the loss explodes") {
  const std::vector<double> x = sine_mix(256, 8000.0, {500.0}, {0.5});
  AudioClip clip = make_clip(x, 8000);
  TargetNetworkSpec spec;
  spec.kind = NetworkKind::Fmlp;
  spec.embedding_l = 4;
  spec.hidden_widths = {8, 8};

  TrainConfig cfg;
  cfg.loss = desk_loss();
  cfg.fit_steps = 400;
  cfg.max_lr = 3e3;  // absurd on purpose
  cfg.divergence_factor = 10.0;
  cfg.seed = 8;
  CHECK_THROWS_AS(fit_individual_inr(clip, spec, cfg), NumericError);
}

TEST_CASE("checkpoints round trip byte-identically") {
  TempDir tmp("ckpt");
  HypernetworkSpec h = tiny_hyper();
  Hypernetwork<float> net(h);
  net.init_for_fmlp(17);

  CheckpointMeta meta;
  meta.kind = "hypernetwork";
  meta.epoch = 42;
  meta.seed = 17;
  meta.sample_rate = 22050;
  meta.target = h.target;
  meta.hyper = h;

  const auto p1 = tmp.path() / "a.hsnd";
  const auto p2 = tmp.path() / "b.hsnd";
  save_checkpoint(meta, net.params(), p1);

  Hypernetwork<float> loaded(h);
  const CheckpointMeta meta2 = load_checkpoint_into(p1, loaded.params());
  CHECK(meta2.epoch == 42);
  CHECK(meta2.seed == 17);
  CHECK(meta2.is_hypernetwork());
  save_checkpoint(meta2, loaded.params(), p2);

  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  std::vector<char> b1((std::istreambuf_iterator<char>(f1)),
                       std::istreambuf_iterator<char>());
  std::vector<char> b2((std::istreambuf_iterator<char>(f2)),
                       std::istreambuf_iterator<char>());
  CHECK(b1 == b2);

  // The loaded state reproduces generated weights bitwise.
  std::mt19937_64 rng(18);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Tensor<float> clips({1, h.input_len});
  for (std::size_t i = 0; i < clips.numel(); ++i)
    clips[i] = static_cast<float>(dist(rng));
  Tensor<float> ta = net.generate(clips);
  Tensor<float> tb = loaded.generate(clips);
  for (std::size_t i = 0; i < ta.numel(); ++i) CHECK(ta[i] == tb[i]);
}

TEST_CASE("checkpoint loader rejects damaged files") {
  TempDir tmp("ckpt_bad");
  HypernetworkSpec h = tiny_hyper();
  Hypernetwork<float> net(h);
  net.init_for_fmlp(19);
  CheckpointMeta meta;
  meta.kind = "hypernetwork";
  meta.target = h.target;
  meta.hyper = h;
  const auto good = tmp.path() / "good.hsnd";
  save_checkpoint(meta, net.params(), good);

  SUBCASE("bad magic") {
    const auto bad = tmp.path() / "magic.hsnd";
    std::ifstream in(good, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
    bytes[0] = 'X';
    std::ofstream(bad, std::ios::binary)
        .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    Hypernetwork<float> other(h);
    CHECK_THROWS_AS(load_checkpoint_into(bad, other.params()), FormatError);
  }
  SUBCASE("truncated payload") {
    const auto bad = tmp.path() / "trunc.hsnd";
    std::ifstream in(good, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
    bytes.resize(bytes.size() - 64);
    std::ofstream(bad, std::ios::binary)
        .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    Hypernetwork<float> other(h);
    CHECK_THROWS_AS(load_checkpoint_into(bad, other.params()), FormatError);
  }
  SUBCASE("parameter structure mismatch") {
    HypernetworkSpec h2 = tiny_hyper();
    h2.head_hidden = {24};
    Hypernetwork<float> other(h2);
    CHECK_THROWS_AS(load_checkpoint_into(good, other.params()), FormatError);
  }
  SUBCASE("missing file") {
    Hypernetwork<float> other(h);
    CHECK_THROWS_AS(load_checkpoint_into(tmp.path() / "nope.hsnd", other.params()),
                    IoError);
  }
}

TEST_CASE("hypernetwork training runs, logs and stays deterministic") {
  const std::vector<AudioClip> data = synth_dataset(4, 512, 71);
  HypernetworkSpec h = tiny_hyper();

  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.epochs = 3;
  cfg.samples_per_epoch = 8;
  cfg.max_lr = 1e-4;
  cfg.loss = desk_loss();
  cfg.seed = 72;
  cfg.augment.phase_mangle_enabled = false;

  Hypernetwork<float> a(h);
  a.init_for_fmlp(cfg.seed);
  HyperTrainResult ra = train_hypernetwork(data, a, cfg);
  CHECK(ra.history.size() == 3 * 2);
  CHECK(ra.epochs_completed == 3);
  for (const auto& row : ra.history) {
    CHECK(std::isfinite(row.loss_total));
    CHECK(row.loss_total >= 0.0);
  }

  Hypernetwork<float> b(h);
  b.init_for_fmlp(cfg.seed);
  HyperTrainResult rb = train_hypernetwork(data, b, cfg);
  REQUIRE(ra.history.size() == rb.history.size());
  for (std::size_t i = 0; i < ra.history.size(); ++i)
    CHECK(ra.history[i].loss_total == rb.history[i].loss_total);
}

TEST_CASE("resuming from a checkpoint continues the epoch counter") {
  TempDir tmp("resume");
  const std::vector<AudioClip> data = synth_dataset(3, 512, 73);
  HypernetworkSpec h = tiny_hyper();

  TrainConfig cfg;
  cfg.batch_size = 2;
  cfg.epochs = 4;
  cfg.samples_per_epoch = 4;
  cfg.max_lr = 1e-4;
  cfg.loss = desk_loss();
  cfg.seed = 74;
  cfg.checkpoint_every = 2;
  cfg.augment.phase_mangle_enabled = false;

  Hypernetwork<float> net(h);
  net.init_for_fmlp(cfg.seed);
  train_hypernetwork(data, net, cfg, tmp.path());

  Hypernetwork<float> resumed(h);
  const CheckpointMeta mid =
      load_checkpoint_into(tmp.path() / "ckpt_epoch000002.hsnd", resumed.params());
  CHECK(mid.epoch == 2);
  HyperTrainResult r2 = train_hypernetwork(data, resumed, cfg, {}, mid.epoch);
  CHECK(r2.history.front().epoch == 2);
  CHECK(r2.epochs_completed == 4);

  const CheckpointMeta fin = load_checkpoint_meta(tmp.path() / "ckpt_final.hsnd");
  CHECK(fin.epoch == 4);
}

TEST_CASE("training a single clip overfits it") {
  // Broadband target: pure tones leave most mel cells near silence, where
  // the log term has an irreducible floor that caps how far the total loss
  // can fall regardless of the optimizer.
  const auto noise = white_noise(512, 75, 0.9);
  std::vector<double> x(512, 0.0);
  double state = 0.0;
  for (std::size_t t = 0; t < 512; ++t) {
    state = 0.75 * state + 0.25 * noise[t];
    x[t] = 2.2 * state;
  }
  const std::vector<AudioClip> data{make_clip(x, 22050)};
  HypernetworkSpec h = tiny_hyper();

  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.epochs = 600;
  cfg.samples_per_epoch = 4;
  cfg.max_lr = 5e-3;
  cfg.loss = desk_loss();
  cfg.seed = 76;
  cfg.augment.phase_mangle_enabled = false;
  cfg.augment.dequantize_bits = 24;

  Hypernetwork<float> net(h);
  net.init_for_fmlp(cfg.seed);
  HyperTrainResult r = train_hypernetwork(data, net, cfg);
  CHECK(r.final_epoch_loss < 0.1 * r.first_epoch_loss);
}

TEST_CASE("training rejects bad inputs") {
  HypernetworkSpec h = tiny_hyper();
  Hypernetwork<float> net(h);
  net.init_for_fmlp(0);
  TrainConfig cfg;
  cfg.loss = desk_loss();

  CHECK_THROWS_AS(train_hypernetwork({}, net, cfg), ArgumentError);

  const std::vector<AudioClip> shorties = synth_dataset(2, 100, 77);
  CHECK_THROWS_AS(train_hypernetwork(shorties, net, cfg), ArgumentError);
}

TEST_CASE("a fitted sine keeps its frequency when rendered at 2x resolution") {
  // 200 Hz for half a second at 2 kHz: DFT bin = f * duration = 100 at any
  // rendering resolution over the same span.
  const std::size_t n = 1000;
  const std::vector<double> x = sine_mix(n, 2000.0, {200.0}, {0.6});
  AudioClip clip = make_clip(x, 2000);

  TargetNetworkSpec spec;
  spec.kind = NetworkKind::Siren;
  spec.hidden_widths = {12, 12, 12};
  spec.omega0 = 400.0;
  spec.omega_i = 30.0;

  TrainConfig cfg;
  cfg.loss = desk_loss();
  cfg.fit_steps = 500;
  cfg.max_lr = 3e-4;
  cfg.seed = 9;
  FitResult fit = fit_individual_inr(clip, spec, cfg);

  auto peak = [](const std::vector<float>& s) {
    return naive_peak_bin(std::vector<double>(s.begin(), s.end()));
  };
  const auto base =
      render<float>(spec, fit.layout, fit.params.at("theta").value.vec(),
                    nullptr, n);
  const auto doubled =
      render<float>(spec, fit.layout, fit.params.at("theta").value.vec(),
                    nullptr, 2 * n);
  REQUIRE(doubled.size() == 2 * n);
  CHECK(peak(base) == 100);
  CHECK(peak(doubled) == 100);
}

TEST_CASE("history csv is written with the pinned header") {
  TempDir tmp("hist");
  std::vector<HistoryRow> rows{{0, 0, 1e-4, 0.5, 0.2, 0.3},
                               {0, 1, 2e-4, 0.4, 0.1, 0.3}};
  const auto path = tmp.path() / "history.csv";
  write_history_csv(rows, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "epoch,step,lr,loss_total,loss_t,loss_f");
  std::size_t count = 0;
  while (std::getline(in, line)) ++count;
  CHECK(count == 2);
}
