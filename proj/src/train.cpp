#include "hsnd/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <random>

#include "hsnd/error.hpp"
#include "hsnd/rng.hpp"

namespace hsnd {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (samples_per_epoch < 1)
    throw ConfigError("train: samples_per_epoch must be >= 1");
  if (max_lr < 0) throw ConfigError("train: max_lr must be positive");
  if (weight_decay < 0) throw ConfigError("train: weight_decay must be >= 0");
  if (fit_steps < 1) throw ConfigError("train: fit_steps must be >= 1");
  if (divergence_factor <= 1) throw ConfigError("train: divergence_factor must exceed 1");
  loss.validate();
}

namespace {

double mse_loss_and_grad(std::span<const float> x, std::span<const float> xhat,
                         std::span<float> grad) {
  const std::size_t n = x.size();
  double acc = 0.0;
  const float scale = 2.0f / static_cast<float>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(xhat[i]) - static_cast<double>(x[i]);
    acc += d * d;
    if (!grad.empty()) grad[i] += scale * static_cast<float>(d);
  }
  return acc / static_cast<double>(n);
}

}  // namespace

FitResult fit_individual_inr(const AudioClip& clip, const TargetNetworkSpec& spec,
                             const TrainConfig& cfg) {
  clip.validate();
  spec.validate();
  cfg.validate();

  FitResult result;
  result.layout = make_layout(spec);
  result.params = make_inr_param_store(spec);

  std::mt19937_64 rng(derive_seed(cfg.seed, 0x66697401ULL));
  {
    std::vector<float> theta0 = init_target_weights<float>(spec, result.layout, rng);
    auto& theta = result.params.at("theta").value;
    for (std::size_t i = 0; i < theta0.size(); ++i) theta[i] = theta0[i];
    if (shared_tensor_layers(spec) > 0) {
      VariantWeights<float> sw = init_shared_weights<float>(spec, rng);
      for (std::size_t l = 0; l < sw.W.size(); ++l) {
        result.params.at("shared" + std::to_string(l) + ".W").value = sw.W[l];
        result.params.at("shared" + std::to_string(l) + ".b").value = sw.b[l];
      }
    }
  }

  const CoordinateGrid grid = make_grid(clip.length());
  const std::vector<float>& x = clip.samples;
  const bool has_shared = shared_tensor_layers(spec) > 0;

  std::optional<LossEvaluator<float>> evaluator;
  if (cfg.fit_use_combined_loss) evaluator.emplace(cfg.loss, clip.sample_rate);

  AdamW<float> opt(result.params, 0.9, 0.999, 1e-8, 0.0);
  const double max_lr = cfg.resolved_max_lr(spec.kind);
  double initial_loss = 0.0;

  for (std::size_t step = 0; step < cfg.fit_steps; ++step) {
    result.params.zero_grads();

    VariantWeights<float> shared_vals;
    VariantWeights<float> shared_grads;
    if (has_shared) {
      const std::size_t n = shared_tensor_layers(spec);
      for (std::size_t l = 0; l < n; ++l) {
        shared_vals.W.push_back(result.params.at("shared" + std::to_string(l) + ".W").value);
        shared_vals.b.push_back(result.params.at("shared" + std::to_string(l) + ".b").value);
        shared_grads.W.push_back(Tensor<float>(shared_vals.W[l].shape()));
        shared_grads.b.push_back(Tensor<float>(shared_vals.b[l].shape()));
      }
    }

    auto& theta = result.params.at("theta");
    InrTrace<float> trace;
    std::vector<float> xhat =
        inr_forward<float>(spec, result.layout, theta.value.vec(),
                           has_shared ? &shared_vals : nullptr, grid, &trace);

    std::vector<float> grad_out(xhat.size(), 0.0f);
    double loss;
    if (evaluator) {
      loss = evaluator->total(x, xhat, step, std::span<float>(grad_out));
    } else {
      loss = mse_loss_and_grad(x, xhat, grad_out);
    }

    if (!std::isfinite(loss))
      throw NumericError("fit_individual_inr: non-finite loss at step " +
                         std::to_string(step));
    if (step == 0) initial_loss = std::max(loss, 1e-12);
    if (loss > cfg.divergence_factor * initial_loss)
      throw NumericError("fit_individual_inr: diverged at step " +
                         std::to_string(step));
    result.loss_curve.push_back(loss);
    result.final_loss = loss;

    inr_backward<float>(spec, result.layout, theta.value.vec(),
                        has_shared ? &shared_vals : nullptr, trace, grad_out,
                        theta.grad.vec(), has_shared ? &shared_grads : nullptr);
    if (has_shared) {
      for (std::size_t l = 0; l < shared_grads.W.size(); ++l) {
        auto& gw = result.params.at("shared" + std::to_string(l) + ".W").grad;
        auto& gb = result.params.at("shared" + std::to_string(l) + ".b").grad;
        for (std::size_t i = 0; i < gw.numel(); ++i) gw[i] += shared_grads.W[l][i];
        for (std::size_t i = 0; i < gb.numel(); ++i) gb[i] += shared_grads.b[l][i];
      }
    }

    opt.step(one_cycle_lr(step, cfg.fit_steps, max_lr, cfg.schedule));
  }
  return result;
}

HyperTrainResult train_hypernetwork(const std::vector<AudioClip>& dataset,
                                    Hypernetwork<float>& net, const TrainConfig& cfg,
                                    const std::filesystem::path& checkpoint_dir,
                                    std::uint64_t start_epoch) {
  cfg.validate();
  if (dataset.empty()) throw ArgumentError("train: dataset is empty");
  const HypernetworkSpec& hspec = net.spec();
  for (const auto& clip : dataset) {
    clip.validate();
    if (clip.length() < hspec.input_len)
      throw ArgumentError("train: clip shorter than hypernetwork input length");
  }
  if (start_epoch >= cfg.epochs)
    throw ArgumentError("train: start epoch is past the configured epoch count");

  AugmentationConfig aug = cfg.augment;
  if (aug.crop_length == 0) aug.crop_length = hspec.input_len;
  if (aug.crop_length != hspec.input_len)
    throw ConfigError("train: crop_length must equal the hypernetwork input length");

  const int sample_rate = dataset.front().sample_rate;
  LossEvaluator<float> evaluator(cfg.loss, sample_rate);
  const CoordinateGrid grid = make_grid(hspec.input_len);
  const WeightLayout& layout = net.target_layout();
  const bool has_shared = net.has_shared();

  const std::size_t steps_per_epoch =
      (cfg.samples_per_epoch + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = cfg.epochs * steps_per_epoch;
  const double max_lr = cfg.resolved_max_lr(hspec.target.kind);

  AdamW<float> opt(net.params(), 0.9, 0.999, 1e-8, cfg.weight_decay);

  auto make_meta = [&](std::uint64_t epochs_done) {
    CheckpointMeta meta;
    meta.kind = "hypernetwork";
    meta.epoch = epochs_done;
    meta.seed = cfg.seed;
    meta.sample_rate = sample_rate;
    meta.target = hspec.target;
    meta.hyper = hspec;
    return meta;
  };

  HyperTrainResult result;
  double initial_loss = -1.0;
  ParamStore<float> last_good = net.params();
  std::uint64_t last_good_epoch = start_epoch;

  auto abort_diverged = [&](const std::string& what, std::uint64_t epoch,
                            std::size_t step) {
    if (!checkpoint_dir.empty())
      save_checkpoint(make_meta(last_good_epoch), last_good,
                      checkpoint_dir / "ckpt_lastgood.hsnd");
    throw NumericError("train_hypernetwork: " + what + " at epoch " +
                       std::to_string(epoch) + " step " + std::to_string(step) +
                       (checkpoint_dir.empty()
                            ? ""
                            : "; last good state written to ckpt_lastgood.hsnd"));
  };

  for (std::uint64_t epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      std::mt19937_64 step_rng(derive_seed(cfg.seed, epoch, step));
      std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);

      Tensor<float> batch({cfg.batch_size, hspec.input_len});
      for (std::size_t slot = 0; slot < cfg.batch_size; ++slot) {
        const AudioClip& src = dataset[pick(step_rng)];
        AudioClip cropped = augment(src, aug, step_rng());
        float* row = batch.data() + slot * hspec.input_len;
        for (std::size_t i = 0; i < hspec.input_len; ++i)
          row[i] = cropped.samples[i];
      }

      net.params().zero_grads();
      GenerateTrace<float> gen_trace;
      Tensor<float> theta = net.generate(batch, &gen_trace);

      VariantWeights<float> shared_vals;
      VariantWeights<float> shared_grads;
      if (has_shared) {
        shared_vals = net.shared_values();
        shared_grads = net.shared_grad_buffers();
      }

      Tensor<float> gtheta(theta.shape());
      const float inv_batch = 1.0f / static_cast<float>(cfg.batch_size);
      double loss_acc = 0.0, lt_acc = 0.0, lf_acc = 0.0;
      for (std::size_t slot = 0; slot < cfg.batch_size; ++slot) {
        std::span<const float> x(batch.data() + slot * hspec.input_len,
                                 hspec.input_len);
        std::span<const float> theta_row(theta.data() + slot * layout.total,
                                         layout.total);
        InrTrace<float> trace;
        std::vector<float> xhat = inr_forward<float>(
            hspec.target, layout, theta_row, has_shared ? &shared_vals : nullptr,
            grid, &trace);

        std::vector<float> grad_out(xhat.size(), 0.0f);
        float lt = 0.0f, lf = 0.0f;
        const double item_loss =
            evaluator.total(x, xhat, epoch, std::span<float>(grad_out), &lt, &lf);
        loss_acc += item_loss;
        lt_acc += lt;
        lf_acc += lf;

        for (float& g : grad_out) g *= inv_batch;
        std::span<float> gtheta_row(gtheta.data() + slot * layout.total,
                                    layout.total);
        inr_backward<float>(hspec.target, layout, theta_row,
                            has_shared ? &shared_vals : nullptr, trace, grad_out,
                            gtheta_row, has_shared ? &shared_grads : nullptr);
      }

      const double loss = loss_acc / cfg.batch_size;
      if (!std::isfinite(loss)) abort_diverged("non-finite loss", epoch, step);
      if (initial_loss < 0) initial_loss = std::max(loss, 1e-12);
      if (loss > cfg.divergence_factor * initial_loss)
        abort_diverged("loss exceeded divergence threshold", epoch, step);

      net.generate_backward(gen_trace, gtheta);
      if (has_shared) net.accumulate_shared_grads(shared_grads);

      const std::size_t global_step = epoch * steps_per_epoch + step;
      const double lr = one_cycle_lr(global_step, total_steps, max_lr, cfg.schedule);
      opt.step(lr);

      epoch_loss += loss;
      result.history.push_back(HistoryRow{epoch, global_step, lr, loss,
                                          lt_acc / cfg.batch_size,
                                          lf_acc / cfg.batch_size});
    }

    epoch_loss /= static_cast<double>(steps_per_epoch);
    if (epoch == start_epoch) result.first_epoch_loss = epoch_loss;
    result.final_epoch_loss = epoch_loss;
    result.epochs_completed = epoch + 1;
    last_good = net.params();
    last_good_epoch = epoch + 1;

    if (!checkpoint_dir.empty() && cfg.checkpoint_every > 0 &&
        (epoch + 1) % cfg.checkpoint_every == 0 && epoch + 1 < cfg.epochs) {
      char name[64];
      std::snprintf(name, sizeof(name), "ckpt_epoch%06llu.hsnd",
                    static_cast<unsigned long long>(epoch + 1));
      save_checkpoint(make_meta(epoch + 1), net.params(), checkpoint_dir / name);
    }
  }

  if (!checkpoint_dir.empty())
    save_checkpoint(make_meta(cfg.epochs), net.params(),
                    checkpoint_dir / "ckpt_final.hsnd");
  return result;
}

void write_history_csv(const std::vector<HistoryRow>& history,
                       const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write history csv: " + path.string());
  out << "epoch,step,lr,loss_total,loss_t,loss_f\n";
  char line[256];
  for (const auto& row : history) {
    std::snprintf(line, sizeof(line), "%llu,%llu,%.10g,%.10g,%.10g,%.10g\n",
                  static_cast<unsigned long long>(row.epoch),
                  static_cast<unsigned long long>(row.step), row.lr,
                  row.loss_total, row.loss_t, row.loss_f);
    out << line;
  }
  if (!out) throw IoError("failed writing history csv: " + path.string());
}

}  // namespace hsnd
