#include "hsnd/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hsnd/checkpoint.hpp"
#include "hsnd/config.hpp"
#include "hsnd/error.hpp"
#include "hsnd/hypernet.hpp"
#include "hsnd/inr.hpp"
#include "hsnd/metrics.hpp"
#include "hsnd/signal.hpp"
#include "hsnd/train.hpp"

namespace hsnd {

namespace {

namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;

std::vector<fs::path> list_wavs(const fs::path& dir) {
  if (!fs::is_directory(dir))
    throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> paths;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".wav")
      paths.push_back(entry.path());
  std::sort(paths.begin(), paths.end());
  return paths;
}

void create_parent_dirs(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
}

std::string format_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

void write_metrics_csv(const fs::path& path, const std::string& clip_id,
                       std::span<const float> ref, std::span<const float> est) {
  create_parent_dirs(path);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write metrics csv: " + path.string());
  out << "clip_id,mse,lsd,si_snr\n";
  const double m = mse(ref, est);
  std::string spectral;
  if (ref.size() >= 2048) {
    spectral = format_metric(lsd(ref, est));
  } else {
    std::cerr << "warning: LSD undefined for " << clip_id
              << " (needs at least 2048 samples)\n";
    spectral = "undefined";
  }
  std::string snr;
  try {
    snr = format_metric(si_snr(ref, est));
  } catch (const UndefinedMetricError&) {
    std::cerr << "warning: SI-SNR undefined for " << clip_id
              << " (silent reference)\n";
    snr = "undefined";
  }
  out << clip_id << "," << format_metric(m) << "," << spectral << "," << snr
      << "\n";
  if (!out) throw IoError("failed writing metrics csv: " + path.string());
}

int cmd_fit_inr(const fs::path& input, const fs::path& config_path,
                const fs::path& out, std::optional<std::uint64_t> seed) {
  RunConfig cfg = parse_run_config(config_path);
  if (seed) cfg.train.seed = *seed;
  const AudioClip clip = load_wav(input);

  FitResult fit = fit_individual_inr(clip, cfg.target, cfg.train);

  CheckpointMeta meta;
  meta.kind = "inr";
  meta.seed = cfg.train.seed;
  meta.sample_rate = clip.sample_rate;
  meta.train_len = clip.length();
  meta.target = cfg.target;
  save_checkpoint(meta, fit.params, out);

  fs::path base = out;
  base.replace_extension();
  {
    const double max_lr = cfg.train.resolved_max_lr(cfg.target.kind);
    std::vector<HistoryRow> rows;
    for (std::size_t i = 0; i < fit.loss_curve.size(); ++i)
      rows.push_back(HistoryRow{
          i, i, one_cycle_lr(i, cfg.train.fit_steps, max_lr, cfg.train.schedule),
          fit.loss_curve[i], 0.0, 0.0});
    write_history_csv(rows, base.string() + "_history.csv");
  }

  const bool has_shared = shared_tensor_layers(cfg.target) > 0;
  VariantWeights<float> shared;
  if (has_shared) {
    const std::size_t n = shared_tensor_layers(cfg.target);
    for (std::size_t l = 0; l < n; ++l) {
      shared.W.push_back(fit.params.at("shared" + std::to_string(l) + ".W").value);
      shared.b.push_back(fit.params.at("shared" + std::to_string(l) + ".b").value);
    }
  }
  std::vector<float> recon =
      render<float>(cfg.target, fit.layout, fit.params.at("theta").value.vec(),
                    has_shared ? &shared : nullptr, clip.length());
  save_wav(AudioClip{recon, clip.sample_rate}, base.string() + "_recon.wav");
  write_metrics_csv(base.string() + "_metrics.csv", input.stem().string(),
                    clip.samples, recon);

  std::cout << "fit " << input.string() << ": final loss " << fit.final_loss
            << ", checkpoint " << out.string() << "\n";
  return kExitOk;
}

int cmd_train_hyper(const fs::path& data_dir, const fs::path& config_path,
                    const fs::path& out_dir, const std::string& resume,
                    std::optional<std::uint64_t> seed) {
  RunConfig cfg = parse_run_config(config_path);
  if (seed) cfg.train.seed = *seed;

  const std::vector<fs::path> paths = list_wavs(data_dir);
  if (paths.empty())
    throw ConfigError("train-hyper: no .wav files in " + data_dir.string());
  std::vector<AudioClip> dataset;
  dataset.reserve(paths.size());
  for (const auto& p : paths) dataset.push_back(load_wav(p));

  std::error_code ec;
  fs::create_directories(out_dir, ec);

  Hypernetwork<float> net(cfg.hyper);
  std::uint64_t start_epoch = 0;
  if (!resume.empty()) {
    const CheckpointMeta meta = load_checkpoint_into(resume, net.params());
    if (!meta.is_hypernetwork())
      throw ConfigError("train-hyper: checkpoint is not a hypernetwork");
    start_epoch = meta.epoch;
  } else {
    if (cfg.target.kind == NetworkKind::Fmlp)
      net.init_for_fmlp(cfg.train.seed);
    else
      net.init_for_siren(cfg.train.seed);
  }

  HyperTrainResult result =
      train_hypernetwork(dataset, net, cfg.train, out_dir, start_epoch);
  write_history_csv(result.history, out_dir / "history.csv");

  std::cout << "trained " << result.epochs_completed << " epochs on "
            << dataset.size() << " clips: first epoch loss "
            << result.first_epoch_loss << ", final " << result.final_epoch_loss
            << "\n";
  return kExitOk;
}

int cmd_render(const fs::path& checkpoint, const std::string& input,
               std::size_t n_samples, const fs::path& out) {
  const CheckpointMeta meta = load_checkpoint_meta(checkpoint);
  if (n_samples < 2) throw ConfigError("render: --samples must be >= 2");

  std::vector<float> samples;
  int sample_rate = meta.sample_rate;
  if (meta.is_hypernetwork()) {
    if (input.empty())
      throw ConfigError("render: hypernetwork checkpoint requires --input");
    Hypernetwork<float> net(meta.hyper);
    load_checkpoint_into(checkpoint, net.params());
    const AudioClip clip = load_wav(input);
    if (clip.length() < meta.hyper.input_len)
      throw ConfigError("render: input shorter than hypernetwork input length");
    Tensor<float> batch({1, meta.hyper.input_len});
    for (std::size_t i = 0; i < meta.hyper.input_len; ++i)
      batch[i] = clip.samples[i];
    Tensor<float> theta = net.generate(batch);
    const bool has_shared = net.has_shared();
    VariantWeights<float> shared;
    if (has_shared) shared = net.shared_values();
    samples = render<float>(meta.hyper.target, net.target_layout(),
                            theta.vec(), has_shared ? &shared : nullptr,
                            n_samples);
    sample_rate = clip.sample_rate;
  } else {
    if (!input.empty())
      throw ConfigError("render: --input is not valid for an INR checkpoint");
    ParamStore<float> params = make_inr_param_store(meta.target);
    load_checkpoint_into(checkpoint, params);
    const WeightLayout layout = make_layout(meta.target);
    const bool has_shared = shared_tensor_layers(meta.target) > 0;
    VariantWeights<float> shared;
    for (std::size_t l = 0; l < shared_tensor_layers(meta.target); ++l) {
      shared.W.push_back(params.at("shared" + std::to_string(l) + ".W").value);
      shared.b.push_back(params.at("shared" + std::to_string(l) + ".b").value);
    }
    samples = render<float>(meta.target, layout, params.at("theta").value.vec(),
                            has_shared ? &shared : nullptr, n_samples);
  }

  save_wav(AudioClip{samples, sample_rate}, out);
  std::cout << "rendered " << n_samples << " samples to " << out.string() << "\n";
  return kExitOk;
}

int cmd_eval(const fs::path& ref_path, const fs::path& est_path,
             const fs::path& out) {
  const AudioClip ref = load_wav(ref_path);
  const AudioClip est = load_wav(est_path);
  if (ref.length() != est.length())
    throw ConfigError("eval: signals differ in length (" +
                      std::to_string(ref.length()) + " vs " +
                      std::to_string(est.length()) + ")");
  write_metrics_csv(out, est_path.stem().string(), ref.samples, est.samples);
  std::cout << "metrics written to " << out.string() << "\n";
  return kExitOk;
}

int cmd_export_weights(const fs::path& checkpoint, const fs::path& data_dir,
                       const fs::path& out) {
  const CheckpointMeta meta = load_checkpoint_meta(checkpoint);
  if (!meta.is_hypernetwork())
    throw ConfigError("export-weights: checkpoint is not a hypernetwork");
  Hypernetwork<float> net(meta.hyper);
  load_checkpoint_into(checkpoint, net.params());

  const std::vector<fs::path> paths = list_wavs(data_dir);
  if (paths.empty())
    throw ConfigError("export-weights: no .wav files in " + data_dir.string());

  create_parent_dirs(out);
  std::ofstream os(out);
  if (!os) throw IoError("cannot write weight matrix: " + out.string());
  os << "# layout: " << layout_description(net.target_layout()) << "\n";

  const std::size_t P = net.target_layout().total;
  for (const auto& p : paths) {
    const AudioClip clip = load_wav(p);
    if (clip.length() < meta.hyper.input_len)
      throw ConfigError("export-weights: clip shorter than input length: " +
                        p.string());
    Tensor<float> batch({1, meta.hyper.input_len});
    for (std::size_t i = 0; i < meta.hyper.input_len; ++i)
      batch[i] = clip.samples[i];
    Tensor<float> theta = net.generate(batch);
    for (std::size_t i = 0; i < P; ++i) {
      if (i) os << ",";
      os << format_metric(theta[i]);
    }
    os << "\n";
  }
  if (!os) throw IoError("failed writing weight matrix: " + out.string());
  std::cout << "exported " << paths.size() << " x " << P << " weight matrix to "
            << out.string() << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Audio INR toolkit: per-clip fitting, hypernetwork training, "
               "rendering and evaluation"};
  app.require_subcommand(1);

  std::string input, config_path, out, data_dir, resume, ref_path, est_path,
      checkpoint;
  std::size_t n_samples = 0;
  std::optional<std::uint64_t> seed;

  auto* fit = app.add_subcommand("fit-inr", "Fit one network to one clip");
  fit->add_option("--input", input, "Input wav file")->required();
  fit->add_option("--config", config_path, "Run configuration file")->required();
  fit->add_option("--out", out, "Output checkpoint path")->required();
  fit->add_option("--seed", seed, "Override the configured seed");

  auto* train = app.add_subcommand("train-hyper", "Train the hypernetwork");
  train->add_option("--data", data_dir, "Directory of training wavs")->required();
  train->add_option("--config", config_path, "Run configuration file")->required();
  train->add_option("--out", out, "Output directory")->required();
  train->add_option("--resume", resume, "Checkpoint to resume from");
  train->add_option("--seed", seed, "Override the configured seed");

  auto* render_cmd = app.add_subcommand("render", "Render a checkpoint to audio");
  render_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  render_cmd->add_option("--input", input,
                         "Conditioning wav (hypernetwork checkpoints only)");
  render_cmd->add_option("--samples", n_samples, "Output sample count")->required();
  render_cmd->add_option("--out", out, "Output wav path")->required();

  auto* eval_cmd = app.add_subcommand("eval", "Reconstruction metrics");
  eval_cmd->add_option("--ref", ref_path, "Reference wav")->required();
  eval_cmd->add_option("--est", est_path, "Estimate wav")->required();
  eval_cmd->add_option("--out", out, "Output csv path")->required();

  auto* exp = app.add_subcommand("export-weights",
                                 "Generated weight matrix for a wav directory");
  exp->add_option("--checkpoint", checkpoint, "Hypernetwork checkpoint")->required();
  exp->add_option("--data", data_dir, "Directory of wavs")->required();
  exp->add_option("--out", out, "Output csv path")->required();

  auto* defaults = app.add_subcommand("print-config", "Print the default config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (fit->parsed()) return cmd_fit_inr(input, config_path, out, seed);
    if (train->parsed())
      return cmd_train_hyper(data_dir, config_path, out, resume, seed);
    if (render_cmd->parsed()) return cmd_render(checkpoint, input, n_samples, out);
    if (eval_cmd->parsed()) return cmd_eval(ref_path, est_path, out);
    if (exp->parsed()) return cmd_export_weights(checkpoint, data_dir, out);
    if (defaults->parsed()) {
      std::cout << default_config_text();
      return kExitOk;
    }
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitConfig;
}

}  // namespace hsnd
