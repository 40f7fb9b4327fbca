#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "hsnd/checkpoint.hpp"
#include "hsnd/dsp.hpp"
#include "hsnd/hypernet.hpp"
#include "hsnd/inr.hpp"
#include "hsnd/optim.hpp"
#include "hsnd/param_store.hpp"
#include "hsnd/signal.hpp"

namespace hsnd {

struct TrainConfig {
  std::size_t batch_size = 16;
  std::size_t epochs = 2500;
  std::size_t samples_per_epoch = 10000;  // augmented crops drawn per epoch
  double max_lr = 0.0;                    // 0 picks 1e-4 (FMLP) or 1e-6 (SIREN)
  OneCycleSchedule schedule;
  double weight_decay = 0.01;  // AdamW decoupled decay
  std::uint64_t seed = 0;
  LossConfig loss;
  AugmentationConfig augment;  // crop_length 0 means the hypernetwork input length
  std::size_t checkpoint_every = 50;  // epochs between checkpoints
  std::size_t fit_steps = 5000;       // budget for fit_individual_inr
  bool fit_use_combined_loss = false;  // default objective is plain MSE
  double divergence_factor = 1e3;

  double resolved_max_lr(NetworkKind kind) const {
    if (max_lr > 0) return max_lr;
    return kind == NetworkKind::Fmlp ? 1e-4 : 1e-6;
  }

  void validate() const;
};

struct HistoryRow {
  std::size_t epoch = 0;
  std::size_t step = 0;  // global step
  double lr = 0.0;
  double loss_total = 0.0;
  double loss_t = 0.0;
  double loss_f = 0.0;
};

struct FitResult {
  ParamStore<float> params;  // "theta" plus shared variant tensors
  WeightLayout layout;
  std::vector<double> loss_curve;  // one entry per optimization step
  double final_loss = 0.0;
};

// Direct gradient fit of one network to one clip (the reconstruction upper
// bound). Adam on the weights, one-cycle schedule over fit_steps.
FitResult fit_individual_inr(const AudioClip& clip, const TargetNetworkSpec& spec,
                             const TrainConfig& cfg);

struct HyperTrainResult {
  std::vector<HistoryRow> history;
  double first_epoch_loss = 0.0;
  double final_epoch_loss = 0.0;
  std::uint64_t epochs_completed = 0;
};

// Supervised hypernetwork training: per step, sample a batch of augmented
// crops, generate weights, render, minimize the combined loss with AdamW and
// epoch-driven frequency-weight annealing. Throws NumericError on divergence
// after writing a last-good checkpoint (when a directory is given).
HyperTrainResult train_hypernetwork(const std::vector<AudioClip>& dataset,
                                    Hypernetwork<float>& net, const TrainConfig& cfg,
                                    const std::filesystem::path& checkpoint_dir = {},
                                    std::uint64_t start_epoch = 0);

void write_history_csv(const std::vector<HistoryRow>& history,
                       const std::filesystem::path& path);

}  // namespace hsnd
