#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "hsnd/hypernet.hpp"
#include "hsnd/inr.hpp"
#include "hsnd/param_store.hpp"

namespace hsnd {

// HSND1 container: 5 magic bytes, u32-LE length, UTF-8 JSON header, then the
// raw float32-LE parameter payload in header order. Round trips bit-exactly.
inline constexpr char kCheckpointMagic[5] = {'H', 'S', 'N', 'D', '1'};

struct CheckpointMeta {
  std::string kind;  // "hypernetwork" or "inr"
  std::uint64_t epoch = 0;
  std::uint64_t seed = 0;
  int sample_rate = 22050;
  std::uint64_t train_len = 0;  // samples the weights were fitted on
  TargetNetworkSpec target;
  HypernetworkSpec hyper;  // meaningful only when kind == "hypernetwork"

  bool is_hypernetwork() const { return kind == "hypernetwork"; }
};

void save_checkpoint(const CheckpointMeta& meta, const ParamStore<float>& params,
                     const std::filesystem::path& path);

// Header only; cheap way to inspect the checkpoint kind and specs.
CheckpointMeta load_checkpoint_meta(const std::filesystem::path& path);

// Fills `params`, which must already carry the structure declared in the
// header (same names, shapes and order).
CheckpointMeta load_checkpoint_into(const std::filesystem::path& path,
                                    ParamStore<float>& params);

// Parameter store for a directly fitted network: "theta" plus any shared
// variant tensors.
ParamStore<float> make_inr_param_store(const TargetNetworkSpec& spec);

}  // namespace hsnd
