#pragma once

#include <filesystem>
#include <string>

#include "hsnd/hypernet.hpp"
#include "hsnd/train.hpp"

namespace hsnd {

// Declarative run configuration covering the target network, hypernetwork,
// loss, training and augmentation settings.
struct RunConfig {
  TargetNetworkSpec target;
  HypernetworkSpec hyper;
  TrainConfig train;
};

// Flat `section.key = value` text format, '#' comments. Keys are matched
// exactly against the schema; unknown or duplicate keys are errors.
RunConfig parse_run_config_text(const std::string& text);
RunConfig parse_run_config(const std::filesystem::path& path);

// The default configuration rendered in config-file syntax.
std::string default_config_text();

}  // namespace hsnd
