#include "hsnd/inr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hsnd {

std::string to_string(NetworkKind kind) {
  return kind == NetworkKind::Fmlp ? "fmlp" : "siren";
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Standard: return "standard";
    case Variant::Residual: return "residual";
    case Variant::Modulated: return "modulated";
    case Variant::Shared: return "shared";
  }
  return "standard";
}

NetworkKind network_kind_from_string(const std::string& s) {
  if (s == "fmlp") return NetworkKind::Fmlp;
  if (s == "siren") return NetworkKind::Siren;
  throw ConfigError("unknown network kind: " + s);
}

Variant variant_from_string(const std::string& s) {
  if (s == "standard") return Variant::Standard;
  if (s == "residual") return Variant::Residual;
  if (s == "modulated") return Variant::Modulated;
  if (s == "shared") return Variant::Shared;
  throw ConfigError("unknown target variant: " + s);
}

std::vector<std::pair<std::size_t, std::size_t>> TargetNetworkSpec::layer_dims()
    const {
  std::vector<std::pair<std::size_t, std::size_t>> dims;
  std::size_t in = input_features();
  for (std::size_t w : hidden_widths) {
    dims.emplace_back(in, w);
    in = w;
  }
  dims.emplace_back(in, 1);
  return dims;
}

void TargetNetworkSpec::validate() const {
  if (hidden_widths.empty())
    throw ConfigError("target: need at least one hidden layer");
  for (std::size_t w : hidden_widths)
    if (w < 1) throw ConfigError("target: hidden widths must be positive");
  if (kind == NetworkKind::Fmlp && embedding_l < 1)
    throw ConfigError("target: embedding_l must be >= 1");
  if (kind == NetworkKind::Siren && (!std::isfinite(omega0) || !std::isfinite(omega_i)))
    throw ConfigError("target: omega values must be finite");
  if (variant == Variant::Shared && shared_layer_count >= layer_count())
    throw ConfigError("target: shared_layer_count must be below the layer count");
}

std::size_t shared_tensor_layers(const TargetNetworkSpec& spec) {
  switch (spec.variant) {
    case Variant::Standard: return 0;
    case Variant::Residual:
    case Variant::Modulated: return spec.layer_count();
    case Variant::Shared: return spec.shared_layer_count;
  }
  return 0;
}

WeightLayout make_layout(const TargetNetworkSpec& spec) {
  spec.validate();
  const auto dims = spec.layer_dims();
  const std::size_t first_instance_layer =
      spec.variant == Variant::Shared ? spec.shared_layer_count : 0;
  WeightLayout layout;
  std::size_t offset = 0;
  for (std::size_t layer = first_instance_layer; layer < dims.size(); ++layer) {
    const auto [fan_in, fan_out] = dims[layer];
    LayoutEntry w;
    w.layer = layer;
    w.role = LayoutEntry::Role::W;
    w.shape = {fan_out, fan_in};
    w.offset = offset;
    w.size = fan_out * fan_in;
    offset += w.size;
    layout.entries.push_back(std::move(w));

    LayoutEntry b;
    b.layer = layer;
    b.role = LayoutEntry::Role::b;
    b.shape = {fan_out};
    b.offset = offset;
    b.size = fan_out;
    offset += b.size;
    layout.entries.push_back(std::move(b));
  }
  layout.total = offset;
  return layout;
}

std::size_t param_count(const TargetNetworkSpec& spec) {
  return make_layout(spec).total;
}

double compression_ratio(const TargetNetworkSpec& spec, std::size_t input_len) {
  return static_cast<double>(input_len) /
         static_cast<double>(param_count(spec));
}

std::size_t width_for_compression_ratio(TargetNetworkSpec proto, double target_cr,
                                        std::size_t input_len) {
  if (target_cr <= 0) throw ArgumentError("width search: target CR must be positive");
  std::size_t best_w = 1;
  double best_err = std::numeric_limits<double>::infinity();
  for (std::size_t w = 1; w <= 4096; ++w) {
    proto.hidden_widths.assign(proto.hidden_widths.size(), w);
    const double cr = compression_ratio(proto, input_len);
    const double err = std::abs(cr - target_cr) / target_cr;
    if (err < best_err) {
      best_err = err;
      best_w = w;
    }
    if (cr < target_cr / 8.0) break;  // CR only shrinks from here
  }
  return best_w;
}

std::string layout_description(const WeightLayout& layout) {
  std::string s;
  for (const auto& e : layout.entries) {
    if (!s.empty()) s += "; ";
    s += std::to_string(e.layer);
    s += e.role == LayoutEntry::Role::W ? ":W " : ":b ";
    for (std::size_t i = 0; i < e.shape.size(); ++i) {
      if (i) s += "x";
      s += std::to_string(e.shape[i]);
    }
    s += " @" + std::to_string(e.offset);
  }
  return s;
}

}  // namespace hsnd
