#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hsnd/error.hpp"
#include "hsnd/ops.hpp"
#include "hsnd/rng.hpp"
#include "hsnd/signal.hpp"
#include "hsnd/tensor.hpp"

namespace hsnd {

enum class NetworkKind { Fmlp, Siren };
enum class Variant { Standard, Residual, Modulated, Shared };

std::string to_string(NetworkKind kind);
std::string to_string(Variant v);
NetworkKind network_kind_from_string(const std::string& s);
Variant variant_from_string(const std::string& s);

struct TargetNetworkSpec {
  NetworkKind kind = NetworkKind::Fmlp;
  std::size_t embedding_l = 10;  // FMLP positional features = 2*embedding_l
  std::vector<std::size_t> hidden_widths{64, 64, 64, 64, 64};
  double omega0 = 2000.0;  // SIREN first layer
  double omega_i = 30.0;   // SIREN later layers
  Variant variant = Variant::Standard;
  std::size_t shared_layer_count = 0;  // leading layers owned by shared weights

  std::size_t input_features() const {
    return kind == NetworkKind::Fmlp ? 2 * embedding_l : 1;
  }
  std::size_t layer_count() const { return hidden_widths.size() + 1; }

  // (fan_in, fan_out) of each dense layer, output layer included.
  std::vector<std::pair<std::size_t, std::size_t>> layer_dims() const;

  void validate() const;
};

struct LayoutEntry {
  std::size_t layer = 0;
  enum class Role { W, b } role = Role::W;
  std::vector<std::size_t> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

// Maps the flat instance-specific weight vector onto per-layer tensors. For
// the Shared variant the leading shared layers are not part of the vector.
struct WeightLayout {
  std::vector<LayoutEntry> entries;
  std::size_t total = 0;

  const LayoutEntry* find(std::size_t layer, LayoutEntry::Role role) const {
    for (const auto& e : entries)
      if (e.layer == layer && e.role == role) return &e;
    return nullptr;
  }
};

WeightLayout make_layout(const TargetNetworkSpec& spec);

std::size_t param_count(const TargetNetworkSpec& spec);
double compression_ratio(const TargetNetworkSpec& spec, std::size_t input_len);

// Uniform hidden width whose parameter count best matches the requested
// compression ratio against input_len samples.
std::size_t width_for_compression_ratio(TargetNetworkSpec proto, double target_cr,
                                        std::size_t input_len);

// Human-readable layout summary for export headers.
std::string layout_description(const WeightLayout& layout);

// Number of leading layers that carry shared tensors for the variant.
std::size_t shared_tensor_layers(const TargetNetworkSpec& spec);

// Learnable weights shared across all generated networks. Indexed by layer;
// sized shared_tensor_layers(spec).
template <typename T>
struct VariantWeights {
  std::vector<Tensor<T>> W;
  std::vector<Tensor<T>> b;
};

// Row t is [sin(2^0 pi t), cos(2^0 pi t), ..., sin(2^{L-1} pi t),
// cos(2^{L-1} pi t)].
template <typename T>
Tensor<T> positional_encoding(const CoordinateGrid& grid, std::size_t L) {
  if (L < 1) throw ArgumentError("positional_encoding: L must be >= 1");
  const std::size_t n = grid.count();
  Tensor<T> out({n, 2 * L});
  for (std::size_t i = 0; i < n; ++i) {
    const double t = grid.coords[i];
    T* row = out.data() + i * 2 * L;
    double freq = M_PI;
    for (std::size_t l = 0; l < L; ++l, freq *= 2.0) {
      row[2 * l] = static_cast<T>(std::sin(freq * t));
      row[2 * l + 1] = static_cast<T>(std::cos(freq * t));
    }
  }
  return out;
}

template <typename T>
struct InrTrace {
  std::vector<Tensor<T>> inputs;    // activation entering each dense layer
  std::vector<Tensor<T>> preacts;   // z = x W_eff^T + b_eff per layer
  std::vector<Tensor<T>> eff_W;     // combined weights actually applied
};

namespace detail {

template <typename T>
Tensor<T> theta_slice(std::span<const T> theta, const LayoutEntry& e) {
  Tensor<T> t(e.shape);
  for (std::size_t i = 0; i < e.size; ++i) t[i] = theta[e.offset + i];
  return t;
}

// Effective (W, b) for one layer under the variant rules.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> combine_layer(const TargetNetworkSpec& spec,
                                              const WeightLayout& layout,
                                              std::span<const T> theta,
                                              const VariantWeights<T>* shared,
                                              std::size_t layer) {
  const std::size_t n_shared = shared_tensor_layers(spec);
  const bool has_shared = layer < n_shared;
  if (has_shared && (!shared || shared->W.size() <= layer))
    throw ShapeError("inr: variant requires shared weights for layer " +
                     std::to_string(layer));

  switch (spec.variant) {
    case Variant::Standard:
      break;
    case Variant::Shared:
      if (has_shared) return {shared->W[layer], shared->b[layer]};
      break;
    case Variant::Residual:
    case Variant::Modulated: {
      const LayoutEntry* ew = layout.find(layer, LayoutEntry::Role::W);
      const LayoutEntry* eb = layout.find(layer, LayoutEntry::Role::b);
      Tensor<T> W = theta_slice(theta, *ew);
      Tensor<T> b = theta_slice(theta, *eb);
      if (!shared->W[layer].same_shape(W) || !shared->b[layer].same_shape(b))
        throw ShapeError("inr: shared weight shape mismatch at layer " +
                         std::to_string(layer));
      if (spec.variant == Variant::Residual) {
        for (std::size_t i = 0; i < W.numel(); ++i) W[i] += shared->W[layer][i];
        for (std::size_t i = 0; i < b.numel(); ++i) b[i] += shared->b[layer][i];
      } else {
        for (std::size_t i = 0; i < W.numel(); ++i) W[i] *= shared->W[layer][i];
        for (std::size_t i = 0; i < b.numel(); ++i) b[i] *= shared->b[layer][i];
      }
      return {std::move(W), std::move(b)};
    }
  }
  const LayoutEntry* ew = layout.find(layer, LayoutEntry::Role::W);
  const LayoutEntry* eb = layout.find(layer, LayoutEntry::Role::b);
  if (!ew || !eb)
    throw ShapeError("inr: layout is missing layer " + std::to_string(layer));
  return {theta_slice(theta, *ew), theta_slice(theta, *eb)};
}

}  // namespace detail

// Evaluates the target network on a coordinate grid. theta holds the
// instance-specific weights in layout order.
template <typename T>
std::vector<T> inr_forward(const TargetNetworkSpec& spec, const WeightLayout& layout,
                           std::span<const T> theta, const VariantWeights<T>* shared,
                           const CoordinateGrid& grid, InrTrace<T>* trace = nullptr) {
  spec.validate();
  if (theta.size() != layout.total)
    throw ShapeError("inr: theta length " + std::to_string(theta.size()) +
                     " does not match layout total " + std::to_string(layout.total));
  const std::size_t n = grid.count();
  const std::size_t layers = spec.layer_count();

  Tensor<T> x;
  if (spec.kind == NetworkKind::Fmlp) {
    x = positional_encoding<T>(grid, spec.embedding_l);
  } else {
    x = Tensor<T>({n, 1});
    for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<T>(grid.coords[i]);
  }

  if (trace) {
    trace->inputs.clear();
    trace->preacts.clear();
    trace->eff_W.clear();
  }

  for (std::size_t layer = 0; layer < layers; ++layer) {
    auto [W, b] = detail::combine_layer(spec, layout, theta, shared, layer);
    Tensor<T> z = dense_forward(x, W, b);
    if (trace) {
      trace->inputs.push_back(x);
      trace->preacts.push_back(z);
      trace->eff_W.push_back(W);
    }
    if (layer + 1 == layers) {
      x = std::move(z);  // linear output layer
    } else if (spec.kind == NetworkKind::Fmlp) {
      x = relu_forward(z);
    } else {
      const T omega = static_cast<T>(layer == 0 ? spec.omega0 : spec.omega_i);
      x = sin_scaled_forward(z, omega);
    }
  }

  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i];
  return out;
}

// Accumulates gradients wrt theta (and shared weights where present) given
// d loss / d output.
template <typename T>
void inr_backward(const TargetNetworkSpec& spec, const WeightLayout& layout,
                  std::span<const T> theta, const VariantWeights<T>* shared,
                  const InrTrace<T>& trace, std::span<const T> grad_out,
                  std::span<T> grad_theta, VariantWeights<T>* shared_grads) {
  const std::size_t layers = spec.layer_count();
  const std::size_t n = trace.inputs[0].dim(0);
  if (grad_out.size() != n) throw ShapeError("inr backward: bad grad length");
  if (grad_theta.size() != layout.total)
    throw ShapeError("inr backward: bad grad_theta length");
  const std::size_t n_shared = shared_tensor_layers(spec);

  Tensor<T> gz({n, 1});
  for (std::size_t i = 0; i < n; ++i) gz[i] = grad_out[i];

  for (std::size_t layer = layers; layer-- > 0;) {
    const Tensor<T>& x = trace.inputs[layer];
    const Tensor<T>& W = trace.eff_W[layer];
    Tensor<T> gx({x.dim(0), x.dim(1)});
    Tensor<T> gW(W.shape());
    Tensor<T> gb({W.dim(0)});
    dense_backward(x, W, gz, layer == 0 ? nullptr : &gx, &gW, &gb);

    // Route the effective-weight gradients to theta and shared slots.
    const bool has_shared = layer < n_shared;
    const LayoutEntry* ew = layout.find(layer, LayoutEntry::Role::W);
    const LayoutEntry* eb = layout.find(layer, LayoutEntry::Role::b);
    switch (spec.variant) {
      case Variant::Standard:
        for (std::size_t i = 0; i < gW.numel(); ++i) grad_theta[ew->offset + i] += gW[i];
        for (std::size_t i = 0; i < gb.numel(); ++i) grad_theta[eb->offset + i] += gb[i];
        break;
      case Variant::Shared:
        if (has_shared) {
          if (shared_grads) {
            for (std::size_t i = 0; i < gW.numel(); ++i)
              shared_grads->W[layer][i] += gW[i];
            for (std::size_t i = 0; i < gb.numel(); ++i)
              shared_grads->b[layer][i] += gb[i];
          }
        } else {
          for (std::size_t i = 0; i < gW.numel(); ++i) grad_theta[ew->offset + i] += gW[i];
          for (std::size_t i = 0; i < gb.numel(); ++i) grad_theta[eb->offset + i] += gb[i];
        }
        break;
      case Variant::Residual:
        for (std::size_t i = 0; i < gW.numel(); ++i) grad_theta[ew->offset + i] += gW[i];
        for (std::size_t i = 0; i < gb.numel(); ++i) grad_theta[eb->offset + i] += gb[i];
        if (shared_grads) {
          for (std::size_t i = 0; i < gW.numel(); ++i) shared_grads->W[layer][i] += gW[i];
          for (std::size_t i = 0; i < gb.numel(); ++i) shared_grads->b[layer][i] += gb[i];
        }
        break;
      case Variant::Modulated: {
        // W_eff = W_s . W_h, so each factor receives the other's value.
        for (std::size_t i = 0; i < gW.numel(); ++i)
          grad_theta[ew->offset + i] += gW[i] * shared->W[layer][i];
        for (std::size_t i = 0; i < gb.numel(); ++i)
          grad_theta[eb->offset + i] += gb[i] * shared->b[layer][i];
        if (shared_grads) {
          for (std::size_t i = 0; i < gW.numel(); ++i)
            shared_grads->W[layer][i] += gW[i] * theta[ew->offset + i];
          for (std::size_t i = 0; i < gb.numel(); ++i)
            shared_grads->b[layer][i] += gb[i] * theta[eb->offset + i];
        }
        break;
      }
    }

    if (layer == 0) break;
    // Through the activation of the previous layer.
    const Tensor<T>& z_prev = trace.preacts[layer - 1];
    Tensor<T> gz_prev(z_prev.shape());
    if (spec.kind == NetworkKind::Fmlp) {
      relu_backward(z_prev, gx, &gz_prev);
    } else {
      const T omega = static_cast<T>(layer - 1 == 0 ? spec.omega0 : spec.omega_i);
      sin_scaled_backward(z_prev, omega, gx, &gz_prev);
    }
    gz = std::move(gz_prev);
  }
}

// Evaluates the network on a fresh uniform grid of n_out points.
template <typename T>
std::vector<T> render(const TargetNetworkSpec& spec, const WeightLayout& layout,
                      std::span<const T> theta, const VariantWeights<T>* shared,
                      std::size_t n_out) {
  return inr_forward<T>(spec, layout, theta, shared, make_grid(n_out));
}

// Splits a flat vector into layout-ordered tensors; inverse of
// flatten_weights. Both directions validate sizes.
template <typename T>
std::vector<Tensor<T>> unflatten_weights(std::span<const T> flat,
                                         const WeightLayout& layout) {
  if (flat.size() != layout.total)
    throw ShapeError("unflatten: flat length does not match layout");
  std::vector<Tensor<T>> out;
  out.reserve(layout.entries.size());
  for (const auto& e : layout.entries) out.push_back(detail::theta_slice(flat, e));
  return out;
}

template <typename T>
std::vector<T> flatten_weights(const std::vector<Tensor<T>>& tensors,
                               const WeightLayout& layout) {
  if (tensors.size() != layout.entries.size())
    throw ShapeError("flatten: tensor count does not match layout");
  std::vector<T> flat(layout.total, T(0));
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto& e = layout.entries[i];
    if (tensors[i].numel() != e.size)
      throw ShapeError("flatten: tensor size mismatch at entry " + std::to_string(i));
    for (std::size_t k = 0; k < e.size; ++k) flat[e.offset + k] = tensors[i][k];
  }
  return flat;
}

// Weight init used both for direct INR fitting and as the bias anchor of the
// SIREN-aware hypernetwork init. FMLP layers follow Kaiming-uniform; SIREN
// layers follow the sine-network scheme (first layer 1/n, later sqrt(6/n)/w).
template <typename T>
std::vector<T> init_target_weights(const TargetNetworkSpec& spec,
                                   const WeightLayout& layout,
                                   std::mt19937_64& rng) {
  const auto dims = spec.layer_dims();
  std::vector<T> theta(layout.total, T(0));
  for (const auto& e : layout.entries) {
    const double fan_in = static_cast<double>(dims[e.layer].first);
    double bound;
    if (e.role == LayoutEntry::Role::W) {
      if (spec.kind == NetworkKind::Fmlp) {
        bound = std::sqrt(6.0 / fan_in);
      } else if (e.layer == 0) {
        bound = 1.0 / fan_in;
      } else {
        bound = std::sqrt(6.0 / fan_in) / spec.omega_i;
      }
    } else {
      bound = 1.0 / std::sqrt(fan_in);
    }
    for (std::size_t i = 0; i < e.size; ++i)
      theta[e.offset + i] = uniform_real<T>(rng, -bound, bound);
  }
  return theta;
}

// Shared tensors start from the same per-layer distributions as instance
// weights; Modulated shares start at 1 so the product is identity-like.
template <typename T>
VariantWeights<T> init_shared_weights(const TargetNetworkSpec& spec,
                                      std::mt19937_64& rng) {
  VariantWeights<T> out;
  const std::size_t n = shared_tensor_layers(spec);
  const auto dims = spec.layer_dims();
  for (std::size_t layer = 0; layer < n; ++layer) {
    const auto [fan_in, fan_out] = dims[layer];
    Tensor<T> W({fan_out, fan_in});
    Tensor<T> b({fan_out});
    if (spec.variant == Variant::Modulated) {
      W.fill(T(1));
      b.fill(T(1));
    } else {
      double bound;
      if (spec.kind == NetworkKind::Fmlp)
        bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      else if (layer == 0)
        bound = 1.0 / static_cast<double>(fan_in);
      else
        bound = std::sqrt(6.0 / static_cast<double>(fan_in)) / spec.omega_i;
      for (std::size_t i = 0; i < W.numel(); ++i)
        W[i] = uniform_real<T>(rng, -bound, bound);
      const double bb = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (std::size_t i = 0; i < b.numel(); ++i)
        b[i] = uniform_real<T>(rng, -bb, bb);
    }
    out.W.push_back(std::move(W));
    out.b.push_back(std::move(b));
  }
  return out;
}

}  // namespace hsnd
