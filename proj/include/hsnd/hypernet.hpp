#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hsnd/error.hpp"
#include "hsnd/inr.hpp"
#include "hsnd/ops.hpp"
#include "hsnd/param_store.hpp"
#include "hsnd/rng.hpp"
#include "hsnd/tensor.hpp"

namespace hsnd {

struct HypernetworkSpec {
  std::size_t input_len = 32768;
  std::vector<std::size_t> encoder_strides{2, 4, 5, 8};
  std::vector<std::size_t> encoder_channels{32, 32, 32, 32};
  std::vector<std::size_t> head_hidden{400, 768, 768, 768, 768, 768, 400};
  TargetNetworkSpec target;

  // Kernel covers each stride window with one sample of overlap on each side.
  std::size_t encoder_kernel(std::size_t i) const {
    return 2 * encoder_strides[i] + 1;
  }

  std::size_t stride_product() const {
    std::size_t p = 1;
    for (std::size_t s : encoder_strides) p *= s;
    return p;
  }

  std::size_t latent_frames() const {
    std::size_t t = input_len;
    for (std::size_t s : encoder_strides) t = (t + s - 1) / s;
    return t;
  }

  std::size_t latent_dim() const {
    return latent_frames() * encoder_channels.back();
  }

  void validate() const {
    if (input_len < 2) throw ConfigError("hyper: input_len must be >= 2");
    if (encoder_strides.empty() ||
        encoder_strides.size() != encoder_channels.size())
      throw ConfigError("hyper: encoder strides and channels must align");
    for (std::size_t s : encoder_strides)
      if (s < 1) throw ConfigError("hyper: strides must be positive");
    for (std::size_t c : encoder_channels)
      if (c < 1) throw ConfigError("hyper: channels must be positive");
    if (head_hidden.empty()) throw ConfigError("hyper: head needs hidden layers");
    target.validate();
  }
};

template <typename T>
struct EncodeTrace {
  std::vector<Tensor<T>> inputs;   // input to each conv block
  std::vector<Tensor<T>> preacts;  // conv output before ELU
};

template <typename T>
struct HeadTrace {
  std::vector<Tensor<T>> inputs;   // input to each dense layer (proj included)
  std::vector<Tensor<T>> preacts;  // hidden pre-activations
};

template <typename T>
struct GenerateTrace {
  EncodeTrace<T> encode;
  HeadTrace<T> head;
};

// Convolutional encoder plus dense head emitting flattened target-network
// weights. All learnable state lives in the ParamStore; shared variant
// weights are stored alongside under "shared.*".
template <typename T>
class Hypernetwork {
 public:
  explicit Hypernetwork(HypernetworkSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    layout_ = make_layout(spec_.target);

    std::size_t cin = 1;
    for (std::size_t i = 0; i < spec_.encoder_strides.size(); ++i) {
      const std::size_t cout = spec_.encoder_channels[i];
      const std::size_t k = spec_.encoder_kernel(i);
      params_.add("enc" + std::to_string(i) + ".W", Tensor<T>({cout, cin, k}));
      params_.add("enc" + std::to_string(i) + ".b", Tensor<T>({cout}));
      cin = cout;
    }
    std::size_t features = spec_.latent_dim();
    for (std::size_t i = 0; i < spec_.head_hidden.size(); ++i) {
      const std::size_t w = spec_.head_hidden[i];
      params_.add("head" + std::to_string(i) + ".W", Tensor<T>({w, features}));
      params_.add("head" + std::to_string(i) + ".b", Tensor<T>({w}));
      features = w;
    }
    params_.add("proj.W", Tensor<T>({layout_.total, features}));
    params_.add("proj.b", Tensor<T>({layout_.total}));

    const std::size_t n_shared = shared_tensor_layers(spec_.target);
    const auto dims = spec_.target.layer_dims();
    for (std::size_t l = 0; l < n_shared; ++l) {
      params_.add("shared" + std::to_string(l) + ".W",
                  Tensor<T>({dims[l].second, dims[l].first}));
      params_.add("shared" + std::to_string(l) + ".b", Tensor<T>({dims[l].second}));
    }
  }

  const HypernetworkSpec& spec() const { return spec_; }
  const WeightLayout& target_layout() const { return layout_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }

  bool has_shared() const { return shared_tensor_layers(spec_.target) > 0; }

  VariantWeights<T> shared_values() const {
    VariantWeights<T> out;
    const std::size_t n = shared_tensor_layers(spec_.target);
    for (std::size_t l = 0; l < n; ++l) {
      out.W.push_back(params_.at("shared" + std::to_string(l) + ".W").value);
      out.b.push_back(params_.at("shared" + std::to_string(l) + ".b").value);
    }
    return out;
  }

  VariantWeights<T> shared_grad_buffers() const {
    VariantWeights<T> out;
    const std::size_t n = shared_tensor_layers(spec_.target);
    for (std::size_t l = 0; l < n; ++l) {
      out.W.push_back(
          Tensor<T>(params_.at("shared" + std::to_string(l) + ".W").value.shape()));
      out.b.push_back(
          Tensor<T>(params_.at("shared" + std::to_string(l) + ".b").value.shape()));
    }
    return out;
  }

  void accumulate_shared_grads(const VariantWeights<T>& grads) {
    for (std::size_t l = 0; l < grads.W.size(); ++l) {
      auto& gw = params_.at("shared" + std::to_string(l) + ".W").grad;
      auto& gb = params_.at("shared" + std::to_string(l) + ".b").grad;
      for (std::size_t i = 0; i < gw.numel(); ++i) gw[i] += grads.W[l][i];
      for (std::size_t i = 0; i < gb.numel(); ++i) gb[i] += grads.b[l][i];
    }
  }

  // clips [B, input_len] -> latent [B, latent_dim]; strided causal conv
  // blocks with ELU between them.
  Tensor<T> encode(const Tensor<T>& clips, EncodeTrace<T>* trace = nullptr) const {
    if (clips.rank() != 2 || clips.dim(1) != spec_.input_len)
      throw ShapeError("encode: expected [B," + std::to_string(spec_.input_len) +
                       "], got " + shape_str(clips.shape()));
    const std::size_t B = clips.dim(0);
    Tensor<T> x({B, 1, spec_.input_len});
    for (std::size_t i = 0; i < clips.numel(); ++i) x[i] = clips[i];

    const std::size_t n_layers = spec_.encoder_strides.size();
    for (std::size_t i = 0; i < n_layers; ++i) {
      const auto& W = params_.at("enc" + std::to_string(i) + ".W").value;
      const auto& b = params_.at("enc" + std::to_string(i) + ".b").value;
      Tensor<T> z = conv1d_forward(x, W, b, spec_.encoder_strides[i]);
      if (trace) {
        trace->inputs.push_back(x);
        trace->preacts.push_back(z);
      }
      x = i + 1 < n_layers ? elu_forward(z) : std::move(z);
    }

    Tensor<T> latent({B, spec_.latent_dim()});
    for (std::size_t i = 0; i < latent.numel(); ++i) latent[i] = x[i];
    return latent;
  }

  // latent [B, latent_dim] -> theta [B, param_count]; ELU between hidden
  // layers, linear final projection.
  Tensor<T> head(const Tensor<T>& latent, HeadTrace<T>* trace = nullptr) const {
    if (latent.rank() != 2 || latent.dim(1) != spec_.latent_dim())
      throw ShapeError("head: bad latent shape " + shape_str(latent.shape()));
    Tensor<T> x = latent;
    for (std::size_t i = 0; i < spec_.head_hidden.size(); ++i) {
      const auto& W = params_.at("head" + std::to_string(i) + ".W").value;
      const auto& b = params_.at("head" + std::to_string(i) + ".b").value;
      Tensor<T> z = dense_forward(x, W, b);
      if (trace) {
        trace->inputs.push_back(x);
        trace->preacts.push_back(z);
      }
      x = elu_forward(z);
    }
    if (trace) trace->inputs.push_back(x);
    return dense_forward(x, params_.at("proj.W").value, params_.at("proj.b").value);
  }

  Tensor<T> generate(const Tensor<T>& clips, GenerateTrace<T>* trace = nullptr) const {
    Tensor<T> latent = encode(clips, trace ? &trace->encode : nullptr);
    return head(latent, trace ? &trace->head : nullptr);
  }

  // Accumulates parameter gradients for d loss / d theta. Encoder input
  // gradients are discarded.
  void generate_backward(const GenerateTrace<T>& trace, const Tensor<T>& gtheta) {
    Tensor<T> glatent = head_backward(trace.head, gtheta);
    encode_backward(trace.encode, glatent);
  }

  Tensor<T> head_backward(const HeadTrace<T>& trace, const Tensor<T>& gtheta) {
    const std::size_t hidden = spec_.head_hidden.size();
    auto& projW = params_.at("proj.W");
    auto& projb = params_.at("proj.b");
    const Tensor<T>& proj_in = trace.inputs[hidden];
    Tensor<T> gx({proj_in.dim(0), proj_in.dim(1)});
    dense_backward(proj_in, projW.value, gtheta, &gx, &projW.grad, &projb.grad);

    for (std::size_t i = hidden; i-- > 0;) {
      Tensor<T> gz(trace.preacts[i].shape());
      elu_backward(trace.preacts[i], gx, &gz);
      auto& W = params_.at("head" + std::to_string(i) + ".W");
      auto& b = params_.at("head" + std::to_string(i) + ".b");
      const Tensor<T>& in = trace.inputs[i];
      gx = Tensor<T>({in.dim(0), in.dim(1)});
      dense_backward(in, W.value, gz, &gx, &W.grad, &b.grad);
    }
    return gx;
  }

  void encode_backward(const EncodeTrace<T>& trace, const Tensor<T>& glatent) {
    const std::size_t n_layers = spec_.encoder_strides.size();
    const Tensor<T>& last = trace.preacts[n_layers - 1];
    Tensor<T> gz(last.shape());
    for (std::size_t i = 0; i < gz.numel(); ++i) gz[i] = glatent[i];

    for (std::size_t i = n_layers; i-- > 0;) {
      auto& W = params_.at("enc" + std::to_string(i) + ".W");
      auto& b = params_.at("enc" + std::to_string(i) + ".b");
      const Tensor<T>& in = trace.inputs[i];
      const bool need_gx = i > 0;
      Tensor<T> gx(in.shape());
      conv1d_backward(in, W.value, spec_.encoder_strides[i], gz,
                      need_gx ? &gx : nullptr, &W.grad, &b.grad);
      if (!need_gx) break;
      gz = Tensor<T>(trace.preacts[i - 1].shape());
      elu_backward(trace.preacts[i - 1], gx, &gz);
    }
  }

  // Fan-in-scaled uniform init of encoder and hidden head layers; the final
  // projection is left for the specialized routines below.
  void init_base(std::mt19937_64& rng) {
    std::size_t cin = 1;
    for (std::size_t i = 0; i < spec_.encoder_strides.size(); ++i) {
      auto& W = params_.at("enc" + std::to_string(i) + ".W").value;
      const double bound =
          std::sqrt(3.0 / static_cast<double>(cin * spec_.encoder_kernel(i)));
      for (std::size_t k = 0; k < W.numel(); ++k)
        W[k] = uniform_real<T>(rng, -bound, bound);
      params_.at("enc" + std::to_string(i) + ".b").value.zero();
      cin = spec_.encoder_channels[i];
    }
    std::size_t features = spec_.latent_dim();
    for (std::size_t i = 0; i < spec_.head_hidden.size(); ++i) {
      auto& W = params_.at("head" + std::to_string(i) + ".W").value;
      const double bound = std::sqrt(3.0 / static_cast<double>(features));
      for (std::size_t k = 0; k < W.numel(); ++k)
        W[k] = uniform_real<T>(rng, -bound, bound);
      params_.at("head" + std::to_string(i) + ".b").value.zero();
      features = spec_.head_hidden[i];
    }
    std::mt19937_64 shared_rng(rng());
    if (has_shared()) {
      VariantWeights<T> sw = init_shared_weights<T>(spec_.target, shared_rng);
      for (std::size_t l = 0; l < sw.W.size(); ++l) {
        params_.at("shared" + std::to_string(l) + ".W").value = sw.W[l];
        params_.at("shared" + std::to_string(l) + ".b").value = sw.b[l];
      }
    }
  }

  // Plain fan-in init of the projection as well; used as the ablation
  // baseline that lacks any target-aware calibration.
  void init_default(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    init_base(rng);
    auto& W = params_.at("proj.W").value;
    const double bound = std::sqrt(3.0 / static_cast<double>(W.dim(1)));
    for (std::size_t k = 0; k < W.numel(); ++k)
      W[k] = uniform_real<T>(rng, -bound, bound);
    params_.at("proj.b").value.zero();
  }

  // Calibrates per-row projection scales so generated target weights match
  // the Kaiming-uniform variance 2/fan_in (biases 1/(3 fan_in)) over random
  // inputs.
  void init_for_fmlp(std::uint64_t seed, std::size_t n_probes = 64) {
    std::mt19937_64 rng(seed);
    init_base(rng);

    const double s = probe_feature_energy(rng, n_probes);
    auto& W = params_.at("proj.W").value;
    const auto dims = spec_.target.layer_dims();
    for (const auto& e : layout_.entries) {
      const double fan_in = static_cast<double>(dims[e.layer].first);
      const double target_var =
          e.role == LayoutEntry::Role::W ? 2.0 / fan_in : 1.0 / (3.0 * fan_in);
      const double bound = std::sqrt(3.0 * target_var / s);
      for (std::size_t row = e.offset; row < e.offset + e.size; ++row)
        for (std::size_t c = 0; c < W.dim(1); ++c)
          W(row, c) = uniform_real<T>(rng, -bound, bound);
    }
    params_.at("proj.b").value.zero();
  }

  // Near-zero projection weights with the SIREN init encoded in the
  // projection biases, so generated networks start from the sine-friendly
  // distribution regardless of the input.
  void init_for_siren(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    init_base(rng);

    auto& W = params_.at("proj.W").value;
    for (std::size_t k = 0; k < W.numel(); ++k)
      W[k] = uniform_real<T>(rng, -1e-4, 1e-4);
    std::vector<T> anchor = init_target_weights<T>(spec_.target, layout_, rng);
    auto& b = params_.at("proj.b").value;
    for (std::size_t k = 0; k < anchor.size(); ++k) b[k] = anchor[k];
  }

 private:
  // Mean squared feature norm E||h||^2 of the last hidden activation over
  // uniform random probe clips; the quantity the projection scale divides by.
  double probe_feature_energy(std::mt19937_64& rng, std::size_t n_probes) const {
    Tensor<T> probes({n_probes, spec_.input_len});
    for (std::size_t i = 0; i < probes.numel(); ++i)
      probes[i] = uniform_real<T>(rng, -1.0, 1.0);
    Tensor<T> x = encode(probes);
    for (std::size_t i = 0; i < spec_.head_hidden.size(); ++i) {
      const auto& W = params_.at("head" + std::to_string(i) + ".W").value;
      const auto& b = params_.at("head" + std::to_string(i) + ".b").value;
      x = elu_forward(dense_forward(x, W, b));
    }
    double total = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) {
      const double v = static_cast<double>(x[i]);
      total += v * v;
    }
    return std::max(total / static_cast<double>(n_probes), 1e-12);
  }

  HypernetworkSpec spec_;
  WeightLayout layout_;
  ParamStore<T> params_;
};

}  // namespace hsnd
