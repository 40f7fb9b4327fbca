#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hsnd/error.hpp"
#include "hsnd/tensor.hpp"

namespace hsnd {

template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
};

// Named parameter tensors with gradient slots. Iteration order is insertion
// order, which fixes the flat component order used by optimizers, gradient
// checks and checkpoints.
template <typename T>
class ParamStore {
 public:
  Param<T>& add(const std::string& name, Tensor<T> value) {
    if (index_.count(name)) throw ArgumentError("duplicate parameter: " + name);
    index_[name] = params_.size();
    params_.push_back(Param<T>{name, std::move(value), {}});
    Param<T>& p = params_.back();
    p.grad = Tensor<T>(p.value.shape());
    return p;
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  Param<T>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ArgumentError("unknown parameter: " + name);
    return params_[it->second];
  }
  const Param<T>& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ArgumentError("unknown parameter: " + name);
    return params_[it->second];
  }

  std::size_t size() const { return params_.size(); }
  Param<T>& operator[](std::size_t i) { return params_[i]; }
  const Param<T>& operator[](std::size_t i) const { return params_[i]; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  std::size_t total_values() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.numel();
    return n;
  }

  void zero_grads() {
    for (auto& p : params_) p.grad.zero();
  }

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& p : params_) out.add(p.name, p.value.template cast<U>());
    return out;
  }

  // Copies values (not grads) from a store with identical structure.
  template <typename U>
  void assign_values_from(const ParamStore<U>& other) {
    if (other.size() != params_.size())
      throw ShapeError("parameter store structure mismatch");
    for (std::size_t i = 0; i < params_.size(); ++i) {
      const auto& src = other[i];
      if (src.value.numel() != params_[i].value.numel())
        throw ShapeError("parameter size mismatch: " + params_[i].name);
      for (std::size_t k = 0; k < src.value.numel(); ++k)
        params_[i].value[k] = static_cast<T>(src.value[k]);
    }
  }

 private:
  std::vector<Param<T>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;

  bool passed(double tol) const { return max_rel_err < tol; }

  const GradCheckEntry* worst() const {
    const GradCheckEntry* w = nullptr;
    for (const auto& e : entries)
      if (!w || e.max_rel_err > w->max_rel_err) w = &e;
    return w;
  }
};

namespace detail {

// Components are judged against max(|analytic|, |numeric|, floor). The floor
// blends two scales: the objective magnitude, because central differences at
// step 1e-5 cannot resolve gradients below roughly eps * |f| / (2h); and the
// largest gradient entry of the tensor, because rounding noise accumulates
// at that scale and lands on components whose true value nearly cancels.
inline double grad_floor(double objective, double grad_scale) {
  return 1e-4 * std::max(1.0 + std::abs(objective), grad_scale);
}

inline double grad_rel_err(double analytic, double numeric, double floor) {
  double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

template <typename T>
double max_abs(const Tensor<T>& t) {
  double m = 0.0;
  for (std::size_t i = 0; i < t.numel(); ++i)
    m = std::max(m, std::abs(static_cast<double>(t[i])));
  return m;
}

}  // namespace detail

// Checks hand-derived backward rules against central finite differences.
// `f(store, want_grad)` must evaluate the scalar objective and, when
// want_grad is set, populate parameter gradients for the same point.
// Differencing uses the adaptive step h = 1e-5 * max(1, |w|) per component.
template <typename T>
GradCheckReport grad_check(ParamStore<T>& params,
                           const std::function<T(ParamStore<T>&, bool)>& f) {
  params.zero_grads();
  T base = f(params, true);
  if (!std::isfinite(static_cast<double>(base)))
    throw NumericError("grad_check: objective is not finite");

  std::vector<Tensor<T>> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) analytic.push_back(p.grad);

  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = params[pi];
    const double floor = detail::grad_floor(static_cast<double>(base),
                                            detail::max_abs(analytic[pi]));
    GradCheckEntry entry;
    entry.name = p.name;
    for (std::size_t k = 0; k < p.value.numel(); ++k) {
      const T saved = p.value[k];
      const T h = static_cast<T>(
          1e-5 * std::max(1.0, std::abs(static_cast<double>(saved))));
      p.value[k] = saved + h;
      const double fp = static_cast<double>(f(params, false));
      p.value[k] = saved - h;
      const double fm = static_cast<double>(f(params, false));
      p.value[k] = saved;
      const double numeric = (fp - fm) / (2.0 * static_cast<double>(h));
      const double a = static_cast<double>(analytic[pi][k]);
      const double rel = detail::grad_rel_err(a, numeric, floor);
      if (rel >= entry.max_rel_err) {
        entry.max_rel_err = rel;
        entry.worst_index = k;
        entry.analytic = a;
        entry.numeric = numeric;
      }
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

// Checks a reduced-precision backward implementation against a float64
// finite-difference oracle of the same computation. `params` supplies the
// evaluation point; `f` produces analytic gradients at precision T while
// `f64` evaluates the identical objective in double for the differencing.
// Plain T-precision differencing cannot certify tight tolerances for
// T = float: the step 1e-5 amplifies float32 rounding of the objective far
// beyond 1e-4 relative.
template <typename T>
GradCheckReport grad_check_vs_f64(
    ParamStore<T>& params, const std::function<T(ParamStore<T>&, bool)>& f,
    const std::function<double(ParamStore<double>&, bool)>& f64) {
  params.zero_grads();
  const double base = static_cast<double>(f(params, true));

  ParamStore<double> p64 = params.template cast<double>();

  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = params[pi];
    auto& pd = p64[pi];
    const double floor = detail::grad_floor(base, detail::max_abs(p.grad));
    GradCheckEntry entry;
    entry.name = p.name;
    for (std::size_t k = 0; k < p.value.numel(); ++k) {
      const double saved = pd.value[k];
      const double h = 1e-5 * std::max(1.0, std::abs(saved));
      pd.value[k] = saved + h;
      const double fp = f64(p64, false);
      pd.value[k] = saved - h;
      const double fm = f64(p64, false);
      pd.value[k] = saved;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = static_cast<double>(p.grad[k]);
      const double rel = detail::grad_rel_err(a, numeric, floor);
      if (rel >= entry.max_rel_err) {
        entry.max_rel_err = rel;
        entry.worst_index = k;
        entry.analytic = a;
        entry.numeric = numeric;
      }
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace hsnd
