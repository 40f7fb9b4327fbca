#pragma once

#include <cmath>
#include <cstddef>

#include "hsnd/error.hpp"
#include "hsnd/tensor.hpp"

// Fixed repertoire of differentiable layers with hand-derived backward
// rules. Backward functions accumulate into their gradient outputs so a
// caller can sum contributions from several paths.
namespace hsnd {

// y = x * W^T + b with x [B,Fin], W [Fout,Fin], b [Fout].
template <typename T>
Tensor<T> dense_forward(const Tensor<T>& x, const Tensor<T>& W,
                        const Tensor<T>& b) {
  if (x.rank() != 2 || W.rank() != 2 || b.rank() != 1)
    throw ShapeError("dense: expected x[B,Fin], W[Fout,Fin], b[Fout]");
  const std::size_t B = x.dim(0), fin = x.dim(1);
  const std::size_t fout = W.dim(0);
  if (W.dim(1) != fin || b.dim(0) != fout)
    throw ShapeError("dense: shape mismatch, x=" + shape_str(x.shape()) +
                     " W=" + shape_str(W.shape()) + " b=" + shape_str(b.shape()));
  Tensor<T> y({B, fout});
  for (std::size_t i = 0; i < B; ++i) {
    const T* xi = x.data() + i * fin;
    T* yi = y.data() + i * fout;
    for (std::size_t o = 0; o < fout; ++o) {
      const T* wo = W.data() + o * fin;
      // Four fixed-order partial sums: deterministic, but free of the
      // serial dependency that blocks pipelining of a single accumulator.
      T a0 = T(0), a1 = T(0), a2 = T(0), a3 = T(0);
      std::size_t k = 0;
      for (; k + 4 <= fin; k += 4) {
        a0 += xi[k] * wo[k];
        a1 += xi[k + 1] * wo[k + 1];
        a2 += xi[k + 2] * wo[k + 2];
        a3 += xi[k + 3] * wo[k + 3];
      }
      T acc = (a0 + a1) + (a2 + a3);
      for (; k < fin; ++k) acc += xi[k] * wo[k];
      yi[o] = acc + b[o];
    }
  }
  return y;
}

template <typename T>
void dense_backward(const Tensor<T>& x, const Tensor<T>& W, const Tensor<T>& gy,
                    Tensor<T>* gx, Tensor<T>* gW, Tensor<T>* gb) {
  const std::size_t B = x.dim(0), fin = x.dim(1), fout = W.dim(0);
  if (gy.rank() != 2 || gy.dim(0) != B || gy.dim(1) != fout)
    throw ShapeError("dense backward: bad gradient shape");
  if (gx) {
    for (std::size_t i = 0; i < B; ++i) {
      const T* gyi = gy.data() + i * fout;
      T* gxi = gx->data() + i * fin;
      for (std::size_t o = 0; o < fout; ++o) {
        const T g = gyi[o];
        const T* wo = W.data() + o * fin;
        for (std::size_t k = 0; k < fin; ++k) gxi[k] += g * wo[k];
      }
    }
  }
  if (gW) {
    for (std::size_t i = 0; i < B; ++i) {
      const T* gyi = gy.data() + i * fout;
      const T* xi = x.data() + i * fin;
      for (std::size_t o = 0; o < fout; ++o) {
        const T g = gyi[o];
        T* gwo = gW->data() + o * fin;
        for (std::size_t k = 0; k < fin; ++k) gwo[k] += g * xi[k];
      }
    }
  }
  if (gb) {
    for (std::size_t i = 0; i < B; ++i) {
      const T* gyi = gy.data() + i * fout;
      for (std::size_t o = 0; o < fout; ++o) (*gb)[o] += gyi[o];
    }
  }
}

// Elementwise activations. relu'(0) is defined as 0; elu uses alpha = 1.

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& z) {
  Tensor<T> y(z.shape());
  for (std::size_t i = 0; i < z.numel(); ++i) y[i] = z[i] > T(0) ? z[i] : T(0);
  return y;
}

template <typename T>
void relu_backward(const Tensor<T>& z, const Tensor<T>& gy, Tensor<T>* gz) {
  for (std::size_t i = 0; i < z.numel(); ++i)
    if (z[i] > T(0)) (*gz)[i] += gy[i];
}

template <typename T>
Tensor<T> elu_forward(const Tensor<T>& z) {
  Tensor<T> y(z.shape());
  for (std::size_t i = 0; i < z.numel(); ++i)
    y[i] = z[i] > T(0) ? z[i] : std::expm1(z[i]);
  return y;
}

template <typename T>
void elu_backward(const Tensor<T>& z, const Tensor<T>& gy, Tensor<T>* gz) {
  for (std::size_t i = 0; i < z.numel(); ++i)
    (*gz)[i] += z[i] > T(0) ? gy[i] : gy[i] * std::exp(z[i]);
}

// sin(omega * z) applied to a pre-activation z. Angle formation and the
// sine itself run in double regardless of T: omega * z in float32 loses
// enough argument precision to corrupt gradients near the sine's extrema.
template <typename T>
Tensor<T> sin_scaled_forward(const Tensor<T>& z, T omega) {
  Tensor<T> y(z.shape());
  const double w = static_cast<double>(omega);
  for (std::size_t i = 0; i < z.numel(); ++i)
    y[i] = static_cast<T>(std::sin(w * static_cast<double>(z[i])));
  return y;
}

template <typename T>
void sin_scaled_backward(const Tensor<T>& z, T omega, const Tensor<T>& gy,
                         Tensor<T>* gz) {
  const double w = static_cast<double>(omega);
  for (std::size_t i = 0; i < z.numel(); ++i)
    (*gz)[i] += gy[i] * static_cast<T>(w * std::cos(w * static_cast<double>(z[i])));
}

inline std::size_t conv1d_out_len(std::size_t t, std::size_t stride) {
  return (t + stride - 1) / stride;
}

// Strided 1-D convolution with causal-same padding: the input is logically
// left-padded with K-1 zeros so output position o sees input window
// [o*stride - (K-1), o*stride]. Output length is ceil(T/stride).
// x [B,Cin,T], kernel [Cout,Cin,K], bias [Cout] -> y [B,Cout,ceil(T/stride)].
template <typename T>
Tensor<T> conv1d_forward(const Tensor<T>& x, const Tensor<T>& kernel,
                         const Tensor<T>& bias, std::size_t stride) {
  if (x.rank() != 3 || kernel.rank() != 3 || bias.rank() != 1)
    throw ShapeError("conv1d: expected x[B,Cin,T], kernel[Cout,Cin,K], bias[Cout]");
  const std::size_t B = x.dim(0), cin = x.dim(1), t_in = x.dim(2);
  const std::size_t cout = kernel.dim(0), K = kernel.dim(2);
  if (kernel.dim(1) != cin || bias.dim(0) != cout)
    throw ShapeError("conv1d: shape mismatch, x=" + shape_str(x.shape()) +
                     " kernel=" + shape_str(kernel.shape()));
  if (K < 1 || stride < 1) throw ArgumentError("conv1d: K and stride must be >= 1");

  const std::size_t t_out = conv1d_out_len(t_in, stride);
  Tensor<T> y({B, cout, t_out});
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(K) - 1;
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t co = 0; co < cout; ++co) {
      T* yo = y.data() + (b * cout + co) * t_out;
      for (std::size_t o = 0; o < t_out; ++o) yo[o] = bias[co];
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const T* xi = x.data() + (b * cin + ci) * t_in;
        const T* ker = kernel.data() + (co * cin + ci) * K;
        for (std::size_t o = 0; o < t_out; ++o) {
          const std::ptrdiff_t start =
              static_cast<std::ptrdiff_t>(o * stride) - pad;
          T acc = T(0);
          for (std::size_t k = 0; k < K; ++k) {
            const std::ptrdiff_t idx = start + static_cast<std::ptrdiff_t>(k);
            if (idx >= 0) acc += ker[k] * xi[idx];
          }
          yo[o] += acc;
        }
      }
    }
  }
  return y;
}

template <typename T>
void conv1d_backward(const Tensor<T>& x, const Tensor<T>& kernel,
                     std::size_t stride, const Tensor<T>& gy, Tensor<T>* gx,
                     Tensor<T>* gkernel, Tensor<T>* gbias) {
  const std::size_t B = x.dim(0), cin = x.dim(1), t_in = x.dim(2);
  const std::size_t cout = kernel.dim(0), K = kernel.dim(2);
  const std::size_t t_out = conv1d_out_len(t_in, stride);
  if (gy.rank() != 3 || gy.dim(0) != B || gy.dim(1) != cout || gy.dim(2) != t_out)
    throw ShapeError("conv1d backward: bad gradient shape");
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(K) - 1;

  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t co = 0; co < cout; ++co) {
      const T* gyo = gy.data() + (b * cout + co) * t_out;
      if (gbias) {
        T acc = T(0);
        for (std::size_t o = 0; o < t_out; ++o) acc += gyo[o];
        (*gbias)[co] += acc;
      }
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const T* xi = x.data() + (b * cin + ci) * t_in;
        const T* ker = kernel.data() + (co * cin + ci) * K;
        T* gxi = gx ? gx->data() + (b * cin + ci) * t_in : nullptr;
        T* gker = gkernel ? gkernel->data() + (co * cin + ci) * K : nullptr;
        for (std::size_t o = 0; o < t_out; ++o) {
          const T g = gyo[o];
          if (g == T(0)) continue;
          const std::ptrdiff_t start =
              static_cast<std::ptrdiff_t>(o * stride) - pad;
          for (std::size_t k = 0; k < K; ++k) {
            const std::ptrdiff_t idx = start + static_cast<std::ptrdiff_t>(k);
            if (idx < 0) continue;
            if (gxi) gxi[idx] += g * ker[k];
            if (gker) gker[k] += g * xi[idx];
          }
        }
      }
    }
  }
}

}  // namespace hsnd
