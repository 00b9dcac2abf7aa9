#pragma once

#include <cstddef>

#include "secant/grad/tensor.hpp"

namespace secant::grad {

// Layers. All tape-recorded.

/// Valid (unpadded) 2-D convolution. input [N,C,H,W], weights [OC,C,K,K], bias [OC].
/// Output [N,OC,(H-K)/stride+1,(W-K)/stride+1].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias,
                 std::size_t stride);

/// Affine map. input [N,in], weights [in,out], bias [out].
template <typename T>
Tensor<T> linear(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias);

/// Normalizes over the last extent, then applies per-feature gain and bias.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& input, const Tensor<T>& gain, const Tensor<T>& bias,
                     T eps = T(1e-5));

enum class Activation { relu, tanh, softplus };

template <typename T>
Tensor<T> activate(const Tensor<T>& input, Activation kind);
template <typename T>
Tensor<T> relu(const Tensor<T>& x) { return activate(x, Activation::relu); }
template <typename T>
Tensor<T> tanh(const Tensor<T>& x) { return activate(x, Activation::tanh); }
template <typename T>
Tensor<T> softplus(const Tensor<T>& x) { return activate(x, Activation::softplus); }

// Element-wise arithmetic. `b` must match `a`'s shape or hold one element.
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
/// Element-wise min; ties route the gradient to `a`.
template <typename T>
Tensor<T> minimum(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);
template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T value);
template <typename T>
Tensor<T> exp(const Tensor<T>& x);
/// Hard clamp; gradient is zero outside [lo, hi].
template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi);

// Reductions to a one-element tensor.
template <typename T>
Tensor<T> sum(const Tensor<T>& x);
template <typename T>
Tensor<T> mean(const Tensor<T>& x);

// Shape plumbing.
template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);
/// [N, ...] -> [N, prod(...)]
template <typename T>
Tensor<T> flatten(const Tensor<T>& x);
/// Columns [start, start+count) of a rank-2 tensor.
template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t start, std::size_t count);
template <typename T>
Tensor<T> concat_cols(const Tensor<T>& a, const Tensor<T>& b);

/// Log-density of a = tanh(z) where z ~ N(mean, exp(log_std)^2) per dimension.
/// Inputs are [N,d]; output is [N,1]. The tanh correction uses
/// log(1 - tanh(z)^2) = 2 (log 2 - z - softplus(-2z)).
template <typename T>
Tensor<T> squashed_gaussian_logprob(const Tensor<T>& mean, const Tensor<T>& log_std,
                                    const Tensor<T>& pre_tanh);

}  // namespace secant::grad
