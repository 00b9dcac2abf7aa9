#include "secant/grad/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>

namespace secant::grad {

namespace {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<MatRM<T>>;
template <typename T>
using CMapM = Eigen::Map<const MatRM<T>>;

template <typename T>
using NodePtr = std::shared_ptr<TensorNode<T>>;

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

template <typename T>
void im2col(const T* x, std::size_t C, std::size_t H, std::size_t W, std::size_t K,
            std::size_t stride, std::size_t OH, std::size_t OW, T* cols) {
  const std::size_t P = OH * OW;
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t ki = 0; ki < K; ++ki) {
      for (std::size_t kj = 0; kj < K; ++kj) {
        T* dst = cols + ((c * K + ki) * K + kj) * P;
        for (std::size_t oy = 0; oy < OH; ++oy) {
          const T* src = x + (c * H + oy * stride + ki) * W + kj;
          T* row = dst + oy * OW;
          if (stride == 1) {
            std::copy(src, src + OW, row);
          } else {
            for (std::size_t ox = 0; ox < OW; ++ox) row[ox] = src[ox * stride];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, std::size_t C, std::size_t H, std::size_t W, std::size_t K,
                std::size_t stride, std::size_t OH, std::size_t OW, T* dx) {
  const std::size_t P = OH * OW;
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t ki = 0; ki < K; ++ki) {
      for (std::size_t kj = 0; kj < K; ++kj) {
        const T* src = cols + ((c * K + ki) * K + kj) * P;
        for (std::size_t oy = 0; oy < OH; ++oy) {
          T* dst = dx + (c * H + oy * stride + ki) * W + kj;
          const T* row = src + oy * OW;
          for (std::size_t ox = 0; ox < OW; ++ox) dst[ox * stride] += row[ox];
        }
      }
    }
  }
}

// Samples per im2col chunk; bounded so the column buffer stays a few MB.
std::size_t conv_chunk(std::size_t ckk, std::size_t p, std::size_t n) {
  const std::size_t budget = std::size_t(1) << 21;
  return std::clamp<std::size_t>(budget / std::max<std::size_t>(ckk * p, 1), 1, n);
}

template <typename T>
bool same_or_scalar(const Tensor<T>& a, const Tensor<T>& b) {
  return a.shape() == b.shape() || b.numel() == 1;
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias,
                 std::size_t stride) {
  require(input.rank() == 4 && weights.rank() == 4,
          "conv2d expects NCHW input and OCxCxKxK weights, got input " +
              shape_str(input.shape()) + " and weights " + shape_str(weights.shape()));
  const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const std::size_t OC = weights.dim(0), K = weights.dim(2);
  require(weights.dim(1) == C && weights.dim(3) == K,
          "conv2d channel/kernel mismatch: input " + shape_str(input.shape()) + " vs weights " +
              shape_str(weights.shape()));
  require(bias.numel() == OC, "conv2d bias " + shape_str(bias.shape()) + " does not match weights " +
                                  shape_str(weights.shape()));
  require(stride >= 1, "conv2d stride must be >= 1");
  require(H >= K && W >= K, "conv2d input " + shape_str(input.shape()) +
                                " smaller than kernel " + shape_str(weights.shape()));
  const std::size_t OH = (H - K) / stride + 1, OW = (W - K) / stride + 1;
  const std::size_t P = OH * OW, CKK = C * K * K, in_sz = C * H * W, out_sz = OC * P;

  Buffer<T> out(N * out_sz);
  {
    const std::size_t chunk = conv_chunk(CKK, P, N);
    Buffer<T> cols(CKK * P * chunk), tmp(CKK * P);
    CMapM<T> wm(weights.raw(), OC, CKK);
    MatRM<T> y(OC, P * chunk);
    for (std::size_t n0 = 0; n0 < N; n0 += chunk) {
      const std::size_t nb = std::min(chunk, N - n0);
      // Chunked columns laid out as [CKK, nb*P] by interleaving per-sample blocks.
      MapM<T> cm(cols.data(), CKK, nb * P);
      for (std::size_t s = 0; s < nb; ++s) {
        im2col(input.raw() + (n0 + s) * in_sz, C, H, W, K, stride, OH, OW, tmp.data());
        cm.middleCols(s * P, P) = CMapM<T>(tmp.data(), CKK, P);
      }
      y.leftCols(nb * P).noalias() = wm * cm;
      for (std::size_t s = 0; s < nb; ++s) {
        MapM<T> dst(out.data() + (n0 + s) * out_sz, OC, P);
        dst = y.middleCols(s * P, P);
        for (std::size_t o = 0; o < OC; ++o) dst.row(o).array() += bias[o];
      }
    }
  }

  auto xn = input.node(), wn = weights.node(), bn = bias.node();
  return make_result<T>(
      {N, OC, OH, OW}, std::move(out), {xn, wn, bn},
      [xn, wn, bn, N, C, H, W, OC, K, stride, OH, OW, P, CKK, in_sz, out_sz](TensorNode<T>& self) {
        CMapM<T> wm(wn->data.data(), OC, CKK);
        const std::size_t chunk = conv_chunk(CKK, P, N);
        MatRM<T> cols(CKK, chunk * P), dy(OC, chunk * P), dcols;
        Buffer<T> tmp(CKK * P);
        for (std::size_t n0 = 0; n0 < N; n0 += chunk) {
          const std::size_t nb = std::min(chunk, N - n0);
          for (std::size_t s = 0; s < nb; ++s) {
            dy.middleCols(s * P, P) = CMapM<T>(self.grad.data() + (n0 + s) * out_sz, OC, P);
          }
          auto dyb = dy.leftCols(nb * P);
          if (bn->requires_grad) {
            Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> db(bn->grad.data(), OC);
            db += dyb.rowwise().sum();
          }
          if (wn->requires_grad) {
            for (std::size_t s = 0; s < nb; ++s) {
              im2col(xn->data.data() + (n0 + s) * in_sz, C, H, W, K, stride, OH, OW, tmp.data());
              cols.middleCols(s * P, P) = CMapM<T>(tmp.data(), CKK, P);
            }
            MapM<T> dw(wn->grad.data(), OC, CKK);
            dw.noalias() += dyb * cols.leftCols(nb * P).transpose();
          }
          if (xn->requires_grad) {
            dcols.noalias() = wm.transpose() * dyb;
            for (std::size_t s = 0; s < nb; ++s) {
              Eigen::Map<MatRM<T>>(tmp.data(), CKK, P) = dcols.middleCols(s * P, P);
              col2im_add(tmp.data(), C, H, W, K, stride, OH, OW,
                         xn->grad.data() + (n0 + s) * in_sz);
            }
          }
        }
      });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias) {
  require(input.rank() == 2 && weights.rank() == 2,
          "linear expects rank-2 input and weights, got " + shape_str(input.shape()) + " and " +
              shape_str(weights.shape()));
  const std::size_t N = input.dim(0), IN = input.dim(1), OUT = weights.dim(1);
  require(weights.dim(0) == IN, "linear input " + shape_str(input.shape()) +
                                    " incompatible with weights " + shape_str(weights.shape()));
  require(bias.numel() == OUT, "linear bias " + shape_str(bias.shape()) +
                                   " incompatible with weights " + shape_str(weights.shape()));
  Buffer<T> out(N * OUT);
  MapM<T> y(out.data(), N, OUT);
  y.noalias() = CMapM<T>(input.raw(), N, IN) * CMapM<T>(weights.raw(), IN, OUT);
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias.raw(), OUT);
  y.rowwise() += b;

  auto xn = input.node(), wn = weights.node(), bn = bias.node();
  return make_result<T>({N, OUT}, std::move(out), {xn, wn, bn},
                        [xn, wn, bn, N, IN, OUT](TensorNode<T>& self) {
                          CMapM<T> dy(self.grad.data(), N, OUT);
                          if (xn->requires_grad) {
                            MapM<T>(xn->grad.data(), N, IN).noalias() +=
                                dy * CMapM<T>(wn->data.data(), IN, OUT).transpose();
                          }
                          if (wn->requires_grad) {
                            MapM<T>(wn->grad.data(), IN, OUT).noalias() +=
                                CMapM<T>(xn->data.data(), N, IN).transpose() * dy;
                          }
                          if (bn->requires_grad) {
                            Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(bn->grad.data(), OUT) +=
                                dy.colwise().sum();
                          }
                        });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& input, const Tensor<T>& gain, const Tensor<T>& bias, T eps) {
  require(input.rank() >= 1, "layer_norm on empty shape");
  const std::size_t D = input.shape().back();
  require(gain.numel() == D && bias.numel() == D,
          "layer_norm gain/bias " + shape_str(gain.shape()) + " do not match input " +
              shape_str(input.shape()));
  const std::size_t rows = input.numel() / D;
  Buffer<T> out(input.numel()), xhat(input.numel()), inv_std(rows);
  const T* x = input.raw();
  for (std::size_t r = 0; r < rows; ++r) {
    T mu = 0;
    for (std::size_t j = 0; j < D; ++j) mu += x[r * D + j];
    mu /= T(D);
    T var = 0;
    for (std::size_t j = 0; j < D; ++j) {
      const T d = x[r * D + j] - mu;
      var += d * d;
    }
    var /= T(D);
    inv_std[r] = T(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < D; ++j) {
      const std::size_t i = r * D + j;
      xhat[i] = (x[i] - mu) * inv_std[r];
      out[i] = xhat[i] * gain[j] + bias[j];
    }
  }
  auto xn = input.node(), gn = gain.node(), bn = bias.node();
  return make_result<T>(
      input.shape(), std::move(out), {xn, gn, bn},
      [xn, gn, bn, D, rows, xhat = std::move(xhat), inv_std = std::move(inv_std)](TensorNode<T>& self) {
        const T* dy = self.grad.data();
        for (std::size_t r = 0; r < rows; ++r) {
          T mean_dxh = 0, mean_dxh_xh = 0;
          for (std::size_t j = 0; j < D; ++j) {
            const std::size_t i = r * D + j;
            const T dxh = dy[i] * gn->data[j];
            mean_dxh += dxh;
            mean_dxh_xh += dxh * xhat[i];
            if (gn->requires_grad) gn->grad[j] += dy[i] * xhat[i];
            if (bn->requires_grad) bn->grad[j] += dy[i];
          }
          if (!xn->requires_grad) continue;
          mean_dxh /= T(D);
          mean_dxh_xh /= T(D);
          for (std::size_t j = 0; j < D; ++j) {
            const std::size_t i = r * D + j;
            const T dxh = dy[i] * gn->data[j];
            xn->grad[i] += inv_std[r] * (dxh - mean_dxh - xhat[i] * mean_dxh_xh);
          }
        }
      });
}

template <typename T>
Tensor<T> activate(const Tensor<T>& input, Activation kind) {
  const std::size_t n = input.numel();
  Buffer<T> out(n);
  const T* x = input.raw();
  switch (kind) {
    case Activation::relu:
      for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(x[i]);
      break;
    case Activation::softplus:
      for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::max(x[i], T(0)) + std::log1p(std::exp(-std::abs(x[i])));
      }
      break;
  }
  auto xn = input.node();
  auto result = make_result<T>(input.shape(), std::move(out), {xn}, nullptr);
  if (!result.requires_grad()) return result;
  result.node()->backward = [xn, kind](TensorNode<T>& self) {
    const std::size_t n = self.data.size();
    const T* x = xn->data.data();
    T* dx = xn->grad.data();
    const T* dy = self.grad.data();
    switch (kind) {
      case Activation::relu:
        for (std::size_t i = 0; i < n; ++i) dx[i] += x[i] > T(0) ? dy[i] : T(0);
        break;
      case Activation::tanh:
        for (std::size_t i = 0; i < n; ++i) dx[i] += dy[i] * (T(1) - self.data[i] * self.data[i]);
        break;
      case Activation::softplus:
        for (std::size_t i = 0; i < n; ++i) dx[i] += dy[i] / (T(1) + std::exp(-x[i]));
        break;
    }
  };
  return result;
}

namespace {

enum class BinOp { add, sub, mul, min };

template <typename T>
Tensor<T> binary(const Tensor<T>& a, const Tensor<T>& b, BinOp op, const char* name) {
  require(same_or_scalar(a, b), std::string(name) + ": shape " + shape_str(a.shape()) +
                                    " incompatible with " + shape_str(b.shape()));
  const std::size_t n = a.numel();
  const bool bcast = b.numel() == 1 && a.numel() != 1;
  Buffer<T> out(n);
  const T* x = a.raw();
  const T* y = b.raw();
  for (std::size_t i = 0; i < n; ++i) {
    const T yi = y[bcast ? 0 : i];
    switch (op) {
      case BinOp::add: out[i] = x[i] + yi; break;
      case BinOp::sub: out[i] = x[i] - yi; break;
      case BinOp::mul: out[i] = x[i] * yi; break;
      case BinOp::min: out[i] = std::min(x[i], yi); break;
    }
  }
  auto an = a.node(), bn = b.node();
  return make_result<T>(a.shape(), std::move(out), {an, bn}, [an, bn, op, bcast](TensorNode<T>& self) {
    const std::size_t n = self.data.size();
    const T* dy = self.grad.data();
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = bcast ? 0 : i;
      T da = 0, db = 0;
      switch (op) {
        case BinOp::add: da = dy[i]; db = dy[i]; break;
        case BinOp::sub: da = dy[i]; db = -dy[i]; break;
        case BinOp::mul: da = dy[i] * bn->data[j]; db = dy[i] * an->data[i]; break;
        case BinOp::min:
          if (an->data[i] <= bn->data[j]) da = dy[i]; else db = dy[i];
          break;
      }
      if (an->requires_grad) an->grad[i] += da;
      if (bn->requires_grad) bn->grad[j] += db;
    }
  });
}

template <typename T, typename Fwd, typename Deriv>
Tensor<T> unary(const Tensor<T>& x, Fwd fwd, Deriv deriv) {
  const std::size_t n = x.numel();
  Buffer<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(x[i]);
  auto xn = x.node();
  return make_result<T>(x.shape(), std::move(out), {xn}, [xn, deriv](TensorNode<T>& self) {
    for (std::size_t i = 0; i < self.data.size(); ++i) {
      xn->grad[i] += self.grad[i] * deriv(xn->data[i], self.data[i]);
    }
  });
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) { return binary(a, b, BinOp::add, "add"); }
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) { return binary(a, b, BinOp::sub, "sub"); }
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) { return binary(a, b, BinOp::mul, "mul"); }
template <typename T>
Tensor<T> minimum(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), "minimum: shape " + shape_str(a.shape()) + " vs " +
                                      shape_str(b.shape()));
  return binary(a, b, BinOp::min, "minimum");
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  return unary(x, [factor](T v) { return v * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T value) {
  return unary(x, [value](T v) { return v + value; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
  return unary(x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
  return unary(
      x, [lo, hi](T v) { return std::clamp(v, lo, hi); },
      [lo, hi](T v, T) { return (v >= lo && v <= hi) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T s = 0;
  for (T v : x.data()) s += v;
  auto xn = x.node();
  return make_result<T>({1}, {s}, {xn}, [xn](TensorNode<T>& self) {
    const T g = self.grad[0];
    for (auto& d : xn->grad) d += g;
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  require(x.numel() > 0, "mean of empty tensor");
  return scale(sum(x), T(1) / T(x.numel()));
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  require(shape_numel(shape) == x.numel(),
          "reshape " + shape_str(x.shape()) + " to " + shape_str(shape));
  Buffer<T> out(x.data().begin(), x.data().end());
  auto xn = x.node();
  return make_result<T>(std::move(shape), std::move(out), {xn}, [xn](TensorNode<T>& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> flatten(const Tensor<T>& x) {
  require(x.rank() >= 1, "flatten of rank-0 tensor");
  const std::size_t n = x.dim(0);
  return reshape(x, {n, n ? x.numel() / n : 0});
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t start, std::size_t count) {
  require(x.rank() == 2 && start + count <= x.dim(1),
          "slice_cols [" + std::to_string(start) + "," + std::to_string(start + count) +
              ") out of range for " + shape_str(x.shape()));
  const std::size_t N = x.dim(0), D = x.dim(1);
  Buffer<T> out(N * count);
  for (std::size_t r = 0; r < N; ++r) {
    std::copy_n(x.raw() + r * D + start, count, out.data() + r * count);
  }
  auto xn = x.node();
  return make_result<T>({N, count}, std::move(out), {xn}, [xn, N, D, start, count](TensorNode<T>& self) {
    for (std::size_t r = 0; r < N; ++r) {
      for (std::size_t j = 0; j < count; ++j) xn->grad[r * D + start + j] += self.grad[r * count + j];
    }
  });
}

template <typename T>
Tensor<T> concat_cols(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.rank() == 2 && b.rank() == 2 && a.dim(0) == b.dim(0),
          "concat_cols " + shape_str(a.shape()) + " with " + shape_str(b.shape()));
  const std::size_t N = a.dim(0), P = a.dim(1), Q = b.dim(1);
  Buffer<T> out(N * (P + Q));
  for (std::size_t r = 0; r < N; ++r) {
    std::copy_n(a.raw() + r * P, P, out.data() + r * (P + Q));
    std::copy_n(b.raw() + r * Q, Q, out.data() + r * (P + Q) + P);
  }
  auto an = a.node(), bn = b.node();
  return make_result<T>({N, P + Q}, std::move(out), {an, bn}, [an, bn, N, P, Q](TensorNode<T>& self) {
    for (std::size_t r = 0; r < N; ++r) {
      const T* g = self.grad.data() + r * (P + Q);
      if (an->requires_grad) {
        for (std::size_t j = 0; j < P; ++j) an->grad[r * P + j] += g[j];
      }
      if (bn->requires_grad) {
        for (std::size_t j = 0; j < Q; ++j) bn->grad[r * Q + j] += g[P + j];
      }
    }
  });
}

template <typename T>
Tensor<T> squashed_gaussian_logprob(const Tensor<T>& mean_t, const Tensor<T>& log_std,
                                    const Tensor<T>& pre_tanh) {
  require(mean_t.rank() == 2 && mean_t.shape() == log_std.shape() &&
              mean_t.shape() == pre_tanh.shape(),
          "squashed_gaussian_logprob shapes " + shape_str(mean_t.shape()) + ", " +
              shape_str(log_std.shape()) + ", " + shape_str(pre_tanh.shape()));
  const std::size_t N = mean_t.dim(0), D = mean_t.dim(1);
  const T half_log_2pi = T(0.5) * std::log(T(2) * std::numbers::pi_v<T>);
  const T log2 = std::numbers::ln2_v<T>;
  Buffer<T> out(N, T(0));
  for (std::size_t r = 0; r < N; ++r) {
    T acc = 0;
    for (std::size_t j = 0; j < D; ++j) {
      const std::size_t i = r * D + j;
      const T z = pre_tanh[i];
      const T u = (z - mean_t[i]) * std::exp(-log_std[i]);
      const T m2z = T(-2) * z;
      const T sp = std::max(m2z, T(0)) + std::log1p(std::exp(-std::abs(m2z)));
      acc += T(-0.5) * u * u - log_std[i] - half_log_2pi - T(2) * (log2 - z - sp);
    }
    out[r] = acc;
  }
  auto mn = mean_t.node(), sn = log_std.node(), zn = pre_tanh.node();
  return make_result<T>({N, 1}, std::move(out), {mn, sn, zn}, [mn, sn, zn, N, D](TensorNode<T>& self) {
    for (std::size_t r = 0; r < N; ++r) {
      const T g = self.grad[r];
      for (std::size_t j = 0; j < D; ++j) {
        const std::size_t i = r * D + j;
        const T inv_std = std::exp(-sn->data[i]);
        const T u = (zn->data[i] - mn->data[i]) * inv_std;
        if (mn->requires_grad) mn->grad[i] += g * u * inv_std;
        if (sn->requires_grad) sn->grad[i] += g * (u * u - T(1));
        if (zn->requires_grad) zn->grad[i] += g * (-u * inv_std + T(2) * std::tanh(zn->data[i]));
      }
    }
  });
}

#define SECANT_INSTANTIATE_OPS(T)                                                              \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t); \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);             \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);      \
  template Tensor<T> activate(const Tensor<T>&, Activation);                                   \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> minimum(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> scale(const Tensor<T>&, T);                                               \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                          \
  template Tensor<T> exp(const Tensor<T>&);                                                    \
  template Tensor<T> clamp(const Tensor<T>&, T, T);                                            \
  template Tensor<T> sum(const Tensor<T>&);                                                    \
  template Tensor<T> mean(const Tensor<T>&);                                                   \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                         \
  template Tensor<T> flatten(const Tensor<T>&);                                                \
  template Tensor<T> slice_cols(const Tensor<T>&, std::size_t, std::size_t);                   \
  template Tensor<T> concat_cols(const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> squashed_gaussian_logprob(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);

SECANT_INSTANTIATE_OPS(float)
SECANT_INSTANTIATE_OPS(double)

}  // namespace secant::grad
