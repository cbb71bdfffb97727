#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "synthimu/errors.hpp"
#include "synthimu/rng.hpp"

namespace synthimu {

// Row-major tensor. Training uses float storage; the gradient checker
// instantiates the same kernels at double precision. Reductions accumulate
// in double either way.
template <class T>
struct TensorT {
  std::vector<int> shape;
  std::vector<T> data;

  TensorT() = default;
  explicit TensorT(std::vector<int> s) : shape(std::move(s)) {
    data.assign(static_cast<std::size_t>(size_of(shape)), T(0));
  }

  static std::int64_t size_of(const std::vector<int>& s) {
    std::int64_t n = 1;
    for (int d : s) {
      if (d <= 0) throw ConfigError("tensor dimensions must be positive");
      n *= d;
    }
    return n;
  }

  std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
  int dim(std::size_t i) const { return shape[i]; }

  template <class U>
  TensorT<U> cast() const {
    TensorT<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
      out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

using Tensor = TensorT<float>;

// Ordered, uniquely keyed parameter tensors. Insertion order is the
// deterministic initialization and serialization order.
template <class T>
struct ParamSetT {
  std::vector<std::pair<std::string, TensorT<T>>> items;

  void add(const std::string& key, TensorT<T> tensor) {
    if (find(key)) throw ConfigError("duplicate parameter key '" + key + "'");
    items.emplace_back(key, std::move(tensor));
  }

  TensorT<T>* find(const std::string& key) {
    for (auto& [k, t] : items)
      if (k == key) return &t;
    return nullptr;
  }
  const TensorT<T>* find(const std::string& key) const {
    for (const auto& [k, t] : items)
      if (k == key) return &t;
    return nullptr;
  }

  TensorT<T>& at(const std::string& key) {
    if (auto* t = find(key)) return *t;
    throw ConfigError("missing parameter key '" + key + "'");
  }
  const TensorT<T>& at(const std::string& key) const {
    if (const auto* t = find(key)) return *t;
    throw ConfigError("missing parameter key '" + key + "'");
  }

  template <class U>
  ParamSetT<U> cast() const {
    ParamSetT<U> out;
    for (const auto& [k, t] : items) out.items.emplace_back(k, t.template cast<U>());
    return out;
  }
};

using ParamSet = ParamSetT<float>;

// --- initialization -------------------------------------------------------

namespace detail {

// Thin-QR orthonormalization of a standard normal rows x cols matrix
// (rows >= cols), with the column signs fixed by the R diagonal so the
// result is a deterministic function of the rng draws. Modified Gram-Schmidt
// in double precision.
inline std::vector<double> orthonormal_columns(int rows, int cols, Rng& rng) {
  std::vector<double> a(static_cast<std::size_t>(rows) * cols);
  for (auto& v : a) v = rng.normal();
  for (int j = 0; j < cols; ++j) {
    for (int prev = 0; prev < j; ++prev) {
      double dot = 0.0;
      for (int i = 0; i < rows; ++i)
        dot += a[static_cast<std::size_t>(i) * cols + prev] *
               a[static_cast<std::size_t>(i) * cols + j];
      for (int i = 0; i < rows; ++i)
        a[static_cast<std::size_t>(i) * cols + j] -=
            dot * a[static_cast<std::size_t>(i) * cols + prev];
    }
    double norm = 0.0;
    for (int i = 0; i < rows; ++i) {
      const double v = a[static_cast<std::size_t>(i) * cols + j];
      norm += v * v;
    }
    norm = std::sqrt(norm);
    if (norm < 1e-12)
      throw NumericError("orthonormal init: degenerate column norm");
    // sign correction: make the leading entry (R diagonal) positive
    const double lead = a[static_cast<std::size_t>(j) * cols + j];
    const double scale = (lead < 0.0 ? -1.0 : 1.0) / norm;
    for (int i = 0; i < rows; ++i)
      a[static_cast<std::size_t>(i) * cols + j] *= scale;
  }
  return a;
}

}  // namespace detail

// Orthonormal weight init: flattening trailing dims into fan-in, the Gram
// matrix over the smaller dimension is the identity.
template <class T>
TensorT<T> orthonormal_init(const std::vector<int>& shape, Rng& rng) {
  if (shape.size() < 2)
    throw ConfigError("orthonormal init needs at least 2 dimensions");
  const int fan_out = shape[0];
  std::int64_t fan_in = 1;
  for (std::size_t i = 1; i < shape.size(); ++i) fan_in *= shape[i];
  if (fan_out <= 0 || fan_in <= 0)
    throw ConfigError("orthonormal init: degenerate shape");

  const int rows = static_cast<int>(std::max<std::int64_t>(fan_out, fan_in));
  const int cols = static_cast<int>(std::min<std::int64_t>(fan_out, fan_in));
  const auto q = detail::orthonormal_columns(rows, cols, rng);

  TensorT<T> out(shape);
  const bool transpose = fan_out < fan_in;  // row-orthonormal result
  for (int r = 0; r < fan_out; ++r)
    for (std::int64_t c = 0; c < fan_in; ++c) {
      const double v = transpose
                           ? q[static_cast<std::size_t>(c) * cols + r]
                           : q[static_cast<std::size_t>(r) * cols + c];
      out.data[static_cast<std::size_t>(r) * fan_in + c] = static_cast<T>(v);
    }
  return out;
}

// --- layer kernels ---------------------------------------------------------

// Temporal convolution: valid correlation along time only, kernel width 1 in
// the channel-column dimension, stride 1. x [B,Tin,D,Cin], w [Cout,Cin,Kt],
// b [Cout] -> y [B,Tin-Kt+1,D,Cout].
template <class T>
TensorT<T> conv_forward(const TensorT<T>& x, const TensorT<T>& w,
                        const TensorT<T>& bias, bool relu) {
  if (x.shape.size() != 4) throw ConfigError("conv input must be 4-d");
  const int batch = x.dim(0), t_in = x.dim(1), d = x.dim(2), c_in = x.dim(3);
  const int c_out = w.dim(0), kt = w.dim(2);
  if (w.dim(1) != c_in)
    throw ConfigError("conv fan-in mismatch: weights expect " +
                      std::to_string(w.dim(1)) + " input channels, got " +
                      std::to_string(c_in));
  const int t_out = t_in - kt + 1;
  if (t_out < 1)
    throw ConfigError("conv: time dimension " + std::to_string(t_in) +
                      " shorter than kernel " + std::to_string(kt));

  TensorT<T> y({batch, t_out, d, c_out});
  for (int b = 0; b < batch; ++b)
    for (int t = 0; t < t_out; ++t)
      for (int col = 0; col < d; ++col) {
        const std::size_t x_base =
            ((static_cast<std::size_t>(b) * t_in + t) * d + col) * c_in;
        const std::size_t y_base =
            ((static_cast<std::size_t>(b) * t_out + t) * d + col) * c_out;
        for (int co = 0; co < c_out; ++co) {
          double acc = static_cast<double>(bias.data[co]);
          const std::size_t w_base = static_cast<std::size_t>(co) * c_in * kt;
          for (int k = 0; k < kt; ++k) {
            const std::size_t x_off =
                x_base + static_cast<std::size_t>(k) * d * c_in;
            for (int ci = 0; ci < c_in; ++ci)
              acc += static_cast<double>(x.data[x_off + ci]) *
                     static_cast<double>(w.data[w_base + ci * kt + k]);
          }
          if (relu && acc < 0.0) acc = 0.0;
          y.data[y_base + co] = static_cast<T>(acc);
        }
      }
  return y;
}

template <class T>
void conv_backward(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& y,
                   TensorT<T> dy, bool relu, TensorT<T>& dx, TensorT<T>& dw,
                   TensorT<T>& db) {
  const int batch = x.dim(0), t_in = x.dim(1), d = x.dim(2), c_in = x.dim(3);
  const int c_out = w.dim(0), kt = w.dim(2);
  const int t_out = t_in - kt + 1;

  if (relu)
    for (std::size_t i = 0; i < dy.data.size(); ++i)
      if (y.data[i] <= T(0)) dy.data[i] = T(0);

  dx = TensorT<T>(x.shape);
  std::vector<double> dw_acc(w.data.size(), 0.0);
  std::vector<double> db_acc(static_cast<std::size_t>(c_out), 0.0);
  std::vector<double> dx_acc(x.data.size(), 0.0);

  for (int b = 0; b < batch; ++b)
    for (int t = 0; t < t_out; ++t)
      for (int col = 0; col < d; ++col) {
        const std::size_t x_base =
            ((static_cast<std::size_t>(b) * t_in + t) * d + col) * c_in;
        const std::size_t y_base =
            ((static_cast<std::size_t>(b) * t_out + t) * d + col) * c_out;
        for (int co = 0; co < c_out; ++co) {
          const double g = static_cast<double>(dy.data[y_base + co]);
          if (g == 0.0) continue;
          db_acc[co] += g;
          const std::size_t w_base = static_cast<std::size_t>(co) * c_in * kt;
          for (int k = 0; k < kt; ++k) {
            const std::size_t x_off =
                x_base + static_cast<std::size_t>(k) * d * c_in;
            for (int ci = 0; ci < c_in; ++ci) {
              dw_acc[w_base + ci * kt + k] +=
                  g * static_cast<double>(x.data[x_off + ci]);
              dx_acc[x_off + ci] +=
                  g * static_cast<double>(w.data[w_base + ci * kt + k]);
            }
          }
        }
      }

  dw = TensorT<T>(w.shape);
  db = TensorT<T>(std::vector<int>{c_out});
  for (std::size_t i = 0; i < dw_acc.size(); ++i) dw.data[i] = static_cast<T>(dw_acc[i]);
  for (std::size_t i = 0; i < db_acc.size(); ++i) db.data[i] = static_cast<T>(db_acc[i]);
  for (std::size_t i = 0; i < dx_acc.size(); ++i) dx.data[i] = static_cast<T>(dx_acc[i]);
}

// Dense layer: x [B,n], w [units,n], b [units] -> y [B,units].
template <class T>
TensorT<T> dense_forward(const TensorT<T>& x, const TensorT<T>& w,
                         const TensorT<T>& bias, bool relu) {
  if (x.shape.size() != 2) throw ConfigError("dense input must be 2-d");
  const int batch = x.dim(0), n = x.dim(1);
  const int units = w.dim(0);
  if (w.dim(1) != n)
    throw ConfigError("dense fan-in mismatch: weights expect " +
                      std::to_string(w.dim(1)) + " inputs, got " +
                      std::to_string(n));

  TensorT<T> y({batch, units});
  for (int b = 0; b < batch; ++b) {
    const std::size_t x_base = static_cast<std::size_t>(b) * n;
    for (int u = 0; u < units; ++u) {
      const std::size_t w_base = static_cast<std::size_t>(u) * n;
      double acc = static_cast<double>(bias.data[u]);
      for (int i = 0; i < n; ++i)
        acc += static_cast<double>(x.data[x_base + i]) *
               static_cast<double>(w.data[w_base + i]);
      if (relu && acc < 0.0) acc = 0.0;
      y.data[static_cast<std::size_t>(b) * units + u] = static_cast<T>(acc);
    }
  }
  return y;
}

template <class T>
void dense_backward(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& y,
                    TensorT<T> dy, bool relu, TensorT<T>& dx, TensorT<T>& dw,
                    TensorT<T>& db) {
  const int batch = x.dim(0), n = x.dim(1);
  const int units = w.dim(0);

  if (relu)
    for (std::size_t i = 0; i < dy.data.size(); ++i)
      if (y.data[i] <= T(0)) dy.data[i] = T(0);

  dx = TensorT<T>(x.shape);
  dw = TensorT<T>(w.shape);
  db = TensorT<T>({units});
  for (int u = 0; u < units; ++u) {
    double acc = 0.0;
    for (int b = 0; b < batch; ++b)
      acc += static_cast<double>(dy.data[static_cast<std::size_t>(b) * units + u]);
    db.data[u] = static_cast<T>(acc);
  }
  for (int u = 0; u < units; ++u) {
    const std::size_t w_base = static_cast<std::size_t>(u) * n;
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int b = 0; b < batch; ++b)
        acc += static_cast<double>(dy.data[static_cast<std::size_t>(b) * units + u]) *
               static_cast<double>(x.data[static_cast<std::size_t>(b) * n + i]);
      dw.data[w_base + i] = static_cast<T>(acc);
    }
  }
  for (int b = 0; b < batch; ++b) {
    const std::size_t x_base = static_cast<std::size_t>(b) * n;
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int u = 0; u < units; ++u)
        acc += static_cast<double>(dy.data[static_cast<std::size_t>(b) * units + u]) *
               static_cast<double>(w.data[static_cast<std::size_t>(u) * n + i]);
      dx.data[x_base + i] = static_cast<T>(acc);
    }
  }
}

// Inverted dropout: zero with probability p and scale survivors by 1/(1-p)
// during training; identity at inference.
template <class T>
TensorT<T> dropout_apply(const TensorT<T>& x, double p, Rng* rng, bool training,
                         std::vector<std::uint8_t>* mask_out) {
  if (p < 0.0 || p >= 1.0) throw ConfigError("dropout p must be in [0, 1)");
  if (!training || p == 0.0) {
    if (mask_out) mask_out->assign(x.data.size(), 1);
    return x;
  }
  if (!rng) throw ConfigError("dropout in training mode needs an rng");
  TensorT<T> y(x.shape);
  if (mask_out) mask_out->assign(x.data.size(), 0);
  const double scale = 1.0 / (1.0 - p);
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    if (rng->uniform() < p) continue;
    y.data[i] = static_cast<T>(static_cast<double>(x.data[i]) * scale);
    if (mask_out) (*mask_out)[i] = 1;
  }
  return y;
}

// An empty mask means the layer acted as identity (inference or p == 0).
template <class T>
TensorT<T> dropout_backward(TensorT<T> dy, const std::vector<std::uint8_t>& mask,
                            double p) {
  if (mask.empty()) return dy;
  const double scale = p > 0.0 ? 1.0 / (1.0 - p) : 1.0;
  for (std::size_t i = 0; i < dy.data.size(); ++i)
    dy.data[i] = mask[i] ? static_cast<T>(static_cast<double>(dy.data[i]) * scale)
                         : T(0);
  return dy;
}

// Adds N(0, sigma^2) noise elementwise; inputs only, labels untouched.
template <class T>
void gaussian_noise_augment(TensorT<T>& batch, double sigma, Rng& rng) {
  if (sigma == 0.0) return;
  for (auto& v : batch.data)
    v = static_cast<T>(static_cast<double>(v) + sigma * rng.normal());
}

// Mean cross-entropy over the batch with max-subtraction stabilization.
// Returns the loss and d(loss)/d(logits) = (softmax - onehot)/B.
template <class T>
std::pair<double, TensorT<T>> softmax_xent(const TensorT<T>& logits,
                                           const std::vector<int>& labels) {
  const int batch = logits.dim(0), k = logits.dim(1);
  if (static_cast<int>(labels.size()) != batch)
    throw DataError("softmax_xent: label count does not match batch");

  TensorT<T> dlogits(logits.shape);
  double loss = 0.0;
  std::vector<double> probs(static_cast<std::size_t>(k));
  for (int b = 0; b < batch; ++b) {
    if (labels[b] < 0 || labels[b] >= k)
      throw DataError("softmax_xent: label out of range: " +
                      std::to_string(labels[b]));
    const std::size_t base = static_cast<std::size_t>(b) * k;
    double max_logit = -1e300;
    for (int c = 0; c < k; ++c)
      max_logit = std::max(max_logit, static_cast<double>(logits.data[base + c]));
    double denom = 0.0;
    for (int c = 0; c < k; ++c) {
      probs[c] = std::exp(static_cast<double>(logits.data[base + c]) - max_logit);
      denom += probs[c];
    }
    for (int c = 0; c < k; ++c) probs[c] /= denom;
    loss -= std::log(std::max(probs[labels[b]], 1e-300));
    for (int c = 0; c < k; ++c) {
      const double grad = (probs[c] - (c == labels[b] ? 1.0 : 0.0)) / batch;
      dlogits.data[base + c] = static_cast<T>(grad);
    }
  }
  return {loss / batch, std::move(dlogits)};
}

template <class T>
TensorT<T> softmax_probs(const TensorT<T>& logits) {
  const int batch = logits.dim(0), k = logits.dim(1);
  TensorT<T> probs(logits.shape);
  for (int b = 0; b < batch; ++b) {
    const std::size_t base = static_cast<std::size_t>(b) * k;
    double max_logit = -1e300;
    for (int c = 0; c < k; ++c)
      max_logit = std::max(max_logit, static_cast<double>(logits.data[base + c]));
    double denom = 0.0;
    std::vector<double> e(static_cast<std::size_t>(k));
    for (int c = 0; c < k; ++c) {
      e[c] = std::exp(static_cast<double>(logits.data[base + c]) - max_logit);
      denom += e[c];
    }
    for (int c = 0; c < k; ++c)
      probs.data[base + c] = static_cast<T>(e[c] / denom);
  }
  return probs;
}

// --- optimizer --------------------------------------------------------------

struct TrainConfig {
  double learning_rate = 1e-3;
  std::vector<double> lr_grid;  // when size > 1, selected on the validation set
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double rms_decay = 0.95;
  double rms_epsilon = 1e-8;
  int batch_size = 200;
  int epochs = 10;
  double noise_sigma = 0.01;
  double dropout_p = 0.5;
  std::uint64_t seed = 42;
};

struct OptimizerState {
  ParamSet square_avg;
  ParamSet momentum;

  static OptimizerState init(const ParamSet& params) {
    OptimizerState state;
    for (const auto& [key, tensor] : params.items) {
      state.square_avg.add(key, Tensor(tensor.shape));
      state.momentum.add(key, Tensor(tensor.shape));
    }
    return state;
  }
};

// RMSProp with momentum and coupled weight decay:
//   g~ = g + wd*w; sq <- rho*sq + (1-rho)*g~^2;
//   m <- momentum*m + g~/sqrt(sq + eps); w <- w - lr*m.
// Frozen keys are skipped entirely (weights and buffers bit-invariant).
inline void rmsprop_step(ParamSet& params, const ParamSet& grads,
                         OptimizerState& state, const TrainConfig& cfg,
                         const std::set<std::string>& frozen = {}) {
  for (auto& [key, w] : params.items) {
    if (frozen.count(key)) continue;
    const Tensor& g = grads.at(key);
    Tensor& sq = state.square_avg.at(key);
    Tensor& m = state.momentum.at(key);
    if (g.data.size() != w.data.size())
      throw ConfigError("gradient shape mismatch for '" + key + "'");
    for (std::size_t i = 0; i < w.data.size(); ++i) {
      const double gt = static_cast<double>(g.data[i]) +
                        cfg.weight_decay * static_cast<double>(w.data[i]);
      const double sq_new =
          cfg.rms_decay * static_cast<double>(sq.data[i]) +
          (1.0 - cfg.rms_decay) * gt * gt;
      const double m_new = cfg.momentum * static_cast<double>(m.data[i]) +
                           gt / std::sqrt(sq_new + cfg.rms_epsilon);
      sq.data[i] = static_cast<float>(sq_new);
      m.data[i] = static_cast<float>(m_new);
      w.data[i] = static_cast<float>(static_cast<double>(w.data[i]) -
                                     cfg.learning_rate * m_new);
    }
  }
}

}  // namespace synthimu
