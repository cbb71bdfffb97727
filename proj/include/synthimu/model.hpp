#pragma once

#include <utility>
#include <vector>

#include "synthimu/arch.hpp"
#include "synthimu/dataio.hpp"
#include "synthimu/nn.hpp"

namespace synthimu {

template <class T>
TensorT<T> reshape(const TensorT<T>& x, std::vector<int> shape) {
  if (TensorT<T>::size_of(shape) != x.size())
    throw ConfigError("reshape changes element count");
  TensorT<T> out;
  out.shape = std::move(shape);
  out.data = x.data;
  return out;
}

// Executes a NetworkGraph over window batches. Forward caches are explicit so
// the backward pass is a pure function of (params, cache, dloss).
template <class T>
class ModelT {
 public:
  ModelT(NetworkGraph graph, ParamSetT<T> params)
      : graph_(std::move(graph)), params_(std::move(params)) {}

  const NetworkGraph& graph() const { return graph_; }
  ParamSetT<T>& params() { return params_; }
  const ParamSetT<T>& params() const { return params_; }

  struct StackCache {
    std::vector<TensorT<T>> values;  // values[0] = input, values[i+1] = layer i out
    std::vector<std::vector<std::uint8_t>> dropout_masks;
  };
  struct Cache {
    std::vector<StackCache> branches;
    TensorT<T> concat;
    StackCache head;
  };

  // x: [B, W, D]; returns logits [B, classes]
  TensorT<T> forward(const TensorT<T>& x, bool training, Rng* rng,
                     Cache* cache) const {
    if (x.shape.size() != 3 || x.dim(1) != graph_.window_len ||
        x.dim(2) != static_cast<int>(graph_.channels.size()))
      throw ConfigError("model input must be [B, W, D] matching the graph");
    const int batch = x.dim(0);

    std::vector<TensorT<T>> branch_outputs;
    if (cache) cache->branches.assign(graph_.branches.size(), {});
    for (std::size_t bi = 0; bi < graph_.branches.size(); ++bi) {
      const auto& branch = graph_.branches[bi];
      TensorT<T> input = gather_columns(x, branch.channel_idx);
      branch_outputs.push_back(run_stack(branch.param_prefix(), branch.stack,
                                         std::move(input), training, rng,
                                         cache ? &cache->branches[bi] : nullptr));
    }

    TensorT<T> concat = concat_features(branch_outputs, batch);
    if (cache) cache->concat = concat;
    return run_stack("", graph_.head, std::move(concat), training, rng,
                     cache ? &cache->head : nullptr);
  }

  // Exact reverse-mode gradients for every parameter given the cached forward.
  ParamSetT<T> backward(const Cache& cache, const TensorT<T>& dlogits) const {
    if (cache.head.values.empty())
      throw ConfigError("backward called without a cached forward pass");
    ParamSetT<T> grads;
    for (const auto& [key, tensor] : params_.items)
      grads.add(key, TensorT<T>(tensor.shape));

    TensorT<T> dconcat =
        backward_stack("", graph_.head, cache.head, dlogits, grads);

    int offset = 0;
    for (std::size_t bi = 0; bi < graph_.branches.size(); ++bi) {
      const auto& branch = graph_.branches[bi];
      const auto& out = cache.branches[bi].values.back();
      const int width = out.dim(1);
      TensorT<T> dbranch({dconcat.dim(0), width});
      for (int b = 0; b < dconcat.dim(0); ++b)
        for (int f = 0; f < width; ++f)
          dbranch.data[static_cast<std::size_t>(b) * width + f] =
              dconcat.data[static_cast<std::size_t>(b) * dconcat.dim(1) + offset + f];
      offset += width;
      backward_stack(branch.param_prefix(), branch.stack, cache.branches[bi],
                     std::move(dbranch), grads);
    }
    return grads;
  }

  // Convenience: forward + cross-entropy + backward.
  double loss_and_grads(const TensorT<T>& x, const std::vector<int>& labels,
                        bool training, Rng* rng, ParamSetT<T>* grads) const {
    Cache cache;
    TensorT<T> logits = forward(x, training, rng, &cache);
    auto [loss, dlogits] = softmax_xent(logits, labels);
    if (grads) *grads = backward(cache, dlogits);
    return loss;
  }

  double loss_only(const TensorT<T>& x, const std::vector<int>& labels) const {
    TensorT<T> logits = forward(x, false, nullptr, nullptr);
    return softmax_xent(logits, labels).first;
  }

  // Inference-mode class predictions; ties resolve to the smallest index.
  std::vector<int> predict(const TensorT<T>& x, TensorT<T>* probs_out) const {
    TensorT<T> logits = forward(x, false, nullptr, nullptr);
    TensorT<T> probs = softmax_probs(logits);
    const int batch = probs.dim(0), k = probs.dim(1);
    std::vector<int> labels(static_cast<std::size_t>(batch));
    for (int b = 0; b < batch; ++b) {
      int best = 0;
      for (int c = 1; c < k; ++c)
        if (probs.data[static_cast<std::size_t>(b) * k + c] >
            probs.data[static_cast<std::size_t>(b) * k + best])
          best = c;
      labels[static_cast<std::size_t>(b)] = best;
    }
    if (probs_out) *probs_out = std::move(probs);
    return labels;
  }

 private:
  static TensorT<T> gather_columns(const TensorT<T>& x,
                                   const std::vector<int>& idx) {
    const int batch = x.dim(0), w = x.dim(1), d = x.dim(2);
    TensorT<T> out({batch, w, static_cast<int>(idx.size()), 1});
    std::size_t pos = 0;
    for (int b = 0; b < batch; ++b)
      for (int t = 0; t < w; ++t) {
        const std::size_t base = (static_cast<std::size_t>(b) * w + t) * d;
        for (int j : idx) out.data[pos++] = x.data[base + j];
      }
    return out;
  }

  static TensorT<T> concat_features(const std::vector<TensorT<T>>& parts,
                                    int batch) {
    int total = 0;
    for (const auto& p : parts) total += p.dim(1);
    TensorT<T> out({batch, total});
    int offset = 0;
    for (const auto& p : parts) {
      const int width = p.dim(1);
      for (int b = 0; b < batch; ++b)
        for (int f = 0; f < width; ++f)
          out.data[static_cast<std::size_t>(b) * total + offset + f] =
              p.data[static_cast<std::size_t>(b) * width + f];
      offset += width;
    }
    return out;
  }

  TensorT<T> run_stack(const std::string& prefix,
                       const std::vector<LayerNode>& stack, TensorT<T> input,
                       bool training, Rng* rng, StackCache* cache) const {
    if (cache) {
      cache->values.clear();
      cache->values.push_back(input);
      cache->dropout_masks.assign(stack.size(), {});
    }
    TensorT<T> cur = std::move(input);
    for (std::size_t i = 0; i < stack.size(); ++i) {
      const auto& node = stack[i];
      TensorT<T> next;
      if (const auto* conv = std::get_if<TemporalConvSpec>(&node.spec)) {
        next = conv_forward(cur, params_.at(prefix + node.name + ".W"),
                            params_.at(prefix + node.name + ".b"), conv->relu);
      } else if (std::get_if<FlattenSpec>(&node.spec)) {
        next = reshape(cur, {cur.dim(0), static_cast<int>(cur.size() / cur.dim(0))});
      } else if (const auto* dense = std::get_if<DenseSpec>(&node.spec)) {
        next = dense_forward(cur, params_.at(prefix + node.name + ".W"),
                             params_.at(prefix + node.name + ".b"), dense->relu);
      } else if (const auto* drop = std::get_if<DropoutSpec>(&node.spec)) {
        // an empty cached mask means the layer acted as identity
        if (training && drop->p > 0.0)
          next = dropout_apply(cur, drop->p, rng, true,
                               cache ? &cache->dropout_masks[i] : nullptr);
        else
          next = cur;
      } else if (std::get_if<SoftmaxOutputSpec>(&node.spec)) {
        next = dense_forward(cur, params_.at(prefix + node.name + ".W"),
                             params_.at(prefix + node.name + ".b"), false);
      }
      cur = std::move(next);
      if (cache) cache->values.push_back(cur);
    }
    return cur;
  }

  TensorT<T> backward_stack(const std::string& prefix,
                            const std::vector<LayerNode>& stack,
                            const StackCache& cache, TensorT<T> dout,
                            ParamSetT<T>& grads) const {
    for (std::size_t i = stack.size(); i-- > 0;) {
      const auto& node = stack[i];
      const auto& input = cache.values[i];
      const auto& output = cache.values[i + 1];
      if (const auto* conv = std::get_if<TemporalConvSpec>(&node.spec)) {
        TensorT<T> dx, dw, db;
        conv_backward(input, params_.at(prefix + node.name + ".W"), output,
                      std::move(dout), conv->relu, dx, dw, db);
        grads.at(prefix + node.name + ".W") = std::move(dw);
        grads.at(prefix + node.name + ".b") = std::move(db);
        dout = std::move(dx);
      } else if (std::get_if<FlattenSpec>(&node.spec)) {
        dout = reshape(dout, input.shape);
      } else if (const auto* dense = std::get_if<DenseSpec>(&node.spec)) {
        TensorT<T> dx, dw, db;
        dense_backward(input, params_.at(prefix + node.name + ".W"), output,
                       std::move(dout), dense->relu, dx, dw, db);
        grads.at(prefix + node.name + ".W") = std::move(dw);
        grads.at(prefix + node.name + ".b") = std::move(db);
        dout = std::move(dx);
      } else if (const auto* drop = std::get_if<DropoutSpec>(&node.spec)) {
        dout = dropout_backward(std::move(dout), cache.dropout_masks[i], drop->p);
      } else if (std::get_if<SoftmaxOutputSpec>(&node.spec)) {
        TensorT<T> dx, dw, db;
        dense_backward(input, params_.at(prefix + node.name + ".W"), output,
                       std::move(dout), false, dx, dw, db);
        grads.at(prefix + node.name + ".W") = std::move(dw);
        grads.at(prefix + node.name + ".b") = std::move(db);
        dout = std::move(dx);
      }
    }
    return dout;
  }

  NetworkGraph graph_;
  ParamSetT<T> params_;
};

using Model = ModelT<float>;

// Packs selected windows into a float [B, W, D] batch plus labels.
inline std::pair<Tensor, std::vector<int>> batch_from_windows(
    const std::vector<Window>& windows, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw DataError("empty batch");
  const int w = windows[indices[0]].window_len;
  const int d = windows[indices[0]].channel_count;
  Tensor x({static_cast<int>(indices.size()), w, d});
  std::vector<int> labels(indices.size());
  std::size_t pos = 0;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const Window& win = windows[indices[i]];
    if (win.window_len != w || win.channel_count != d)
      throw DataError("ragged window shapes in batch");
    for (double v : win.data) x.data[pos++] = static_cast<float>(v);
    labels[i] = win.label;
  }
  return {std::move(x), std::move(labels)};
}

}  // namespace synthimu
