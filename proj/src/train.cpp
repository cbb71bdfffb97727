#include "synthimu/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "synthimu/errors.hpp"

namespace synthimu {

TrainResult train(const NetworkGraph& graph, ParamSet initial,
                  const std::vector<Window>& train_windows,
                  const std::vector<Window>& val_windows, const TrainConfig& cfg,
                  const std::set<std::string>& frozen) {
  if (cfg.batch_size < 1) throw ConfigError("batch size must be >= 1");
  TrainResult result;
  result.best_params = initial;
  if (cfg.epochs == 0) return result;
  if (train_windows.empty()) throw DataError("training set is empty");
  if (val_windows.empty()) throw DataError("validation set is empty");

  Model model(graph, std::move(initial));
  OptimizerState opt = OptimizerState::init(model.params());
  Rng rng(cfg.seed, rngstream::kTrain);

  std::vector<std::size_t> order(train_windows.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::int64_t seen = 0;
    const std::size_t n = order.size();
    int batch_index = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size, ++batch_index) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      std::vector<std::size_t> batch_idx(order.begin() + start, order.begin() + stop);
      auto [x, labels] = batch_from_windows(train_windows, batch_idx);
      gaussian_noise_augment(x, cfg.noise_sigma, rng);

      ParamSet grads;
      const double loss = model.loss_and_grads(x, labels, true, &rng, &grads);
      if (!std::isfinite(loss))
        throw NumericError("NaN loss at epoch " + std::to_string(epoch) +
                           " batch " + std::to_string(batch_index));
      loss_sum += loss * static_cast<double>(batch_idx.size());
      seen += static_cast<std::int64_t>(batch_idx.size());
      rmsprop_step(model.params(), grads, opt, cfg, frozen);
    }

    const double val_wf1 =
        evaluate_wf1(model, val_windows, graph.classes, cfg.batch_size);
    result.history.push_back(
        {epoch, loss_sum / static_cast<double>(seen), val_wf1});
    if (val_wf1 > result.best_val_wf1 || result.best_epoch < 0) {
      result.best_val_wf1 = val_wf1;
      result.best_epoch = epoch;
      result.best_params = model.params();
    }
  }
  return result;
}

Predictions predict_windows(const Model& model, const std::vector<Window>& windows,
                            int batch_size) {
  Predictions preds;
  const std::size_t n = windows.size();
  preds.labels.reserve(n);
  preds.probabilities.reserve(n);
  preds.clip_ids.reserve(n);
  preds.true_labels.reserve(n);
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t stop = std::min(n, start + batch_size);
    std::vector<std::size_t> idx(stop - start);
    std::iota(idx.begin(), idx.end(), start);
    auto [x, labels] = batch_from_windows(windows, idx);
    Tensor probs;
    auto predicted = model.predict(x, &probs);
    const int k = probs.dim(1);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      preds.labels.push_back(predicted[i]);
      preds.probabilities.emplace_back(
          probs.data.begin() + static_cast<std::ptrdiff_t>(i) * k,
          probs.data.begin() + static_cast<std::ptrdiff_t>(i + 1) * k);
      preds.clip_ids.push_back(windows[idx[i]].clip_id);
      preds.true_labels.push_back(labels[i]);
    }
  }
  return preds;
}

double evaluate_wf1(const Model& model, const std::vector<Window>& windows,
                    int num_classes, int batch_size) {
  const auto preds = predict_windows(model, windows, batch_size);
  return weighted_f1(confusion(preds.true_labels, preds.labels, num_classes));
}

std::size_t pick_best_lr(const std::vector<double>& rates,
                         const std::vector<double>& scores) {
  if (rates.empty() || rates.size() != scores.size())
    throw ConfigError("learning rate grid and scores must align");
  std::size_t best = 0;
  for (std::size_t i = 1; i < rates.size(); ++i) {
    if (scores[i] > scores[best] ||
        (scores[i] == scores[best] && rates[i] > rates[best]))
      best = i;
  }
  return best;
}

LrSelection select_learning_rate(const NetworkGraph& graph,
                                 const std::vector<Window>& train_windows,
                                 const std::vector<Window>& val_windows,
                                 const TrainConfig& cfg,
                                 const std::vector<double>& rates,
                                 const std::set<std::string>& frozen) {
  if (rates.empty()) throw ConfigError("empty learning rate grid");

  LrSelection selection;
  selection.rates = rates;
  std::vector<TrainResult> results;
  bool any_finite = false;
  for (double lr : rates) {
    TrainConfig local = cfg;
    local.learning_rate = lr;
    Rng init_rng(cfg.seed, rngstream::kInit);
    try {
      TrainResult r = train(graph, init_params(graph, init_rng), train_windows,
                            val_windows, local, frozen);
      selection.val_wf1.push_back(r.best_val_wf1);
      results.push_back(std::move(r));
      any_finite = true;
    } catch (const NumericError&) {
      selection.val_wf1.push_back(-1.0);
      results.emplace_back();
    }
  }
  if (!any_finite)
    throw NumericError("every learning rate in the grid diverged");

  const std::size_t best = pick_best_lr(rates, selection.val_wf1);
  selection.chosen_lr = rates[best];
  selection.best = std::move(results[best]);
  return selection;
}

namespace {

std::vector<std::size_t> sample_indices(std::size_t size, int max_samples) {
  std::vector<std::size_t> idx;
  if (size == 0) return idx;
  const std::size_t count = std::min<std::size_t>(size, static_cast<std::size_t>(max_samples));
  idx.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    idx.push_back(i * size / count);  // evenly spread, deterministic
  return idx;
}

}  // namespace

double finite_diff_grad(const NetworkGraph& graph, const ParamSet& params,
                        const TensorT<double>& x, const std::vector<int>& labels,
                        const std::string& key, std::size_t index, double step) {
  ModelT<double> model(graph, params.cast<double>());
  double& w = model.params().at(key).data[index];
  const double original = w;
  w = original + step;
  const double plus = model.loss_only(x, labels);
  w = original - step;
  const double minus = model.loss_only(x, labels);
  w = original;
  return (plus - minus) / (2.0 * step);
}

GradCheckReport gradient_check(const NetworkGraph& graph, const ParamSet& params,
                               const std::vector<Window>& windows, double step,
                               int samples_per_tensor) {
  if (windows.empty() || windows.size() > 4)
    throw ConfigError("gradient check expects 1..4 windows");

  std::vector<std::size_t> all(windows.size());
  std::iota(all.begin(), all.end(), 0);
  auto [xf, labels] = batch_from_windows(windows, all);
  const TensorT<double> x = xf.cast<double>();

  ModelT<double> model(graph, params.cast<double>());
  ParamSetT<double> grads;
  model.loss_and_grads(x, labels, false, nullptr, &grads);

  auto central = [&](double& slot, double original, double h) {
    slot = original + h;
    const double plus = model.loss_only(x, labels);
    slot = original - h;
    const double minus = model.loss_only(x, labels);
    slot = original;
    return (plus - minus) / (2.0 * h);
  };
  auto rel_of = [](double an, double fd) {
    return std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-8});
  };

  GradCheckReport report;
  for (auto& [key, w] : model.params().items) {
    GradCheckEntry entry;
    entry.key = key;
    const auto& analytic = grads.at(key);
    for (std::size_t i : sample_indices(w.data.size(), samples_per_tensor)) {
      const double an = analytic.data[i];
      double rel = rel_of(an, central(w.data[i], w.data[i], step));
      // A large mismatch at the requested step can be truncation error from a
      // ReLU kink inside [w-h, w+h] rather than a wrong gradient; a genuine
      // defect also fails at the refined steps, kink contamination does not.
      for (double h = step / 100.0; rel > 1e-4 && h >= step / 1e4; h /= 100.0)
        rel = rel_of(an, central(w.data[i], w.data[i], h));
      entry.max_rel_error = std::max(entry.max_rel_error, rel);
    }
    if (entry.max_rel_error > report.max_rel_error) {
      report.max_rel_error = entry.max_rel_error;
      report.worst_key = key;
    }
    report.per_tensor.push_back(std::move(entry));
  }
  return report;
}

}  // namespace synthimu
