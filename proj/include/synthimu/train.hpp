#pragma once

#include <set>
#include <string>
#include <vector>

#include "synthimu/metrics.hpp"
#include "synthimu/model.hpp"

namespace synthimu {

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_wf1 = 0.0;
};

struct TrainResult {
  ParamSet best_params;
  std::vector<EpochStats> history;
  double best_val_wf1 = 0.0;
  int best_epoch = -1;  // -1 when no epochs ran
};

// Mini-batch training with per-epoch seeded shuffling, Gaussian input noise,
// dropout, RMSProp, and best-validation-epoch model selection (ties keep the
// earlier epoch). The last partial batch is trained, not dropped.
TrainResult train(const NetworkGraph& graph, ParamSet initial,
                  const std::vector<Window>& train_windows,
                  const std::vector<Window>& val_windows, const TrainConfig& cfg,
                  const std::set<std::string>& frozen = {});

// Inference-mode predictions over a window list, batched.
struct Predictions {
  std::vector<int> labels;
  std::vector<std::vector<float>> probabilities;
  std::vector<std::string> clip_ids;
  std::vector<int> true_labels;
};
Predictions predict_windows(const Model& model, const std::vector<Window>& windows,
                            int batch_size = 256);

double evaluate_wf1(const Model& model, const std::vector<Window>& windows,
                    int num_classes, int batch_size = 256);

// Picks the argmax score; ties resolve to the larger learning rate.
std::size_t pick_best_lr(const std::vector<double>& rates,
                         const std::vector<double>& scores);

struct LrSelection {
  double chosen_lr = 0.0;
  std::vector<double> rates;
  std::vector<double> val_wf1;
  TrainResult best;
};

// Trains one model per learning rate with identical seeds and returns the one
// with the best validation wF1.
LrSelection select_learning_rate(const NetworkGraph& graph,
                                 const std::vector<Window>& train_windows,
                                 const std::vector<Window>& val_windows,
                                 const TrainConfig& cfg,
                                 const std::vector<double>& rates,
                                 const std::set<std::string>& frozen = {});

struct GradCheckEntry {
  std::string key;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_key;
  std::vector<GradCheckEntry> per_tensor;
};

// Compares reverse-mode gradients against central finite differences with the
// parameters promoted to double precision; dropout and noise are inactive.
// Samples at most `samples_per_tensor` evenly spread elements per tensor.
GradCheckReport gradient_check(const NetworkGraph& graph, const ParamSet& params,
                               const std::vector<Window>& windows,
                               double step = 1e-3, int samples_per_tensor = 64);

// Central-difference derivative of the batch loss w.r.t. one parameter
// element, on a double-precision copy of the model.
double finite_diff_grad(const NetworkGraph& graph, const ParamSet& params,
                        const TensorT<double>& x, const std::vector<int>& labels,
                        const std::string& key, std::size_t index,
                        double step = 1e-3);

}  // namespace synthimu
