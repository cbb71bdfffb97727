#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "synthimu/train.hpp"

namespace synthimu {

struct CheckpointMeta {
  std::string dataset_tag;
  std::uint64_t seed = 0;
  int epochs = 0;
  double chosen_lr = 0.0;
  std::string stats_ref;  // path of the normalization stats file
};

struct Checkpoint {
  int version = 1;
  NetworkGraph graph;
  ParamSet params;
  CheckpointMeta meta;
};

// File layout: one JSON header line (format, version, graph descriptor,
// metadata, tensor directory with shapes and float offsets), then a raw
// little-endian float32 blob. Round-trips are bit-lossless.
void save_checkpoint(const NetworkGraph& graph, const ParamSet& params,
                     const CheckpointMeta& meta, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

struct TransferPlan {
  int n_conv = 1;             // 0..4 leading conv layers to copy
  bool freeze = false;
  double target_fraction_pct = 100.0;
  std::uint64_t seed = 42;
  std::string source_branch = "N";  // branch supplying convs from a tcnn-imu
};

struct TransplantResult {
  ParamSet params;
  std::set<std::string> frozen;
};

// Copies the first n_conv conv layers (weights and biases, verbatim) from the
// source checkpoint into a freshly initialized parameter set for the target
// graph. Everything not copied is orthonormal-initialized from `rng`, drawing
// the same sequence as init_params, so n_conv = 0 is bit-identical to a fresh
// init with the same rng.
TransplantResult transplant(const Checkpoint& source,
                            const NetworkGraph& target_graph,
                            const TransferPlan& plan, Rng& rng);

struct FineTuneReport {
  TransferPlan plan;
  double chosen_lr = 0.0;
  std::vector<double> lr_grid;
  std::vector<double> lr_scores;
  TrainResult result;
  double val_wf1 = 0.0;
  double test_wf1 = 0.0;
  double test_accuracy = 0.0;
};

// Continues training from transplanted parameters; frozen tensors never move.
// The training windows must already be subsampled to plan.target_fraction_pct.
FineTuneReport fine_tune(const TransplantResult& transplanted,
                         const NetworkGraph& graph,
                         const std::vector<Window>& train_windows,
                         const std::vector<Window>& val_windows,
                         const std::vector<Window>& test_windows,
                         const TransferPlan& plan, const TrainConfig& cfg);

struct MatrixCell {
  std::string id;      // "baseline", "nconv1".."nconv4", "pct10".."pct75"
  int n_conv = 0;      // 0 for the scratch baseline
  double pct = 100.0;
  bool scratch = false;
  std::vector<double> wf1_runs;
  std::vector<double> accuracy_runs;
  RunStats wf1_stats;
  RunStats accuracy_stats;
};

struct TransferMatrix {
  std::vector<MatrixCell> cells;
  int best_n_conv = 0;  // argmax mean wF1 of the n_conv sweep (ties: smaller)
  int runs = 0;
};

// The experiment grid: n_conv 1..4 at 100% of the target training data, then
// the best n_conv at 10/30/50/75%, plus a from-scratch baseline; `runs`
// seeded repetitions per cell (seed, seed+1, ...).
TransferMatrix run_transfer_matrix(const Checkpoint& source,
                                   const NetworkGraph& target_graph,
                                   const WindowedDataset& target,
                                   const TrainConfig& cfg,
                                   const TransferPlan& base_plan, int runs = 5);

}  // namespace synthimu
