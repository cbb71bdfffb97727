#pragma once

#include <string>
#include <variant>
#include <vector>

#include "synthimu/nn.hpp"

namespace synthimu {

struct TemporalConvSpec {
  int filters = 64;
  int kernel_t = 5;
  bool relu = true;
};
struct FlattenSpec {};
struct DenseSpec {
  int units = 0;
  bool relu = false;
};
struct DropoutSpec {
  double p = 0.5;
};
struct SoftmaxOutputSpec {
  int classes = 0;
};

using LayerSpec = std::variant<TemporalConvSpec, FlattenSpec, DenseSpec,
                               DropoutSpec, SoftmaxOutputSpec>;

struct LayerNode {
  std::string name;  // e.g. "conv1", "fc", "out"
  LayerSpec spec;
};

// One conv stack over a subset of window columns. The plain tCNN is a single
// unnamed branch holding conv1..conv4 + flatten, with the dense head shared
// in `head`.
struct BranchNode {
  std::string name;               // "" for the single-stack tCNN
  std::vector<int> channel_idx;   // columns of the [W, D] window
  std::vector<LayerNode> stack;

  std::string param_prefix() const {
    return name.empty() ? "" : "branch." + name + ".";
  }
};

struct NetworkGraph {
  std::string arch;  // "tcnn" | "tcnn-imu"
  int window_len = 0;
  std::vector<std::string> channels;  // window column names, in order
  int classes = 0;
  int conv_filters = 64;
  int kernel_t = 5;
  int fc_units = 256;
  int branch_units = 256;
  int fusion_units = 256;
  double dropout_p = 0.5;
  std::vector<std::pair<std::string, std::vector<std::string>>> limb_channels;

  std::vector<BranchNode> branches;
  std::vector<LayerNode> head;
};

// Minimum window length: four valid [5,1] convolutions consume 16 steps.
constexpr int kMinWindowLen = 17;

std::vector<std::string> default_channel_names(int d);

// conv x4 -> flatten -> Dense(fc) -> Dropout -> Dense(fc) -> Dropout -> softmax head
NetworkGraph build_tcnn(int window_len, const std::vector<std::string>& channels,
                        int num_classes, int fc_units = 256,
                        double dropout_p = 0.5, int conv_filters = 64);
NetworkGraph build_tcnn(int window_len, int num_channels, int num_classes,
                        int fc_units = 256, double dropout_p = 0.5,
                        int conv_filters = 64);

// One conv stack per non-empty limb, per-branch Dense, concatenation, then
// fusion Dense -> Dropout -> softmax head. Branches follow the canonical limb
// order (LA, LL, RA, RL, N); limbs with no channels are dropped.
NetworkGraph build_tcnn_imu(
    int window_len, const std::vector<std::string>& channels,
    const std::vector<std::pair<std::string, std::vector<std::string>>>& limb_channels,
    int num_classes, int branch_units = 256, int fusion_units = 256,
    double dropout_p = 0.5, int conv_filters = 64);

// Parameter keys and shapes in deterministic (initialization) order.
std::vector<std::pair<std::string, std::vector<int>>> param_shapes(
    const NetworkGraph& graph);

// Initializes every weight orthonormally and every bias to zero, in
// param_shapes order.
ParamSet init_params(const NetworkGraph& graph, Rng& rng);

std::int64_t param_count(const NetworkGraph& graph);

// Human-readable layer table with output shapes and parameter counts.
std::string describe(const NetworkGraph& graph);

// Keys of the conv layer pair (W, b) for conv index 1..4 within a branch
// ("" prefix for the single-stack tCNN).
std::vector<std::string> conv_param_keys(const NetworkGraph& graph,
                                         const std::string& branch_name,
                                         int conv_index);

}  // namespace synthimu
