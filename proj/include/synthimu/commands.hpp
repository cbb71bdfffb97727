#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "synthimu/transfer.hpp"

namespace synthimu {

// Everything a batch experiment needs, loaded from a JSON config file with
// optional --set key=value overrides (dotted paths).
struct ExperimentConfig {
  std::string manifest_path;
  PipelineMode mode = PipelineMode::synthetic;
  double target_rate_hz = 0.0;  // 0 = keep the manifest rate
  WindowSpec window;
  std::optional<std::string> anchor;

  std::string arch = "tcnn";  // "tcnn" | "tcnn-imu"
  int fc_units = 256;
  int branch_units = 256;
  int fusion_units = 256;
  int conv_filters = 64;

  TrainConfig train;
  TransferPlan transfer;
  std::uint64_t split_seed = 42;
  std::array<double, 3> fractions{0.70, 0.15, 0.15};
  int runs = 5;
  std::string out_dir = "out";
  std::string dataset_tag;

  double gradcheck_tolerance = 1e-3;
  int gradcheck_batch = 2;
  int gradcheck_samples = 64;
  std::string eval_split = "test";
};

ExperimentConfig load_config(const std::string& path,
                             const std::vector<std::string>& overrides = {},
                             std::optional<std::uint64_t> seed_override = {},
                             std::optional<std::string> out_override = {});

// Windowed-dataset shard: one JSON header line (shape, channels, classes,
// labels, clip ids, stats reference) + a little-endian float32 payload.
struct WindowShard {
  std::vector<Window> windows;
  std::vector<std::string> channels;
  std::vector<std::string> classes;
  double rate_hz = 0.0;
  std::string stats_ref;
};
void write_windows_shard(const std::vector<Window>& windows,
                         const std::vector<std::string>& channels,
                         const std::vector<std::string>& classes, double rate_hz,
                         const std::string& stats_ref, const std::string& path);
WindowShard read_windows_shard(const std::string& path);

// Subcommand bodies. They throw ConfigError/DataError/NumericError; the CLI
// maps those to exit codes 1/2/3.
void cmd_synth(const ExperimentConfig& config);
void cmd_train(const ExperimentConfig& config);
void cmd_transfer(const ExperimentConfig& config, const std::string& source_ckpt);
void cmd_eval(const ExperimentConfig& config, const std::string& ckpt_path,
              bool use_majority_vote);
void cmd_permtest(const std::string& preds_a_path, const std::string& preds_b_path,
                  int n_permutations, std::uint64_t seed,
                  const std::string& out_path);
void cmd_gradcheck(const ExperimentConfig& config);

// Shared helpers (also used by tests).
WindowedDataset run_pipeline(const ExperimentConfig& config);
NetworkGraph graph_from_config(const ExperimentConfig& config,
                               const WindowedDataset& dataset);

}  // namespace synthimu
