#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "synthimu/signal.hpp"

namespace synthimu {

// Canonical limb order used everywhere branches are enumerated.
inline constexpr std::array<const char*, 5> kLimbNames = {"LA", "LL", "RA",
                                                          "RL", "N"};

// Limb -> channel names, in canonical limb order; absent limbs have empty
// lists and never become branches.
struct LimbMap {
  std::array<std::vector<std::string>, 5> channels;

  const std::vector<std::string>& at(const std::string& limb) const;
  std::vector<std::string>& at(const std::string& limb);
  bool empty() const;
};

// One labeled recording: named channels over a uniform time grid.
struct PoseClip {
  std::string clip_id;
  int label = 0;
  double rate_hz = 0.0;
  std::vector<std::string> channel_names;      // "joint.axis"
  std::vector<std::vector<double>> channels;   // [D][T]
  SignalUnit unit = SignalUnit::position;

  std::size_t length() const {
    return channels.empty() ? 0 : channels.front().size();
  }
};

struct ClipEntry {
  std::string path;
  int label = 0;
  std::string subject;  // optional; clips sharing a subject split together
};

struct DatasetManifest {
  std::vector<std::string> classes;  // order defines label indices
  double rate_hz = 0.0;
  SignalUnit unit = SignalUnit::position;
  std::optional<LimbMap> limb_map;
  std::vector<std::string> channels;  // optional schema; empty = first clip wins
  std::vector<ClipEntry> clips;
  std::string base_dir;  // directory of the manifest file
};

DatasetManifest load_manifest(const std::string& path);
void save_manifest(const DatasetManifest& manifest, const std::string& path);

// Clip CSV: header "t_sec,<joint.axis>,..." then one row per sample. Values
// are printed with 17 significant digits so write -> load is bit-lossless.
PoseClip load_clip(const std::string& path, const DatasetManifest& manifest,
                   int label, const std::string& clip_id);
void write_clip(const std::string& path, const PoseClip& clip);

// Loads every clip in manifest order and validates a consistent channel
// schema across clips.
std::vector<PoseClip> load_all_clips(const DatasetManifest& manifest);

struct WindowSpec {
  double duration_sec = 1.0;  // used when window_len == 0
  int window_len = 0;
  int stride = 1;

  int resolve_window_len(double rate_hz) const;
};

struct Window {
  std::vector<double> data;  // [W][D] row-major, time rows
  int window_len = 0;
  int channel_count = 0;
  int label = 0;
  std::string clip_id;

  double at(int t, int d) const { return data[static_cast<std::size_t>(t) * channel_count + d]; }
};

// Windows start at offsets 0, s, 2s, ...; clips shorter than W yield none.
std::vector<Window> segment_windows(const PoseClip& clip, const WindowSpec& spec);

inline std::int64_t window_count(std::int64_t length, std::int64_t window_len,
                                 std::int64_t stride) {
  return length >= window_len ? (length - window_len) / stride + 1 : 0;
}

struct SplitResult {
  std::vector<int> train, val, test;  // clip indices into the manifest order
};

// Deterministic shuffle then contiguous partition. Clips are the split unit,
// or whole subjects when the manifest tags them.
SplitResult split_clips(const std::vector<ClipEntry>& clips,
                        std::array<double, 3> fractions, std::uint64_t seed);

// Class-stratified subsampling: per class, keeps ceil(pct/100 * n) items
// chosen by seeded shuffle, emitted in their original order.
std::vector<std::size_t> stratified_sample_indices(const std::vector<int>& labels,
                                                   double pct, std::uint64_t seed);
std::vector<Window> subsample_fraction(const std::vector<Window>& windows,
                                       double pct, std::uint64_t seed);

struct NormStats {
  std::vector<std::string> channel_names;
  std::vector<ChannelStats> stats;
};

void save_norm_stats(const NormStats& stats, const std::string& path);
NormStats load_norm_stats(const std::string& path);

enum class PipelineMode { pose, synthetic };

struct WindowedDataset {
  std::vector<Window> train, val, test;
  NormStats stats;                      // fitted on training windows only
  std::vector<std::string> channel_names;
  std::vector<std::string> class_names;
  std::optional<LimbMap> limb_map;
  int window_len = 0;
  double rate_hz = 0.0;
};

// Full preprocessing chain per clip: optional anchor normalization, then
// resampling (pose mode) or synthetic on-body generation (synthetic mode) to
// the target rate, then sliding-window segmentation. Z-score statistics are
// fitted on the training split and applied to all three.
WindowedDataset build_windows_pipeline(
    const DatasetManifest& manifest, double target_rate_hz, PipelineMode mode,
    const WindowSpec& spec, const std::optional<AnchorSpec>& anchor,
    std::uint64_t split_seed,
    std::array<double, 3> fractions = {0.70, 0.15, 0.15});

}  // namespace synthimu
