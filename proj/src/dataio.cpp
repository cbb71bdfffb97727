#include "synthimu/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "synthimu/errors.hpp"
#include "synthimu/rng.hpp"

namespace synthimu {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int limb_index(const std::string& limb) {
  for (std::size_t i = 0; i < kLimbNames.size(); ++i)
    if (limb == kLimbNames[i]) return static_cast<int>(i);
  throw DataError("unknown limb '" + limb + "' (expected LA, LL, RA, RL or N)");
}

SignalUnit parse_unit(const std::string& unit) {
  if (unit == "position") return SignalUnit::position;
  if (unit == "acceleration") return SignalUnit::acceleration;
  throw DataError("unknown unit '" + unit + "'");
}

std::string unit_name(SignalUnit unit) {
  return unit == SignalUnit::position ? "position" : "acceleration";
}

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_real(const std::string& text, const std::string& where) {
  const char* begin = text.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0')
    throw DataError(where + ": cannot parse number '" + text + "'");
  return v;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

}  // namespace

const std::vector<std::string>& LimbMap::at(const std::string& limb) const {
  return channels[limb_index(limb)];
}

std::vector<std::string>& LimbMap::at(const std::string& limb) {
  return channels[limb_index(limb)];
}

bool LimbMap::empty() const {
  for (const auto& list : channels)
    if (!list.empty()) return false;
  return true;
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw DataError("manifest '" + path + "': " + e.what());
  }

  DatasetManifest manifest;
  manifest.base_dir = fs::path(path).parent_path().string();
  try {
    manifest.classes = doc.at("classes").get<std::vector<std::string>>();
    manifest.rate_hz = doc.at("rate_hz").get<double>();
    manifest.unit = parse_unit(doc.at("unit").get<std::string>());
    if (doc.contains("channels"))
      manifest.channels = doc.at("channels").get<std::vector<std::string>>();
    if (doc.contains("limb_map")) {
      LimbMap lm;
      for (const auto& [limb, names] : doc.at("limb_map").items())
        lm.at(limb) = names.get<std::vector<std::string>>();
      manifest.limb_map = std::move(lm);
    }
    for (const auto& entry : doc.at("clips")) {
      ClipEntry clip;
      clip.path = entry.at("path").get<std::string>();
      clip.label = entry.at("label").get<int>();
      if (entry.contains("subject"))
        clip.subject = entry.at("subject").get<std::string>();
      manifest.clips.push_back(std::move(clip));
    }
  } catch (const json::exception& e) {
    throw DataError("manifest '" + path + "': " + e.what());
  }

  if (manifest.classes.empty())
    throw DataError("manifest '" + path + "': class list is empty");
  if (manifest.rate_hz <= 0.0)
    throw DataError("manifest '" + path + "': rate_hz must be positive");
  for (const auto& clip : manifest.clips)
    if (clip.label < 0 || clip.label >= static_cast<int>(manifest.classes.size()))
      throw DataError("manifest '" + path + "': clip '" + clip.path +
                      "' label out of range");

  if (manifest.limb_map) {
    std::set<std::string> seen;
    for (const auto& list : manifest.limb_map->channels)
      for (const auto& name : list)
        if (!seen.insert(name).second)
          throw DataError("manifest '" + path + "': channel '" + name +
                          "' appears in more than one limb");
  }
  return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
  json doc;
  doc["classes"] = manifest.classes;
  doc["rate_hz"] = manifest.rate_hz;
  doc["unit"] = unit_name(manifest.unit);
  if (!manifest.channels.empty()) doc["channels"] = manifest.channels;
  if (manifest.limb_map) {
    json lm = json::object();
    for (std::size_t i = 0; i < kLimbNames.size(); ++i)
      lm[kLimbNames[i]] = manifest.limb_map->channels[i];
    doc["limb_map"] = lm;
  }
  doc["clips"] = json::array();
  for (const auto& clip : manifest.clips) {
    json entry = {{"path", clip.path}, {"label", clip.label}};
    if (!clip.subject.empty()) entry["subject"] = clip.subject;
    doc["clips"].push_back(entry);
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest '" + path + "'");
  out << doc.dump(2) << "\n";
}

PoseClip load_clip(const std::string& path, const DatasetManifest& manifest,
                   int label, const std::string& clip_id) {
  const fs::path full = fs::path(path).is_absolute() || manifest.base_dir.empty()
                            ? fs::path(path)
                            : fs::path(manifest.base_dir) / path;
  std::ifstream in(full);
  if (!in) throw DataError("cannot open clip '" + full.string() + "'");

  std::string line;
  if (!std::getline(in, line))
    throw DataError(full.string() + ":1: missing header");
  auto header = split_fields(line);
  if (header.empty() || header.front() != "t_sec")
    throw DataError(full.string() + ":1: malformed header, expected first column t_sec");
  std::vector<std::string> names(header.begin() + 1, header.end());
  if (names.empty())
    throw DataError(full.string() + ":1: no channel columns");

  if (!manifest.channels.empty() && names != manifest.channels) {
    for (const auto& name : names)
      if (std::find(manifest.channels.begin(), manifest.channels.end(), name) ==
          manifest.channels.end())
        throw DataError(full.string() + ":1: unknown channel '" + name + "'");
    throw DataError(full.string() + ":1: channel order differs from manifest schema");
  }

  PoseClip clip;
  clip.clip_id = clip_id;
  clip.label = label;
  clip.rate_hz = manifest.rate_hz;
  clip.unit = manifest.unit;
  clip.channel_names = names;
  clip.channels.assign(names.size(), {});

  const double h = 1.0 / manifest.rate_hz;
  double prev_t = 0.0;
  int lineno = 1;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != names.size() + 1)
      throw DataError(full.string() + ":" + std::to_string(lineno) +
                      ": ragged row: expected " + std::to_string(names.size() + 1) +
                      " fields, got " + std::to_string(fields.size()));
    const std::string where = full.string() + ":" + std::to_string(lineno);
    const double t = parse_real(fields[0], where);
    if (rows > 0) {
      if (t <= prev_t)
        throw DataError(where + ": t_sec not strictly increasing");
      if (std::abs((t - prev_t) - h) > 1e-6 * h)
        throw DataError(where + ": non-uniform sample spacing (expected " +
                        format_real(h) + ", got " + format_real(t - prev_t) + ")");
    }
    prev_t = t;
    for (std::size_t c = 0; c < names.size(); ++c)
      clip.channels[c].push_back(parse_real(fields[c + 1], where));
    ++rows;
  }
  if (rows == 0) throw DataError(full.string() + ": no samples");
  return clip;
}

void write_clip(const std::string& path, const PoseClip& clip) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write clip '" + path + "'");
  out << "t_sec";
  for (const auto& name : clip.channel_names) out << "," << name;
  out << "\n";
  const std::size_t length = clip.length();
  for (std::size_t i = 0; i < length; ++i) {
    out << format_real(static_cast<double>(i) / clip.rate_hz);
    for (const auto& channel : clip.channels) out << "," << format_real(channel[i]);
    out << "\n";
  }
}

std::vector<PoseClip> load_all_clips(const DatasetManifest& manifest) {
  std::vector<PoseClip> clips;
  clips.reserve(manifest.clips.size());
  std::vector<std::string> schema = manifest.channels;
  for (std::size_t i = 0; i < manifest.clips.size(); ++i) {
    const auto& entry = manifest.clips[i];
    const std::string clip_id = fs::path(entry.path).stem().string();
    PoseClip clip = load_clip(entry.path, manifest, entry.label, clip_id);
    if (schema.empty()) {
      schema = clip.channel_names;
    } else if (clip.channel_names != schema) {
      throw DataError("clip '" + entry.path +
                      "' channel schema differs from the rest of the dataset");
    }
    clips.push_back(std::move(clip));
  }
  if (manifest.limb_map) {
    for (const auto& list : manifest.limb_map->channels)
      for (const auto& name : list)
        if (std::find(schema.begin(), schema.end(), name) == schema.end())
          throw DataError("limb map channel '" + name + "' missing from clips");
  }
  return clips;
}

int WindowSpec::resolve_window_len(double rate_hz) const {
  if (window_len > 0) return window_len;
  if (duration_sec <= 0.0) throw ConfigError("window duration must be positive");
  const int w = static_cast<int>(std::llround(duration_sec * rate_hz));
  if (w < 1) throw ConfigError("window length resolves to zero samples");
  return w;
}

std::vector<Window> segment_windows(const PoseClip& clip, const WindowSpec& spec) {
  const int w = spec.resolve_window_len(clip.rate_hz);
  const int s = spec.stride;
  if (s < 1) throw ConfigError("window stride must be >= 1");

  const std::int64_t length = static_cast<std::int64_t>(clip.length());
  const int d = static_cast<int>(clip.channels.size());
  const std::int64_t count = window_count(length, w, s);

  std::vector<Window> windows;
  windows.reserve(static_cast<std::size_t>(count));
  for (std::int64_t k = 0; k < count; ++k) {
    Window win;
    win.window_len = w;
    win.channel_count = d;
    win.label = clip.label;
    win.clip_id = clip.clip_id;
    win.data.resize(static_cast<std::size_t>(w) * d);
    const std::int64_t offset = k * s;
    for (int t = 0; t < w; ++t)
      for (int c = 0; c < d; ++c)
        win.data[static_cast<std::size_t>(t) * d + c] =
            clip.channels[c][static_cast<std::size_t>(offset + t)];
    windows.push_back(std::move(win));
  }
  return windows;
}

SplitResult split_clips(const std::vector<ClipEntry>& clips,
                        std::array<double, 3> fractions, std::uint64_t seed) {
  if (clips.size() < 3) throw DataError("split needs at least 3 clips");
  const double total = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(total - 1.0) > 1e-9)
    throw ConfigError("split fractions must sum to 1");

  // group by subject; untagged clips are their own group
  std::vector<std::vector<int>> groups;
  std::map<std::string, std::size_t> subject_group;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    if (clips[i].subject.empty()) {
      groups.push_back({static_cast<int>(i)});
    } else {
      auto it = subject_group.find(clips[i].subject);
      if (it == subject_group.end()) {
        subject_group.emplace(clips[i].subject, groups.size());
        groups.push_back({static_cast<int>(i)});
      } else {
        groups[it->second].push_back(static_cast<int>(i));
      }
    }
  }

  std::vector<std::size_t> order(groups.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed, rngstream::kSplit);
  rng.shuffle(order);

  const std::int64_t n = static_cast<std::int64_t>(groups.size());
  std::int64_t n_train = std::llround(fractions[0] * static_cast<double>(n));
  std::int64_t n_val = std::llround(fractions[1] * static_cast<double>(n));
  n_train = std::clamp<std::int64_t>(n_train, 0, n);
  n_val = std::clamp<std::int64_t>(n_val, 0, n - n_train);

  SplitResult result;
  for (std::int64_t i = 0; i < n; ++i) {
    auto& bucket = i < n_train            ? result.train
                   : i < n_train + n_val  ? result.val
                                          : result.test;
    for (int clip_idx : groups[order[static_cast<std::size_t>(i)]])
      bucket.push_back(clip_idx);
  }
  return result;
}

std::vector<std::size_t> stratified_sample_indices(const std::vector<int>& labels,
                                                   double pct, std::uint64_t seed) {
  if (pct <= 0.0 || pct > 100.0)
    throw ConfigError("subsample percentage must be in (0, 100]");

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  Rng rng(seed, rngstream::kSubsample);
  std::vector<std::size_t> keep;
  for (auto& [label, indices] : by_class) {
    const std::size_t n_keep = static_cast<std::size_t>(
        std::ceil(pct / 100.0 * static_cast<double>(indices.size())));
    rng.shuffle(indices);
    keep.insert(keep.end(), indices.begin(), indices.begin() + n_keep);
  }
  std::sort(keep.begin(), keep.end());
  return keep;
}

std::vector<Window> subsample_fraction(const std::vector<Window>& windows,
                                       double pct, std::uint64_t seed) {
  std::vector<int> labels;
  labels.reserve(windows.size());
  for (const auto& win : windows) labels.push_back(win.label);

  std::vector<Window> out;
  for (std::size_t idx : stratified_sample_indices(labels, pct, seed))
    out.push_back(windows[idx]);
  return out;
}

void save_norm_stats(const NormStats& stats, const std::string& path) {
  json doc = json::object();
  for (std::size_t c = 0; c < stats.channel_names.size(); ++c)
    doc[stats.channel_names[c]] = {{"mean", stats.stats[c].mean},
                                   {"std", stats.stats[c].stddev}};
  std::ofstream out(path);
  if (!out) throw DataError("cannot write stats '" + path + "'");
  out << doc.dump(2) << "\n";
}

NormStats load_norm_stats(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open stats '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw DataError("stats '" + path + "': " + e.what());
  }
  NormStats stats;
  for (const auto& [name, entry] : doc.items()) {
    stats.channel_names.push_back(name);
    stats.stats.push_back(
        {entry.at("mean").get<double>(), entry.at("std").get<double>()});
  }
  return stats;
}

namespace {

// channels x time view over a window list, for fitting z-score statistics
std::vector<std::vector<double>> windows_as_channels(
    const std::vector<Window>& windows, int d) {
  std::vector<std::vector<double>> mat(static_cast<std::size_t>(d));
  for (const auto& win : windows)
    for (int t = 0; t < win.window_len; ++t)
      for (int c = 0; c < d; ++c) mat[c].push_back(win.at(t, c));
  return mat;
}

void normalize_windows(std::vector<Window>& windows,
                       const std::vector<ChannelStats>& stats, double epsilon) {
  for (auto& win : windows)
    for (int t = 0; t < win.window_len; ++t)
      for (int c = 0; c < win.channel_count; ++c) {
        double& v = win.data[static_cast<std::size_t>(t) * win.channel_count + c];
        v = (v - stats[c].mean) / std::max(stats[c].stddev, epsilon);
      }
}

}  // namespace

WindowedDataset build_windows_pipeline(
    const DatasetManifest& manifest, double target_rate_hz, PipelineMode mode,
    const WindowSpec& spec, const std::optional<AnchorSpec>& anchor,
    std::uint64_t split_seed, std::array<double, 3> fractions) {
  if (target_rate_hz <= 0.0) throw ConfigError("target rate must be positive");
  if (mode == PipelineMode::synthetic && manifest.unit != SignalUnit::position)
    throw DataError("synthetic mode requires position input");

  const auto clips = load_all_clips(manifest);
  if (clips.empty()) throw DataError("manifest contains no clips");
  const auto split = split_clips(manifest.clips, fractions, split_seed);

  std::vector<int> assignment(clips.size(), 2);
  for (int i : split.train) assignment[static_cast<std::size_t>(i)] = 0;
  for (int i : split.val) assignment[static_cast<std::size_t>(i)] = 1;

  WindowedDataset dataset;
  dataset.class_names = manifest.classes;
  dataset.channel_names = clips.front().channel_names;
  dataset.limb_map = manifest.limb_map;
  dataset.rate_hz = target_rate_hz;
  dataset.window_len = spec.resolve_window_len(target_rate_hz);

  WindowSpec resolved = spec;
  resolved.window_len = dataset.window_len;

  const double factor = target_rate_hz / manifest.rate_hz;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    PoseClip clip = clips[i];
    if (anchor)
      clip.channels = anchor_normalize(clip.channel_names, clip.channels, *anchor);

    PoseClip processed = clip;
    processed.rate_hz = target_rate_hz;
    for (std::size_t c = 0; c < clip.channels.size(); ++c) {
      ChannelSeries series{std::move(clip.channels[c]), clip.rate_hz, clip.unit};
      ChannelSeries transformed =
          mode == PipelineMode::pose
              ? resample(series, factor)
              : synthesize_obd(series, target_rate_hz);
      processed.unit = transformed.unit;
      processed.channels[c] = std::move(transformed.values);
    }

    auto windows = segment_windows(processed, resolved);
    auto& bucket = assignment[i] == 0   ? dataset.train
                   : assignment[i] == 1 ? dataset.val
                                        : dataset.test;
    for (auto& win : windows) bucket.push_back(std::move(win));
  }

  if (dataset.train.empty())
    throw DataError("pipeline produced no training windows");

  const int d = static_cast<int>(dataset.channel_names.size());
  const auto fitted = zscore_channels(windows_as_channels(dataset.train, d));
  dataset.stats.channel_names = dataset.channel_names;
  dataset.stats.stats = fitted.stats;

  normalize_windows(dataset.train, fitted.stats, 1e-8);
  normalize_windows(dataset.val, fitted.stats, 1e-8);
  normalize_windows(dataset.test, fitted.stats, 1e-8);
  return dataset;
}

}  // namespace synthimu
