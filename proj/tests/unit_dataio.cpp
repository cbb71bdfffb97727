#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <doctest.h>

#include "helpers.hpp"
#include "synthimu/dataio.hpp"
#include "synthimu/errors.hpp"
#include "synthimu/rng.hpp"

using namespace synthimu;
using testutil::TempDir;
namespace fs = std::filesystem;

namespace {

DatasetManifest basic_manifest(const fs::path& dir, double rate = 10.0) {
  DatasetManifest m;
  m.classes = {"a", "b"};
  m.rate_hz = rate;
  m.unit = SignalUnit::position;
  m.base_dir = dir.string();
  return m;
}

PoseClip random_clip(Rng& rng, int channels, int length, double rate,
                     const std::string& id = "clip", int label = 0) {
  PoseClip clip;
  clip.clip_id = id;
  clip.label = label;
  clip.rate_hz = rate;
  clip.unit = SignalUnit::position;
  for (int c = 0; c < channels; ++c) {
    clip.channel_names.push_back("j" + std::to_string(c) + ".x");
    std::vector<double> values(static_cast<std::size_t>(length));
    for (auto& v : values) v = rng.normal() * std::pow(10.0, rng.uniform() * 6 - 3);
    clip.channels.push_back(std::move(values));
  }
  return clip;
}

}  // namespace

TEST_CASE("load_clip parses a small CSV") {
  TempDir dir;
  {
    std::ofstream out(dir.file("c.csv"));
    out << "t_sec,hip.x,hip.y\n0,1.5,2.5\n0.1,3.5,4.5\n0.2,5.5,6.5\n";
  }
  const auto manifest = basic_manifest(dir.path);
  const PoseClip clip = load_clip("c.csv", manifest, 1, "c");
  CHECK(clip.channel_names == std::vector<std::string>{"hip.x", "hip.y"});
  CHECK(clip.length() == 3);
  CHECK(clip.channels[0] == std::vector<double>{1.5, 3.5, 5.5});
  CHECK(clip.channels[1] == std::vector<double>{2.5, 4.5, 6.5});
  CHECK(clip.label == 1);
}

TEST_CASE("load_clip rejects malformed files with line numbers") {
  TempDir dir;
  const auto manifest = basic_manifest(dir.path);

  SUBCASE("empty data section") {
    std::ofstream(dir.file("e.csv")) << "t_sec,hip.x\n";
    CHECK_THROWS_WITH_AS(load_clip("e.csv", manifest, 0, "e"),
                         doctest::Contains("no samples"), DataError);
  }
  SUBCASE("ragged row") {
    std::ofstream(dir.file("r.csv")) << "t_sec,hip.x,hip.y\n0,1,2\n0.1,3\n";
    CHECK_THROWS_WITH_AS(load_clip("r.csv", manifest, 0, "r"),
                         doctest::Contains(":3:"), DataError);
  }
  SUBCASE("bad header") {
    std::ofstream(dir.file("h.csv")) << "time,hip.x\n0,1\n";
    CHECK_THROWS_AS(load_clip("h.csv", manifest, 0, "h"), DataError);
  }
  SUBCASE("non-uniform spacing") {
    std::ofstream(dir.file("s.csv")) << "t_sec,hip.x\n0,1\n0.1,2\n0.35,3\n";
    CHECK_THROWS_WITH_AS(load_clip("s.csv", manifest, 0, "s"),
                         doctest::Contains("non-uniform"), DataError);
  }
  SUBCASE("unknown channel against a manifest schema") {
    auto schema = manifest;
    schema.channels = {"hip.x"};
    std::ofstream(dir.file("u.csv")) << "t_sec,knee.x\n0,1\n0.1,2\n";
    CHECK_THROWS_WITH_AS(load_clip("u.csv", schema, 0, "u"),
                         doctest::Contains("unknown channel"), DataError);
  }
}

TEST_CASE("clip CSV round-trip is bit-lossless") {
  TempDir dir;
  Rng rng(77);
  auto manifest = basic_manifest(dir.path, 30.0);
  for (int trial = 0; trial < 20; ++trial) {
    const PoseClip clip =
        random_clip(rng, 1 + static_cast<int>(rng.uniform_int(4)),
                    2 + static_cast<int>(rng.uniform_int(40)), 30.0);
    write_clip(dir.file("rt.csv"), clip);
    const PoseClip loaded = load_clip("rt.csv", manifest, 0, "rt");
    REQUIRE(loaded.channels.size() == clip.channels.size());
    for (std::size_t c = 0; c < clip.channels.size(); ++c)
      CHECK(loaded.channels[c] == clip.channels[c]);  // exact doubles
  }
}

TEST_CASE("segment_windows offsets and counts") {
  Rng rng(5);
  PoseClip clip = random_clip(rng, 2, 49, 25.0, "c49", 1);
  WindowSpec spec;
  spec.window_len = 25;
  spec.stride = 12;

  const auto windows = segment_windows(clip, spec);
  REQUIRE(windows.size() == 3);  // floor((49-25)/12)+1
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(windows[k].label == 1);
    CHECK(windows[k].clip_id == "c49");
    for (int t = 0; t < 25; ++t)
      for (int d = 0; d < 2; ++d)
        CHECK(windows[k].at(t, d) ==
              clip.channels[static_cast<std::size_t>(d)][12 * k + t]);
  }

  clip.channels[0].resize(24);
  clip.channels[1].resize(24);
  CHECK(segment_windows(clip, spec).empty());

  clip.channels[0].resize(25);
  clip.channels[1].resize(25);
  spec.stride = 1;
  CHECK(segment_windows(clip, spec).size() == 1);
}

TEST_CASE("window count formula holds for random triples") {
  Rng rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::int64_t length = 1 + static_cast<std::int64_t>(rng.uniform_int(200));
    const std::int64_t w = 1 + static_cast<std::int64_t>(rng.uniform_int(60));
    const std::int64_t s = 1 + static_cast<std::int64_t>(rng.uniform_int(20));
    std::int64_t expected = 0;
    for (std::int64_t start = 0; start + w <= length; start += s) ++expected;
    CHECK(window_count(length, w, s) == expected);
  }
}

TEST_CASE("window length derives from duration and rate") {
  WindowSpec spec;
  spec.duration_sec = 1.0;
  CHECK(spec.resolve_window_len(25.0) == 25);
  CHECK(spec.resolve_window_len(100.0) == 100);
  spec.window_len = 30;
  CHECK(spec.resolve_window_len(100.0) == 30);
}

TEST_CASE("split_clips: 20 clips go 14/3/3") {
  std::vector<ClipEntry> clips(20);
  const auto split = split_clips(clips, {0.70, 0.15, 0.15}, 42);
  CHECK(split.train.size() == 14);
  CHECK(split.val.size() == 3);
  CHECK(split.test.size() == 3);
}

TEST_CASE("split_clips determinism and set algebra") {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 3 + static_cast<int>(rng.uniform_int(40));
    std::vector<ClipEntry> clips(static_cast<std::size_t>(n));
    const std::uint64_t seed = rng.next_u64();

    const auto a = split_clips(clips, {0.70, 0.15, 0.15}, seed);
    const auto b = split_clips(clips, {0.70, 0.15, 0.15}, seed);
    CHECK(a.train == b.train);
    CHECK(a.val == b.val);
    CHECK(a.test == b.test);

    std::set<int> seen;
    for (const auto* bucket : {&a.train, &a.val, &a.test})
      for (int idx : *bucket) CHECK(seen.insert(idx).second);
    CHECK(seen.size() == static_cast<std::size_t>(n));
    CHECK(*seen.begin() == 0);
    CHECK(*seen.rbegin() == n - 1);
  }
}

TEST_CASE("split_clips validation") {
  CHECK_THROWS_AS(split_clips(std::vector<ClipEntry>(2), {0.7, 0.15, 0.15}, 1),
                  DataError);
  CHECK_THROWS_AS(split_clips(std::vector<ClipEntry>(5), {0.7, 0.15, 0.10}, 1),
                  ConfigError);
}

TEST_CASE("subject-tagged clips stay together") {
  std::vector<ClipEntry> clips(12);
  for (int i = 0; i < 12; ++i)
    clips[static_cast<std::size_t>(i)].subject = "s" + std::to_string(i / 3);
  const auto split = split_clips(clips, {0.50, 0.25, 0.25}, 9);

  std::map<std::string, std::set<int>> bucket_of;
  auto tag = [&](const std::vector<int>& bucket, int which) {
    for (int idx : bucket)
      bucket_of[clips[static_cast<std::size_t>(idx)].subject].insert(which);
  };
  tag(split.train, 0);
  tag(split.val, 1);
  tag(split.test, 2);
  for (const auto& [subject, buckets] : bucket_of) CHECK(buckets.size() == 1);
}

TEST_CASE("subsample_fraction is stratified and order-preserving") {
  Rng rng(8);
  std::vector<Window> windows;
  for (int i = 0; i < 40; ++i) {
    Window w;
    w.window_len = 1;
    w.channel_count = 1;
    w.data = {static_cast<double>(i)};
    w.label = i < 10 ? 0 : (i < 25 ? 1 : 2);
    w.clip_id = "c" + std::to_string(i);
    windows.push_back(std::move(w));
  }

  SUBCASE("pct = 100 is the identity") {
    const auto all = subsample_fraction(windows, 100.0, 3);
    REQUIRE(all.size() == windows.size());
    for (std::size_t i = 0; i < all.size(); ++i)
      CHECK(all[i].data == windows[i].data);
  }
  SUBCASE("ceil arithmetic per class") {
    const auto sub = subsample_fraction(windows, 30.0, 3);
    std::map<int, int> counts;
    for (const auto& w : sub) ++counts[w.label];
    CHECK(counts[0] == 3);   // ceil(0.3 * 10)
    CHECK(counts[1] == 5);   // ceil(0.3 * 15)
    CHECK(counts[2] == 5);   // ceil(0.3 * 15)
  }
  SUBCASE("label set preserved at small fractions") {
    const auto sub = subsample_fraction(windows, 1.0, 5);
    std::set<int> labels;
    for (const auto& w : sub) labels.insert(w.label);
    CHECK(labels == std::set<int>{0, 1, 2});
  }
  SUBCASE("counting oracle on random label sets") {
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<int> labels(60);
      for (auto& l : labels) l = static_cast<int>(rng.uniform_int(4));
      const double pct = 10.0 + 90.0 * rng.uniform();
      const auto keep = stratified_sample_indices(labels, pct, trial);
      std::map<int, int> kept, total;
      for (int l : labels) ++total[l];
      for (auto idx : keep) ++kept[labels[idx]];
      for (const auto& [l, n] : total)
        CHECK(kept[l] == static_cast<int>(std::ceil(pct / 100.0 * n)));
      CHECK(std::is_sorted(keep.begin(), keep.end()));
    }
  }
  CHECK_THROWS_AS(subsample_fraction(windows, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(subsample_fraction(windows, 101.0, 1), ConfigError);
}

TEST_CASE("manifest round-trip with limb map and subjects") {
  TempDir dir;
  DatasetManifest m = basic_manifest(dir.path, 25.0);
  m.channels = {"hip.x", "arm.x"};
  LimbMap lm;
  lm.at("LA") = {"arm.x"};
  lm.at("N") = {"hip.x"};
  m.limb_map = lm;
  m.clips = {{"c0.csv", 0, "s1"}, {"c1.csv", 1, "s2"}};
  save_manifest(m, dir.file("manifest.json"));

  const auto loaded = load_manifest(dir.file("manifest.json"));
  CHECK(loaded.classes == m.classes);
  CHECK(loaded.rate_hz == m.rate_hz);
  CHECK(loaded.channels == m.channels);
  REQUIRE(loaded.limb_map.has_value());
  CHECK(loaded.limb_map->at("LA") == std::vector<std::string>{"arm.x"});
  CHECK(loaded.limb_map->at("RL").empty());
  CHECK(loaded.clips.size() == 2);
  CHECK(loaded.clips[1].subject == "s2");
}

TEST_CASE("manifest validation errors") {
  TempDir dir;
  SUBCASE("label out of range") {
    std::ofstream(dir.file("m.json"))
        << R"({"classes":["a"],"rate_hz":10,"unit":"position",)"
        << R"("clips":[{"path":"x.csv","label":3}]})";
    CHECK_THROWS_AS(load_manifest(dir.file("m.json")), DataError);
  }
  SUBCASE("duplicate limb channels") {
    std::ofstream(dir.file("m.json"))
        << R"({"classes":["a"],"rate_hz":10,"unit":"position",)"
        << R"("limb_map":{"LA":["c.x"],"RA":["c.x"]},"clips":[]})";
    CHECK_THROWS_WITH_AS(load_manifest(dir.file("m.json")),
                         doctest::Contains("more than one limb"), DataError);
  }
}

TEST_CASE("norm stats JSON round-trip") {
  TempDir dir;
  NormStats stats;
  stats.channel_names = {"a.x", "b.y"};
  stats.stats = {{1.25, 0.5}, {-3.5, 2.0}};
  save_norm_stats(stats, dir.file("stats.json"));
  const auto loaded = load_norm_stats(dir.file("stats.json"));
  REQUIRE(loaded.channel_names.size() == 2);
  for (std::size_t c = 0; c < 2; ++c) {
    const auto it = std::find(loaded.channel_names.begin(),
                              loaded.channel_names.end(), stats.channel_names[c]);
    REQUIRE(it != loaded.channel_names.end());
    const std::size_t j =
        static_cast<std::size_t>(it - loaded.channel_names.begin());
    CHECK(loaded.stats[j].mean == stats.stats[c].mean);
    CHECK(loaded.stats[j].stddev == stats.stats[c].stddev);
  }
}

namespace {

// writes a small dataset; class-0 clips are linear ramps, class-1 quadratics
DatasetManifest write_pipeline_fixture(const TempDir& dir, int clips,
                                       double rate = 25.0, int length = 60) {
  DatasetManifest m;
  m.classes = {"ramp", "quad"};
  m.rate_hz = rate;
  m.unit = SignalUnit::position;
  m.base_dir = dir.path.string();
  Rng rng(55);
  for (int i = 0; i < clips; ++i) {
    PoseClip clip;
    clip.clip_id = "c" + std::to_string(i);
    clip.label = i % 2;
    clip.rate_hz = rate;
    clip.unit = SignalUnit::position;
    clip.channel_names = {"hip.x", "hip.y"};
    const double a = 1.0 + rng.uniform();
    for (int c = 0; c < 2; ++c) {
      std::vector<double> values;
      for (int t = 0; t < length; ++t) {
        const double sec = t / rate;
        values.push_back(clip.label == 0 ? a * sec + c : a * sec * sec + c);
      }
      clip.channels.push_back(std::move(values));
    }
    const std::string name = clip.clip_id + ".csv";
    write_clip((dir.path / name).string(), clip);
    m.clips.push_back({name, clip.label, ""});
  }
  save_manifest(m, (dir.path / "manifest.json").string());
  return load_manifest((dir.path / "manifest.json").string());
}

}  // namespace

TEST_CASE("pipeline: pose mode at the native rate is a normalized pass-through") {
  TempDir dir;
  const auto manifest = write_pipeline_fixture(dir, 6);
  WindowSpec spec;
  spec.window_len = 20;
  spec.stride = 20;
  const auto dataset = build_windows_pipeline(manifest, 25.0, PipelineMode::pose,
                                              spec, std::nullopt, 42);
  CHECK(dataset.window_len == 20);
  // every window is a z-scored contiguous slice: verify via the stats
  const auto clips = load_all_clips(manifest);
  for (const auto& win : dataset.train) {
    const auto it = std::find_if(clips.begin(), clips.end(), [&](const auto& c) {
      return c.clip_id == win.clip_id;
    });
    REQUIRE(it != clips.end());
    // find the offset whose normalized values match this window
    bool matched = false;
    for (std::size_t off = 0; off + 20 <= it->length() && !matched; off += 20) {
      bool all = true;
      for (int t = 0; t < 20 && all; ++t)
        for (int d = 0; d < 2 && all; ++d) {
          const double raw = it->channels[static_cast<std::size_t>(d)][off + t];
          const double normalized =
              (raw - dataset.stats.stats[static_cast<std::size_t>(d)].mean) /
              std::max(dataset.stats.stats[static_cast<std::size_t>(d)].stddev,
                       1e-8);
          if (std::abs(normalized - win.at(t, d)) > 1e-9) all = false;
        }
      matched = all;
    }
    CHECK(matched);
  }
}

TEST_CASE("pipeline: synthetic mode zeroes linear ramps (before z-score)") {
  TempDir dir;
  // all clips are ramps: second derivative is 0, so every channel is constant
  // 0 before normalization and exactly 0 after the zero-variance guard
  DatasetManifest m;
  m.classes = {"ramp"};
  m.rate_hz = 25.0;
  m.unit = SignalUnit::position;
  m.base_dir = dir.path.string();
  for (int i = 0; i < 4; ++i) {
    PoseClip clip;
    clip.clip_id = "r" + std::to_string(i);
    clip.label = 0;
    clip.rate_hz = 25.0;
    clip.unit = SignalUnit::position;
    clip.channel_names = {"hip.x"};
    std::vector<double> values;
    for (int t = 0; t < 60; ++t) values.push_back((i + 1) * 0.5 * t / 25.0);
    clip.channels.push_back(std::move(values));
    const std::string name = clip.clip_id + ".csv";
    write_clip((dir.path / name).string(), clip);
    m.clips.push_back({name, 0, ""});
  }
  save_manifest(m, (dir.path / "manifest.json").string());
  const auto manifest = load_manifest((dir.path / "manifest.json").string());

  WindowSpec spec;
  spec.window_len = 20;
  spec.stride = 10;
  const auto dataset = build_windows_pipeline(
      manifest, 25.0, PipelineMode::synthetic, spec, std::nullopt, 42);
  // the channel is numerically zero, so the zero-variance guard must have
  // fired: stats say so, and the roundoff noise stays far below the O(1)
  // scale of genuinely z-scored data even after division by epsilon
  for (const auto& s : dataset.stats.stats) CHECK(s.stddev < 1e-8);
  for (const auto* bucket : {&dataset.train, &dataset.val, &dataset.test})
    for (const auto& win : *bucket)
      for (double v : win.data) CHECK(std::abs(v) < 1e-3);
}

TEST_CASE("pipeline: 25 Hz clips at target 100 Hz give W=100 windows") {
  TempDir dir;
  const auto manifest = write_pipeline_fixture(dir, 6, 25.0, 60);
  WindowSpec spec;  // duration 1 s
  spec.stride = 50;
  const auto dataset = build_windows_pipeline(manifest, 100.0, PipelineMode::pose,
                                              spec, std::nullopt, 42);
  CHECK(dataset.window_len == 100);
  // 60 samples at 25 Hz -> 2.36 s -> 237 samples at 100 Hz
  // windows per clip: floor((237-100)/50)+1 = 3
  const std::size_t total =
      dataset.train.size() + dataset.val.size() + dataset.test.size();
  CHECK(total == 6 * 3);
}

TEST_CASE("pipeline: training stats give near-zero means on the training split") {
  TempDir dir;
  const auto manifest = write_pipeline_fixture(dir, 10);
  WindowSpec spec;
  spec.window_len = 20;
  spec.stride = 7;
  const auto dataset = build_windows_pipeline(manifest, 25.0, PipelineMode::pose,
                                              spec, std::nullopt, 7);
  REQUIRE(!dataset.train.empty());
  std::vector<double> sums(2, 0.0);
  std::int64_t count = 0;
  for (const auto& win : dataset.train) {
    for (int t = 0; t < win.window_len; ++t)
      for (int d = 0; d < 2; ++d) sums[static_cast<std::size_t>(d)] += win.at(t, d);
    count += win.window_len;
  }
  for (double s : sums) CHECK(std::abs(s / static_cast<double>(count)) < 1e-8);
}

TEST_CASE("pipeline: anchor normalization plus synthetic mode") {
  TempDir dir;
  DatasetManifest m;
  m.classes = {"move"};
  m.rate_hz = 25.0;
  m.unit = SignalUnit::position;
  m.base_dir = dir.path.string();
  Rng rng(3);
  for (int i = 0; i < 4; ++i) {
    PoseClip clip;
    clip.clip_id = "m" + std::to_string(i);
    clip.label = 0;
    clip.rate_hz = 25.0;
    clip.unit = SignalUnit::position;
    clip.channel_names = {"torso.x", "arm.x"};
    std::vector<double> torso, arm;
    for (int t = 0; t < 60; ++t) {
      const double sec = t / 25.0;
      torso.push_back(std::sin(sec) + i);
      arm.push_back(std::sin(sec) + i + 0.3 * sec * sec);
    }
    clip.channels = {torso, arm};
    const std::string name = clip.clip_id + ".csv";
    write_clip((dir.path / name).string(), clip);
    m.clips.push_back({name, 0, ""});
  }
  save_manifest(m, (dir.path / "manifest.json").string());
  const auto manifest = load_manifest((dir.path / "manifest.json").string());

  WindowSpec spec;
  spec.window_len = 20;
  spec.stride = 20;
  // anchoring subtracts the torso, leaving arm-torso = 0.3 t^2 whose second
  // derivative is the constant 0.6; torso itself becomes identically zero
  const auto dataset =
      build_windows_pipeline(manifest, 25.0, PipelineMode::synthetic, spec,
                             AnchorSpec{"torso"}, 42);
  for (const auto& win : dataset.train)
    for (int t = 0; t < win.window_len; ++t) CHECK(std::abs(win.at(t, 0)) < 1e-6);

  CHECK_THROWS_AS(build_windows_pipeline(manifest, 25.0, PipelineMode::synthetic,
                                         spec, AnchorSpec{"spine"}, 42),
                  DataError);
}
