#include "synthimu/sim.hpp"

#include <cmath>
#include <filesystem>

#include "synthimu/errors.hpp"
#include "synthimu/rng.hpp"

namespace synthimu {

namespace {

constexpr double kTau = 2.0 * 3.14159265358979323846;

struct JointMotion {
  double amp_x = 0.0;
  double amp_y = 0.0;
  double phase = 0.0;     // relative phase of this joint
  double harmonic = 0.0;  // weight of a doubled-frequency component
};

struct MotionClass {
  const char* name;
  double freq_hz;
  JointMotion torso, arm, leg;
};

// Amplitudes are meters around each joint's rest offset; patterns differ in
// dominant joint, frequency and waveform so classes overlap but stay learnable.
const MotionClass kClasses[] = {
    {"sway", 0.6, {0.40, 0.20, 0.0, 0.0}, {0.50, 0.30, 0.0, 0.0}, {0.30, 0.20, 0.0, 0.0}},
    {"wave", 2.5, {0.05, 0.05, 0.0, 0.0}, {1.00, 0.80, 0.0, 0.0}, {0.05, 0.05, 0.0, 0.0}},
    {"march", 1.5, {0.10, 0.10, 0.0, 0.0}, {0.40, 0.30, 3.14159, 0.0}, {0.80, 0.60, 0.0, 0.0}},
    {"bounce", 2.0, {0.10, 0.60, 0.0, 0.5}, {0.20, 0.70, 0.0, 0.5}, {0.10, 0.80, 0.0, 0.5}},
    {"twist", 1.0, {0.50, 0.10, 0.0, 0.0}, {0.70, 0.10, 3.14159, 0.0}, {0.60, 0.10, 3.14159, 0.0}},
};

double joint_wave(const JointMotion& m, double amp, double omega, double phase,
                  double t) {
  const double arg = omega * t + phase + m.phase;
  return amp * (std::sin(arg) + m.harmonic * std::sin(2.0 * arg));
}

}  // namespace

SimDomain simulate_domain(const SimDomainConfig& config) {
  if (config.clips_per_class < 1)
    throw ConfigError("need at least one clip per class");

  SimDomain domain;
  domain.rate_hz = config.rate_hz;
  domain.channel_names = {"torso.x", "torso.y", "arm.x",
                          "arm.y",   "leg.x",   "leg.y"};
  domain.limb_map.at("LA") = {"arm.x", "arm.y"};
  domain.limb_map.at("LL") = {"leg.x", "leg.y"};
  domain.limb_map.at("N") = {"torso.x", "torso.y"};
  for (const auto& cls : kClasses) domain.class_names.push_back(cls.name);

  const int samples =
      static_cast<int>(std::floor(config.duration_sec * config.rate_hz + 1e-9)) + 1;

  Rng rng(config.seed, rngstream::kSim);
  int clip_counter = 0;
  for (std::size_t label = 0; label < std::size(kClasses); ++label) {
    const MotionClass& cls = kClasses[label];
    for (int c = 0; c < config.clips_per_class; ++c) {
      const double freq = cls.freq_hz * config.freq_scale *
                          (0.9 + 0.2 * rng.uniform());
      const double amp = config.amp_scale * (0.8 + 0.4 * rng.uniform());
      const double phase = kTau * rng.uniform();
      const double torso_x0 = rng.normal(0.0, 0.3);
      const double torso_y0 = rng.normal(1.0, 0.3);

      PoseClip clip;
      clip.clip_id = "clip" + std::to_string(clip_counter++);
      clip.label = static_cast<int>(label);
      clip.rate_hz = config.rate_hz;
      clip.unit = SignalUnit::position;
      clip.channel_names = domain.channel_names;
      clip.channels.assign(domain.channel_names.size(), {});

      const double omega = kTau * freq;
      const JointMotion* joints[] = {&cls.torso, &cls.arm, &cls.leg};
      const double rest_x[] = {torso_x0, torso_x0 + 0.5, torso_x0 - 0.2};
      const double rest_y[] = {torso_y0, torso_y0 + 0.4, torso_y0 - 0.8};
      for (int i = 0; i < samples; ++i) {
        const double t = static_cast<double>(i) / config.rate_hz;
        for (int j = 0; j < 3; ++j) {
          const JointMotion& m = *joints[j];
          const double x = rest_x[j] +
                           joint_wave(m, amp * m.amp_x, omega, phase, t) +
                           rng.normal(0.0, config.noise_sigma);
          const double y = rest_y[j] +
                           joint_wave(m, amp * m.amp_y, omega, phase + 0.7, t) +
                           rng.normal(0.0, config.noise_sigma);
          clip.channels[static_cast<std::size_t>(2 * j)].push_back(x);
          clip.channels[static_cast<std::size_t>(2 * j + 1)].push_back(y);
        }
      }
      domain.clips.push_back(std::move(clip));
    }
  }
  return domain;
}

DatasetManifest write_domain(const SimDomain& domain, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  DatasetManifest manifest;
  manifest.classes = domain.class_names;
  manifest.rate_hz = domain.rate_hz;
  manifest.unit = SignalUnit::position;
  manifest.limb_map = domain.limb_map;
  manifest.channels = domain.channel_names;
  manifest.base_dir = dir;

  for (const auto& clip : domain.clips) {
    const std::string filename = clip.clip_id + ".csv";
    write_clip((fs::path(dir) / filename).string(), clip);
    manifest.clips.push_back({filename, clip.label, ""});
  }
  save_manifest(manifest, (fs::path(dir) / "manifest.json").string());
  return manifest;
}

}  // namespace synthimu
