#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "synthimu/dataio.hpp"

namespace synthimu {

// Parametric limb-trajectory generator: five movement patterns over a small
// three-joint skeleton (torso, arm, leg in 2-d), with per-clip jitter in
// frequency, amplitude and phase. amp_scale/freq_scale shift the whole domain,
// which is how a target domain with different dynamics is produced.
struct SimDomainConfig {
  int clips_per_class = 40;
  double rate_hz = 25.0;
  double duration_sec = 2.4;
  double amp_scale = 1.0;
  double freq_scale = 1.0;
  double noise_sigma = 0.02;
  std::uint64_t seed = 7;
};

struct SimDomain {
  std::vector<PoseClip> clips;
  std::vector<std::string> class_names;
  std::vector<std::string> channel_names;
  LimbMap limb_map;  // LA=arm, LL=leg, N=torso; RA/RL empty
  double rate_hz = 0.0;
};

SimDomain simulate_domain(const SimDomainConfig& config);

// Writes clip CSVs plus a manifest.json under `dir` and returns the manifest.
DatasetManifest write_domain(const SimDomain& domain, const std::string& dir);

}  // namespace synthimu
