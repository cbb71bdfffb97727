#pragma once

#include <string>
#include <vector>

namespace synthimu {

enum class SignalUnit { position, acceleration };

// One channel of a multi-channel recording, uniformly sampled.
struct ChannelSeries {
  std::vector<double> values;
  double rate_hz = 0.0;
  SignalUnit unit = SignalUnit::position;

  double duration_sec() const {
    return values.empty() ? 0.0
                          : static_cast<double>(values.size() - 1) / rate_hz;
  }
};

// Local interpolation request: a degree-5 polynomial fitted to the `support`
// source samples nearest each query, evaluated directly (order 0) or as its
// second time-derivative (order 2).
struct SplineQuery {
  int degree = 5;
  int support = 6;
  int derivative_order = 0;
};

struct AnchorSpec {
  std::string anchor_joint;
};

// Evaluates the piecewise quintic at each query time (seconds). Boundary
// queries fall back to one-sided support windows and carry a larger error.
std::vector<double> eval_piecewise_quintic(const ChannelSeries& series,
                                           const std::vector<double>& query_times,
                                           const SplineQuery& q = {});

// Resamples onto a uniform grid spanning the original time range. factor 1
// returns the input values unchanged.
ChannelSeries resample(const ChannelSeries& series, double factor);

// Second derivative of the local quintic fit on a uniform target grid:
// position in, synthetic acceleration (unit/s^2) out.
ChannelSeries synthesize_obd(const ChannelSeries& series, double target_rate_hz,
                             const SplineQuery& q = {});

struct ChannelStats {
  double mean = 0.0;
  double stddev = 0.0;  // population
};

struct ZScoreResult {
  std::vector<std::vector<double>> matrix;  // channels x time
  std::vector<ChannelStats> stats;
};

// Per-channel zero-mean unit-deviation normalization; epsilon guards
// zero-variance channels.
ZScoreResult zscore_channels(const std::vector<std::vector<double>>& matrix,
                             double epsilon = 1e-8);

// Applies previously fitted statistics (e.g. training-set stats) to a matrix
// with the same channel layout.
std::vector<std::vector<double>> apply_channel_stats(
    const std::vector<std::vector<double>>& matrix,
    const std::vector<ChannelStats>& stats, double epsilon = 1e-8);

// Subtracts the anchor joint's trajectory from every joint, axis by axis.
// Channel names must follow the "joint.axis" convention.
std::vector<std::vector<double>> anchor_normalize(
    const std::vector<std::string>& channel_names,
    const std::vector<std::vector<double>>& channels, const AnchorSpec& anchor);

// Splits "joint.axis" at the last dot. Throws DataError when no dot exists.
std::pair<std::string, std::string> split_channel_name(const std::string& name);

}  // namespace synthimu
