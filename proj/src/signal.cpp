#include "synthimu/signal.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "synthimu/errors.hpp"

namespace synthimu {

namespace {

void validate_query(const ChannelSeries& series, const SplineQuery& q) {
  if (q.degree != 5) throw ConfigError("spline degree is fixed at 5");
  if (q.support < q.degree + 1)
    throw ConfigError("spline support must be at least degree+1");
  if (q.derivative_order != 0 && q.derivative_order != 2)
    throw ConfigError("derivative order must be 0 or 2");
  if (series.rate_hz <= 0.0) throw DataError("series rate_hz must be positive");
  if (static_cast<int>(series.values.size()) < q.support)
    throw DataError("insufficient samples: need at least " +
                    std::to_string(q.support) + ", got " +
                    std::to_string(series.values.size()));
}

// Uniform grid of `count` samples spaced 1/rate, clamped into [0, duration].
std::vector<double> uniform_grid(double rate, double duration, std::size_t count) {
  std::vector<double> times(count);
  for (std::size_t i = 0; i < count; ++i)
    times[i] = std::min(static_cast<double>(i) / rate, duration);
  return times;
}

std::size_t grid_length(double duration, double rate) {
  return static_cast<std::size_t>(std::floor(duration * rate + 1e-9)) + 1;
}

}  // namespace

std::vector<double> eval_piecewise_quintic(const ChannelSeries& series,
                                           const std::vector<double>& query_times,
                                           const SplineQuery& q) {
  validate_query(series, q);

  const int n = static_cast<int>(series.values.size());
  const int k = q.support;
  const double h = 1.0 / series.rate_hz;
  const double duration = series.duration_sec();
  const double bound_tol = duration * 1e-12 + 1e-12;

  std::vector<double> out(query_times.size());
  std::vector<double> coef(k);
  double prev = -1.0;
  for (std::size_t qi = 0; qi < query_times.size(); ++qi) {
    double t = query_times[qi];
    if (qi > 0 && !(t > prev))
      throw DataError("query times must be strictly increasing");
    prev = t;
    if (t < -bound_tol || t > duration + bound_tol)
      throw DataError("query time " + std::to_string(t) +
                      " outside series range [0, " + std::to_string(duration) + "]");
    t = std::clamp(t, 0.0, duration);

    // support window of the k samples nearest t, clamped at the boundaries
    const double u = t * series.rate_hz;
    int j = static_cast<int>(std::floor(u)) - (k - 1) / 2;
    j = std::clamp(j, 0, n - k);

    // Newton divided differences in window-local time; nodes are i*h
    for (int i = 0; i < k; ++i) coef[i] = series.values[j + i];
    for (int lev = 1; lev < k; ++lev)
      for (int i = k - 1; i >= lev; --i)
        coef[i] = (coef[i] - coef[i - 1]) / (lev * h);

    // Horner evaluation of the Newton form with derivative propagation
    const double tau = t - j * h;
    double v = coef[k - 1], d1 = 0.0, d2 = 0.0;
    for (int i = k - 2; i >= 0; --i) {
      const double dt = tau - i * h;
      d2 = d2 * dt + 2.0 * d1;
      d1 = d1 * dt + v;
      v = v * dt + coef[i];
    }
    out[qi] = q.derivative_order == 0 ? v : d2;
  }
  return out;
}

ChannelSeries resample(const ChannelSeries& series, double factor) {
  if (factor <= 0.0) throw ConfigError("resample factor must be positive");
  if (factor == 1.0) return series;

  const double new_rate = series.rate_hz * factor;
  const double duration = series.duration_sec();
  const std::size_t m = grid_length(duration, new_rate);
  if (m < 2) throw DataError("resample result shorter than 2 samples");

  ChannelSeries out;
  out.rate_hz = new_rate;
  out.unit = series.unit;
  out.values = eval_piecewise_quintic(series, uniform_grid(new_rate, duration, m),
                                      SplineQuery{5, 6, 0});
  return out;
}

ChannelSeries synthesize_obd(const ChannelSeries& series, double target_rate_hz,
                             const SplineQuery& q) {
  if (series.unit != SignalUnit::position)
    throw DataError("synthesize_obd expects a position series");
  if (target_rate_hz <= 0.0) throw ConfigError("target rate must be positive");

  SplineQuery deriv = q;
  deriv.derivative_order = 2;
  const double duration = series.duration_sec();
  const std::size_t m = grid_length(duration, target_rate_hz);

  ChannelSeries out;
  out.rate_hz = target_rate_hz;
  out.unit = SignalUnit::acceleration;
  out.values = eval_piecewise_quintic(
      series, uniform_grid(target_rate_hz, duration, m), deriv);
  return out;
}

ZScoreResult zscore_channels(const std::vector<std::vector<double>>& matrix,
                             double epsilon) {
  ZScoreResult result;
  result.stats.reserve(matrix.size());
  for (const auto& channel : matrix) {
    if (channel.empty()) throw DataError("zscore_channels: empty channel");
    double sum = 0.0;
    for (double v : channel) sum += v;
    const double mean = sum / static_cast<double>(channel.size());
    double sq = 0.0;
    for (double v : channel) sq += (v - mean) * (v - mean);
    const double stddev = std::sqrt(sq / static_cast<double>(channel.size()));
    result.stats.push_back({mean, stddev});
  }
  result.matrix = apply_channel_stats(matrix, result.stats, epsilon);
  return result;
}

std::vector<std::vector<double>> apply_channel_stats(
    const std::vector<std::vector<double>>& matrix,
    const std::vector<ChannelStats>& stats, double epsilon) {
  if (matrix.size() != stats.size())
    throw DataError("channel count does not match stats count");
  std::vector<std::vector<double>> out(matrix.size());
  for (std::size_t c = 0; c < matrix.size(); ++c) {
    const double denom = std::max(stats[c].stddev, epsilon);
    out[c].resize(matrix[c].size());
    for (std::size_t i = 0; i < matrix[c].size(); ++i)
      out[c][i] = (matrix[c][i] - stats[c].mean) / denom;
  }
  return out;
}

std::pair<std::string, std::string> split_channel_name(const std::string& name) {
  const auto pos = name.rfind('.');
  if (pos == std::string::npos || pos == 0 || pos + 1 == name.size())
    throw DataError("channel name '" + name + "' is not of the form joint.axis");
  return {name.substr(0, pos), name.substr(pos + 1)};
}

std::vector<std::vector<double>> anchor_normalize(
    const std::vector<std::string>& channel_names,
    const std::vector<std::vector<double>>& channels, const AnchorSpec& anchor) {
  if (channel_names.size() != channels.size())
    throw DataError("channel name/value count mismatch");

  // axis -> index of the anchor joint's channel
  std::map<std::string, std::size_t> anchor_axes;
  for (std::size_t c = 0; c < channel_names.size(); ++c) {
    const auto [joint, axis] = split_channel_name(channel_names[c]);
    if (joint == anchor.anchor_joint) anchor_axes[axis] = c;
  }
  if (anchor_axes.empty())
    throw DataError("anchor joint '" + anchor.anchor_joint +
                    "' not present in clip channels");

  std::vector<std::vector<double>> out(channels.size());
  for (std::size_t c = 0; c < channels.size(); ++c) {
    const auto [joint, axis] = split_channel_name(channel_names[c]);
    const auto it = anchor_axes.find(axis);
    if (it == anchor_axes.end())
      throw DataError("axis '" + axis + "' of channel '" + channel_names[c] +
                      "' missing from anchor joint '" + anchor.anchor_joint + "'");
    const auto& ref = channels[it->second];
    if (ref.size() != channels[c].size())
      throw DataError("channel length mismatch against anchor for '" +
                      channel_names[c] + "'");
    out[c].resize(channels[c].size());
    for (std::size_t i = 0; i < channels[c].size(); ++i)
      out[c][i] = channels[c][i] - ref[i];
  }
  return out;
}

}  // namespace synthimu
