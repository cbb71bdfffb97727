#include "synthimu/metrics.hpp"

#include <cmath>
#include <cstdlib>
#include <map>

#include "synthimu/errors.hpp"
#include "synthimu/rng.hpp"

namespace synthimu {

std::int64_t ConfusionMatrix::total() const {
  std::int64_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

ConfusionMatrix confusion(const std::vector<int>& y_true,
                          const std::vector<int>& y_pred, int k) {
  if (y_true.size() != y_pred.size())
    throw DataError("confusion: y_true and y_pred lengths differ");
  if (k <= 0) throw ConfigError("confusion: class count must be positive");
  ConfusionMatrix cm(k);
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] < 0 || y_true[i] >= k || y_pred[i] < 0 || y_pred[i] >= k)
      throw DataError("confusion: label out of range at index " +
                      std::to_string(i));
    ++cm.at(y_true[i], y_pred[i]);
  }
  return cm;
}

MetricsReport compute_metrics(const ConfusionMatrix& cm) {
  const std::int64_t n = cm.total();
  if (n == 0) throw DataError("metrics on an empty confusion matrix");

  MetricsReport report;
  report.n = n;
  report.per_class.resize(cm.k);
  std::int64_t diag = 0;
  double wf1 = 0.0;
  for (int c = 0; c < cm.k; ++c) {
    std::int64_t tp = cm.at(c, c), fp = 0, fn = 0;
    for (int o = 0; o < cm.k; ++o) {
      if (o == c) continue;
      fp += cm.at(o, c);
      fn += cm.at(c, o);
    }
    diag += tp;
    ClassScore& s = report.per_class[c];
    s.support = tp + fn;
    s.precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    s.recall = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    s.f1 = (s.precision + s.recall) > 0.0
               ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
               : 0.0;
    wf1 += (static_cast<double>(s.support) / n) * s.f1;
  }
  report.wf1 = wf1;
  report.accuracy = static_cast<double>(diag) / n;
  return report;
}

double weighted_f1(const ConfusionMatrix& cm) { return compute_metrics(cm).wf1; }

VoteResult majority_vote(const std::vector<std::string>& window_clip_ids,
                         const std::vector<int>& window_predictions) {
  if (window_clip_ids.size() != window_predictions.size())
    throw DataError("majority_vote: id/prediction lengths differ");
  if (window_clip_ids.empty()) throw DataError("majority_vote: empty input");

  std::vector<std::string> order;
  std::map<std::string, std::map<int, int>> votes;
  for (std::size_t i = 0; i < window_clip_ids.size(); ++i) {
    auto& per_clip = votes[window_clip_ids[i]];
    if (per_clip.empty()) order.push_back(window_clip_ids[i]);
    ++per_clip[window_predictions[i]];
  }

  VoteResult result;
  for (const auto& id : order) {
    int best_class = -1, best_count = 0;
    for (const auto& [cls, count] : votes[id]) {  // ascending class order
      if (count > best_count) {
        best_count = count;
        best_class = cls;
      }
    }
    result.clip_ids.push_back(id);
    result.predictions.push_back(best_class);
  }
  return result;
}

PermTestResult permutation_test(const std::vector<std::uint8_t>& correct_a,
                                const std::vector<std::uint8_t>& correct_b,
                                int n_permutations, std::uint64_t seed) {
  if (correct_a.size() != correct_b.size())
    throw DataError("permutation_test: sequences must be paired (equal length)");
  if (correct_a.empty()) throw DataError("permutation_test: empty sequences");
  if (n_permutations < 1)
    throw ConfigError("permutation_test: need at least one permutation");

  const std::int64_t n = static_cast<std::int64_t>(correct_a.size());

  // Work on integer sums; only pairs with differing outcomes can change the
  // statistic under a sign flip.
  std::int64_t observed = 0;
  std::vector<std::int8_t> diffs;
  diffs.reserve(correct_a.size());
  for (std::size_t i = 0; i < correct_a.size(); ++i) {
    const int d = static_cast<int>(correct_a[i] != 0) -
                  static_cast<int>(correct_b[i] != 0);
    observed += d;
    if (d != 0) diffs.push_back(static_cast<std::int8_t>(d));
  }

  Rng rng(seed);
  const std::int64_t abs_observed = std::llabs(observed);
  std::int64_t hits = 0;
  for (int p = 0; p < n_permutations; ++p) {
    std::int64_t sum = 0;
    std::size_t i = 0;
    // draw 64 coin flips per word
    while (i < diffs.size()) {
      std::uint64_t bits = rng.next_u64();
      const std::size_t chunk = std::min<std::size_t>(64, diffs.size() - i);
      for (std::size_t j = 0; j < chunk; ++j, ++i) {
        const std::int64_t d = diffs[i];
        sum += (bits & 1) ? -d : d;
        bits >>= 1;
      }
    }
    if (std::llabs(sum) >= abs_observed) ++hits;
  }

  PermTestResult result;
  result.observed_diff = static_cast<double>(observed) / static_cast<double>(n);
  result.p_value = static_cast<double>(1 + hits) / (n_permutations + 1);
  result.n_permutations = n_permutations;
  result.seed = seed;
  return result;
}

RunStats aggregate_runs(const std::vector<double>& values) {
  if (values.empty()) throw DataError("aggregate_runs: no values");
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  RunStats stats;
  stats.mean = mean;
  stats.stddev = std::sqrt(sq / static_cast<double>(values.size()));
  return stats;
}

}  // namespace synthimu
