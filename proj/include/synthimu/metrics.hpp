#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace synthimu {

// K x K counts, rows = true class, cols = predicted class.
struct ConfusionMatrix {
  int k = 0;
  std::vector<std::int64_t> counts;  // row-major

  explicit ConfusionMatrix(int classes = 0)
      : k(classes), counts(static_cast<std::size_t>(classes) * classes, 0) {}

  std::int64_t& at(int t, int p) { return counts[static_cast<std::size_t>(t) * k + p]; }
  std::int64_t at(int t, int p) const {
    return counts[static_cast<std::size_t>(t) * k + p];
  }
  std::int64_t total() const;
};

struct ClassScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::int64_t support = 0;
};

struct MetricsReport {
  double wf1 = 0.0;
  double accuracy = 0.0;
  std::vector<ClassScore> per_class;
  std::int64_t n = 0;
};

struct PermTestResult {
  double observed_diff = 0.0;
  double p_value = 1.0;
  int n_permutations = 0;
  std::uint64_t seed = 0;
};

ConfusionMatrix confusion(const std::vector<int>& y_true,
                          const std::vector<int>& y_pred, int k);

// Support-weighted mean of per-class F1; zero-denominator precision/recall
// count as 0 so never-predicted classes cannot produce NaN.
double weighted_f1(const ConfusionMatrix& cm);

MetricsReport compute_metrics(const ConfusionMatrix& cm);

// Collapses per-window predictions to one prediction per clip by modal class;
// ties resolve to the smallest class index. Clips are emitted in order of
// first appearance.
struct VoteResult {
  std::vector<std::string> clip_ids;
  std::vector<int> predictions;
};
VoteResult majority_vote(const std::vector<std::string>& window_clip_ids,
                         const std::vector<int>& window_predictions);

// Paired sign-flip permutation test on per-window correctness of two models
// evaluated on the same windows. Two-sided p with add-one smoothing.
PermTestResult permutation_test(const std::vector<std::uint8_t>& correct_a,
                                const std::vector<std::uint8_t>& correct_b,
                                int n_permutations, std::uint64_t seed);

struct RunStats {
  double mean = 0.0;
  double stddev = 0.0;  // population
};
RunStats aggregate_runs(const std::vector<double>& values);

}  // namespace synthimu
