// Acceptance suite: each criterion prints one PASS/FAIL line. Run with a
// criterion number (1..9) or no argument for all. Exit 0 iff everything
// selected passed.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "synthimu/commands.hpp"
#include "synthimu/sim.hpp"

using namespace synthimu;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Check {
  bool ok = true;
  std::string detail;

  void require(bool condition, const std::string& what) {
    if (!condition && ok) {
      ok = false;
      detail = what;
    }
  }
  void note(const std::string& text) {
    if (ok) detail = text;
  }
};

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// --- criterion 1: gradient fidelity ----------------------------------------

Check criterion_gradients() {
  Check check;
  const auto start = Clock::now();

  struct Case {
    const char* name;
    NetworkGraph graph;
  };
  std::vector<Case> cases;
  cases.push_back({"tcnn(W=25,D=4,K=3,fc=64)", build_tcnn(25, 4, 3, 64, 0.5)});
  const std::vector<std::string> channels = {"a.x", "a.y", "l.x",
                                             "l.y", "n.x", "n.y"};
  cases.push_back(
      {"tcnn-imu(3x2ch)",
       build_tcnn_imu(25, channels,
                      {{"LA", {"a.x", "a.y"}},
                       {"LL", {"l.x", "l.y"}},
                       {"N", {"n.x", "n.y"}}},
                      3, 64, 64, 0.5)});

  double worst = 0.0;
  for (const auto& c : cases) {
    Rng init_rng(42, rngstream::kInit);
    const ParamSet params = init_params(c.graph, init_rng);
    Rng data_rng(42, rngstream::kTrain);
    std::vector<Window> windows;
    for (int i = 0; i < 2; ++i) {
      Window win;
      win.window_len = c.graph.window_len;
      win.channel_count = static_cast<int>(c.graph.channels.size());
      win.label = i % c.graph.classes;
      win.clip_id = "g";
      win.data.resize(static_cast<std::size_t>(win.window_len) * win.channel_count);
      for (auto& v : win.data) v = data_rng.normal();
      windows.push_back(std::move(win));
    }
    const auto report = gradient_check(c.graph, params, windows, 1e-3, 64);
    worst = std::max(worst, report.max_rel_error);
    check.require(report.max_rel_error < 1e-3,
                  std::string(c.name) + " max rel error " +
                      std::to_string(report.max_rel_error) + " at " +
                      report.worst_key);
  }

  const double elapsed = seconds_since(start);
  check.require(elapsed < 60.0,
                "runtime " + std::to_string(elapsed) + " s exceeds 60 s");
  char buf[128];
  std::snprintf(buf, sizeof(buf), "max rel error %.2e, %.1f s", worst, elapsed);
  check.note(buf);
  return check;
}

// --- criterion 2: spline correctness ----------------------------------------

Check criterion_spline() {
  Check check;
  const auto start = Clock::now();
  constexpr double kTau = 2.0 * 3.14159265358979323846;

  // degree-5 polynomial: values and second derivatives to 1e-8 relative
  auto poly = [](double t) {
    return 1.5 - 2.0 * t + 0.9 * t * t + 0.21 * t * t * t -
           0.043 * t * t * t * t + 0.0031 * t * t * t * t * t;
  };
  auto poly_d2 = [](double t) {
    return 1.8 + 1.26 * t - 0.516 * t * t + 0.062 * t * t * t;
  };
  ChannelSeries series;
  series.rate_hz = 20.0;
  for (int i = 0; i <= 80; ++i) series.values.push_back(poly(i / 20.0));
  std::vector<double> times;
  for (double t = 0.25; t <= series.duration_sec() - 0.25; t += 0.013)
    times.push_back(t);
  const auto values = eval_piecewise_quintic(series, times, {5, 6, 0});
  const auto curvatures = eval_piecewise_quintic(series, times, {5, 6, 2});
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double rel_v =
        std::abs(values[i] - poly(times[i])) / std::abs(poly(times[i]));
    const double rel_c = std::abs(curvatures[i] - poly_d2(times[i])) /
                         std::abs(poly_d2(times[i]));
    check.require(rel_v < 1e-8, "polynomial value error " + std::to_string(rel_v));
    check.require(rel_c < 1e-8,
                  "polynomial curvature error " + std::to_string(rel_c));
  }

  // sin(2 pi t) at 100 Hz: second derivative within 1% at interior points
  ChannelSeries wave;
  wave.rate_hz = 100.0;
  for (int i = 0; i <= 200; ++i) wave.values.push_back(std::sin(kTau * i / 100.0));
  std::vector<double> interior;
  for (double t = 0.05; t <= wave.duration_sec() - 0.05; t += 0.0043)
    interior.push_back(t);
  const auto d2 = eval_piecewise_quintic(wave, interior, {5, 6, 2});
  const double amp = kTau * kTau;
  for (std::size_t i = 0; i < interior.size(); ++i) {
    const double expected = -amp * std::sin(kTau * interior[i]);
    check.require(std::abs(d2[i] - expected) <= 0.01 * amp,
                  "sin curvature off by " + std::to_string(d2[i] - expected));
  }

  const double elapsed = seconds_since(start);
  check.require(elapsed < 5.0, "runtime exceeds 5 s");
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%zu polynomial + %zu sin queries, %.2f s",
                times.size(), interior.size(), elapsed);
  check.note(buf);
  return check;
}

// --- criterion 3: windowing oracle -------------------------------------------

Check criterion_windowing() {
  Check check;
  Rng rng(1234);
  std::int64_t verified = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int length = 1 + static_cast<int>(rng.uniform_int(300));
    const int w = 1 + static_cast<int>(rng.uniform_int(80));
    const int s = 1 + static_cast<int>(rng.uniform_int(25));

    PoseClip clip;
    clip.clip_id = "t" + std::to_string(trial);
    clip.label = 0;
    clip.rate_hz = 50.0;
    clip.channel_names = {"a.x", "a.y"};
    clip.channels.assign(2, std::vector<double>(static_cast<std::size_t>(length)));
    for (int t = 0; t < length; ++t) {
      clip.channels[0][static_cast<std::size_t>(t)] = t;            // time index
      clip.channels[1][static_cast<std::size_t>(t)] = 1000.0 + t;   // offset copy
    }

    WindowSpec spec;
    spec.window_len = w;
    spec.stride = s;
    const auto windows = segment_windows(clip, spec);

    const std::int64_t expected =
        length >= w ? (static_cast<std::int64_t>(length) - w) / s + 1 : 0;
    check.require(static_cast<std::int64_t>(windows.size()) == expected,
                  "count mismatch at trial " + std::to_string(trial));

    for (std::size_t k = 0; k < windows.size(); ++k) {
      const double offset = static_cast<double>(k) * s;
      for (int t = 0; t < w; ++t) {
        check.require(windows[k].at(t, 0) == offset + t,
                      "non-contiguous slice at trial " + std::to_string(trial));
        check.require(windows[k].at(t, 1) == 1000.0 + offset + t,
                      "channel mixup at trial " + std::to_string(trial));
      }
      ++verified;
    }
    if (!check.ok) break;
  }
  check.note(std::to_string(verified) + " windows verified over 1000 triples");
  return check;
}

// --- criterion 4: wF1 oracle --------------------------------------------------

double brute_force_wf1(const std::vector<int>& y_true,
                       const std::vector<int>& y_pred, int k) {
  double wf1 = 0.0;
  const double n = static_cast<double>(y_true.size());
  for (int c = 0; c < k; ++c) {
    double tp = 0, fp = 0, fn = 0, support = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
      if (y_true[i] == c) ++support;
      if (y_true[i] == c && y_pred[i] == c) ++tp;
      if (y_true[i] != c && y_pred[i] == c) ++fp;
      if (y_true[i] == c && y_pred[i] != c) ++fn;
    }
    const double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    const double f1 = precision + recall > 0
                          ? 2 * precision * recall / (precision + recall)
                          : 0.0;
    wf1 += (support / n) * f1;
  }
  return wf1;
}

Check criterion_wf1() {
  Check check;
  Rng rng(99);
  for (int trial = 0; trial < 500; ++trial) {
    const int k = 2 + static_cast<int>(rng.uniform_int(5));  // K <= 6
    const int n = 1 + static_cast<int>(rng.uniform_int(120));
    std::vector<int> y_true(static_cast<std::size_t>(n)),
        y_pred(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      y_true[static_cast<std::size_t>(i)] = static_cast<int>(rng.uniform_int(k));
      y_pred[static_cast<std::size_t>(i)] = static_cast<int>(rng.uniform_int(k));
    }
    const double got = weighted_f1(confusion(y_true, y_pred, k));
    const double expected = brute_force_wf1(y_true, y_pred, k);
    check.require(std::abs(got - expected) < 1e-12,
                  "oracle mismatch at trial " + std::to_string(trial));
  }

  const double hand =
      weighted_f1(confusion({0, 0, 1, 1, 1}, {0, 1, 1, 1, 0}, 2));
  check.require(std::abs(hand - 0.6) < 1e-12,
                "hand case gave " + std::to_string(hand));
  check.note("500 random instances + the hand case");
  return check;
}

// --- criterion 5: permutation test validity ----------------------------------

double exact_permutation_p(const std::vector<std::uint8_t>& a,
                           const std::vector<std::uint8_t>& b) {
  const int n = static_cast<int>(a.size());
  std::vector<int> d(a.size());
  long long observed = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d[i] = static_cast<int>(a[i]) - static_cast<int>(b[i]);
    observed += d[i];
  }
  const long long abs_obs = std::llabs(observed);
  long long hits = 0;
  for (std::uint64_t bits = 0; bits < (1ULL << n); ++bits) {
    long long sum = 0;
    for (int i = 0; i < n; ++i) sum += (bits >> i) & 1 ? -d[i] : d[i];
    if (std::llabs(sum) >= abs_obs) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(1ULL << n);
}

Check criterion_permtest() {
  Check check;

  // exact enumeration agreement on N <= 10 paired cases
  Rng rng(314);
  double worst_gap = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 5 + static_cast<int>(rng.uniform_int(6));  // 5..10
    std::vector<std::uint8_t> a(static_cast<std::size_t>(n)),
        b(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      a[static_cast<std::size_t>(i)] = rng.uniform() < 0.75 ? 1 : 0;
      b[static_cast<std::size_t>(i)] = rng.uniform() < 0.35 ? 1 : 0;
    }
    const double exact = exact_permutation_p(a, b);
    const auto result = permutation_test(a, b, 9999, 500 + trial);
    worst_gap = std::max(worst_gap, std::abs(result.p_value - exact));
    // Monte-Carlo tolerance: a few sigmas of a Bernoulli(exact) mean at 9999
    const double sigma = std::sqrt(exact * (1 - exact) / 9999.0);
    check.require(std::abs(result.p_value - exact) < 4 * sigma + 2e-4,
                  "exact-enumeration gap " + std::to_string(result.p_value - exact));
  }

  // all-true vs all-false spot case from the protocol
  {
    const std::vector<std::uint8_t> a(10, 1), b(10, 0);
    const auto result = permutation_test(a, b, 9999, 42);
    check.require(std::abs(result.p_value - 2.0 / 1024.0) < 0.0015,
                  "N=10 saturated case p " + std::to_string(result.p_value));
  }

  // null calibration: a, b iid Bernoulli(0.7), N=200, 500 trials
  int rejections = 0;
  Rng null_rng(2718);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::uint8_t> a(200), b(200);
    for (int i = 0; i < 200; ++i) {
      a[static_cast<std::size_t>(i)] = null_rng.uniform() < 0.7 ? 1 : 0;
      b[static_cast<std::size_t>(i)] = null_rng.uniform() < 0.7 ? 1 : 0;
    }
    const auto result = permutation_test(a, b, 9999, 9000 + trial);
    if (result.p_value < 0.05) ++rejections;
  }
  const double rate = rejections / 500.0;
  check.require(rate >= 0.03 && rate <= 0.08,
                "null rejection rate " + std::to_string(rate));

  char buf[96];
  std::snprintf(buf, sizeof(buf),
                "enum gap <= %.2e, null rejection rate %.3f", worst_gap, rate);
  check.note(buf);
  return check;
}

// --- criterion 6: transplant contract -----------------------------------------

Check criterion_transplant() {
  Check check;

  Checkpoint source;
  source.graph = build_tcnn(25, 4, 5, 32, 0.5);
  Rng source_rng(11, rngstream::kInit);
  source.params = init_params(source.graph, source_rng);
  for (auto& [key, tensor] : source.params.items)
    for (auto& v : tensor.data)
      v += 0.02f * static_cast<float>(source_rng.normal());
  source.meta.dataset_tag = "acceptance-source";

  const NetworkGraph target = build_tcnn(25, 6, 3, 16, 0.5);

  // copied tensors bit-equal, everything else freshly initialized
  for (int n_conv = 0; n_conv <= 4; ++n_conv) {
    TransferPlan plan;
    plan.n_conv = n_conv;
    Rng rng(77, rngstream::kInit);
    const auto result = transplant(source, target, plan, rng);
    Rng fresh_rng(77, rngstream::kInit);
    const ParamSet fresh = init_params(target, fresh_rng);
    for (int i = 1; i <= 4; ++i) {
      for (const auto& key : conv_param_keys(target, "", i)) {
        const bool equals_source =
            result.params.at(key).data == source.params.at(key).data;
        const bool equals_fresh =
            result.params.at(key).data == fresh.at(key).data;
        if (i <= n_conv)
          check.require(equals_source, key + " not copied at n_conv=" +
                                           std::to_string(n_conv));
        else
          check.require(equals_fresh && !equals_source,
                        key + " not freshly initialized at n_conv=" +
                            std::to_string(n_conv));
      }
    }
  }

  // freeze: bit-invariant through 100 optimizer steps
  {
    TransferPlan plan;
    plan.n_conv = 2;
    plan.freeze = true;
    Rng rng(78, rngstream::kInit);
    auto transplanted = transplant(source, target, plan, rng);
    check.require(transplanted.frozen.size() == 4, "frozen set size");

    TrainConfig cfg;
    OptimizerState state = OptimizerState::init(transplanted.params);
    Rng grad_rng(5);
    for (int step = 0; step < 100; ++step) {
      ParamSet grads;
      for (const auto& [key, tensor] : transplanted.params.items) {
        Tensor g(tensor.shape);
        for (auto& v : g.data) v = static_cast<float>(grad_rng.normal());
        grads.add(key, std::move(g));
      }
      rmsprop_step(transplanted.params, grads, state, cfg, transplanted.frozen);
    }
    for (const auto& key : transplanted.frozen)
      check.require(transplanted.params.at(key).data == source.params.at(key).data,
                    key + " moved despite freeze");
    check.require(transplanted.params.at("conv3.W").data !=
                      source.params.at("conv3.W").data,
                  "unfrozen tensors should move");
  }

  // n_conv = 0 under a shared seed is bit-identical to scratch training
  {
    Rng data_rng(91);
    std::vector<Window> train_w, val_w;
    for (int i = 0; i < 30; ++i) {
      Window win;
      win.window_len = 25;
      win.channel_count = 6;
      win.label = i % 3;
      win.clip_id = "c" + std::to_string(i);
      win.data.resize(25 * 6);
      for (auto& v : win.data) v = win.label - 1.0 + 0.5 * data_rng.normal();
      (i % 5 == 0 ? val_w : train_w).push_back(std::move(win));
    }
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 8;
    cfg.seed = 1001;

    TransferPlan plan;
    plan.n_conv = 0;
    Rng rng(cfg.seed, rngstream::kInit);
    const auto transplanted = transplant(source, target, plan, rng);
    const auto tuned =
        fine_tune(transplanted, target, train_w, val_w, {}, plan, cfg);

    Rng scratch_rng(cfg.seed, rngstream::kInit);
    const auto scratch =
        train(target, init_params(target, scratch_rng), train_w, val_w, cfg);
    for (std::size_t i = 0; i < scratch.best_params.items.size(); ++i)
      check.require(tuned.result.best_params.items[i].second.data ==
                        scratch.best_params.items[i].second.data,
                    "n_conv=0 diverged from scratch at " +
                        scratch.best_params.items[i].first);
  }

  check.note("n_conv 0..4, 100-step freeze, scratch equivalence");
  return check;
}

// --- criterion 7: desk-scale transfer effect -----------------------------------

Check criterion_transfer_effect() {
  Check check;
  const auto start = Clock::now();
  testutil::TempDir dir;

  // source domain: 5 classes x 40 clips
  SimDomainConfig source_sim;
  source_sim.clips_per_class = 40;
  source_sim.seed = 7;
  const auto source_manifest =
      write_domain(simulate_domain(source_sim), (dir.path / "source").string());

  // target domain: same dynamics, shifted amplitudes and rates, fewer clips
  SimDomainConfig target_sim;
  target_sim.clips_per_class = 15;
  target_sim.amp_scale = 1.4;
  target_sim.freq_scale = 0.8;
  target_sim.noise_sigma = 0.05;
  target_sim.seed = 8;
  const auto target_manifest =
      write_domain(simulate_domain(target_sim), (dir.path / "target").string());

  WindowSpec window;
  window.duration_sec = 1.0;
  window.stride = 12;

  const auto source_data = build_windows_pipeline(
      source_manifest, 25.0, PipelineMode::synthetic, window, std::nullopt, 42);
  const auto target_data = build_windows_pipeline(
      target_manifest, 25.0, PipelineMode::synthetic, window, std::nullopt, 42);

  const int classes = 5;
  const NetworkGraph graph =
      build_tcnn(source_data.window_len, source_data.channel_names, classes, 64, 0.5);

  // pre-train on the source domain
  TrainConfig pretrain_cfg;
  pretrain_cfg.learning_rate = 1e-3;
  pretrain_cfg.batch_size = 50;
  pretrain_cfg.epochs = 8;
  pretrain_cfg.seed = 42;
  Rng pretrain_rng(pretrain_cfg.seed, rngstream::kInit);
  const auto pretrained = train(graph, init_params(graph, pretrain_rng),
                                source_data.train, source_data.val, pretrain_cfg);

  Checkpoint source_ckpt;
  source_ckpt.graph = graph;
  source_ckpt.params = pretrained.best_params;
  source_ckpt.meta.dataset_tag = "sim-source";

  // 10% of the target training windows, fixed across runs and both arms
  TransferPlan plan;
  plan.n_conv = 1;
  plan.freeze = false;
  plan.target_fraction_pct = 10.0;
  plan.seed = 42;
  const auto small_train =
      subsample_fraction(target_data.train, plan.target_fraction_pct, plan.seed);

  TrainConfig tune_cfg;
  tune_cfg.learning_rate = 1e-3;
  tune_cfg.batch_size = 20;
  tune_cfg.epochs = 10;

  std::vector<double> transfer_wf1, scratch_wf1;
  std::vector<std::uint8_t> transfer_correct, scratch_correct;
  for (int run = 0; run < 5; ++run) {
    tune_cfg.seed = 42 + static_cast<std::uint64_t>(run);

    Rng transfer_rng(tune_cfg.seed, rngstream::kInit);
    const auto transplanted = transplant(source_ckpt, graph, plan, transfer_rng);
    const auto transfer_report = fine_tune(
        transplanted, graph, small_train, target_data.val, target_data.test,
        plan, tune_cfg);
    transfer_wf1.push_back(transfer_report.test_wf1);

    Rng scratch_rng(tune_cfg.seed, rngstream::kInit);
    const auto scratch_result = train(graph, init_params(graph, scratch_rng),
                                      small_train, target_data.val, tune_cfg);
    Model scratch_model(graph, scratch_result.best_params);
    const auto scratch_preds = predict_windows(scratch_model, target_data.test);
    scratch_wf1.push_back(weighted_f1(
        confusion(scratch_preds.true_labels, scratch_preds.labels, classes)));

    Model transfer_model(graph, transfer_report.result.best_params);
    const auto transfer_preds = predict_windows(transfer_model, target_data.test);
    for (std::size_t i = 0; i < transfer_preds.labels.size(); ++i) {
      transfer_correct.push_back(
          transfer_preds.labels[i] == transfer_preds.true_labels[i] ? 1 : 0);
      scratch_correct.push_back(
          scratch_preds.labels[i] == scratch_preds.true_labels[i] ? 1 : 0);
    }
  }

  const auto transfer_stats = aggregate_runs(transfer_wf1);
  const auto scratch_stats = aggregate_runs(scratch_wf1);
  check.require(transfer_stats.mean >= scratch_stats.mean,
                "transfer mean wF1 " + std::to_string(transfer_stats.mean) +
                    " below scratch " + std::to_string(scratch_stats.mean));

  const auto perm =
      permutation_test(transfer_correct, scratch_correct, 9999, 42);
  double acc_a = 0, acc_b = 0;
  for (std::size_t i = 0; i < transfer_correct.size(); ++i) {
    acc_a += transfer_correct[i];
    acc_b += scratch_correct[i];
  }
  const double acc_diff =
      (acc_a - acc_b) / static_cast<double>(transfer_correct.size());
  const bool sign_ok = (perm.observed_diff > 0) == (acc_diff > 0) &&
                       (perm.observed_diff < 0) == (acc_diff < 0);
  check.require(sign_ok, "permutation test sign inconsistent with accuracies");

  const double elapsed = seconds_since(start);
  check.require(elapsed < 900.0,
                "runtime " + std::to_string(elapsed) + " s exceeds 15 min");
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "transfer wF1 %.3f+-%.3f vs scratch %.3f+-%.3f, diff %.4f "
                "(p=%.4g), %.0f s",
                transfer_stats.mean, transfer_stats.stddev, scratch_stats.mean,
                scratch_stats.stddev, perm.observed_diff, perm.p_value, elapsed);
  check.note(buf);
  return check;
}

// --- criterion 8: determinism of the CLI commands -------------------------------

Check criterion_determinism() {
  Check check;
  testutil::TempDir dir;

  SimDomainConfig sim;
  sim.clips_per_class = 4;
  sim.seed = 7;
  write_domain(simulate_domain(sim), (dir.path / "source").string());

  const std::string config_path = dir.file("config.json");
  {
    std::ofstream out(config_path);
    out << R"({
  "manifest": ")" << (dir.path / "source" / "manifest.json").string() << R"(",
  "mode": "synthetic",
  "target_rate_hz": 25,
  "window": {"duration_sec": 1.0, "stride": 12},
  "arch": {"type": "tcnn", "fc_units": 16},
  "train": {"learning_rates": [1e-3], "epochs": 2, "batch_size": 16, "seed": 42},
  "split": {"seed": 42},
  "transfer": {"n_conv": 1, "seed": 42},
  "runs": 2,
  "dataset_tag": "det-check"
})";
  }

  auto cfg = load_config(config_path, {}, {}, (dir.path / "out_a").string());
  cmd_train(cfg);
  auto cfg_b = load_config(config_path, {}, {}, (dir.path / "out_b").string());
  cmd_train(cfg_b);
  for (const char* name : {"model.ckpt", "history.jsonl"})
    check.require(read_bytes((dir.path / "out_a" / name).string()) ==
                      read_bytes((dir.path / "out_b" / name).string()),
                  std::string(name) + " differs between reruns");

  const std::string source_ckpt = (dir.path / "out_a" / "model.ckpt").string();
  auto tcfg = load_config(config_path, {"train.epochs=1"}, {},
                          (dir.path / "t_a").string());
  cmd_transfer(tcfg, source_ckpt);
  auto tcfg_b = load_config(config_path, {"train.epochs=1"}, {},
                            (dir.path / "t_b").string());
  cmd_transfer(tcfg_b, source_ckpt);
  for (const char* name : {"transfer_matrix.csv", "transfer_summary.json"})
    check.require(read_bytes((dir.path / "t_a" / name).string()) ==
                      read_bytes((dir.path / "t_b" / name).string()),
                  std::string(name) + " differs between reruns");

  check.note("train + transfer artifacts byte-identical across reruns");
  return check;
}

// --- criterion 9: round-trips ----------------------------------------------------

Check criterion_roundtrips() {
  Check check;
  testutil::TempDir dir;
  Rng rng(4711);

  // 100 random clips through CSV
  DatasetManifest manifest;
  manifest.classes = {"x"};
  manifest.unit = SignalUnit::position;
  manifest.base_dir = dir.path.string();
  for (int trial = 0; trial < 100; ++trial) {
    PoseClip clip;
    clip.clip_id = "rt";
    clip.label = 0;
    clip.rate_hz = 1.0 + 199.0 * rng.uniform();
    clip.unit = SignalUnit::position;
    const int channels = 1 + static_cast<int>(rng.uniform_int(6));
    const int length = 2 + static_cast<int>(rng.uniform_int(100));
    for (int c = 0; c < channels; ++c) {
      clip.channel_names.push_back("j" + std::to_string(c) + ".x");
      std::vector<double> values(static_cast<std::size_t>(length));
      for (auto& v : values) {
        const double exponent = rng.uniform() * 20.0 - 10.0;
        v = rng.normal() * std::pow(10.0, exponent);
        if (rng.uniform() < 0.02) v = 0.0;
      }
      clip.channels.push_back(std::move(values));
    }
    manifest.rate_hz = clip.rate_hz;
    const std::string path = dir.file("rt.csv");
    write_clip(path, clip);
    const PoseClip loaded = load_clip(path, manifest, 0, "rt");
    bool equal = loaded.channels.size() == clip.channels.size();
    for (std::size_t c = 0; equal && c < clip.channels.size(); ++c)
      equal = loaded.channels[c] == clip.channels[c];
    check.require(equal, "CSV round-trip lost bits at trial " +
                             std::to_string(trial));
  }

  // 100 random checkpoints
  for (int trial = 0; trial < 100; ++trial) {
    const int window_len = 17 + static_cast<int>(rng.uniform_int(14));
    const int d = 1 + static_cast<int>(rng.uniform_int(6));
    const int k = 1 + static_cast<int>(rng.uniform_int(5));
    const int fc = 4 + static_cast<int>(rng.uniform_int(29));
    NetworkGraph graph = build_tcnn(window_len, d, k, fc, 0.5, 8);
    Rng init_rng(rng.next_u64(), rngstream::kInit);
    ParamSet params = init_params(graph, init_rng);
    for (auto& [key, tensor] : params.items)
      for (auto& v : tensor.data)
        v = static_cast<float>(init_rng.normal() *
                               std::pow(10.0, init_rng.uniform() * 12 - 6));

    CheckpointMeta meta;
    meta.dataset_tag = "trial-" + std::to_string(trial);
    meta.seed = rng.next_u64();
    meta.epochs = static_cast<int>(rng.uniform_int(100));
    meta.chosen_lr = rng.uniform();
    meta.stats_ref = "stats-" + std::to_string(trial) + ".json";
    const std::string path = dir.file("rt.ckpt");
    save_checkpoint(graph, params, meta, path);
    const Checkpoint loaded = load_checkpoint(path);

    bool equal = loaded.params.items.size() == params.items.size() &&
                 loaded.meta.dataset_tag == meta.dataset_tag &&
                 loaded.meta.seed == meta.seed &&
                 loaded.meta.epochs == meta.epochs &&
                 loaded.meta.chosen_lr == meta.chosen_lr &&
                 loaded.meta.stats_ref == meta.stats_ref;
    for (std::size_t i = 0; equal && i < params.items.size(); ++i)
      equal = loaded.params.items[i].first == params.items[i].first &&
              loaded.params.items[i].second.data == params.items[i].second.data;
    check.require(equal, "checkpoint round-trip lost bits at trial " +
                             std::to_string(trial));
  }

  check.note("100 clip CSVs + 100 checkpoints, bit-exact");
  return check;
}

struct Criterion {
  int id;
  const char* title;
  std::function<Check()> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all = {
      {1, "gradient fidelity (tcnn + tcnn-imu, < 1e-3, < 60 s)",
       criterion_gradients},
      {2, "spline correctness (polynomial 1e-8, sin 1%)", criterion_spline},
      {3, "windowing count formula and contiguity (1000 triples)",
       criterion_windowing},
      {4, "weighted F1 oracle equivalence (500 instances)", criterion_wf1},
      {5, "permutation test exactness and null calibration", criterion_permtest},
      {6, "transplant contract (copy/fresh/freeze/seed-equivalence)",
       criterion_transplant},
      {7, "desk-scale transfer effect (5 runs, 10% target)",
       criterion_transfer_effect},
      {8, "deterministic train/transfer reruns (byte-identical)",
       criterion_determinism},
      {9, "checkpoint and clip CSV round-trips (100 fixtures)",
       criterion_roundtrips},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  int selected = 0;
  if (argc > 1) {
    selected = std::atoi(argv[1]);
    if (selected < 1 || selected > 9) {
      std::fprintf(stderr, "usage: %s [criterion 1..9]\n", argv[0]);
      return 2;
    }
  }

  bool all_ok = true;
  for (const auto& criterion : criteria()) {
    if (selected != 0 && criterion.id != selected) continue;
    Check check;
    try {
      check = criterion.run();
    } catch (const std::exception& e) {
      check.ok = false;
      check.detail = std::string("exception: ") + e.what();
    }
    std::printf("%s criterion %d: %s%s%s\n", check.ok ? "PASS" : "FAIL",
                criterion.id, criterion.title,
                check.detail.empty() ? "" : " -- ", check.detail.c_str());
    std::fflush(stdout);
    all_ok = all_ok && check.ok;
  }
  return all_ok ? 0 : 1;
}
