#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <optional>
#include <string>
#include <vector>

#include "synthimu/commands.hpp"
#include "synthimu/metrics.hpp"
#include "synthimu/sim.hpp"

namespace py = pybind11;
using namespace synthimu;

namespace {

std::vector<double> to_vector(const py::array_t<double, py::array::c_style |
                                                            py::array::forcecast>& a) {
  if (a.ndim() != 1) throw ConfigError("expected a 1-d array");
  return {a.data(), a.data() + a.shape(0)};
}

std::vector<std::vector<double>> to_matrix(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw ConfigError("expected a 2-d array");
  std::vector<std::vector<double>> mat(static_cast<std::size_t>(a.shape(0)));
  for (py::ssize_t r = 0; r < a.shape(0); ++r)
    mat[static_cast<std::size_t>(r)] = {a.data() + r * a.shape(1),
                                        a.data() + (r + 1) * a.shape(1)};
  return mat;
}

py::array_t<double> from_vector(const std::vector<double>& v) {
  py::array_t<double> out(
      std::vector<py::ssize_t>{static_cast<py::ssize_t>(v.size())});
  std::memcpy(out.mutable_data(), v.data(), v.size() * sizeof(double));
  return out;
}

py::array_t<double> from_matrix(const std::vector<std::vector<double>>& mat) {
  const py::ssize_t rows = static_cast<py::ssize_t>(mat.size());
  const py::ssize_t cols = rows ? static_cast<py::ssize_t>(mat[0].size()) : 0;
  py::array_t<double> out({rows, cols});
  for (py::ssize_t r = 0; r < rows; ++r)
    std::memcpy(out.mutable_data() + r * cols, mat[static_cast<std::size_t>(r)].data(),
                static_cast<std::size_t>(cols) * sizeof(double));
  return out;
}

// [N, W, D] float array -> windows with synthetic clip ids
std::vector<Window> windows_from_numpy(
    const py::array_t<float, py::array::c_style | py::array::forcecast>& x,
    const std::vector<int>& labels) {
  if (x.ndim() != 3) throw ConfigError("expected windows as a [N, W, D] array");
  const auto n = x.shape(0), w = x.shape(1), d = x.shape(2);
  if (static_cast<py::ssize_t>(labels.size()) != n)
    throw ConfigError("label count does not match window count");
  std::vector<Window> windows(static_cast<std::size_t>(n));
  for (py::ssize_t i = 0; i < n; ++i) {
    Window& win = windows[static_cast<std::size_t>(i)];
    win.window_len = static_cast<int>(w);
    win.channel_count = static_cast<int>(d);
    win.label = labels[static_cast<std::size_t>(i)];
    win.clip_id = "w" + std::to_string(i);
    win.data.assign(x.data() + i * w * d, x.data() + (i + 1) * w * d);
  }
  return windows;
}

struct PyModel {
  NetworkGraph graph;
  ParamSet params;

  Model model() const { return Model(graph, params); }
};

PyModel make_tcnn(int window_len, int channels, int classes, int fc_units,
                  double dropout_p, int conv_filters, std::uint64_t seed) {
  PyModel m;
  m.graph = build_tcnn(window_len, channels, classes, fc_units, dropout_p,
                       conv_filters);
  Rng rng(seed, rngstream::kInit);
  m.params = init_params(m.graph, rng);
  return m;
}

PyModel make_tcnn_imu(int window_len, const std::vector<std::string>& channels,
                      const std::vector<std::pair<std::string, std::vector<std::string>>>& limbs,
                      int classes, int branch_units, int fusion_units,
                      double dropout_p, int conv_filters, std::uint64_t seed) {
  PyModel m;
  m.graph = build_tcnn_imu(window_len, channels, limbs, classes, branch_units,
                           fusion_units, dropout_p, conv_filters);
  Rng rng(seed, rngstream::kInit);
  m.params = init_params(m.graph, rng);
  return m;
}

TrainConfig config_from_kwargs(double learning_rate, double momentum,
                               double weight_decay, double rms_decay,
                               double rms_epsilon, int batch_size, int epochs,
                               double noise_sigma, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.learning_rate = learning_rate;
  cfg.momentum = momentum;
  cfg.weight_decay = weight_decay;
  cfg.rms_decay = rms_decay;
  cfg.rms_epsilon = rms_epsilon;
  cfg.batch_size = batch_size;
  cfg.epochs = epochs;
  cfg.noise_sigma = noise_sigma;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "pose-to-inertial transfer learning toolkit (C++ core)";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def(
      "quintic_eval",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> values,
         double rate_hz, py::array_t<double, py::array::c_style | py::array::forcecast> times,
         int order, int support) {
        ChannelSeries s{to_vector(values), rate_hz, SignalUnit::position};
        return from_vector(
            eval_piecewise_quintic(s, to_vector(times), {5, support, order}));
      },
      py::arg("values"), py::arg("rate_hz"), py::arg("times"),
      py::arg("order") = 0, py::arg("support") = 6,
      "Local quintic interpolation (order 0) or its 2nd derivative (order 2)");

  m.def(
      "resample",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> values,
         double rate_hz, double factor) {
        ChannelSeries s{to_vector(values), rate_hz, SignalUnit::position};
        const auto out = resample(s, factor);
        return py::make_tuple(from_vector(out.values), out.rate_hz);
      },
      py::arg("values"), py::arg("rate_hz"), py::arg("factor"),
      "Quintic resampling; returns (values, new_rate_hz)");

  m.def(
      "synthesize_obd",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> values,
         double rate_hz, double target_rate_hz) {
        ChannelSeries s{to_vector(values), rate_hz, SignalUnit::position};
        return from_vector(synthesize_obd(s, target_rate_hz).values);
      },
      py::arg("values"), py::arg("rate_hz"), py::arg("target_rate_hz"),
      "Synthetic on-body acceleration from a position channel");

  m.def(
      "zscore",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> matrix) {
        const auto result = zscore_channels(to_matrix(matrix));
        std::vector<double> means, stds;
        for (const auto& s : result.stats) {
          means.push_back(s.mean);
          stds.push_back(s.stddev);
        }
        return py::make_tuple(from_matrix(result.matrix), from_vector(means),
                              from_vector(stds));
      },
      py::arg("matrix"),
      "Per-channel z-score of a [channels, time] matrix; returns "
      "(normalized, means, stds)");

  m.def(
      "anchor_normalize",
      [](const std::vector<std::string>& names,
         py::array_t<double, py::array::c_style | py::array::forcecast> matrix,
         const std::string& anchor_joint) {
        return from_matrix(
            anchor_normalize(names, to_matrix(matrix), {anchor_joint}));
      },
      py::arg("channel_names"), py::arg("matrix"), py::arg("anchor_joint"));

  m.def("window_count", &window_count, py::arg("length"), py::arg("window_len"),
        py::arg("stride"));

  m.def(
      "segment",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> series,
         int window_len, int stride) {
        if (series.ndim() != 2) throw ConfigError("expected a [T, D] array");
        const py::ssize_t t = series.shape(0), d = series.shape(1);
        const auto n = window_count(t, window_len, stride);
        py::array_t<double> out(
            {static_cast<py::ssize_t>(n), static_cast<py::ssize_t>(window_len), d});
        for (py::ssize_t k = 0; k < n; ++k)
          std::memcpy(out.mutable_data() + k * window_len * d,
                      series.data() + k * stride * d,
                      static_cast<std::size_t>(window_len) * d * sizeof(double));
        return out;
      },
      py::arg("series"), py::arg("window_len"), py::arg("stride"),
      "Sliding windows over a [T, D] series -> [N, W, D]");

  m.def(
      "split_indices",
      [](int n_clips, std::uint64_t seed, std::array<double, 3> fractions,
         const std::optional<std::vector<std::string>>& subjects) {
        std::vector<ClipEntry> clips(static_cast<std::size_t>(n_clips));
        for (int i = 0; i < n_clips; ++i) {
          clips[static_cast<std::size_t>(i)].path = std::to_string(i);
          if (subjects)
            clips[static_cast<std::size_t>(i)].subject =
                subjects->at(static_cast<std::size_t>(i));
        }
        const auto split = split_clips(clips, fractions, seed);
        return py::make_tuple(split.train, split.val, split.test);
      },
      py::arg("n_clips"), py::arg("seed") = 42,
      py::arg("fractions") = std::array<double, 3>{0.70, 0.15, 0.15},
      py::arg("subjects") = std::nullopt,
      "Deterministic clip split; returns (train, val, test) index lists");

  m.def("stratified_sample_indices", &stratified_sample_indices,
        py::arg("labels"), py::arg("pct"), py::arg("seed") = 42);

  m.def(
      "confusion",
      [](const std::vector<int>& y_true, const std::vector<int>& y_pred, int k) {
        const auto cm = confusion(y_true, y_pred, k);
        py::array_t<std::int64_t> out({k, k});
        std::memcpy(out.mutable_data(), cm.counts.data(),
                    cm.counts.size() * sizeof(std::int64_t));
        return out;
      },
      py::arg("y_true"), py::arg("y_pred"), py::arg("k"));

  m.def(
      "weighted_f1",
      [](const std::vector<int>& y_true, const std::vector<int>& y_pred, int k) {
        return weighted_f1(confusion(y_true, y_pred, k));
      },
      py::arg("y_true"), py::arg("y_pred"), py::arg("k"));

  m.def(
      "metrics_report",
      [](const std::vector<int>& y_true, const std::vector<int>& y_pred, int k) {
        const auto report = compute_metrics(confusion(y_true, y_pred, k));
        py::dict out;
        out["wf1"] = report.wf1;
        out["accuracy"] = report.accuracy;
        out["n"] = report.n;
        py::list per_class;
        for (const auto& s : report.per_class) {
          py::dict c;
          c["precision"] = s.precision;
          c["recall"] = s.recall;
          c["f1"] = s.f1;
          c["support"] = s.support;
          per_class.append(c);
        }
        out["per_class"] = per_class;
        return out;
      },
      py::arg("y_true"), py::arg("y_pred"), py::arg("k"));

  m.def(
      "majority_vote",
      [](const std::vector<std::string>& clip_ids, const std::vector<int>& preds) {
        const auto vote = majority_vote(clip_ids, preds);
        return py::make_tuple(vote.clip_ids, vote.predictions);
      },
      py::arg("clip_ids"), py::arg("predictions"));

  m.def(
      "permutation_test",
      [](const std::vector<bool>& a, const std::vector<bool>& b, int n_perm,
         std::uint64_t seed) {
        std::vector<std::uint8_t> ca(a.begin(), a.end()), cb(b.begin(), b.end());
        const auto result = permutation_test(ca, cb, n_perm, seed);
        py::dict out;
        out["observed_diff"] = result.observed_diff;
        out["p_value"] = result.p_value;
        out["n_permutations"] = result.n_permutations;
        out["seed"] = result.seed;
        return out;
      },
      py::arg("correct_a"), py::arg("correct_b"), py::arg("n_permutations") = 9999,
      py::arg("seed") = 42);

  m.def(
      "aggregate_runs",
      [](const std::vector<double>& values) {
        const auto stats = aggregate_runs(values);
        return py::make_tuple(stats.mean, stats.stddev);
      },
      py::arg("values"), "Mean and population std of per-run scores");

  m.def(
      "orthonormal_init",
      [](const std::vector<int>& shape, std::uint64_t seed) {
        Rng rng(seed, rngstream::kInit);
        const auto t = orthonormal_init<float>(shape, rng);
        py::array_t<float> out(shape);
        std::memcpy(out.mutable_data(), t.data.data(),
                    t.data.size() * sizeof(float));
        return out;
      },
      py::arg("shape"), py::arg("seed") = 42);

  py::class_<PyModel>(m, "Model")
      .def_static("tcnn", &make_tcnn, py::arg("window_len"), py::arg("channels"),
                  py::arg("classes"), py::arg("fc_units") = 256,
                  py::arg("dropout_p") = 0.5, py::arg("conv_filters") = 64,
                  py::arg("seed") = 42)
      .def_static("tcnn_imu", &make_tcnn_imu, py::arg("window_len"),
                  py::arg("channels"), py::arg("limb_map"), py::arg("classes"),
                  py::arg("branch_units") = 256, py::arg("fusion_units") = 256,
                  py::arg("dropout_p") = 0.5, py::arg("conv_filters") = 64,
                  py::arg("seed") = 42)
      .def("describe", [](const PyModel& m) { return describe(m.graph); })
      .def("param_keys",
           [](const PyModel& m) {
             std::vector<std::string> keys;
             for (const auto& [key, t] : m.params.items) keys.push_back(key);
             return keys;
           })
      .def("param",
           [](const PyModel& m, const std::string& key) {
             const Tensor& t = m.params.at(key);
             py::array_t<float> out(t.shape);
             std::memcpy(out.mutable_data(), t.data.data(),
                         t.data.size() * sizeof(float));
             return out;
           },
           py::arg("key"))
      .def(
          "train",
          [](PyModel& self,
             py::array_t<float, py::array::c_style | py::array::forcecast> x,
             const std::vector<int>& y,
             py::array_t<float, py::array::c_style | py::array::forcecast> x_val,
             const std::vector<int>& y_val, double learning_rate, double momentum,
             double weight_decay, double rms_decay, double rms_epsilon,
             int batch_size, int epochs, double noise_sigma, std::uint64_t seed) {
            const auto cfg = config_from_kwargs(
                learning_rate, momentum, weight_decay, rms_decay, rms_epsilon,
                batch_size, epochs, noise_sigma, seed);
            auto result =
                train(self.graph, self.params, windows_from_numpy(x, y),
                      windows_from_numpy(x_val, y_val), cfg);
            self.params = std::move(result.best_params);
            py::list history;
            for (const auto& epoch : result.history) {
              py::dict h;
              h["epoch"] = epoch.epoch;
              h["train_loss"] = epoch.train_loss;
              h["val_wf1"] = epoch.val_wf1;
              history.append(h);
            }
            return history;
          },
          py::arg("x"), py::arg("y"), py::arg("x_val"), py::arg("y_val"),
          py::arg("learning_rate") = 1e-3, py::arg("momentum") = 0.9,
          py::arg("weight_decay") = 5e-4, py::arg("rms_decay") = 0.95,
          py::arg("rms_epsilon") = 1e-8, py::arg("batch_size") = 200,
          py::arg("epochs") = 10, py::arg("noise_sigma") = 0.01,
          py::arg("seed") = 42,
          "Train in place, keeping the best-validation epoch; returns history")
      .def(
          "predict",
          [](const PyModel& self,
             py::array_t<float, py::array::c_style | py::array::forcecast> x) {
            std::vector<int> dummy(static_cast<std::size_t>(x.shape(0)), 0);
            const auto windows = windows_from_numpy(x, dummy);
            const auto preds = predict_windows(self.model(), windows);
            const py::ssize_t n = static_cast<py::ssize_t>(preds.labels.size());
            const py::ssize_t k = static_cast<py::ssize_t>(self.graph.classes);
            py::array_t<float> probs({n, k});
            for (py::ssize_t i = 0; i < n; ++i)
              std::memcpy(probs.mutable_data() + i * k,
                          preds.probabilities[static_cast<std::size_t>(i)].data(),
                          static_cast<std::size_t>(k) * sizeof(float));
            return py::make_tuple(preds.labels, probs);
          },
          py::arg("x"), "Returns (labels, probabilities) in inference mode")
      .def(
          "save",
          [](const PyModel& self, const std::string& path,
             const std::string& dataset_tag) {
            CheckpointMeta meta;
            meta.dataset_tag = dataset_tag;
            save_checkpoint(self.graph, self.params, meta, path);
          },
          py::arg("path"), py::arg("dataset_tag") = "")
      .def_static("load", [](const std::string& path) {
        const Checkpoint ckpt = load_checkpoint(path);
        return PyModel{ckpt.graph, ckpt.params};
      });

  m.def(
      "transplant",
      [](const PyModel& source, const PyModel& target, int n_conv, bool freeze,
         std::uint64_t seed, const std::string& source_branch) {
        Checkpoint src;
        src.graph = source.graph;
        src.params = source.params;
        TransferPlan plan;
        plan.n_conv = n_conv;
        plan.freeze = freeze;
        plan.seed = seed;
        plan.source_branch = source_branch;
        Rng rng(seed, rngstream::kInit);
        auto result = transplant(src, target.graph, plan, rng);
        return PyModel{target.graph, std::move(result.params)};
      },
      py::arg("source"), py::arg("target"), py::arg("n_conv"),
      py::arg("freeze") = false, py::arg("seed") = 42,
      py::arg("source_branch") = "N",
      "Copy the first n_conv conv layers into a freshly initialized model");

  m.def(
      "gradient_check",
      [](const PyModel& model,
         py::array_t<float, py::array::c_style | py::array::forcecast> x,
         const std::vector<int>& y, double step, int samples_per_tensor) {
        const auto report = gradient_check(
            model.graph, model.params, windows_from_numpy(x, y), step,
            samples_per_tensor);
        py::dict out;
        out["max_rel_error"] = report.max_rel_error;
        out["worst_key"] = report.worst_key;
        return out;
      },
      py::arg("model"), py::arg("x"), py::arg("y"), py::arg("step") = 1e-3,
      py::arg("samples_per_tensor") = 64);
}
