#include "synthimu/commands.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "synthimu/errors.hpp"

namespace synthimu {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json parse_json_file(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw ConfigError(std::string("cannot open ") + what + " '" + path + "'");
  try {
    json doc;
    in >> doc;
    return doc;
  } catch (const json::exception& e) {
    throw ConfigError(std::string(what) + " '" + path + "': " + e.what());
  }
}

// --set a.b.c=value ; the value is parsed as JSON when possible, else kept
// as a string.
void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);

  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (part.empty()) throw ConfigError("bad --set key '" + key + "'");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

ExperimentConfig config_from_json(const json& doc) {
  ExperimentConfig cfg;
  try {
    cfg.manifest_path = doc.value("manifest", "");
    const std::string mode = doc.value("mode", "synthetic");
    if (mode == "pose")
      cfg.mode = PipelineMode::pose;
    else if (mode == "synthetic")
      cfg.mode = PipelineMode::synthetic;
    else
      throw ConfigError("mode must be 'pose' or 'synthetic', got '" + mode + "'");
    cfg.target_rate_hz = doc.value("target_rate_hz", 0.0);

    if (doc.contains("window")) {
      const auto& w = doc.at("window");
      cfg.window.duration_sec = w.value("duration_sec", 1.0);
      cfg.window.window_len = w.value("window_len", 0);
      cfg.window.stride = w.value("stride", 1);
    }
    if (doc.contains("anchor") && !doc.at("anchor").is_null())
      cfg.anchor = doc.at("anchor").get<std::string>();

    if (doc.contains("arch")) {
      const auto& a = doc.at("arch");
      cfg.arch = a.value("type", "tcnn");
      if (cfg.arch != "tcnn" && cfg.arch != "tcnn-imu")
        throw ConfigError("arch.type must be 'tcnn' or 'tcnn-imu'");
      cfg.fc_units = a.value("fc_units", 256);
      cfg.branch_units = a.value("branch_units", 256);
      cfg.fusion_units = a.value("fusion_units", 256);
      cfg.conv_filters = a.value("conv_filters", 64);
    }

    if (doc.contains("train")) {
      const auto& t = doc.at("train");
      if (t.contains("learning_rates"))
        cfg.train.lr_grid = t.at("learning_rates").get<std::vector<double>>();
      cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
      if (cfg.train.lr_grid.size() == 1)
        cfg.train.learning_rate = cfg.train.lr_grid.front();
      cfg.train.momentum = t.value("momentum", cfg.train.momentum);
      cfg.train.weight_decay = t.value("weight_decay", cfg.train.weight_decay);
      cfg.train.rms_decay = t.value("rms_decay", cfg.train.rms_decay);
      cfg.train.rms_epsilon = t.value("rms_epsilon", cfg.train.rms_epsilon);
      cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
      cfg.train.epochs = t.value("epochs", cfg.train.epochs);
      cfg.train.noise_sigma = t.value("noise_sigma", cfg.train.noise_sigma);
      cfg.train.dropout_p = t.value("dropout_p", cfg.train.dropout_p);
      cfg.train.seed = t.value("seed", cfg.train.seed);
    }

    if (doc.contains("transfer")) {
      const auto& t = doc.at("transfer");
      cfg.transfer.n_conv = t.value("n_conv", cfg.transfer.n_conv);
      cfg.transfer.freeze = t.value("freeze", cfg.transfer.freeze);
      cfg.transfer.target_fraction_pct =
          t.value("target_fraction_pct", cfg.transfer.target_fraction_pct);
      cfg.transfer.seed = t.value("seed", cfg.transfer.seed);
      cfg.transfer.source_branch =
          t.value("source_branch", cfg.transfer.source_branch);
    }

    if (doc.contains("split")) {
      const auto& s = doc.at("split");
      cfg.split_seed = s.value("seed", cfg.split_seed);
      if (s.contains("fractions")) {
        const auto f = s.at("fractions").get<std::vector<double>>();
        if (f.size() != 3) throw ConfigError("split.fractions must have 3 entries");
        cfg.fractions = {f[0], f[1], f[2]};
      }
    }

    cfg.runs = doc.value("runs", cfg.runs);
    cfg.out_dir = doc.value("out", cfg.out_dir);
    cfg.dataset_tag = doc.value("dataset_tag", "");

    if (doc.contains("gradcheck")) {
      const auto& g = doc.at("gradcheck");
      cfg.gradcheck_tolerance = g.value("tolerance", cfg.gradcheck_tolerance);
      cfg.gradcheck_batch = g.value("batch_windows", cfg.gradcheck_batch);
      cfg.gradcheck_samples = g.value("samples_per_tensor", cfg.gradcheck_samples);
    }
    if (doc.contains("eval")) cfg.eval_split = doc.at("eval").value("split", "test");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  if (cfg.dataset_tag.empty() && !cfg.manifest_path.empty())
    cfg.dataset_tag = fs::path(cfg.manifest_path).parent_path().filename().string();
  return cfg;
}

std::string out_path(const ExperimentConfig& config, const std::string& name) {
  fs::create_directories(config.out_dir);
  return (fs::path(config.out_dir) / name).string();
}

void write_f32_le(std::ostream& out, const std::vector<float>& values) {
  static_assert(std::endian::native == std::endian::little,
                "shard writer assumes a little-endian host");
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * 4));
}

const std::vector<Window>& pick_split(const WindowedDataset& dataset,
                                      const std::string& split) {
  if (split == "train") return dataset.train;
  if (split == "val") return dataset.val;
  if (split == "test") return dataset.test;
  throw ConfigError("eval split must be train, val or test, got '" + split + "'");
}

void write_history(const std::vector<EpochStats>& history,
                   const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write history '" + path + "'");
  for (const auto& epoch : history) {
    json line = {{"epoch", epoch.epoch},
                 {"train_loss", epoch.train_loss},
                 {"val_wf1", epoch.val_wf1}};
    out << line.dump() << "\n";
  }
}

json metrics_to_json(const MetricsReport& metrics,
                     const std::vector<std::string>& class_names) {
  json per_class = json::array();
  for (std::size_t c = 0; c < metrics.per_class.size(); ++c) {
    const auto& s = metrics.per_class[c];
    per_class.push_back({{"class", class_names[c]},
                         {"precision", s.precision},
                         {"recall", s.recall},
                         {"f1", s.f1},
                         {"support", s.support}});
  }
  return {{"wf1", metrics.wf1},
          {"accuracy", metrics.accuracy},
          {"n", metrics.n},
          {"per_class", per_class}};
}

void write_predictions(const Predictions& preds, const std::string& granularity,
                       const std::string& split, const std::string& path) {
  json items = json::array();
  for (std::size_t i = 0; i < preds.labels.size(); ++i)
    items.push_back({{"clip_id", preds.clip_ids[i]},
                     {"y_true", preds.true_labels[i]},
                     {"y_pred", preds.labels[i]}});
  json doc = {{"split", split}, {"granularity", granularity}, {"items", items}};
  std::ofstream out(path);
  if (!out) throw DataError("cannot write predictions '" + path + "'");
  out << doc.dump(2) << "\n";
}

}  // namespace

ExperimentConfig load_config(const std::string& path,
                             const std::vector<std::string>& overrides,
                             std::optional<std::uint64_t> seed_override,
                             std::optional<std::string> out_override) {
  json doc = parse_json_file(path, "config");
  if (seed_override) {
    // --seed is the base experiment seed: training, transfer subsampling and
    // the split shuffle all derive from it (distinct streams).
    doc["train"]["seed"] = *seed_override;
    doc["transfer"]["seed"] = *seed_override;
    doc["split"]["seed"] = *seed_override;
  }
  for (const auto& assignment : overrides) apply_override(doc, assignment);
  ExperimentConfig cfg = config_from_json(doc);
  if (out_override) cfg.out_dir = *out_override;

  // manifest paths are relative to the config file
  if (!cfg.manifest_path.empty() && !fs::path(cfg.manifest_path).is_absolute()) {
    const fs::path base = fs::path(path).parent_path();
    if (!base.empty()) cfg.manifest_path = (base / cfg.manifest_path).string();
  }
  return cfg;
}

void write_windows_shard(const std::vector<Window>& windows,
                         const std::vector<std::string>& channels,
                         const std::vector<std::string>& classes, double rate_hz,
                         const std::string& stats_ref, const std::string& path) {
  const int w = windows.empty() ? 0 : windows.front().window_len;
  const int d = windows.empty() ? static_cast<int>(channels.size())
                                : windows.front().channel_count;

  json labels = json::array();
  json clip_ids = json::array();
  for (const auto& win : windows) {
    labels.push_back(win.label);
    clip_ids.push_back(win.clip_id);
  }
  json header = {{"format", "synthimu.windows"},
                 {"version", 1},
                 {"shape", {static_cast<int>(windows.size()), w, d}},
                 {"channels", channels},
                 {"classes", classes},
                 {"rate_hz", rate_hz},
                 {"labels", labels},
                 {"clip_ids", clip_ids},
                 {"stats_ref", stats_ref}};

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write shard '" + path + "'");
  out << header.dump() << "\n";
  std::vector<float> payload;
  payload.reserve(windows.size() * static_cast<std::size_t>(w) * d);
  for (const auto& win : windows)
    for (double v : win.data) payload.push_back(static_cast<float>(v));
  write_f32_le(out, payload);
}

WindowShard read_windows_shard(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open shard '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("shard '" + path + "': empty file");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw DataError("shard '" + path + "': corrupt header: " + e.what());
  }
  if (header.value("format", "") != "synthimu.windows" ||
      header.value("version", -1) != 1)
    throw DataError("shard '" + path + "': not a windows shard");

  WindowShard shard;
  shard.channels = header.at("channels").get<std::vector<std::string>>();
  shard.classes = header.at("classes").get<std::vector<std::string>>();
  shard.rate_hz = header.at("rate_hz").get<double>();
  shard.stats_ref = header.at("stats_ref").get<std::string>();
  const auto shape = header.at("shape").get<std::vector<int>>();
  const auto labels = header.at("labels").get<std::vector<int>>();
  const auto clip_ids = header.at("clip_ids").get<std::vector<std::string>>();
  if (shape.size() != 3) throw DataError("shard '" + path + "': bad shape");
  const int n = shape[0], w = shape[1], d = shape[2];
  if (static_cast<int>(labels.size()) != n ||
      static_cast<int>(clip_ids.size()) != n)
    throw DataError("shard '" + path + "': label/clip counts do not match shape");

  const std::size_t per = static_cast<std::size_t>(w) * d;
  std::vector<float> payload(static_cast<std::size_t>(n) * per);
  in.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(payload.size() * 4));
  if (static_cast<std::size_t>(in.gcount()) != payload.size() * 4)
    throw DataError("shard '" + path + "': truncated payload");

  for (int i = 0; i < n; ++i) {
    Window win;
    win.window_len = w;
    win.channel_count = d;
    win.label = labels[static_cast<std::size_t>(i)];
    win.clip_id = clip_ids[static_cast<std::size_t>(i)];
    win.data.assign(payload.begin() + static_cast<std::ptrdiff_t>(i * per),
                    payload.begin() + static_cast<std::ptrdiff_t>((i + 1) * per));
    shard.windows.push_back(std::move(win));
  }
  return shard;
}

WindowedDataset run_pipeline(const ExperimentConfig& config) {
  if (config.manifest_path.empty())
    throw ConfigError("config is missing a manifest path");
  const DatasetManifest manifest = load_manifest(config.manifest_path);
  const double target_rate =
      config.target_rate_hz > 0.0 ? config.target_rate_hz : manifest.rate_hz;
  std::optional<AnchorSpec> anchor;
  if (config.anchor) anchor = AnchorSpec{*config.anchor};
  return build_windows_pipeline(manifest, target_rate, config.mode, config.window,
                                anchor, config.split_seed, config.fractions);
}

NetworkGraph graph_from_config(const ExperimentConfig& config,
                               const WindowedDataset& dataset) {
  const int classes = static_cast<int>(dataset.class_names.size());
  if (config.arch == "tcnn")
    return build_tcnn(dataset.window_len, dataset.channel_names, classes,
                      config.fc_units, config.train.dropout_p,
                      config.conv_filters);
  if (!dataset.limb_map || dataset.limb_map->empty())
    throw ConfigError(
        "tcnn-imu requires a limb map in the manifest; this dataset has none");
  std::vector<std::pair<std::string, std::vector<std::string>>> limbs;
  for (std::size_t i = 0; i < kLimbNames.size(); ++i)
    limbs.emplace_back(kLimbNames[i], dataset.limb_map->channels[i]);
  return build_tcnn_imu(dataset.window_len, dataset.channel_names, limbs, classes,
                        config.branch_units, config.fusion_units,
                        config.train.dropout_p, config.conv_filters);
}

void cmd_synth(const ExperimentConfig& config) {
  const WindowedDataset dataset = run_pipeline(config);
  save_norm_stats(dataset.stats, out_path(config, "norm_stats.json"));
  const char* names[] = {"windows_train.bin", "windows_val.bin",
                         "windows_test.bin"};
  const std::vector<Window>* splits[] = {&dataset.train, &dataset.val,
                                         &dataset.test};
  for (int i = 0; i < 3; ++i)
    write_windows_shard(*splits[i], dataset.channel_names, dataset.class_names,
                        dataset.rate_hz, "norm_stats.json",
                        out_path(config, names[i]));
  std::cout << "windows: train=" << dataset.train.size()
            << " val=" << dataset.val.size() << " test=" << dataset.test.size()
            << " W=" << dataset.window_len
            << " D=" << dataset.channel_names.size() << "\n";
}

void cmd_train(const ExperimentConfig& config) {
  const WindowedDataset dataset = run_pipeline(config);
  const NetworkGraph graph = graph_from_config(config, dataset);

  TrainResult result;
  double chosen_lr = config.train.learning_rate;
  if (config.train.lr_grid.size() > 1) {
    LrSelection selection =
        select_learning_rate(graph, dataset.train, dataset.val, config.train,
                             config.train.lr_grid);
    chosen_lr = selection.chosen_lr;
    result = std::move(selection.best);
  } else {
    Rng init_rng(config.train.seed, rngstream::kInit);
    result = train(graph, init_params(graph, init_rng), dataset.train,
                   dataset.val, config.train);
  }

  save_norm_stats(dataset.stats, out_path(config, "norm_stats.json"));
  CheckpointMeta meta;
  meta.dataset_tag = config.dataset_tag;
  meta.seed = config.train.seed;
  meta.epochs = config.train.epochs;
  meta.chosen_lr = chosen_lr;
  meta.stats_ref = "norm_stats.json";
  save_checkpoint(graph, result.best_params, meta, out_path(config, "model.ckpt"));
  write_history(result.history, out_path(config, "history.jsonl"));

  Model best(graph, result.best_params);
  const auto preds = predict_windows(best, dataset.test, config.train.batch_size);
  const auto metrics =
      compute_metrics(confusion(preds.true_labels, preds.labels, graph.classes));
  json doc = metrics_to_json(metrics, dataset.class_names);
  doc["chosen_lr"] = chosen_lr;
  doc["best_epoch"] = result.best_epoch;
  doc["val_wf1"] = result.best_val_wf1;
  std::ofstream out(out_path(config, "metrics.json"));
  out << doc.dump(2) << "\n";
  write_predictions(preds, "window", "test", out_path(config, "predictions.json"));

  std::cout << "trained " << graph.arch << " for " << config.train.epochs
            << " epochs; val wF1=" << result.best_val_wf1
            << " test wF1=" << metrics.wf1 << "\n";
}

void cmd_transfer(const ExperimentConfig& config, const std::string& source_ckpt) {
  const Checkpoint source = load_checkpoint(source_ckpt);
  const WindowedDataset dataset = run_pipeline(config);

  ExperimentConfig target_cfg = config;
  target_cfg.arch = "tcnn";  // transplants land in a single-stack network
  const NetworkGraph graph = graph_from_config(target_cfg, dataset);

  const TransferMatrix matrix = run_transfer_matrix(
      source, graph, dataset, config.train, config.transfer, config.runs);

  std::ofstream csv(out_path(config, "transfer_matrix.csv"));
  csv << "cell,n_conv,pct,run,wf1,accuracy\n";
  char buf[64];
  for (const auto& cell : matrix.cells)
    for (std::size_t run = 0; run < cell.wf1_runs.size(); ++run) {
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g", cell.wf1_runs[run],
                    cell.accuracy_runs[run]);
      csv << cell.id << "," << cell.n_conv << "," << cell.pct << "," << run
          << "," << buf << "\n";
    }
  csv.close();

  json cells = json::array();
  for (const auto& cell : matrix.cells)
    cells.push_back({{"id", cell.id},
                     {"n_conv", cell.n_conv},
                     {"pct", cell.pct},
                     {"scratch", cell.scratch},
                     {"wf1_mean", cell.wf1_stats.mean},
                     {"wf1_std", cell.wf1_stats.stddev},
                     {"accuracy_mean", cell.accuracy_stats.mean},
                     {"accuracy_std", cell.accuracy_stats.stddev},
                     {"wf1_runs", cell.wf1_runs},
                     {"accuracy_runs", cell.accuracy_runs}});
  json summary = {{"cells", cells},
                  {"best_n_conv", matrix.best_n_conv},
                  {"runs", matrix.runs},
                  {"source", source.meta.dataset_tag},
                  {"target", config.dataset_tag}};
  std::ofstream out(out_path(config, "transfer_summary.json"));
  out << summary.dump(2) << "\n";

  std::cout << "transfer matrix (" << matrix.cells.size() << " cells, "
            << matrix.runs << " runs each), best n_conv=" << matrix.best_n_conv
            << "\n";
  for (const auto& cell : matrix.cells) {
    std::snprintf(buf, sizeof(buf), "%6.2f +- %.2f", 100.0 * cell.wf1_stats.mean,
                  100.0 * cell.wf1_stats.stddev);
    std::cout << "  " << cell.id << "  wF1[%] " << buf << "\n";
  }
}

void cmd_eval(const ExperimentConfig& config, const std::string& ckpt_path,
              bool use_majority_vote) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const WindowedDataset dataset = run_pipeline(config);
  const auto& windows = pick_split(dataset, config.eval_split);
  if (windows.empty())
    throw DataError("split '" + config.eval_split + "' has no windows");
  if (ckpt.graph.window_len != dataset.window_len ||
      ckpt.graph.channels.size() != dataset.channel_names.size())
    throw DataError("checkpoint input shape does not match the dataset");

  Model model(ckpt.graph, ckpt.params);
  Predictions preds = predict_windows(model, windows, config.train.batch_size);

  MetricsReport metrics;
  std::string granularity = "window";
  if (use_majority_vote) {
    granularity = "clip";
    const VoteResult vote = majority_vote(preds.clip_ids, preds.labels);
    // clip-level truth: every window of a clip carries the clip label
    std::vector<int> clip_truth;
    for (const auto& id : vote.clip_ids)
      for (std::size_t i = 0; i < preds.clip_ids.size(); ++i)
        if (preds.clip_ids[i] == id) {
          clip_truth.push_back(preds.true_labels[i]);
          break;
        }
    metrics = compute_metrics(
        confusion(clip_truth, vote.predictions, ckpt.graph.classes));
    Predictions clip_preds;
    clip_preds.labels = vote.predictions;
    clip_preds.clip_ids = vote.clip_ids;
    clip_preds.true_labels = std::move(clip_truth);
    preds = std::move(clip_preds);
  } else {
    metrics = compute_metrics(
        confusion(preds.true_labels, preds.labels, ckpt.graph.classes));
  }

  json doc = metrics_to_json(metrics, dataset.class_names);
  doc["granularity"] = granularity;
  doc["split"] = config.eval_split;
  std::ofstream out(out_path(config, "eval_metrics.json"));
  out << doc.dump(2) << "\n";
  write_predictions(preds, granularity, config.eval_split,
                    out_path(config, "eval_predictions.json"));

  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", metrics.wf1);
  std::cout << granularity << "-level wF1=" << buf
            << " accuracy=" << metrics.accuracy << " n=" << metrics.n << "\n";
}

void cmd_permtest(const std::string& preds_a_path, const std::string& preds_b_path,
                  int n_permutations, std::uint64_t seed,
                  const std::string& out_path_arg) {
  const json a = parse_json_file(preds_a_path, "predictions");
  const json b = parse_json_file(preds_b_path, "predictions");
  const auto& items_a = a.at("items");
  const auto& items_b = b.at("items");
  if (items_a.size() != items_b.size())
    throw DataError("prediction files cover different numbers of windows");

  std::vector<std::uint8_t> correct_a, correct_b;
  for (std::size_t i = 0; i < items_a.size(); ++i) {
    const int t_a = items_a[i].at("y_true").get<int>();
    const int t_b = items_b[i].at("y_true").get<int>();
    if (t_a != t_b)
      throw DataError("prediction files disagree on y_true at index " +
                      std::to_string(i) + "; they must cover the same windows");
    correct_a.push_back(items_a[i].at("y_pred").get<int>() == t_a ? 1 : 0);
    correct_b.push_back(items_b[i].at("y_pred").get<int>() == t_b ? 1 : 0);
  }

  const PermTestResult result =
      permutation_test(correct_a, correct_b, n_permutations, seed);
  json doc = {{"observed_diff", result.observed_diff},
              {"p_value", result.p_value},
              {"n_permutations", result.n_permutations},
              {"seed", result.seed},
              {"n", correct_a.size()}};
  if (!out_path_arg.empty()) {
    std::ofstream out(out_path_arg);
    if (!out) throw DataError("cannot write permtest result '" + out_path_arg + "'");
    out << doc.dump(2) << "\n";
  }
  std::cout << doc.dump() << "\n";
}

void cmd_gradcheck(const ExperimentConfig& config) {
  struct Case {
    std::string name;
    NetworkGraph graph;
  };
  std::vector<Case> cases;
  cases.push_back({"tcnn(W=25,D=4,K=3,fc=64)",
                   build_tcnn(25, 4, 3, 64, config.train.dropout_p)});
  {
    const std::vector<std::string> channels = {"a.x", "a.y", "b.x",
                                               "b.y", "n.x", "n.y"};
    const std::vector<std::pair<std::string, std::vector<std::string>>> limbs = {
        {"LA", {"a.x", "a.y"}}, {"LL", {"b.x", "b.y"}}, {"N", {"n.x", "n.y"}}};
    cases.push_back({"tcnn-imu(3 branches, 2 channels each)",
                     build_tcnn_imu(25, channels, limbs, 3, 64, 64,
                                    config.train.dropout_p)});
  }

  bool failed = false;
  std::string report;
  for (const auto& c : cases) {
    Rng init_rng(config.train.seed, rngstream::kInit);
    const ParamSet params = init_params(c.graph, init_rng);

    Rng data_rng(config.train.seed, rngstream::kTrain);
    std::vector<Window> windows;
    for (int i = 0; i < config.gradcheck_batch; ++i) {
      Window win;
      win.window_len = c.graph.window_len;
      win.channel_count = static_cast<int>(c.graph.channels.size());
      win.label = static_cast<int>(data_rng.uniform_int(
          static_cast<std::uint64_t>(c.graph.classes)));
      win.clip_id = "gradcheck";
      win.data.resize(static_cast<std::size_t>(win.window_len) * win.channel_count);
      for (auto& v : win.data) v = data_rng.normal();
      windows.push_back(std::move(win));
    }

    const GradCheckReport check =
        gradient_check(c.graph, params, windows, 1e-3, config.gradcheck_samples);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3e", check.max_rel_error);
    std::cout << c.name << ": max rel error " << buf << " (worst tensor '"
              << check.worst_key << "')\n";
    if (check.max_rel_error > config.gradcheck_tolerance) {
      failed = true;
      report += c.name + " exceeded tolerance: " + buf + " > " +
                std::to_string(config.gradcheck_tolerance) + " at '" +
                check.worst_key + "'; ";
    }
  }
  if (failed) throw NumericError(report);
  std::cout << "gradient check passed at tolerance "
            << config.gradcheck_tolerance << "\n";
}

}  // namespace synthimu
