#include "synthimu/transfer.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "synthimu/errors.hpp"

namespace synthimu {

using nlohmann::json;

namespace {

json graph_descriptor(const NetworkGraph& graph) {
  json doc;
  doc["arch"] = graph.arch;
  doc["window_len"] = graph.window_len;
  doc["channels"] = graph.channels;
  doc["classes"] = graph.classes;
  doc["conv_filters"] = graph.conv_filters;
  doc["fc_units"] = graph.fc_units;
  doc["branch_units"] = graph.branch_units;
  doc["fusion_units"] = graph.fusion_units;
  doc["dropout_p"] = graph.dropout_p;
  if (!graph.limb_channels.empty()) {
    json limbs = json::array();
    for (const auto& [limb, names] : graph.limb_channels)
      limbs.push_back({{"limb", limb}, {"channels", names}});
    doc["limb_channels"] = limbs;
  }
  return doc;
}

NetworkGraph graph_from_descriptor(const json& doc) {
  const std::string arch = doc.at("arch").get<std::string>();
  const int window_len = doc.at("window_len").get<int>();
  const auto channels = doc.at("channels").get<std::vector<std::string>>();
  const int classes = doc.at("classes").get<int>();
  const int conv_filters = doc.at("conv_filters").get<int>();
  const double dropout_p = doc.at("dropout_p").get<double>();
  if (arch == "tcnn")
    return build_tcnn(window_len, channels, classes,
                      doc.at("fc_units").get<int>(), dropout_p, conv_filters);
  if (arch == "tcnn-imu") {
    std::vector<std::pair<std::string, std::vector<std::string>>> limbs;
    for (const auto& entry : doc.at("limb_channels"))
      limbs.emplace_back(entry.at("limb").get<std::string>(),
                         entry.at("channels").get<std::vector<std::string>>());
    return build_tcnn_imu(window_len, channels, limbs, classes,
                          doc.at("branch_units").get<int>(),
                          doc.at("fusion_units").get<int>(), dropout_p,
                          conv_filters);
  }
  throw DataError("unknown architecture '" + arch + "' in checkpoint");
}

void write_f32_le(std::ostream& out, const std::vector<float>& values) {
  static_assert(sizeof(float) == 4);
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * 4));
  } else {
    for (float v : values) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      const char bytes[4] = {static_cast<char>(bits), static_cast<char>(bits >> 8),
                             static_cast<char>(bits >> 16),
                             static_cast<char>(bits >> 24)};
      out.write(bytes, 4);
    }
  }
}

std::vector<float> read_f32_le(std::istream& in, std::size_t count) {
  std::vector<float> values(count);
  if constexpr (std::endian::native == std::endian::little) {
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(count * 4));
    if (static_cast<std::size_t>(in.gcount()) != count * 4)
      throw DataError("truncated blob");
  } else {
    for (auto& v : values) {
      unsigned char bytes[4];
      in.read(reinterpret_cast<char*>(bytes), 4);
      if (in.gcount() != 4) throw DataError("truncated blob");
      const std::uint32_t bits = static_cast<std::uint32_t>(bytes[0]) |
                                 (static_cast<std::uint32_t>(bytes[1]) << 8) |
                                 (static_cast<std::uint32_t>(bytes[2]) << 16) |
                                 (static_cast<std::uint32_t>(bytes[3]) << 24);
      std::memcpy(&v, &bits, 4);
    }
  }
  return values;
}

}  // namespace

void save_checkpoint(const NetworkGraph& graph, const ParamSet& params,
                     const CheckpointMeta& meta, const std::string& path) {
  json header;
  header["format"] = "synthimu.checkpoint";
  header["version"] = 1;
  header["graph"] = graph_descriptor(graph);
  header["meta"] = {{"dataset_tag", meta.dataset_tag},
                    {"seed", meta.seed},
                    {"epochs", meta.epochs},
                    {"chosen_lr", meta.chosen_lr},
                    {"stats_ref", meta.stats_ref}};

  json directory = json::array();
  std::int64_t offset = 0;
  for (const auto& [key, tensor] : params.items) {
    directory.push_back(
        {{"key", key}, {"shape", tensor.shape}, {"offset", offset}});
    offset += tensor.size();
  }
  header["tensors"] = directory;
  header["blob_floats"] = offset;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint '" + path + "'");
  out << header.dump() << "\n";
  for (const auto& [key, tensor] : params.items) write_f32_le(out, tensor.data);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw DataError("corrupt header: empty file");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw DataError(std::string("corrupt header: ") + e.what());
  }
  if (header.value("format", "") != "synthimu.checkpoint")
    throw DataError("corrupt header: not a checkpoint file");
  if (header.value("version", -1) != 1)
    throw DataError("unsupported checkpoint version " +
                    std::to_string(header.value("version", -1)));

  Checkpoint ckpt;
  try {
    ckpt.graph = graph_from_descriptor(header.at("graph"));
    const auto& meta = header.at("meta");
    ckpt.meta.dataset_tag = meta.at("dataset_tag").get<std::string>();
    ckpt.meta.seed = meta.at("seed").get<std::uint64_t>();
    ckpt.meta.epochs = meta.at("epochs").get<int>();
    ckpt.meta.chosen_lr = meta.at("chosen_lr").get<double>();
    ckpt.meta.stats_ref = meta.at("stats_ref").get<std::string>();
  } catch (const json::exception& e) {
    throw DataError(std::string("corrupt header: ") + e.what());
  }

  const auto expected = param_shapes(ckpt.graph);
  const auto& directory = header.at("tensors");
  if (directory.size() != expected.size())
    throw DataError("tensor directory size does not match the graph");

  std::int64_t offset = 0;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& entry = directory[i];
    const std::string key = entry.at("key").get<std::string>();
    const auto shape = entry.at("shape").get<std::vector<int>>();
    if (key != expected[i].first)
      throw DataError("unexpected tensor key '" + key + "' (expected '" +
                      expected[i].first + "')");
    if (shape != expected[i].second)
      throw DataError("shape mismatch for tensor '" + key + "'");
    if (entry.at("offset").get<std::int64_t>() != offset)
      throw DataError("bad blob offset for tensor '" + key + "'");
    offset += Tensor::size_of(shape);
  }
  if (header.at("blob_floats").get<std::int64_t>() != offset)
    throw DataError("blob length in header does not match tensor directory");

  for (const auto& [key, shape] : expected) {
    Tensor tensor;
    tensor.shape = shape;
    tensor.data = read_f32_le(in, static_cast<std::size_t>(Tensor::size_of(shape)));
    ckpt.params.add(key, std::move(tensor));
  }
  char extra;
  if (in.read(&extra, 1) && in.gcount() == 1)
    throw DataError("trailing bytes after blob");
  return ckpt;
}

TransplantResult transplant(const Checkpoint& source,
                            const NetworkGraph& target_graph,
                            const TransferPlan& plan, Rng& rng) {
  if (plan.n_conv < 0 || plan.n_conv > 4)
    throw ConfigError("n_conv must be in 0..4");
  if (target_graph.branches.size() != 1)
    throw ConfigError("transplant target must be a single-stack network");

  const std::string source_branch =
      source.graph.arch == "tcnn" ? "" : plan.source_branch;
  const std::string target_branch = target_graph.branches.front().name;

  TransplantResult result;
  result.params = init_params(target_graph, rng);

  for (int i = 1; i <= plan.n_conv; ++i) {
    const auto src_keys = conv_param_keys(source.graph, source_branch, i);
    const auto dst_keys = conv_param_keys(target_graph, target_branch, i);
    for (std::size_t k = 0; k < src_keys.size(); ++k) {
      const Tensor& src = source.params.at(src_keys[k]);
      Tensor& dst = result.params.at(dst_keys[k]);
      if (src.shape != dst.shape) {
        std::ostringstream msg;
        msg << "transplant fan-in mismatch on '" << dst_keys[k] << "': source [";
        for (int d : src.shape) msg << d << " ";
        msg << "] vs target [";
        for (int d : dst.shape) msg << d << " ";
        msg << "]";
        throw ConfigError(msg.str());
      }
      dst.data = src.data;  // verbatim copy
      if (plan.freeze) result.frozen.insert(dst_keys[k]);
    }
  }
  return result;
}

FineTuneReport fine_tune(const TransplantResult& transplanted,
                         const NetworkGraph& graph,
                         const std::vector<Window>& train_windows,
                         const std::vector<Window>& val_windows,
                         const std::vector<Window>& test_windows,
                         const TransferPlan& plan, const TrainConfig& cfg) {
  FineTuneReport report;
  report.plan = plan;

  if (cfg.lr_grid.size() > 1) {
    report.lr_grid = cfg.lr_grid;
    std::vector<TrainResult> results;
    bool any_finite = false;
    for (double lr : cfg.lr_grid) {
      TrainConfig local = cfg;
      local.learning_rate = lr;
      try {
        TrainResult r = train(graph, transplanted.params, train_windows,
                              val_windows, local, transplanted.frozen);
        report.lr_scores.push_back(r.best_val_wf1);
        results.push_back(std::move(r));
        any_finite = true;
      } catch (const NumericError&) {
        report.lr_scores.push_back(-1.0);
        results.emplace_back();
      }
    }
    if (!any_finite)
      throw NumericError("every learning rate in the grid diverged");
    const std::size_t best = pick_best_lr(cfg.lr_grid, report.lr_scores);
    report.chosen_lr = cfg.lr_grid[best];
    report.result = std::move(results[best]);
  } else {
    TrainConfig local = cfg;
    if (cfg.lr_grid.size() == 1) local.learning_rate = cfg.lr_grid.front();
    report.chosen_lr = local.learning_rate;
    report.result = train(graph, transplanted.params, train_windows, val_windows,
                          local, transplanted.frozen);
  }

  report.val_wf1 = report.result.best_val_wf1;
  Model best(graph, report.result.best_params);
  if (!test_windows.empty()) {
    const auto preds = predict_windows(best, test_windows, cfg.batch_size);
    const auto metrics =
        compute_metrics(confusion(preds.true_labels, preds.labels, graph.classes));
    report.test_wf1 = metrics.wf1;
    report.test_accuracy = metrics.accuracy;
  }
  return report;
}

namespace {

MatrixCell run_cell(const std::string& id, int n_conv, double pct, bool scratch,
                    const Checkpoint& source, const NetworkGraph& graph,
                    const WindowedDataset& target, const TrainConfig& cfg,
                    const TransferPlan& base_plan, int runs) {
  MatrixCell cell;
  cell.id = id;
  cell.n_conv = n_conv;
  cell.pct = pct;
  cell.scratch = scratch;

  const auto train_subset =
      pct >= 100.0 ? target.train
                   : subsample_fraction(target.train, pct, base_plan.seed);

  for (int run = 0; run < runs; ++run) {
    TrainConfig run_cfg = cfg;
    run_cfg.seed = cfg.seed + static_cast<std::uint64_t>(run);
    Rng init_rng(run_cfg.seed, rngstream::kInit);

    TransplantResult start;
    if (scratch) {
      start.params = init_params(graph, init_rng);
    } else {
      TransferPlan plan = base_plan;
      plan.n_conv = n_conv;
      plan.target_fraction_pct = pct;
      start = transplant(source, graph, plan, init_rng);
    }

    TransferPlan plan = base_plan;
    plan.n_conv = scratch ? 0 : n_conv;
    plan.target_fraction_pct = pct;
    const auto report = fine_tune(start, graph, train_subset, target.val,
                                  target.test, plan, run_cfg);
    cell.wf1_runs.push_back(report.test_wf1);
    cell.accuracy_runs.push_back(report.test_accuracy);
  }
  cell.wf1_stats = aggregate_runs(cell.wf1_runs);
  cell.accuracy_stats = aggregate_runs(cell.accuracy_runs);
  return cell;
}

}  // namespace

TransferMatrix run_transfer_matrix(const Checkpoint& source,
                                   const NetworkGraph& target_graph,
                                   const WindowedDataset& target,
                                   const TrainConfig& cfg,
                                   const TransferPlan& base_plan, int runs) {
  if (runs < 1) throw ConfigError("transfer matrix needs at least one run");

  TransferMatrix matrix;
  matrix.runs = runs;
  matrix.cells.push_back(run_cell("baseline", 0, 100.0, true, source,
                                  target_graph, target, cfg, base_plan, runs));

  for (int n_conv = 1; n_conv <= 4; ++n_conv)
    matrix.cells.push_back(run_cell("nconv" + std::to_string(n_conv), n_conv,
                                    100.0, false, source, target_graph, target,
                                    cfg, base_plan, runs));

  // best n_conv by mean wF1; ties keep the smaller n_conv
  int best_n = 1;
  double best_mu = -1.0;
  for (const auto& cell : matrix.cells) {
    if (cell.scratch) continue;
    if (cell.wf1_stats.mean > best_mu) {
      best_mu = cell.wf1_stats.mean;
      best_n = cell.n_conv;
    }
  }
  matrix.best_n_conv = best_n;

  for (double pct : {10.0, 30.0, 50.0, 75.0})
    matrix.cells.push_back(
        run_cell("pct" + std::to_string(static_cast<int>(pct)), best_n, pct,
                 false, source, target_graph, target, cfg, base_plan, runs));
  return matrix;
}

}  // namespace synthimu
