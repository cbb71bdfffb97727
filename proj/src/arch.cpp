#include "synthimu/arch.hpp"

#include <algorithm>
#include <sstream>

#include "synthimu/dataio.hpp"
#include "synthimu/errors.hpp"

namespace synthimu {

namespace {

void check_window_len(int window_len) {
  if (window_len < kMinWindowLen)
    throw ConfigError("window length " + std::to_string(window_len) +
                      " too short: four [5,1] convolutions need at least " +
                      std::to_string(kMinWindowLen) + " samples");
}

std::vector<LayerNode> conv_stack(int conv_filters) {
  std::vector<LayerNode> stack;
  for (int i = 1; i <= 4; ++i)
    stack.push_back({"conv" + std::to_string(i),
                     TemporalConvSpec{conv_filters, 5, true}});
  stack.push_back({"flatten", FlattenSpec{}});
  return stack;
}

int find_channel(const std::vector<std::string>& channels,
                 const std::string& name) {
  const auto it = std::find(channels.begin(), channels.end(), name);
  if (it == channels.end())
    throw DataError("limb channel '" + name + "' not present in the dataset");
  return static_cast<int>(it - channels.begin());
}

}  // namespace

std::vector<std::string> default_channel_names(int d) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) names.push_back("ch" + std::to_string(i));
  return names;
}

NetworkGraph build_tcnn(int window_len, const std::vector<std::string>& channels,
                        int num_classes, int fc_units, double dropout_p,
                        int conv_filters) {
  check_window_len(window_len);
  if (channels.empty()) throw ConfigError("tcnn needs at least one channel");
  if (num_classes < 1) throw ConfigError("tcnn needs at least one class");

  NetworkGraph graph;
  graph.arch = "tcnn";
  graph.window_len = window_len;
  graph.channels = channels;
  graph.classes = num_classes;
  graph.conv_filters = conv_filters;
  graph.fc_units = fc_units;
  graph.dropout_p = dropout_p;

  BranchNode trunk;
  trunk.name = "";
  trunk.channel_idx.resize(channels.size());
  for (std::size_t i = 0; i < channels.size(); ++i)
    trunk.channel_idx[i] = static_cast<int>(i);
  trunk.stack = conv_stack(conv_filters);
  graph.branches.push_back(std::move(trunk));

  graph.head = {{"fc1", DenseSpec{fc_units, true}},
                {"drop1", DropoutSpec{dropout_p}},
                {"fc2", DenseSpec{fc_units, true}},
                {"drop2", DropoutSpec{dropout_p}},
                {"out", SoftmaxOutputSpec{num_classes}}};
  return graph;
}

NetworkGraph build_tcnn(int window_len, int num_channels, int num_classes,
                        int fc_units, double dropout_p, int conv_filters) {
  return build_tcnn(window_len, default_channel_names(num_channels), num_classes,
                    fc_units, dropout_p, conv_filters);
}

NetworkGraph build_tcnn_imu(
    int window_len, const std::vector<std::string>& channels,
    const std::vector<std::pair<std::string, std::vector<std::string>>>& limb_channels,
    int num_classes, int branch_units, int fusion_units, double dropout_p,
    int conv_filters) {
  check_window_len(window_len);
  if (num_classes < 1) throw ConfigError("tcnn-imu needs at least one class");

  NetworkGraph graph;
  graph.arch = "tcnn-imu";
  graph.window_len = window_len;
  graph.channels = channels;
  graph.classes = num_classes;
  graph.conv_filters = conv_filters;
  graph.branch_units = branch_units;
  graph.fusion_units = fusion_units;
  graph.dropout_p = dropout_p;

  // canonical limb order, skipping empty limbs
  for (const char* limb : kLimbNames) {
    const auto it = std::find_if(
        limb_channels.begin(), limb_channels.end(),
        [&](const auto& entry) { return entry.first == limb; });
    if (it == limb_channels.end() || it->second.empty()) continue;

    BranchNode branch;
    branch.name = limb;
    for (const auto& name : it->second)
      branch.channel_idx.push_back(find_channel(channels, name));
    branch.stack = conv_stack(conv_filters);
    branch.stack.push_back({"fc", DenseSpec{branch_units, true}});
    graph.branches.push_back(std::move(branch));
    graph.limb_channels.emplace_back(limb, it->second);
  }
  if (graph.branches.empty())
    throw ConfigError("no branches: every limb has an empty channel list");

  graph.head = {{"fusion.fc", DenseSpec{fusion_units, true}},
                {"fusion.drop", DropoutSpec{dropout_p}},
                {"fusion.out", SoftmaxOutputSpec{num_classes}}};
  return graph;
}

namespace {

struct ShapeCursor {
  // shape of the tensor flowing through a stack: either [T, D, C] or [F]
  bool flat = false;
  int t = 0, d = 0, c = 0;
  std::int64_t features = 0;
};

void append_param_shapes(
    const std::string& prefix, const std::vector<LayerNode>& stack,
    ShapeCursor& cur, std::vector<std::pair<std::string, std::vector<int>>>& out) {
  for (const auto& node : stack) {
    if (const auto* conv = std::get_if<TemporalConvSpec>(&node.spec)) {
      if (cur.flat) throw ConfigError("conv after flatten in '" + prefix + node.name + "'");
      if (cur.t - conv->kernel_t + 1 < 1)
        throw ConfigError("layer '" + prefix + node.name +
                          "': time dimension too short");
      out.emplace_back(prefix + node.name + ".W",
                       std::vector<int>{conv->filters, cur.c, conv->kernel_t});
      out.emplace_back(prefix + node.name + ".b", std::vector<int>{conv->filters});
      cur.t = cur.t - conv->kernel_t + 1;
      cur.c = conv->filters;
    } else if (std::get_if<FlattenSpec>(&node.spec)) {
      cur.features = static_cast<std::int64_t>(cur.t) * cur.d * cur.c;
      cur.flat = true;
    } else if (const auto* dense = std::get_if<DenseSpec>(&node.spec)) {
      if (!cur.flat) throw ConfigError("dense before flatten in '" + prefix + node.name + "'");
      out.emplace_back(prefix + node.name + ".W",
                       std::vector<int>{dense->units, static_cast<int>(cur.features)});
      out.emplace_back(prefix + node.name + ".b", std::vector<int>{dense->units});
      cur.features = dense->units;
    } else if (std::get_if<DropoutSpec>(&node.spec)) {
      // no parameters
    } else if (const auto* head = std::get_if<SoftmaxOutputSpec>(&node.spec)) {
      out.emplace_back(prefix + node.name + ".W",
                       std::vector<int>{head->classes, static_cast<int>(cur.features)});
      out.emplace_back(prefix + node.name + ".b", std::vector<int>{head->classes});
      cur.features = head->classes;
    }
  }
}

}  // namespace

std::vector<std::pair<std::string, std::vector<int>>> param_shapes(
    const NetworkGraph& graph) {
  std::vector<std::pair<std::string, std::vector<int>>> shapes;
  std::int64_t concat = 0;
  for (const auto& branch : graph.branches) {
    ShapeCursor cur;
    cur.t = graph.window_len;
    cur.d = static_cast<int>(branch.channel_idx.size());
    cur.c = 1;
    append_param_shapes(branch.param_prefix(), branch.stack, cur, shapes);
    if (!cur.flat)
      throw ConfigError("branch '" + branch.name + "' must end flattened");
    concat += cur.features;
  }
  ShapeCursor cur;
  cur.flat = true;
  cur.features = concat;
  append_param_shapes("", graph.head, cur, shapes);
  return shapes;
}

ParamSet init_params(const NetworkGraph& graph, Rng& rng) {
  ParamSet params;
  for (const auto& [key, shape] : param_shapes(graph)) {
    if (key.size() >= 2 && key.compare(key.size() - 2, 2, ".W") == 0)
      params.add(key, orthonormal_init<float>(shape, rng));
    else
      params.add(key, Tensor(shape));
  }
  return params;
}

std::int64_t param_count(const NetworkGraph& graph) {
  std::int64_t count = 0;
  for (const auto& [key, shape] : param_shapes(graph))
    count += Tensor::size_of(shape);
  return count;
}

std::string describe(const NetworkGraph& graph) {
  std::ostringstream out;
  out << graph.arch << ": W=" << graph.window_len
      << " D=" << graph.channels.size() << " classes=" << graph.classes << "\n";

  const auto shapes = param_shapes(graph);
  auto tensor_size = [&](const std::string& key) -> std::int64_t {
    for (const auto& [k, shape] : shapes)
      if (k == key) return Tensor::size_of(shape);
    return 0;
  };

  std::int64_t total = 0;
  auto describe_stack = [&](const std::string& prefix,
                            const std::vector<LayerNode>& stack, ShapeCursor cur) {
    for (const auto& node : stack) {
      std::int64_t params_here = 0;
      std::string shape_text;
      if (const auto* conv = std::get_if<TemporalConvSpec>(&node.spec)) {
        cur.t = cur.t - conv->kernel_t + 1;
        cur.c = conv->filters;
        shape_text = "[" + std::to_string(cur.t) + ", " + std::to_string(cur.d) +
                     ", " + std::to_string(cur.c) + "]";
        params_here = tensor_size(prefix + node.name + ".W") +
                      tensor_size(prefix + node.name + ".b");
      } else if (std::get_if<FlattenSpec>(&node.spec)) {
        cur.features = static_cast<std::int64_t>(cur.t) * cur.d * cur.c;
        cur.flat = true;
        shape_text = "[" + std::to_string(cur.features) + "]";
      } else if (const auto* dense = std::get_if<DenseSpec>(&node.spec)) {
        cur.features = dense->units;
        shape_text = "[" + std::to_string(cur.features) + "]";
        params_here = tensor_size(prefix + node.name + ".W") +
                      tensor_size(prefix + node.name + ".b");
      } else if (std::get_if<DropoutSpec>(&node.spec)) {
        shape_text = cur.flat ? "[" + std::to_string(cur.features) + "]" : "";
      } else if (const auto* head = std::get_if<SoftmaxOutputSpec>(&node.spec)) {
        cur.features = head->classes;
        shape_text = "[" + std::to_string(cur.features) + "]";
        params_here = tensor_size(prefix + node.name + ".W") +
                      tensor_size(prefix + node.name + ".b");
      }
      total += params_here;
      out << "  " << prefix + node.name << "  out=" << shape_text
          << "  params=" << params_here << "\n";
    }
    return cur;
  };

  std::int64_t concat = 0;
  for (const auto& branch : graph.branches) {
    ShapeCursor cur;
    cur.t = graph.window_len;
    cur.d = static_cast<int>(branch.channel_idx.size());
    cur.c = 1;
    cur = describe_stack(branch.param_prefix(), branch.stack, cur);
    concat += cur.features;
  }
  if (graph.branches.size() > 1)
    out << "  concat  out=[" << concat << "]  params=0\n";
  ShapeCursor cur;
  cur.flat = true;
  cur.features = concat;
  describe_stack("", graph.head, cur);
  out << "total parameters: " << total << "\n";
  return out.str();
}

std::vector<std::string> conv_param_keys(const NetworkGraph& graph,
                                         const std::string& branch_name,
                                         int conv_index) {
  for (const auto& branch : graph.branches) {
    if (branch.name != branch_name) continue;
    const std::string base =
        branch.param_prefix() + "conv" + std::to_string(conv_index);
    return {base + ".W", base + ".b"};
  }
  throw ConfigError("graph has no branch named '" + branch_name + "'");
}

}  // namespace synthimu
