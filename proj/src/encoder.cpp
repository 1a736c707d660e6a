#include "fillmin/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>

#include <nlohmann/json.hpp>

#include "fillmin/errors.hpp"
#include "fillmin/orderings.hpp"

namespace fillmin {

EncoderConfig::Mode encoder_mode_from_string(const std::string& name) {
  if (name == "direct") return EncoderConfig::Mode::Direct;
  if (name == "sage") return EncoderConfig::Mode::Sage;
  if (name == "multigrid") return EncoderConfig::Mode::Multigrid;
  throw InputError("unknown encoder mode '" + name + "'");
}

std::string to_string(EncoderConfig::Mode mode) {
  switch (mode) {
    case EncoderConfig::Mode::Direct: return "direct";
    case EncoderConfig::Mode::Sage: return "sage";
    case EncoderConfig::Mode::Multigrid: return "multigrid";
  }
  return "?";
}

Eigen::MatrixXd init_features(int n, std::uint64_t seed) {
  if (n < 1) throw InputError("init_features needs n >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd x(n, 1);
  for (int i = 0; i < n; ++i) x(i, 0) = gauss(rng);
  return x;
}

Eigen::MatrixXd spectral_features(const GraphView& g, double tol, int max_iter) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(g.n, 2);
  for (const auto& comp : connected_components(g)) {
    Eigen::VectorXd f = fiedler_vector(g, comp, tol, max_iter);
    for (std::size_t a = 0; a < comp.size(); ++a) x(comp[a], 0) = f[a];
  }
  int max_deg = 0;
  for (int d : g.degree) max_deg = std::max(max_deg, d);
  if (max_deg > 0)
    for (int i = 0; i < g.n; ++i)
      x(i, 1) = static_cast<double>(g.degree[i]) / max_deg;
  return x;
}

namespace {

void add_tensor(EncoderParams& p, const std::string& name, int rows, int cols) {
  p.tensors[name] = Eigen::MatrixXd::Zero(rows, cols);
}

void fill_gaussian(EncoderParams& p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (auto& [name, t] : p.tensors) {
    double scale = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(1, t.rows())));
    for (Eigen::Index i = 0; i < t.rows(); ++i)
      for (Eigen::Index j = 0; j < t.cols(); ++j) t(i, j) = scale * gauss(rng);
  }
}

}  // namespace

EncoderParams init_encoder_params(const EncoderConfig& cfg, int input_dim) {
  if (cfg.mode == EncoderConfig::Mode::Direct)
    throw InputError("direct mode params come from init_direct_params");
  if (cfg.hidden_dim < 1) throw InputError("hidden_dim must be >= 1");
  EncoderParams p;
  p.config = cfg;
  p.input_dim = input_dim;
  const int h = cfg.hidden_dim;
  add_tensor(p, "conv1.self", input_dim, h);
  add_tensor(p, "conv1.neigh", input_dim, h);
  add_tensor(p, "conv2.self", h, h);
  add_tensor(p, "conv2.neigh", h, h);
  if (cfg.mode == EncoderConfig::Mode::Multigrid) {
    add_tensor(p, "down.conv1.self", h, h);
    add_tensor(p, "down.conv1.neigh", h, h);
    add_tensor(p, "down.conv2.self", h, h);
    add_tensor(p, "down.conv2.neigh", h, h);
    add_tensor(p, "coarse.self", h, h);
    add_tensor(p, "coarse.neigh", h, h);
    add_tensor(p, "up.conv1.self", h, h);
    add_tensor(p, "up.conv1.neigh", h, h);
    add_tensor(p, "up.conv2.self", h, h);
    add_tensor(p, "up.conv2.neigh", h, h);
  }
  for (int l = 1; l <= cfg.head_layers; ++l) {
    int out = l == cfg.head_layers ? 1 : h;
    add_tensor(p, "head.w" + std::to_string(l), h, out);
    add_tensor(p, "head.b" + std::to_string(l), 1, out);
  }
  fill_gaussian(p, cfg.seed);
  return p;
}

EncoderParams init_direct_params(const EncoderConfig& cfg,
                                 const Eigen::VectorXd& initial_scores) {
  EncoderParams p;
  p.config = cfg;
  p.config.mode = EncoderConfig::Mode::Direct;
  p.input_dim = 0;
  p.direct_n = static_cast<int>(initial_scores.size());
  p.tensors["scores"] = initial_scores;
  return p;
}

ad::NodeId TapeParams::at(const std::string& name) const {
  auto it = id.find(name);
  if (it == id.end()) throw InputError("missing parameter tensor '" + name + "'");
  return it->second;
}

TapeParams register_params(ad::Tape& tape, const EncoderParams& params,
                           bool requires_grad) {
  TapeParams out;
  for (const auto& [name, t] : params.tensors)
    out.id[name] = tape.input(t, requires_grad);
  return out;
}

ad::NodeId sage_layer(ad::Tape& tape, ad::NodeId h, const GraphView& g,
                      ad::NodeId w_self, ad::NodeId w_neigh) {
  ad::NodeId own = tape.matmul(h, w_self);
  ad::NodeId agg = tape.matmul(tape.mean_neighbor_aggregate(h, g), w_neigh);
  return tape.tanh(tape.add(own, agg));
}

std::pair<GraphView, std::vector<int>> coarsen(const GraphView& g) {
  if (g.n < 2) throw InputError("coarsen needs at least 2 nodes");

  struct Edge {
    double w;
    int u, v;
  };
  std::vector<Edge> edges;
  for (int u = 0; u < g.n; ++u)
    for (std::size_t k = 0; k < g.adj[u].size(); ++k) {
      int v = g.adj[u][k];
      if (v > u) edges.push_back({g.weight[u][k], u, v});
    }
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    if (a.w != b.w) return a.w > b.w;
    return a.u != b.u ? a.u < b.u : a.v < b.v;
  });

  std::vector<int> match(g.n, -1);
  for (const Edge& e : edges)
    if (match[e.u] < 0 && match[e.v] < 0) {
      match[e.u] = e.v;
      match[e.v] = e.u;
    }

  std::vector<int> cluster_of(g.n, -1);
  int n_coarse = 0;
  for (int v = 0; v < g.n; ++v) {
    if (cluster_of[v] >= 0) continue;
    cluster_of[v] = n_coarse;
    if (match[v] >= 0) cluster_of[match[v]] = n_coarse;
    ++n_coarse;
  }

  GraphView coarse;
  coarse.n = n_coarse;
  coarse.adj.resize(n_coarse);
  coarse.weight.resize(n_coarse);
  coarse.degree.resize(n_coarse);
  std::vector<std::map<int, double>> acc(n_coarse);
  for (int u = 0; u < g.n; ++u)
    for (std::size_t k = 0; k < g.adj[u].size(); ++k) {
      int v = g.adj[u][k];
      if (v <= u) continue;
      int cu = cluster_of[u], cv = cluster_of[v];
      if (cu == cv) continue;
      acc[cu][cv] += g.weight[u][k];
      acc[cv][cu] += g.weight[u][k];
    }
  for (int c = 0; c < n_coarse; ++c) {
    for (const auto& [nbr, w] : acc[c]) {
      coarse.adj[c].push_back(nbr);
      coarse.weight[c].push_back(w);
    }
    coarse.degree[c] = static_cast<int>(coarse.adj[c].size());
  }
  return {std::move(coarse), std::move(cluster_of)};
}

ad::NodeId direct_scores(ad::Tape& tape, ad::NodeId theta, int n) {
  const auto& v = tape.value(theta);
  if (v.rows() != n || v.cols() != 1)
    throw InputError("direct scores have size " + std::to_string(v.rows()) +
                     ", expected " + std::to_string(n));
  return theta;
}

namespace {

ad::NodeId linear_head(ad::Tape& tape, const EncoderConfig& cfg,
                       const TapeParams& params, ad::NodeId h) {
  ad::NodeId cur = h;
  for (int l = 1; l <= cfg.head_layers; ++l) {
    cur = tape.add(tape.matmul(cur, params.at("head.w" + std::to_string(l))),
                   params.at("head.b" + std::to_string(l)));
  }
  return cur;
}

ad::NodeId double_conv(ad::Tape& tape, const TapeParams& params,
                       const std::string& prefix, ad::NodeId h, const GraphView& g) {
  ad::NodeId a = sage_layer(tape, h, g, params.at(prefix + "conv1.self"),
                            params.at(prefix + "conv1.neigh"));
  return sage_layer(tape, a, g, params.at(prefix + "conv2.self"),
                    params.at(prefix + "conv2.neigh"));
}

// Mean-pool rows into clusters via a constant pooling operator.
ad::NodeId pool_rows(ad::Tape& tape, ad::NodeId h, const std::vector<int>& cluster_of,
                     int n_coarse) {
  const int n_fine = static_cast<int>(cluster_of.size());
  Eigen::MatrixXd pool = Eigen::MatrixXd::Zero(n_coarse, n_fine);
  std::vector<int> size(n_coarse, 0);
  for (int v = 0; v < n_fine; ++v) ++size[cluster_of[v]];
  for (int v = 0; v < n_fine; ++v)
    pool(cluster_of[v], v) = 1.0 / static_cast<double>(size[cluster_of[v]]);
  return tape.matmul(tape.constant(std::move(pool)), h);
}

ad::NodeId multigrid_scores(ad::Tape& tape, const EncoderConfig& cfg,
                            const TapeParams& params, const GraphView& g,
                            const Eigen::MatrixXd& features) {
  struct Level {
    std::vector<int> cluster_of;
    ad::NodeId fine_h;
    GraphView fine_graph;
  };
  std::vector<Level> stack;

  GraphView cur = g;
  ad::NodeId h = tape.constant(features);
  h = double_conv(tape, params, "", h, cur);
  while (cur.n > 2) {
    auto [coarse, cluster_of] = coarsen(cur);
    if (coarse.n == cur.n) break;  // matching made no progress
    stack.push_back({cluster_of, h, cur});
    h = pool_rows(tape, h, cluster_of, coarse.n);
    cur = std::move(coarse);
    if (cur.n > 2)
      h = double_conv(tape, params, "down.", h, cur);
  }
  h = sage_layer(tape, h, cur, params.at("coarse.self"), params.at("coarse.neigh"));
  while (!stack.empty()) {
    Level lvl = std::move(stack.back());
    stack.pop_back();
    ad::NodeId up = tape.row_gather(h, lvl.cluster_of);
    h = tape.scalar_mul(tape.add(up, lvl.fine_h), 0.5);
    h = double_conv(tape, params, "up.", h, lvl.fine_graph);
  }
  return linear_head(tape, cfg, params, h);
}

}  // namespace

ad::NodeId encoder_scores(ad::Tape& tape, const EncoderConfig& cfg,
                          const TapeParams& params, const GraphView& g,
                          const Eigen::MatrixXd& features) {
  switch (cfg.mode) {
    case EncoderConfig::Mode::Direct:
      return direct_scores(tape, params.at("scores"), g.n);
    case EncoderConfig::Mode::Sage: {
      ad::NodeId h = double_conv(tape, params, "", tape.constant(features), g);
      return linear_head(tape, cfg, params, h);
    }
    case EncoderConfig::Mode::Multigrid:
      return multigrid_scores(tape, cfg, params, g, features);
  }
  throw InputError("bad encoder mode");
}

void save_checkpoint(const EncoderParams& params, std::ostream& out) {
  nlohmann::json j;
  j["format"] = "fillmin.checkpoint";
  j["version"] = 1;
  j["mode"] = to_string(params.config.mode);
  j["hidden_dim"] = params.config.hidden_dim;
  j["num_conv_layers"] = params.config.num_conv_layers;
  j["head_layers"] = params.config.head_layers;
  j["seed"] = params.config.seed;
  j["input_dim"] = params.input_dim;
  j["direct_n"] = params.direct_n;
  nlohmann::json tensors = nlohmann::json::object();
  for (const auto& [name, t] : params.tensors) {
    nlohmann::json entry;
    entry["shape"] = {t.rows(), t.cols()};
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(t.size()));
    for (Eigen::Index i = 0; i < t.rows(); ++i)
      for (Eigen::Index j2 = 0; j2 < t.cols(); ++j2) data.push_back(t(i, j2));
    entry["data"] = std::move(data);
    tensors[name] = std::move(entry);
  }
  j["tensors"] = std::move(tensors);
  out << j.dump(2) << "\n";
}

EncoderParams load_checkpoint(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("bad checkpoint JSON: ") + e.what());
  }
  if (j.value("format", "") != "fillmin.checkpoint")
    throw InputError("not a fillmin checkpoint");
  EncoderParams p;
  p.config.mode = encoder_mode_from_string(j.at("mode").get<std::string>());
  p.config.hidden_dim = j.at("hidden_dim").get<int>();
  p.config.num_conv_layers = j.at("num_conv_layers").get<int>();
  p.config.head_layers = j.at("head_layers").get<int>();
  p.config.seed = j.at("seed").get<std::uint64_t>();
  p.input_dim = j.at("input_dim").get<int>();
  p.direct_n = j.at("direct_n").get<int>();
  for (const auto& [name, entry] : j.at("tensors").items()) {
    auto shape = entry.at("shape");
    Eigen::Index rows = shape.at(0).get<Eigen::Index>();
    Eigen::Index cols = shape.at(1).get<Eigen::Index>();
    auto data = entry.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols)
      throw InputError("tensor '" + name + "' has inconsistent shape");
    Eigen::MatrixXd t(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j2 = 0; j2 < cols; ++j2) t(i, j2) = data[k++];
    p.tensors[name] = std::move(t);
  }
  return p;
}

}  // namespace fillmin
