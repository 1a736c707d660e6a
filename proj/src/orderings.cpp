#include "fillmin/orderings.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <random>
#include <set>

#include "fillmin/errors.hpp"

namespace fillmin {

OrderingMethod ordering_method_from_string(const std::string& name) {
  if (name == "natural") return OrderingMethod::Natural;
  if (name == "rcm") return OrderingMethod::ReverseCuthillMcKee;
  if (name == "md") return OrderingMethod::MinimumDegree;
  if (name == "fiedler") return OrderingMethod::Fiedler;
  if (name == "pfm") return OrderingMethod::Pfm;
  throw InputError("unknown ordering method '" + name + "'");
}

std::string to_string(OrderingMethod m) {
  switch (m) {
    case OrderingMethod::Natural: return "natural";
    case OrderingMethod::ReverseCuthillMcKee: return "rcm";
    case OrderingMethod::MinimumDegree: return "md";
    case OrderingMethod::Fiedler: return "fiedler";
    case OrderingMethod::Pfm: return "pfm";
  }
  return "?";
}

Permutation natural_ordering(int n) { return Permutation::identity(n); }

std::vector<std::vector<int>> connected_components(const GraphView& g) {
  std::vector<std::vector<int>> comps;
  std::vector<bool> seen(g.n, false);
  for (int s = 0; s < g.n; ++s) {
    if (seen[s]) continue;
    std::vector<int> comp;
    std::queue<int> q;
    q.push(s);
    seen[s] = true;
    while (!q.empty()) {
      int u = q.front();
      q.pop();
      comp.push_back(u);
      for (int v : g.adj[u])
        if (!seen[v]) {
          seen[v] = true;
          q.push(v);
        }
    }
    std::sort(comp.begin(), comp.end());
    comps.push_back(std::move(comp));
  }
  return comps;
}

namespace {

// BFS level structure from start, restricted to one component.
struct Levels {
  std::vector<int> last_level;
  int eccentricity = 0;
};

Levels bfs_levels(const GraphView& g, int start) {
  std::vector<int> dist(g.n, -1);
  std::queue<int> q;
  q.push(start);
  dist[start] = 0;
  Levels out;
  int max_d = 0;
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    max_d = std::max(max_d, dist[u]);
    for (int v : g.adj[u])
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        q.push(v);
      }
  }
  out.eccentricity = max_d;
  for (int v = 0; v < g.n; ++v)
    if (dist[v] == max_d) out.last_level.push_back(v);
  return out;
}

int pseudo_peripheral(const GraphView& g, const std::vector<int>& comp) {
  int start = comp[0];
  for (int v : comp)
    if (g.degree[v] < g.degree[start]) start = v;  // ties keep smaller index
  Levels lv = bfs_levels(g, start);
  int ecc = lv.eccentricity;
  for (;;) {
    int cand = -1;
    for (int v : lv.last_level)
      if (cand < 0 || g.degree[v] < g.degree[cand]) cand = v;
    if (cand < 0) break;
    Levels lv2 = bfs_levels(g, cand);
    if (lv2.eccentricity <= ecc) break;
    ecc = lv2.eccentricity;
    start = cand;
    lv = std::move(lv2);
  }
  return start;
}

}  // namespace

Permutation reverse_cuthill_mckee(const GraphView& g) {
  std::vector<int> cm;
  cm.reserve(g.n);
  std::vector<bool> visited(g.n, false);
  for (const auto& comp : connected_components(g)) {
    int start = pseudo_peripheral(g, comp);
    std::queue<int> q;
    q.push(start);
    visited[start] = true;
    cm.push_back(start);
    std::vector<int> nbrs;
    while (!q.empty()) {
      int u = q.front();
      q.pop();
      nbrs.clear();
      for (int v : g.adj[u])
        if (!visited[v]) {
          visited[v] = true;
          nbrs.push_back(v);
        }
      std::sort(nbrs.begin(), nbrs.end(), [&](int a, int b) {
        return g.degree[a] != g.degree[b] ? g.degree[a] < g.degree[b] : a < b;
      });
      for (int v : nbrs) {
        cm.push_back(v);
        q.push(v);
      }
    }
  }
  std::reverse(cm.begin(), cm.end());
  return Permutation::from_old_of_new(std::move(cm));
}

Permutation minimum_degree(const GraphView& g) {
  const int n = g.n;
  std::vector<std::set<int>> adj(n);
  for (int u = 0; u < n; ++u) adj[u] = std::set<int>(g.adj[u].begin(), g.adj[u].end());
  std::vector<bool> eliminated(n, false);
  std::vector<int> order;
  order.reserve(n);
  for (int step = 0; step < n; ++step) {
    int best = -1;
    std::size_t best_deg = 0;
    for (int v = 0; v < n; ++v) {
      if (eliminated[v]) continue;
      if (best < 0 || adj[v].size() < best_deg) {
        best = v;
        best_deg = adj[v].size();
      }
    }
    order.push_back(best);
    eliminated[best] = true;
    std::vector<int> nbrs(adj[best].begin(), adj[best].end());
    for (int v : nbrs) adj[v].erase(best);
    for (std::size_t i = 0; i < nbrs.size(); ++i)
      for (std::size_t j = i + 1; j < nbrs.size(); ++j) {
        adj[nbrs[i]].insert(nbrs[j]);
        adj[nbrs[j]].insert(nbrs[i]);
      }
    adj[best].clear();
  }
  return Permutation::from_old_of_new(std::move(order));
}

namespace {

void deflate_constant(Eigen::VectorXd& x) {
  x.array() -= x.mean();
}

// Component-local Laplacian with weights divided by the largest weight, so
// the residual tolerance (and hence the ordering) is invariant to uniform
// edge-weight scaling.
struct CompLaplacian {
  std::vector<std::vector<int>> adj;
  std::vector<std::vector<double>> weight;
  std::vector<double> wdeg;

  CompLaplacian(const GraphView& g, const std::vector<int>& comp,
                const std::vector<int>& pos) {
    const int m = static_cast<int>(comp.size());
    double wmax = 0.0;
    for (int u : comp)
      for (double w : g.weight[u]) wmax = std::max(wmax, w);
    if (wmax == 0.0) wmax = 1.0;
    adj.resize(m);
    weight.resize(m);
    wdeg.assign(m, 0.0);
    for (int a = 0; a < m; ++a) {
      int u = comp[a];
      for (std::size_t k = 0; k < g.adj[u].size(); ++k) {
        double w = g.weight[u][k] / wmax;
        adj[a].push_back(pos[g.adj[u][k]]);
        weight[a].push_back(w);
        wdeg[a] += w;
      }
    }
  }

  void apply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const {
    for (std::size_t a = 0; a < adj.size(); ++a) {
      double acc = wdeg[a] * x[a];
      for (std::size_t k = 0; k < adj[a].size(); ++k)
        acc -= weight[a][k] * x[adj[a][k]];
      y[a] = acc;
    }
  }
};

}  // namespace

Eigen::VectorXd fiedler_vector(const GraphView& g, const std::vector<int>& comp,
                               double tol, int max_iter) {
  const int m = static_cast<int>(comp.size());
  if (m == 1) return Eigen::VectorXd::Zero(1);

  std::vector<int> pos(g.n, -1);
  for (int a = 0; a < m; ++a) pos[comp[a]] = a;
  CompLaplacian lap(g, comp, pos);
  auto apply = [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) {
    lap.apply(x, y);
    deflate_constant(y);  // stay in the subspace orthogonal to the constant
  };

  // Fixed starting vector seeded from the component size.
  std::mt19937_64 rng(static_cast<std::uint64_t>(m) * 0x9e3779b97f4a7c15ull + 1);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd start(m);
  for (int a = 0; a < m; ++a) start[a] = gauss(rng);
  deflate_constant(start);
  if (start.norm() == 0.0) {
    start.setLinSpaced(m, -1.0, 1.0);
    deflate_constant(start);
  }
  start /= start.norm();

  // Lanczos with full reorthogonalization on the deflated Laplacian,
  // restarted from the current Ritz vector until the residual meets tol.
  // max_iter counts Lanczos steps (matrix applications) across restarts.
  const int block = std::min(m - 1, 250);
  double best_resid = std::numeric_limits<double>::infinity();
  int steps_left = max_iter;
  Eigen::VectorXd ritz = start, applied(m);
  while (steps_left > 0) {
    int steps = std::min(block, steps_left);
    std::vector<Eigen::VectorXd> basis;
    basis.reserve(steps);
    std::vector<double> alpha, beta;
    basis.push_back(ritz);
    Eigen::VectorXd w(m);
    for (int k = 0; k < steps; ++k) {
      apply(basis[k], w);
      double a = basis[k].dot(w);
      alpha.push_back(a);
      w -= a * basis[k];
      if (k > 0) w -= beta[k - 1] * basis[k - 1];
      for (int pass = 0; pass < 2; ++pass)
        for (const auto& v : basis) w -= v.dot(w) * v;
      deflate_constant(w);
      double b = w.norm();
      if (k + 1 == steps || b < 1e-13) {
        beta.push_back(b);
        break;
      }
      beta.push_back(b);
      basis.push_back(w / b);
    }
    const int dim = static_cast<int>(alpha.size());
    steps_left -= dim;

    Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(dim, dim);
    for (int k = 0; k < dim; ++k) {
      tri(k, k) = alpha[k];
      if (k + 1 < dim) tri(k, k + 1) = tri(k + 1, k) = beta[k];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tri);
    Eigen::VectorXd weights = es.eigenvectors().col(0);  // smallest Ritz value
    ritz.setZero();
    for (int k = 0; k < static_cast<int>(basis.size()); ++k)
      ritz += weights[k] * basis[k];
    deflate_constant(ritz);
    double nr = ritz.norm();
    if (!(nr > 0.0) || !ritz.allFinite()) break;
    ritz /= nr;

    apply(ritz, applied);
    double lambda = ritz.dot(applied);
    double resid = (applied - lambda * ritz).norm();
    best_resid = std::min(best_resid, resid);
    if (resid <= tol) {
      // Pin the sign: largest-magnitude entry positive, ties by index.
      int arg = 0;
      for (int a = 1; a < m; ++a)
        if (std::abs(ritz[a]) > std::abs(ritz[arg])) arg = a;
      if (ritz[arg] < 0.0) ritz = -ritz;
      return ritz;
    }
  }
  throw EigensolverError(max_iter, best_resid);
}

Permutation fiedler_ordering(const GraphView& g, double tol, int max_iter) {
  std::vector<int> order;
  order.reserve(g.n);
  for (const auto& comp : connected_components(g)) {
    Eigen::VectorXd f = fiedler_vector(g, comp, tol, max_iter);
    std::vector<int> idx(comp.size());
    for (std::size_t a = 0; a < comp.size(); ++a) idx[a] = static_cast<int>(a);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
      return f[a] != f[b] ? f[a] < f[b] : comp[a] < comp[b];
    });
    for (int a : idx) order.push_back(comp[a]);
  }
  return Permutation::from_old_of_new(std::move(order));
}

}  // namespace fillmin
