#include "fillmin/tape.hpp"

#include <cmath>

#include "fillmin/errors.hpp"

namespace fillmin::ad {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

double phi_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }
double phi_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

bool broadcastable(Eigen::Index a, Eigen::Index b) {
  return a == b || a == 1 || b == 1;
}

// Sums g over the dimensions that were expanded to reach (rows, cols).
Eigen::MatrixXd reduce_to_shape(const Eigen::MatrixXd& g, Eigen::Index rows,
                                Eigen::Index cols) {
  Eigen::MatrixXd out = g;
  if (rows == 1 && g.rows() > 1) out = out.colwise().sum().eval();
  if (cols == 1 && out.cols() > 1) out = out.rowwise().sum().eval();
  return out;
}

}  // namespace

NodeId Tape::push(Eigen::MatrixXd value, bool needs_grad,
                  std::function<void(Tape&, const Eigen::MatrixXd&)> backprop,
                  const char* op) {
  if (!value.allFinite())
    throw std::runtime_error(std::string("non-finite result in op '") + op + "'");
  Node n;
  n.value = std::move(value);
  n.backprop = std::move(backprop);
  n.needs_grad = needs_grad;
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

void Tape::check(NodeId id) const {
  if (id < 0 || id >= static_cast<NodeId>(nodes_.size()))
    throw InputError("invalid tape node id");
}

NodeId Tape::input(Eigen::MatrixXd value, bool requires_grad) {
  NodeId id = push(std::move(value), requires_grad, nullptr, "input");
  nodes_[id].is_input = true;
  return id;
}

NodeId Tape::scalar(double value) {
  return constant(Eigen::MatrixXd::Constant(1, 1, value));
}

void Tape::accumulate(NodeId id, const Eigen::MatrixXd& g) {
  if (!nodes_[id].needs_grad) return;
  if (grads_[id].size() == 0)
    grads_[id] = Eigen::MatrixXd::Zero(nodes_[id].value.rows(), nodes_[id].value.cols());
  grads_[id] += g;
}

const Eigen::MatrixXd& Tape::value(NodeId id) const {
  check(id);
  return nodes_[id].value;
}

const Eigen::MatrixXd& Tape::grad(NodeId id) const {
  check(id);
  if (grads_.size() != nodes_.size())
    throw std::logic_error("grad() called before backward()");
  if (grads_[id].size() == 0) {
    auto& slot = const_cast<Tape*>(this)->grads_[id];
    slot = Eigen::MatrixXd::Zero(nodes_[id].value.rows(), nodes_[id].value.cols());
  }
  return grads_[id];
}

void Tape::backward(NodeId loss) {
  check(loss);
  const auto& lv = nodes_[loss].value;
  if (lv.rows() != 1 || lv.cols() != 1)
    throw InputError("backward() needs a scalar loss node");
  grads_.assign(nodes_.size(), Eigen::MatrixXd());
  disconnected_.clear();
  grads_[loss] = Eigen::MatrixXd::Constant(1, 1, 1.0);
  for (NodeId id = loss; id >= 0; --id) {
    if (grads_[id].size() == 0) continue;
    if (nodes_[id].backprop) nodes_[id].backprop(*this, grads_[id]);
  }
  if (debug_) {
    for (NodeId id = 0; id < static_cast<NodeId>(nodes_.size()); ++id)
      if (nodes_[id].is_input && nodes_[id].needs_grad && grads_[id].size() == 0)
        disconnected_.push_back(id);
  }
}

// ---- binary elementwise ops with broadcasting ----

namespace {

template <typename F>
Eigen::MatrixXd broadcast_apply(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                F&& f, const char* op) {
  if (!broadcastable(a.rows(), b.rows()) || !broadcastable(a.cols(), b.cols()))
    throw InputError(std::string("shape mismatch in '") + op + "': " +
                     std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  const Eigen::Index rows = std::max(a.rows(), b.rows());
  const Eigen::Index cols = std::max(a.cols(), b.cols());
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      out(i, j) = f(a(a.rows() == 1 ? 0 : i, a.cols() == 1 ? 0 : j),
                    b(b.rows() == 1 ? 0 : i, b.cols() == 1 ? 0 : j));
  return out;
}

}  // namespace

NodeId Tape::add(NodeId a, NodeId b) {
  check(a);
  check(b);
  const Eigen::MatrixXd& va = nodes_[a].value;
  const Eigen::MatrixXd& vb = nodes_[b].value;
  Eigen::MatrixXd out = broadcast_apply(va, vb, [](double x, double y) { return x + y; }, "add");
  bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
  auto ra = va.rows(), ca = va.cols(), rb = vb.rows(), cb = vb.cols();
  return push(std::move(out), ng,
              [a, b, ra, ca, rb, cb](Tape& t, const Eigen::MatrixXd& g) {
                t.accumulate(a, reduce_to_shape(g, ra, ca));
                t.accumulate(b, reduce_to_shape(g, rb, cb));
              },
              "add");
}

NodeId Tape::sub(NodeId a, NodeId b) {
  check(a);
  check(b);
  const Eigen::MatrixXd& va = nodes_[a].value;
  const Eigen::MatrixXd& vb = nodes_[b].value;
  Eigen::MatrixXd out = broadcast_apply(va, vb, [](double x, double y) { return x - y; }, "sub");
  bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
  auto ra = va.rows(), ca = va.cols(), rb = vb.rows(), cb = vb.cols();
  return push(std::move(out), ng,
              [a, b, ra, ca, rb, cb](Tape& t, const Eigen::MatrixXd& g) {
                t.accumulate(a, reduce_to_shape(g, ra, ca));
                t.accumulate(b, reduce_to_shape(-g, rb, cb));
              },
              "sub");
}

NodeId Tape::mul(NodeId a, NodeId b) {
  check(a);
  check(b);
  const Eigen::MatrixXd& va = nodes_[a].value;
  const Eigen::MatrixXd& vb = nodes_[b].value;
  Eigen::MatrixXd out = broadcast_apply(va, vb, [](double x, double y) { return x * y; }, "mul");
  bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
  auto ra = va.rows(), ca = va.cols(), rb = vb.rows(), cb = vb.cols();
  return push(std::move(out), ng,
              [a, b, ra, ca, rb, cb](Tape& t, const Eigen::MatrixXd& g) {
                const Eigen::MatrixXd& va = t.nodes_[a].value;
                const Eigen::MatrixXd& vb = t.nodes_[b].value;
                Eigen::MatrixXd ga = broadcast_apply(
                    g, vb, [](double x, double y) { return x * y; }, "mul.bwd");
                Eigen::MatrixXd gb = broadcast_apply(
                    g, va, [](double x, double y) { return x * y; }, "mul.bwd");
                t.accumulate(a, reduce_to_shape(ga, ra, ca));
                t.accumulate(b, reduce_to_shape(gb, rb, cb));
              },
              "mul");
}

NodeId Tape::div(NodeId a, NodeId b) {
  check(a);
  check(b);
  const Eigen::MatrixXd& va = nodes_[a].value;
  const Eigen::MatrixXd& vb = nodes_[b].value;
  if ((vb.array() == 0.0).any()) throw InputError("div: zero denominator");
  Eigen::MatrixXd out = broadcast_apply(va, vb, [](double x, double y) { return x / y; }, "div");
  bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
  auto ra = va.rows(), ca = va.cols(), rb = vb.rows(), cb = vb.cols();
  return push(std::move(out), ng,
              [a, b, ra, ca, rb, cb](Tape& t, const Eigen::MatrixXd& g) {
                const Eigen::MatrixXd& va = t.nodes_[a].value;
                const Eigen::MatrixXd& vb = t.nodes_[b].value;
                Eigen::MatrixXd ga = broadcast_apply(
                    g, vb, [](double x, double y) { return x / y; }, "div.bwd");
                Eigen::MatrixXd quot = broadcast_apply(
                    va, vb, [](double x, double y) { return -x / (y * y); }, "div.bwd");
                Eigen::MatrixXd gb = broadcast_apply(
                    g, quot, [](double x, double y) { return x * y; }, "div.bwd");
                t.accumulate(a, reduce_to_shape(ga, ra, ca));
                t.accumulate(b, reduce_to_shape(gb, rb, cb));
              },
              "div");
}

NodeId Tape::scalar_mul(NodeId a, double s) {
  check(a);
  return push(nodes_[a].value * s, nodes_[a].needs_grad,
              [a, s](Tape& t, const Eigen::MatrixXd& g) { t.accumulate(a, g * s); },
              "scalar_mul");
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  check(a);
  check(b);
  const Eigen::MatrixXd& va = nodes_[a].value;
  const Eigen::MatrixXd& vb = nodes_[b].value;
  if (va.cols() != vb.rows())
    throw InputError("matmul shape mismatch: " + std::to_string(va.rows()) + "x" +
                     std::to_string(va.cols()) + " * " + std::to_string(vb.rows()) +
                     "x" + std::to_string(vb.cols()));
  bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
  return push(va * vb, ng,
              [a, b](Tape& t, const Eigen::MatrixXd& g) {
                t.accumulate(a, g * t.nodes_[b].value.transpose());
                t.accumulate(b, t.nodes_[a].value.transpose() * g);
              },
              "matmul");
}

NodeId Tape::transpose(NodeId a) {
  check(a);
  return push(nodes_[a].value.transpose(), nodes_[a].needs_grad,
              [a](Tape& t, const Eigen::MatrixXd& g) { t.accumulate(a, g.transpose()); },
              "transpose");
}

NodeId Tape::tril_mask(NodeId a) {
  check(a);
  Eigen::MatrixXd out = nodes_[a].value.triangularView<Eigen::Lower>();
  return push(std::move(out), nodes_[a].needs_grad,
              [a](Tape& t, const Eigen::MatrixXd& g) {
                Eigen::MatrixXd masked = g.triangularView<Eigen::Lower>();
                t.accumulate(a, masked);
              },
              "tril_mask");
}

NodeId Tape::exp(NodeId a) {
  check(a);
  return push(nodes_[a].value.array().exp().matrix(), nodes_[a].needs_grad,
              [a, self = static_cast<NodeId>(nodes_.size())](Tape& t, const Eigen::MatrixXd& g) {
                t.accumulate(a, g.cwiseProduct(t.nodes_[self].value));
              },
              "exp");
}

NodeId Tape::log(NodeId a) {
  check(a);
  if ((nodes_[a].value.array() <= 0.0).any())
    throw InputError("log of non-positive value");
  return push(nodes_[a].value.array().log().matrix(), nodes_[a].needs_grad,
              [a](Tape& t, const Eigen::MatrixXd& g) {
                t.accumulate(a, g.cwiseQuotient(t.nodes_[a].value));
              },
              "log");
}

NodeId Tape::sqrt(NodeId a) {
  check(a);
  if ((nodes_[a].value.array() <= 0.0).any())
    throw InputError("sqrt of non-positive value");
  return push(nodes_[a].value.array().sqrt().matrix(), nodes_[a].needs_grad,
              [a, self = static_cast<NodeId>(nodes_.size())](Tape& t, const Eigen::MatrixXd& g) {
                t.accumulate(a, (0.5 * g.array() / t.nodes_[self].value.array()).matrix());
              },
              "sqrt");
}

NodeId Tape::tanh(NodeId a) {
  check(a);
  return push(nodes_[a].value.array().tanh().matrix(), nodes_[a].needs_grad,
              [a, self = static_cast<NodeId>(nodes_.size())](Tape& t, const Eigen::MatrixXd& g) {
                const auto& y = t.nodes_[self].value.array();
                t.accumulate(a, (g.array() * (1.0 - y * y)).matrix());
              },
              "tanh");
}

NodeId Tape::normal_cdf(NodeId a) {
  check(a);
  Eigen::MatrixXd out = nodes_[a].value.unaryExpr([](double x) { return phi_cdf(x); });
  return push(std::move(out), nodes_[a].needs_grad,
              [a](Tape& t, const Eigen::MatrixXd& g) {
                Eigen::MatrixXd pdf =
                    t.nodes_[a].value.unaryExpr([](double x) { return phi_pdf(x); });
                t.accumulate(a, g.cwiseProduct(pdf));
              },
              "normal_cdf");
}

NodeId Tape::clamp_min(NodeId a, double lo) {
  check(a);
  Eigen::MatrixXd out = nodes_[a].value.cwiseMax(lo);
  return push(std::move(out), nodes_[a].needs_grad,
              [a, lo](Tape& t, const Eigen::MatrixXd& g) {
                Eigen::MatrixXd pass =
                    (t.nodes_[a].value.array() > lo).cast<double>().matrix();
                t.accumulate(a, g.cwiseProduct(pass));
              },
              "clamp_min");
}

NodeId Tape::logsumexp_rows(NodeId a) {
  check(a);
  const Eigen::MatrixXd& v = nodes_[a].value;
  Eigen::MatrixXd out(v.rows(), 1);
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    double m = v.row(i).maxCoeff();
    out(i, 0) = m + std::log((v.row(i).array() - m).exp().sum());
  }
  return push(std::move(out), nodes_[a].needs_grad,
              [a, self = static_cast<NodeId>(nodes_.size())](Tape& t, const Eigen::MatrixXd& g) {
                const Eigen::MatrixXd& v = t.nodes_[a].value;
                const Eigen::MatrixXd& o = t.nodes_[self].value;
                Eigen::MatrixXd gx(v.rows(), v.cols());
                for (Eigen::Index i = 0; i < v.rows(); ++i)
                  gx.row(i) = g(i, 0) * (v.row(i).array() - o(i, 0)).exp().matrix();
                t.accumulate(a, gx);
              },
              "logsumexp_rows");
}

NodeId Tape::logsumexp_cols(NodeId a) {
  check(a);
  const Eigen::MatrixXd& v = nodes_[a].value;
  Eigen::MatrixXd out(1, v.cols());
  for (Eigen::Index j = 0; j < v.cols(); ++j) {
    double m = v.col(j).maxCoeff();
    out(0, j) = m + std::log((v.col(j).array() - m).exp().sum());
  }
  return push(std::move(out), nodes_[a].needs_grad,
              [a, self = static_cast<NodeId>(nodes_.size())](Tape& t, const Eigen::MatrixXd& g) {
                const Eigen::MatrixXd& v = t.nodes_[a].value;
                const Eigen::MatrixXd& o = t.nodes_[self].value;
                Eigen::MatrixXd gx(v.rows(), v.cols());
                for (Eigen::Index j = 0; j < v.cols(); ++j)
                  gx.col(j) = g(0, j) * (v.col(j).array() - o(0, j)).exp().matrix();
                t.accumulate(a, gx);
              },
              "logsumexp_cols");
}

NodeId Tape::sum_all(NodeId a) {
  check(a);
  return push(Eigen::MatrixXd::Constant(1, 1, nodes_[a].value.sum()),
              nodes_[a].needs_grad,
              [a](Tape& t, const Eigen::MatrixXd& g) {
                const auto& v = t.nodes_[a].value;
                t.accumulate(a, Eigen::MatrixXd::Constant(v.rows(), v.cols(), g(0, 0)));
              },
              "sum_all");
}

NodeId Tape::frobenius_sq(NodeId a) {
  check(a);
  return push(Eigen::MatrixXd::Constant(1, 1, nodes_[a].value.squaredNorm()),
              nodes_[a].needs_grad,
              [a](Tape& t, const Eigen::MatrixXd& g) {
                t.accumulate(a, 2.0 * g(0, 0) * t.nodes_[a].value);
              },
              "frobenius_sq");
}

NodeId Tape::trace_of_product(NodeId a, NodeId b) {
  check(a);
  check(b);
  const Eigen::MatrixXd& va = nodes_[a].value;
  const Eigen::MatrixXd& vb = nodes_[b].value;
  if (va.rows() != vb.rows() || va.cols() != vb.cols())
    throw InputError("trace_of_product shape mismatch");
  bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
  return push(Eigen::MatrixXd::Constant(1, 1, va.cwiseProduct(vb).sum()), ng,
              [a, b](Tape& t, const Eigen::MatrixXd& g) {
                t.accumulate(a, g(0, 0) * t.nodes_[b].value);
                t.accumulate(b, g(0, 0) * t.nodes_[a].value);
              },
              "trace_of_product");
}

NodeId Tape::row_gather(NodeId a, std::vector<int> rows) {
  check(a);
  const Eigen::MatrixXd& v = nodes_[a].value;
  for (int r : rows)
    if (r < 0 || r >= v.rows()) throw InputError("row_gather index out of range");
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), v.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(i) = v.row(rows[i]);
  auto idx = std::make_shared<std::vector<int>>(std::move(rows));
  return push(std::move(out), nodes_[a].needs_grad,
              [a, idx](Tape& t, const Eigen::MatrixXd& g) {
                const auto& v = t.nodes_[a].value;
                Eigen::MatrixXd gx = Eigen::MatrixXd::Zero(v.rows(), v.cols());
                for (std::size_t i = 0; i < idx->size(); ++i)
                  gx.row((*idx)[i]) += g.row(i);
                t.accumulate(a, gx);
              },
              "row_gather");
}

NodeId Tape::mean_neighbor_aggregate(NodeId a, const GraphView& g) {
  check(a);
  const Eigen::MatrixXd& v = nodes_[a].value;
  if (v.rows() != g.n)
    throw InputError("mean_neighbor_aggregate: feature rows != node count");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(v.rows(), v.cols());
  for (int i = 0; i < g.n; ++i) {
    if (g.adj[i].empty()) continue;
    for (int j : g.adj[i]) out.row(i) += v.row(j);
    out.row(i) /= static_cast<double>(g.adj[i].size());
  }
  auto adj = std::make_shared<std::vector<std::vector<int>>>(g.adj);
  return push(std::move(out), nodes_[a].needs_grad,
              [a, adj](Tape& t, const Eigen::MatrixXd& gr) {
                const auto& v = t.nodes_[a].value;
                Eigen::MatrixXd gx = Eigen::MatrixXd::Zero(v.rows(), v.cols());
                for (std::size_t i = 0; i < adj->size(); ++i) {
                  const auto& nb = (*adj)[i];
                  if (nb.empty()) continue;
                  double inv = 1.0 / static_cast<double>(nb.size());
                  for (int j : nb) gx.row(j) += inv * gr.row(i);
                }
                t.accumulate(a, gx);
              },
              "mean_neighbor_aggregate");
}

}  // namespace fillmin::ad
