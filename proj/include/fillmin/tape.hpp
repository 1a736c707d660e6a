#ifndef FILLMIN_TAPE_HPP
#define FILLMIN_TAPE_HPP

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fillmin/sparse.hpp"

namespace fillmin::ad {

using NodeId = int;

/// Reverse-mode tape over dense matrices (rank <= 2; vectors are n x 1 or
/// 1 x n). Every forward op validates finiteness of its result. Binary
/// elementwise ops broadcast dimensions of size 1 against the other operand.
/// A tape instance is single-threaded; values of finished nodes are
/// immutable.
class Tape {
 public:
  NodeId input(Eigen::MatrixXd value, bool requires_grad = false);
  NodeId constant(Eigen::MatrixXd value) { return input(std::move(value), false); }
  NodeId scalar(double value);

  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);  // elementwise
  NodeId div(NodeId a, NodeId b);  // elementwise; denominator must be nonzero
  NodeId scalar_mul(NodeId a, double s);
  NodeId matmul(NodeId a, NodeId b);
  NodeId transpose(NodeId a);
  NodeId tril_mask(NodeId a);  // keeps lower triangle including diagonal
  NodeId exp(NodeId a);
  NodeId log(NodeId a);   // requires strictly positive input
  NodeId sqrt(NodeId a);  // requires strictly positive input
  NodeId tanh(NodeId a);
  NodeId normal_cdf(NodeId a);
  NodeId clamp_min(NodeId a, double lo);  // gradient passes where value > lo
  NodeId logsumexp_rows(NodeId a);  // n x m -> n x 1
  NodeId logsumexp_cols(NodeId a);  // n x m -> 1 x m
  NodeId sum_all(NodeId a);         // 1 x 1
  NodeId frobenius_sq(NodeId a);    // 1 x 1
  // trace(At B) = sum of elementwise products; shapes must match.
  NodeId trace_of_product(NodeId a, NodeId b);
  // out.row(i) = a.row(rows[i]); gradient scatters back additively.
  NodeId row_gather(NodeId a, std::vector<int> rows);
  // out.row(i) = mean over j in adj(i) of a.row(j); zero for isolated nodes.
  NodeId mean_neighbor_aggregate(NodeId a, const GraphView& g);

  const Eigen::MatrixXd& value(NodeId id) const;
  // Valid after backward(); zero matrix for nodes the loss does not reach.
  const Eigen::MatrixXd& grad(NodeId id) const;

  // Reverse sweep from a scalar loss node.
  void backward(NodeId loss);

  // With debug enabled, backward() records requires_grad inputs that the
  // loss never reached.
  void set_debug(bool on) { debug_ = on; }
  const std::vector<NodeId>& disconnected_inputs() const { return disconnected_; }

  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Eigen::MatrixXd value;
    std::function<void(Tape&, const Eigen::MatrixXd&)> backprop;
    bool needs_grad = false;
    bool is_input = false;
  };

  NodeId push(Eigen::MatrixXd value, bool needs_grad,
              std::function<void(Tape&, const Eigen::MatrixXd&)> backprop,
              const char* op);
  void accumulate(NodeId id, const Eigen::MatrixXd& g);
  void check(NodeId id) const;

  std::vector<Node> nodes_;
  std::vector<Eigen::MatrixXd> grads_;
  std::vector<NodeId> disconnected_;
  bool debug_ = false;
};

}  // namespace fillmin::ad

#endif  // FILLMIN_TAPE_HPP
