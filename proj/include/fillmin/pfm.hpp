#ifndef FILLMIN_PFM_HPP
#define FILLMIN_PFM_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fillmin/diffperm.hpp"
#include "fillmin/encoder.hpp"
#include "fillmin/sparse.hpp"
#include "fillmin/tape.hpp"

namespace fillmin {

struct PfmConfig {
  double lr = 0.01;
  double sigma = 0.001;
  double rho = 1.0;
  double eta = 0.01;  // L gradient step size and proximal threshold
  // Negative means "use eta". Kept separate so the threshold can be switched
  // off while the gradient step stays live.
  double eta_step = -1.0;
  double eta_threshold = -1.0;
  int n_admm = 50;
  int epochs = 20;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  bool warm_start = false;  // keep L, Gamma across epoch revisits
  // Halve the L step until the smooth (dual + quadratic) loss drops. The
  // plain fixed step blows up from a randn-scaled start once n reaches a few
  // dozen, so the line search is on by default; switch off for the literal
  // fixed-step update.
  bool backtracking = true;
  // Start L at the identity instead of tril(randn). The lower-triangular
  // factorization descent converges from a positive diagonal but can park at
  // spurious stationary points from random sign patterns.
  bool l_init_identity = false;
  int dense_bound = 512;
  GumbelSinkhornConfig gumbel;
  EncoderConfig encoder;

  double step_size() const { return eta_step < 0.0 ? eta : eta_step; }
  double threshold() const { return eta_threshold < 0.0 ? eta : eta_threshold; }
  void validate() const;
};

struct LossBreakdown {
  double l1 = 0.0;
  double dual = 0.0;
  double quad = 0.0;
  double total = 0.0;
};

double l1_norm(const Eigen::MatrixXd& m);

// Augmented Lagrangian |L|_1 + trace(Gt (P A Pt - L Lt)) + rho/2 |P A Pt - L Lt|_F^2.
LossBreakdown augmented_lagrangian(const Eigen::MatrixXd& l,
                                   const Eigen::MatrixXd& p,
                                   const Eigen::MatrixXd& gamma,
                                   const SparseSymMatrix& a, double rho);

// Gradient of the dual + quadratic terms with respect to L:
// with R = A_theta - L Lt, grad = -(Gamma + Gammat) L - rho (R + Rt) L.
Eigen::MatrixXd grad_L_dual_quad(const Eigen::MatrixXd& l,
                                 const Eigen::MatrixXd& a_theta,
                                 const Eigen::MatrixXd& gamma, double rho);

// Elementwise sign(x) max(|x| - eta, 0) followed by lower-triangular masking.
Eigen::MatrixXd prox_soft_threshold(const Eigen::MatrixXd& l, double eta);

// Gamma + rho (P A Pt - L Lt).
Eigen::MatrixXd dual_update(const Eigen::MatrixXd& gamma,
                            const Eigen::MatrixXd& p, const SparseSymMatrix& a,
                            const Eigen::MatrixXd& l, double rho);

// scores -> pairwise -> rank distribution -> Gumbel-Sinkhorn -> transpose ->
// P A Pt, all on the tape. Returns the A_theta node.
ad::NodeId score_chain_reorder(ad::Tape& tape, ad::NodeId scores,
                               const SparseSymMatrix& a,
                               const GumbelSinkhornConfig& cfg,
                               std::uint64_t noise_seed, int dense_bound = 512);

// Dual + quadratic terms as a differentiable scalar; the l1 term is constant
// in theta and excluded.
ad::NodeId theta_objective(ad::Tape& tape, ad::NodeId a_theta,
                           const Eigen::MatrixXd& l,
                           const Eigen::MatrixXd& gamma, double rho);

// Position-major soft permutation matrix from the current parameters,
// evaluated without gradients.
Eigen::MatrixXd soft_permutation(const EncoderParams& params, const GraphView& g,
                                 const Eigen::MatrixXd& features,
                                 const GumbelSinkhornConfig& cfg,
                                 std::uint64_t noise_seed);

struct TrainLogEntry {
  int epoch = 0;
  std::string matrix_id;
  int k = 0;
  double l1 = 0.0;
  double dual = 0.0;
  double quad = 0.0;
  double residual_fro = 0.0;
};
using TrainLog = std::function<void(const TrainLogEntry&)>;

// Full ADMM training loop; returns the trained parameters. Direct mode
// requires all matrices to share one size and seeds the scores with the
// Fiedler feature.
EncoderParams train(const std::vector<std::pair<std::string, SparseSymMatrix>>& matrices,
                    const PfmConfig& cfg, const TrainLog& log = {});

// Forward pass without noise or Sinkhorn, then a hard sort of the scores.
Permutation infer_ordering(const SparseSymMatrix& a, const EncoderParams& params);

}  // namespace fillmin

#endif  // FILLMIN_PFM_HPP
