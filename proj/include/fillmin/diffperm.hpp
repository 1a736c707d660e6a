#ifndef FILLMIN_DIFFPERM_HPP
#define FILLMIN_DIFFPERM_HPP

#include <cstdint>

#include <Eigen/Dense>

#include "fillmin/sparse.hpp"
#include "fillmin/tape.hpp"

namespace fillmin {

struct GumbelSinkhornConfig {
  double tau = 0.1;        // temperature
  int n_iters = 20;        // Sinkhorn normalization iterations
  // Floor applied to phat before the log. Small enough that a Gumbel draw
  // cannot lift a floored entry past a genuine one (the gap is -log(eps)
  // nats), which keeps 50 Sinkhorn iterations inside the 1e-3
  // doubly-stochastic tolerance at n = 512.
  double eps = 1e-12;
  std::uint64_t seed = 0;  // base seed for score noise
  double sigma = 0.001;    // score-noise standard deviation
  double noise_scale = 1.0;  // 0 disables the Gumbel perturbation

  void validate() const;
};

// p[v][u] = Phi((Y_v - Y_u) / (sqrt(2) sigma)): probability that node v is
// ranked above node u when both scores carry independent N(0, sigma^2) noise.
// scores is n x 1.
ad::NodeId pairwise_probs(ad::Tape& tape, ad::NodeId scores, double sigma);

struct RankMoments {
  ad::NodeId mu;   // n x 1, expected number of nodes ranked above u
  ad::NodeId var;  // n x 1, floored at eps^2
};

// mu_u = sum_{v != u} p_vu, var_u = sum_{v != u} p_vu (1 - p_vu). The
// diagonal p_uu = 0.5 is excluded from both sums.
RankMoments rank_moments(ad::Tape& tape, ad::NodeId pairwise, double eps);

// Rank distribution: row u holds Pr(i - 0.5 < R_u < i + 0.5) for 0-based
// positions i, with R_u ~ N(mu_u, var_u).
ad::NodeId rank_distribution(ad::Tape& tape, const RankMoments& moments, int n);

// Gumbel noise sample -log(-log(U + eps) + eps), U ~ uniform(0,1),
// deterministic per seed.
Eigen::MatrixXd gumbel_noise(int rows, int cols, double eps, std::uint64_t seed);

// Log-space Sinkhorn on (log(clamp(phat, eps)) + noise) / tau, alternating
// column and row normalization, ending with rows. The output keeps phat's
// orientation: rows index nodes, columns index positions.
ad::NodeId gumbel_sinkhorn(ad::Tape& tape, ad::NodeId phat,
                           const GumbelSinkhornConfig& cfg,
                           std::uint64_t noise_seed);

// Descending score order (highest score to position 0), ties by ascending
// node index.
Permutation hard_permutation(const Eigen::VectorXd& scores);

// A_theta = P A Pt on the tape, dense path. P is position-major: rows index
// new positions, columns index nodes.
ad::NodeId soft_reorder(ad::Tape& tape, const SparseSymMatrix& a, ad::NodeId p,
                        int dense_bound = 512);

}  // namespace fillmin

#endif  // FILLMIN_DIFFPERM_HPP
