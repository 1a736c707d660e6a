#include "fillmin/diffperm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fillmin/errors.hpp"

namespace fillmin {

void GumbelSinkhornConfig::validate() const {
  if (!(tau > 0.0)) throw InputError("tau must be positive");
  if (n_iters < 1) throw InputError("n_iters must be >= 1");
  if (!(eps > 0.0 && eps <= 1e-3)) throw InputError("eps must be in (0, 1e-3]");
  if (!(sigma > 0.0)) throw InputError("sigma must be positive");
  if (noise_scale < 0.0) throw InputError("noise_scale must be >= 0");
}

ad::NodeId pairwise_probs(ad::Tape& tape, ad::NodeId scores, double sigma) {
  if (!(sigma > 0.0)) throw InputError("sigma must be positive");
  const auto& y = tape.value(scores);
  if (y.cols() != 1) throw InputError("scores must be a column vector");
  // diff[v][u] = Y_v - Y_u via (n x 1) minus (1 x n) broadcast.
  ad::NodeId diff = tape.sub(scores, tape.transpose(scores));
  return tape.normal_cdf(tape.scalar_mul(diff, 1.0 / (std::sqrt(2.0) * sigma)));
}

RankMoments rank_moments(ad::Tape& tape, ad::NodeId pairwise, double eps) {
  const auto& p = tape.value(pairwise);
  const int n = static_cast<int>(p.rows());
  if (p.cols() != n) throw InputError("pairwise matrix must be square");
  ad::NodeId ones_row = tape.constant(Eigen::MatrixXd::Ones(1, n));
  // Column sums include the diagonal p_uu = 0.5 and q_uu = 0.25; remove them.
  ad::NodeId mu = tape.transpose(
      tape.sub(tape.matmul(ones_row, pairwise), tape.scalar(0.5)));
  ad::NodeId q = tape.mul(pairwise,
                          tape.sub(tape.constant(Eigen::MatrixXd::Ones(n, n)), pairwise));
  ad::NodeId var = tape.transpose(
      tape.sub(tape.matmul(ones_row, q), tape.scalar(0.25)));
  return {mu, tape.clamp_min(var, eps * eps)};
}

ad::NodeId rank_distribution(ad::Tape& tape, const RankMoments& moments, int n) {
  const auto& mu = tape.value(moments.mu);
  if (mu.rows() != n || mu.cols() != 1)
    throw InputError("rank_distribution: moment shape mismatch");
  Eigen::RowVectorXd pos = Eigen::RowVectorXd::LinSpaced(n, 0.0, n - 1.0);
  ad::NodeId hi = tape.constant((pos.array() + 0.5).matrix());
  ad::NodeId lo = tape.constant((pos.array() - 0.5).matrix());
  ad::NodeId sd = tape.sqrt(moments.var);
  // (1 x n) minus (n x 1) broadcasts to [u][i] = pos_i - mu_u.
  ad::NodeId upper = tape.normal_cdf(tape.div(tape.sub(hi, moments.mu), sd));
  ad::NodeId lower = tape.normal_cdf(tape.div(tape.sub(lo, moments.mu), sd));
  return tape.sub(upper, lower);
}

Eigen::MatrixXd gumbel_noise(int rows, int cols, double eps, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::MatrixXd g(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      g(i, j) = -std::log(-std::log(unif(rng) + eps) + eps);
  return g;
}

ad::NodeId gumbel_sinkhorn(ad::Tape& tape, ad::NodeId phat,
                           const GumbelSinkhornConfig& cfg,
                           std::uint64_t noise_seed) {
  cfg.validate();
  const auto& p = tape.value(phat);
  const int n = static_cast<int>(p.rows());
  if (p.cols() != n) throw InputError("gumbel_sinkhorn needs a square matrix");

  ad::NodeId logp = tape.log(tape.clamp_min(phat, cfg.eps));
  if (cfg.noise_scale > 0.0) {
    Eigen::MatrixXd noise =
        cfg.noise_scale * gumbel_noise(n, n, cfg.eps, noise_seed);
    logp = tape.add(logp, tape.constant(std::move(noise)));
  }
  logp = tape.scalar_mul(logp, 1.0 / cfg.tau);
  for (int it = 0; it < cfg.n_iters; ++it) {
    logp = tape.sub(logp, tape.logsumexp_cols(logp));
    logp = tape.sub(logp, tape.logsumexp_rows(logp));
  }
  return tape.exp(logp);
}

Permutation hard_permutation(const Eigen::VectorXd& scores) {
  if (!scores.allFinite()) throw InputError("scores must be finite");
  const int n = static_cast<int>(scores.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  return Permutation::from_old_of_new(std::move(order));
}

ad::NodeId soft_reorder(ad::Tape& tape, const SparseSymMatrix& a, ad::NodeId p,
                        int dense_bound) {
  if (a.n > dense_bound)
    throw InputError("soft_reorder dense bound exceeded: n = " +
                     std::to_string(a.n) + " > " + std::to_string(dense_bound));
  const auto& pv = tape.value(p);
  if (pv.rows() != a.n || pv.cols() != a.n)
    throw InputError("soft_reorder: permutation matrix shape mismatch");
  ad::NodeId ad_ = tape.constant(a.dense());
  return tape.matmul(tape.matmul(p, ad_), tape.transpose(p));
}

}  // namespace fillmin
