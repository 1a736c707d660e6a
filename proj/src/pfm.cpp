#include "fillmin/pfm.hpp"

#include <cmath>
#include <map>
#include <random>

#include "fillmin/errors.hpp"

namespace fillmin {

void PfmConfig::validate() const {
  if (!(lr > 0.0)) throw InputError("lr must be positive");
  if (!(sigma > 0.0)) throw InputError("sigma must be positive");
  if (!(rho > 0.0)) throw InputError("rho must be positive");
  if (!(eta > 0.0) && eta_step < 0.0)
    throw InputError("eta must be positive (or eta_step set explicitly)");
  if (!(step_size() > 0.0)) throw InputError("L step size must be positive");
  if (threshold() < 0.0) throw InputError("proximal threshold must be >= 0");
  if (n_admm < 1) throw InputError("n_admm must be >= 1");
  if (epochs < 1) throw InputError("epochs must be >= 1");
  if (dense_bound < 1) throw InputError("dense_bound must be >= 1");
  gumbel.validate();
}

double l1_norm(const Eigen::MatrixXd& m) { return m.array().abs().sum(); }

LossBreakdown augmented_lagrangian(const Eigen::MatrixXd& l,
                                   const Eigen::MatrixXd& p,
                                   const Eigen::MatrixXd& gamma,
                                   const SparseSymMatrix& a, double rho) {
  const int n = a.n;
  if (l.rows() != n || l.cols() != n || p.rows() != n || p.cols() != n ||
      gamma.rows() != n || gamma.cols() != n)
    throw InputError("augmented_lagrangian shape mismatch");
  Eigen::MatrixXd a_theta = p * a.dense() * p.transpose();
  Eigen::MatrixXd r = a_theta - l * l.transpose();
  LossBreakdown out;
  out.l1 = l1_norm(l);
  out.dual = gamma.cwiseProduct(r).sum();
  out.quad = 0.5 * rho * r.squaredNorm();
  out.total = out.l1 + out.dual + out.quad;
  return out;
}

Eigen::MatrixXd grad_L_dual_quad(const Eigen::MatrixXd& l,
                                 const Eigen::MatrixXd& a_theta,
                                 const Eigen::MatrixXd& gamma, double rho) {
  Eigen::MatrixXd r = a_theta - l * l.transpose();
  return -(gamma + gamma.transpose()) * l - rho * (r + r.transpose()) * l;
}

Eigen::MatrixXd prox_soft_threshold(const Eigen::MatrixXd& l, double eta) {
  if (eta < 0.0) throw InputError("prox threshold must be >= 0");
  Eigen::MatrixXd s =
      l.array().sign() * (l.array().abs() - eta).max(0.0);
  return s.triangularView<Eigen::Lower>();
}

Eigen::MatrixXd dual_update(const Eigen::MatrixXd& gamma,
                            const Eigen::MatrixXd& p, const SparseSymMatrix& a,
                            const Eigen::MatrixXd& l, double rho) {
  return gamma + rho * (p * a.dense() * p.transpose() - l * l.transpose());
}

ad::NodeId score_chain_reorder(ad::Tape& tape, ad::NodeId scores,
                               const SparseSymMatrix& a,
                               const GumbelSinkhornConfig& cfg,
                               std::uint64_t noise_seed, int dense_bound) {
  ad::NodeId p = pairwise_probs(tape, scores, cfg.sigma);
  RankMoments m = rank_moments(tape, p, cfg.eps);
  ad::NodeId phat = rank_distribution(tape, m, a.n);
  ad::NodeId soft = gumbel_sinkhorn(tape, phat, cfg, noise_seed);
  // Sinkhorn rows index nodes; Eq-5 style reordering wants positions as rows.
  return soft_reorder(tape, a, tape.transpose(soft), dense_bound);
}

ad::NodeId theta_objective(ad::Tape& tape, ad::NodeId a_theta,
                           const Eigen::MatrixXd& l,
                           const Eigen::MatrixXd& gamma, double rho) {
  ad::NodeId llt = tape.constant(l * l.transpose());
  ad::NodeId r = tape.sub(a_theta, llt);
  ad::NodeId dual = tape.trace_of_product(tape.constant(gamma), r);
  ad::NodeId quad = tape.scalar_mul(tape.frobenius_sq(r), 0.5 * rho);
  return tape.add(dual, quad);
}

Eigen::MatrixXd soft_permutation(const EncoderParams& params, const GraphView& g,
                                 const Eigen::MatrixXd& features,
                                 const GumbelSinkhornConfig& cfg,
                                 std::uint64_t noise_seed) {
  ad::Tape tape;
  TapeParams tp = register_params(tape, params, /*requires_grad=*/false);
  ad::NodeId y = encoder_scores(tape, params.config, tp, g, features);
  ad::NodeId p = pairwise_probs(tape, y, cfg.sigma);
  RankMoments m = rank_moments(tape, p, cfg.eps);
  ad::NodeId phat = rank_distribution(tape, m, g.n);
  ad::NodeId soft = gumbel_sinkhorn(tape, phat, cfg, noise_seed);
  return tape.value(soft).transpose();
}

namespace {

struct AdamState {
  int t = 0;
  std::map<std::string, Eigen::MatrixXd> m;
  std::map<std::string, Eigen::MatrixXd> v;
};

void adam_step(AdamState& state, EncoderParams& params,
               const std::map<std::string, Eigen::MatrixXd>& grads,
               const PfmConfig& cfg) {
  ++state.t;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double bc1 = 1.0 - std::pow(b1, state.t);
  const double bc2 = 1.0 - std::pow(b2, state.t);
  for (auto& [name, theta] : params.tensors) {
    const Eigen::MatrixXd& g = grads.at(name);
    auto mi = state.m.try_emplace(name, Eigen::MatrixXd::Zero(theta.rows(), theta.cols())).first;
    auto vi = state.v.try_emplace(name, Eigen::MatrixXd::Zero(theta.rows(), theta.cols())).first;
    mi->second = b1 * mi->second + (1.0 - b1) * g;
    vi->second = b2 * vi->second + (1.0 - b2) * g.cwiseProduct(g);
    Eigen::ArrayXXd mhat = mi->second.array() / bc1;
    Eigen::ArrayXXd vhat = vi->second.array() / bc2;
    theta.array() -= cfg.lr * mhat / (vhat.sqrt() + cfg.adam_eps);
  }
}

Eigen::MatrixXd random_dense(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = gauss(rng);
  return m;
}

}  // namespace

EncoderParams train(const std::vector<std::pair<std::string, SparseSymMatrix>>& matrices,
                    const PfmConfig& cfg, const TrainLog& log) {
  cfg.validate();
  if (matrices.empty()) throw InputError("empty training set");
  for (const auto& [id, a] : matrices) {
    a.validate();
    if (a.n > cfg.dense_bound)
      throw InputError("training matrix '" + id + "' exceeds dense bound " +
                       std::to_string(cfg.dense_bound));
  }

  GumbelSinkhornConfig gs = cfg.gumbel;
  gs.sigma = cfg.sigma;

  // Per-matrix graph and features, computed once.
  std::vector<GraphView> graphs;
  std::vector<Eigen::MatrixXd> features;
  graphs.reserve(matrices.size());
  for (const auto& [id, a] : matrices) {
    graphs.push_back(to_graph(a));
    features.push_back(spectral_features(graphs.back()));
  }

  EncoderParams params;
  if (cfg.encoder.mode == EncoderConfig::Mode::Direct) {
    for (const auto& [id, a] : matrices)
      if (a.n != matrices.front().second.n)
        throw InputError("direct mode needs equal matrix sizes");
    params = init_direct_params(cfg.encoder, features.front().col(0));
  } else {
    params = init_encoder_params(cfg.encoder, 2);
  }

  std::mt19937_64 rng(cfg.seed);
  AdamState adam;
  std::map<std::string, Eigen::MatrixXd> warm_l, warm_g;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t mi = 0; mi < matrices.size(); ++mi) {
      const std::string& id = matrices[mi].first;
      const SparseSymMatrix& a = matrices[mi].second;
      const GraphView& g = graphs[mi];
      const Eigen::MatrixXd& x = features[mi];
      const int n = a.n;
      const Eigen::MatrixXd a_dense = a.dense();

      try {
        Eigen::MatrixXd p_curr = soft_permutation(params, g, x, gs, rng());

        Eigen::MatrixXd l, gamma;
        if (cfg.warm_start && warm_l.count(id)) {
          l = warm_l[id];
          gamma = warm_g[id];
        } else if (cfg.l_init_identity) {
          l = Eigen::MatrixXd::Identity(n, n);
          gamma = Eigen::MatrixXd::Zero(n, n);
        } else {
          l = random_dense(n, rng).triangularView<Eigen::Lower>();
          gamma = random_dense(n, rng);
        }

        for (int k = 1; k <= cfg.n_admm; ++k) {
          // L-update: gradient step on the dual + quadratic terms, then the
          // proximal shrink and the lower-triangular mask. The gradient is
          // masked up front: L lives on the lower triangle, and the line
          // search must rate the step actually taken.
          Eigen::MatrixXd a_theta = p_curr * a_dense * p_curr.transpose();
          Eigen::MatrixXd grad = Eigen::MatrixXd(
              grad_L_dual_quad(l, a_theta, gamma, cfg.rho).triangularView<Eigen::Lower>());
          double step = cfg.step_size();
          if (cfg.backtracking) {
            auto smooth = [&](const Eigen::MatrixXd& m) {
              Eigen::MatrixXd r = a_theta - m * m.transpose();
              return gamma.cwiseProduct(r).sum() + 0.5 * cfg.rho * r.squaredNorm();
            };
            double base = smooth(l);
            while (step > 1e-12 && smooth((l - step * grad).eval()) > base)
              step *= 0.5;
          }
          l = prox_soft_threshold(l - step * grad, cfg.threshold());

          // theta-update through Adam, with the Gumbel noise sampled once
          // per evaluation and frozen for the backward pass.
          {
            ad::Tape tape;
            TapeParams tp = register_params(tape, params, /*requires_grad=*/true);
            ad::NodeId y = encoder_scores(tape, params.config, tp, g, x);
            ad::NodeId a_th = score_chain_reorder(tape, y, a, gs, rng(), cfg.dense_bound);
            ad::NodeId obj = theta_objective(tape, a_th, l, gamma, cfg.rho);
            tape.backward(obj);
            std::map<std::string, Eigen::MatrixXd> grads;
            for (const auto& [name, nid] : tp.id) grads[name] = tape.grad(nid);
            adam_step(adam, params, grads, cfg);
          }

          // Recompute Y and P_theta with the updated parameters.
          p_curr = soft_permutation(params, g, x, gs, rng());

          Eigen::MatrixXd r = p_curr * a_dense * p_curr.transpose() - l * l.transpose();
          TrainLogEntry entry;
          entry.epoch = epoch;
          entry.matrix_id = id;
          entry.k = k;
          entry.l1 = l1_norm(l);
          entry.dual = gamma.cwiseProduct(r).sum();
          entry.quad = 0.5 * cfg.rho * r.squaredNorm();
          entry.residual_fro = r.norm();
          if (!std::isfinite(entry.l1) || !std::isfinite(entry.dual) ||
              !std::isfinite(entry.quad) || !std::isfinite(entry.residual_fro))
            throw DivergenceError("non-finite loss at epoch " +
                                  std::to_string(epoch) + ", matrix '" + id +
                                  "', iteration " + std::to_string(k));

          gamma += cfg.rho * r;
          if (log) log(entry);
        }

        if (cfg.warm_start) {
          warm_l[id] = l;
          warm_g[id] = gamma;
        }
      } catch (const std::runtime_error& e) {
        if (dynamic_cast<const DivergenceError*>(&e)) throw;
        throw DivergenceError("training failed at epoch " + std::to_string(epoch) +
                              ", matrix '" + id + "': " + e.what());
      }
    }
  }
  return params;
}

Permutation infer_ordering(const SparseSymMatrix& a, const EncoderParams& params) {
  if (params.config.mode == EncoderConfig::Mode::Direct) {
    const Eigen::MatrixXd& scores = params.tensors.at("scores");
    if (scores.rows() != a.n)
      throw InputError("direct checkpoint is for n = " +
                       std::to_string(scores.rows()) + ", matrix has n = " +
                       std::to_string(a.n));
    return hard_permutation(scores.col(0));
  }
  GraphView g = to_graph(a);
  Eigen::MatrixXd x = spectral_features(g);
  ad::Tape tape;
  TapeParams tp = register_params(tape, params, /*requires_grad=*/false);
  ad::NodeId y = encoder_scores(tape, params.config, tp, g, x);
  return hard_permutation(tape.value(y).col(0));
}

}  // namespace fillmin
