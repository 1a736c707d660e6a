#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "fd_check.hpp"
#include "fillmin/errors.hpp"
#include "fillmin/fill.hpp"
#include "fillmin/orderings.hpp"
#include "fillmin/pfm.hpp"

using namespace fillmin;

namespace {

std::mt19937_64 g_rng(808);

Eigen::MatrixXd randn(int rows, int cols) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = gauss(g_rng);
  return m;
}

PfmConfig small_config() {
  PfmConfig cfg;
  cfg.encoder.mode = EncoderConfig::Mode::Direct;
  cfg.n_admm = 10;
  cfg.epochs = 2;
  cfg.gumbel.n_iters = 10;
  return cfg;
}

}  // namespace

TEST_CASE("l1 norm basics") {
  CHECK(l1_norm(Eigen::MatrixXd::Identity(3, 3)) == 3.0);
  CHECK(l1_norm(Eigen::MatrixXd::Zero(4, 2)) == 0.0);
  Eigen::MatrixXd m(2, 2);
  m << 2, 0, -3, 1;
  CHECK(l1_norm(m) == 6.0);
}

TEST_CASE("augmented lagrangian at a feasible point") {
  SparseSymMatrix a = generate_random_spd(6, 0.4, 12);
  Eigen::MatrixXd l = dense_cholesky(a.dense());
  LossBreakdown lb = augmented_lagrangian(l, Eigen::MatrixXd::Identity(6, 6),
                                          Eigen::MatrixXd::Zero(6, 6), a, 1.0);
  CHECK(lb.dual == 0.0);
  CHECK(lb.quad <= 1e-12);
  CHECK(lb.total == doctest::Approx(l1_norm(l)).epsilon(1e-12));
}

TEST_CASE("augmented lagrangian with L = 0 is half the squared norm") {
  SparseSymMatrix a = generate_random_spd(5, 0.5, 4);
  LossBreakdown lb = augmented_lagrangian(Eigen::MatrixXd::Zero(5, 5),
                                          Eigen::MatrixXd::Identity(5, 5),
                                          Eigen::MatrixXd::Zero(5, 5), a, 1.0);
  CHECK(lb.total == doctest::Approx(0.5 * a.dense().squaredNorm()).epsilon(1e-12));
}

TEST_CASE("augmented lagrangian matches an independent scalar recomputation") {
  SparseSymMatrix a = generate_random_spd(6, 0.5, 77);
  Eigen::MatrixXd l = randn(6, 6).triangularView<Eigen::Lower>();
  Eigen::MatrixXd p = Eigen::MatrixXd::Identity(6, 6);
  // Random permutation matrix keeps the reorder path honest.
  std::vector<int> perm{3, 1, 5, 0, 2, 4};
  p.setZero();
  for (int i = 0; i < 6; ++i) p(i, perm[i]) = 1.0;
  Eigen::MatrixXd gamma = randn(6, 6);
  double rho = 1.7;
  LossBreakdown lb = augmented_lagrangian(l, p, gamma, a, rho);

  // Element-by-element recomputation without matrix expressions.
  Eigen::MatrixXd ad = a.dense();
  double l1 = 0.0, dual = 0.0, quad = 0.0;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      l1 += std::abs(l(i, j));
      double a_theta = ad(perm[i], perm[j]);
      double llt = 0.0;
      for (int k = 0; k < 6; ++k) llt += l(i, k) * l(j, k);
      double r = a_theta - llt;
      dual += gamma(i, j) * r;
      quad += 0.5 * rho * r * r;
    }
  CHECK(lb.l1 == doctest::Approx(l1).epsilon(1e-12));
  CHECK(lb.dual == doctest::Approx(dual).epsilon(1e-10));
  CHECK(lb.quad == doctest::Approx(quad).epsilon(1e-10));
  CHECK(lb.total == doctest::Approx(l1 + dual + quad).epsilon(1e-10));
}

TEST_CASE("grad_L vanishes at a stationary feasible point") {
  SparseSymMatrix a = generate_random_spd(5, 0.6, 9);
  Eigen::MatrixXd l = dense_cholesky(a.dense());
  Eigen::MatrixXd g = grad_L_dual_quad(l, a.dense(), Eigen::MatrixXd::Zero(5, 5), 1.0);
  CHECK(g.cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("grad_L is zero at L = 0") {
  Eigen::MatrixXd g = grad_L_dual_quad(Eigen::MatrixXd::Zero(4, 4), randn(4, 4),
                                       randn(4, 4), 2.0);
  CHECK(g.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("grad_L matches finite differences") {
  for (int trial = 0; trial < 5; ++trial) {
    int n = 5;
    Eigen::MatrixXd a_theta = randn(n, n);
    a_theta = (a_theta + a_theta.transpose()).eval();
    Eigen::MatrixXd gamma = randn(n, n);
    double rho = 0.8;
    Eigen::MatrixXd l0 = randn(n, n);
    auto res = fdcheck::check_gradients(
        [&](ad::Tape& t, const std::vector<ad::NodeId>& in) {
          ad::NodeId r = t.sub(t.constant(a_theta),
                               t.matmul(in[0], t.transpose(in[0])));
          return t.add(t.trace_of_product(t.constant(gamma), r),
                       t.scalar_mul(t.frobenius_sq(r), 0.5 * rho));
        },
        {l0});
    CHECK(res.max_rel_error <= 1e-5);
    // The tape path itself agrees with the closed form.
    ad::Tape tape;
    ad::NodeId l = tape.input(l0, true);
    ad::NodeId r = tape.sub(tape.constant(a_theta), tape.matmul(l, tape.transpose(l)));
    tape.backward(tape.add(tape.trace_of_product(tape.constant(gamma), r),
                           tape.scalar_mul(tape.frobenius_sq(r), 0.5 * rho)));
    Eigen::MatrixXd closed = grad_L_dual_quad(l0, a_theta, gamma, rho);
    CHECK((tape.grad(l) - closed).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("soft threshold examples") {
  Eigen::MatrixXd m(1, 1);
  m << 0.5;
  CHECK(prox_soft_threshold(m, 0.2)(0, 0) == doctest::Approx(0.3));
  m << -0.1;
  CHECK(prox_soft_threshold(m, 0.2)(0, 0) == 0.0);
  m << -0.5;
  CHECK(prox_soft_threshold(m, 0.2)(0, 0) == doctest::Approx(-0.3));

  Eigen::MatrixXd big = Eigen::MatrixXd::Constant(3, 3, 5.0);
  Eigen::MatrixXd out = prox_soft_threshold(big, 0.5);
  CHECK(out(0, 1) == 0.0);  // upper triangle masked
  CHECK(out(0, 2) == 0.0);
  CHECK(out(1, 0) == doctest::Approx(4.5));
  CHECK(out(1, 1) == doctest::Approx(4.5));
}

TEST_CASE("dual update: feasible point and zero rho leave Gamma unchanged") {
  SparseSymMatrix a = generate_random_spd(4, 0.6, 2);
  Eigen::MatrixXd l = dense_cholesky(a.dense());
  Eigen::MatrixXd gamma = randn(4, 4);
  Eigen::MatrixXd next = dual_update(gamma, Eigen::MatrixXd::Identity(4, 4), a, l, 1.0);
  CHECK((next - gamma).cwiseAbs().maxCoeff() <= 1e-10);
  Eigen::MatrixXd l2 = randn(4, 4);
  CHECK((dual_update(gamma, Eigen::MatrixXd::Identity(4, 4), a, l2, 0.0) - gamma).norm() == 0.0);
}

TEST_CASE("dual update matches the dense formula") {
  SparseSymMatrix a = generate_random_spd(4, 0.7, 21);
  Eigen::MatrixXd gamma = randn(4, 4);
  Eigen::MatrixXd l = randn(4, 4).triangularView<Eigen::Lower>();
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(4, 4);
  std::vector<int> perm{2, 0, 3, 1};
  for (int i = 0; i < 4; ++i) p(i, perm[i]) = 1.0;
  double rho = 1.3;
  Eigen::MatrixXd expect =
      gamma + rho * (p * a.dense() * p.transpose() - l * l.transpose());
  CHECK((dual_update(gamma, p, a, l, rho) - expect).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("theta objective is deterministic given the noise seed") {
  SparseSymMatrix a = generate_random_spd(8, 0.3, 5);
  GumbelSinkhornConfig gs;
  gs.sigma = 0.3;
  gs.n_iters = 8;
  Eigen::VectorXd scores = randn(8, 1);
  Eigen::MatrixXd l = randn(8, 8).triangularView<Eigen::Lower>();
  Eigen::MatrixXd gamma = randn(8, 8);
  auto eval = [&](std::uint64_t seed) {
    ad::Tape tape;
    ad::NodeId y = tape.input(scores, false);
    ad::NodeId a_th = score_chain_reorder(tape, y, a, gs, seed);
    return tape.value(theta_objective(tape, a_th, l, gamma, 1.0))(0, 0);
  };
  CHECK(eval(42) == eval(42));
  CHECK(eval(42) != eval(43));
}

TEST_CASE("theta gradients vanish when P is pinned to a constant") {
  SparseSymMatrix a = generate_random_spd(6, 0.4, 6);
  ad::Tape tape;
  tape.set_debug(true);
  ad::NodeId theta = tape.input(randn(6, 1), true);
  // P does not depend on theta.
  Eigen::MatrixXd p0 = Eigen::MatrixXd::Identity(6, 6);
  ad::NodeId a_th = soft_reorder(tape, a, tape.constant(p0));
  ad::NodeId obj = theta_objective(tape, a_th, randn(6, 6), randn(6, 6), 1.0);
  tape.backward(obj);
  CHECK(tape.grad(theta).norm() == 0.0);
  CHECK(tape.disconnected_inputs().size() == 1);
}

TEST_CASE("theta objective gradient matches finite differences with fixed noise") {
  SparseSymMatrix a = generate_random_spd(8, 0.35, 11);
  GumbelSinkhornConfig gs;
  gs.sigma = 0.5;
  gs.tau = 0.5;
  gs.n_iters = 8;
  Eigen::MatrixXd l = randn(8, 8).triangularView<Eigen::Lower>();
  Eigen::MatrixXd gamma = randn(8, 8);
  auto res = fdcheck::check_gradients(
      [&](ad::Tape& t, const std::vector<ad::NodeId>& in) {
        ad::NodeId a_th = score_chain_reorder(t, in[0], a, gs, 911);
        return theta_objective(t, a_th, l, gamma, 1.0);
      },
      {randn(8, 1)});
  CHECK(res.max_rel_error <= 1e-3);
  CHECK(res.checked > 0);
}

TEST_CASE("training a 1x1 matrix drives L toward the thresholded root") {
  std::vector<Triplet> t{{0, 0, 4.0}};
  SparseSymMatrix a = matrix_from_triplets(1, std::move(t));
  PfmConfig cfg = small_config();
  cfg.n_admm = 400;
  cfg.epochs = 1;
  cfg.eta = 0.01;
  cfg.backtracking = false;  // mirror the fixed-step scalar recursion below
  std::vector<TrainLogEntry> log;
  train({{"scalar", a}}, cfg, [&](const TrainLogEntry& e) { log.push_back(e); });
  REQUIRE(!log.empty());

  // Scalar oracle: same recursion from a reference start converges to a
  // fixed point near 2 regardless of initialization.
  double l = 1.0, gamma = 0.0;
  for (int k = 0; k < 400; ++k) {
    double r = 4.0 - l * l;
    double grad = -2.0 * gamma * l - 2.0 * cfg.rho * r * l;
    double shifted = l - cfg.eta * grad;
    l = std::copysign(std::max(std::abs(shifted) - cfg.eta, 0.0), shifted);
    gamma += cfg.rho * (4.0 - l * l);
  }
  CHECK(std::abs(log.back().l1 - std::abs(l)) <= 0.2);
  CHECK(std::abs(log.back().l1 - 2.0) <= 0.3);
  // Residual |4 - L^2| shrinks over training.
  CHECK(log.back().residual_fro < log.front().residual_fro);
}

TEST_CASE("training is deterministic across runs") {
  std::vector<std::pair<std::string, SparseSymMatrix>> matrices;
  for (int i = 0; i < 3; ++i)
    matrices.emplace_back("g" + std::to_string(i), generate_grid_laplacian(3, 4 + i));
  // Direct mode needs one size; use sage mode over different sizes.
  PfmConfig cfg;
  cfg.encoder.mode = EncoderConfig::Mode::Sage;
  cfg.encoder.hidden_dim = 4;
  cfg.n_admm = 3;
  cfg.epochs = 2;
  cfg.gumbel.n_iters = 8;
  cfg.seed = 31;
  EncoderParams a = train(matrices, cfg);
  EncoderParams b = train(matrices, cfg);
  REQUIRE(a.tensors.size() == b.tensors.size());
  for (const auto& [name, tensor] : a.tensors) CHECK(tensor == b.tensors.at(name));
}

TEST_CASE("direct-mode training on a grid does not lose to the natural order") {
  SparseSymMatrix a = generate_grid_laplacian(4, 10);
  PfmConfig cfg = small_config();
  cfg.n_admm = 30;
  cfg.epochs = 2;
  cfg.seed = 7;
  EncoderParams params = train({{"grid", a}}, cfg);
  Permutation p = infer_ordering(a, params);
  CHECK(symbolic_fill(a, p).fill_count <=
        symbolic_fill(a, natural_ordering(a.n)).fill_count);
}

TEST_CASE("upper triangle of L stays exactly zero through training") {
  SparseSymMatrix a = generate_random_spd(12, 0.2, 3);
  PfmConfig cfg = small_config();
  cfg.n_admm = 5;
  cfg.epochs = 1;
  // The log reports l1 of the masked L; verify the invariant through the
  // library prox path directly as well.
  Eigen::MatrixXd l = randn(12, 12);
  for (int k = 0; k < 10; ++k) {
    l = prox_soft_threshold(l - 0.05 * grad_L_dual_quad(l, a.dense(),
                                                        Eigen::MatrixXd::Zero(12, 12), 1.0),
                            0.01);
    for (int i = 0; i < 12; ++i)
      for (int j = i + 1; j < 12; ++j) REQUIRE(l(i, j) == 0.0);
  }
  CHECK(train({{"m", a}}, cfg).tensors.count("scores") == 1);
}

TEST_CASE("infer ordering: n=1 and determinism") {
  std::vector<Triplet> t{{0, 0, 2.0}};
  SparseSymMatrix one = matrix_from_triplets(1, std::move(t));
  EncoderConfig cfg;
  cfg.mode = EncoderConfig::Mode::Direct;
  EncoderParams params = init_direct_params(cfg, Eigen::VectorXd::Zero(1));
  CHECK(infer_ordering(one, params).old_of_new == std::vector<int>{0});

  SparseSymMatrix a = generate_grid_laplacian(3, 5);
  EncoderConfig scfg;
  scfg.mode = EncoderConfig::Mode::Multigrid;
  scfg.seed = 9;
  EncoderParams sp = init_encoder_params(scfg, 2);
  Permutation p1 = infer_ordering(a, sp);
  Permutation p2 = infer_ordering(a, sp);
  CHECK(p1.old_of_new == p2.old_of_new);

  EncoderParams wrong = init_direct_params(cfg, Eigen::VectorXd::Zero(4));
  CHECK_THROWS_AS(infer_ordering(a, wrong), InputError);
}

TEST_CASE("training rejects bad configs and empty sets") {
  PfmConfig cfg = small_config();
  cfg.rho = -1.0;
  CHECK_THROWS_AS(cfg.validate(), InputError);
  PfmConfig ok = small_config();
  CHECK_THROWS_AS(train({}, ok), InputError);

  SparseSymMatrix a = generate_grid_laplacian(4, 4);
  PfmConfig tiny = small_config();
  tiny.dense_bound = 8;
  CHECK_THROWS_AS(train({{"g", a}}, tiny), InputError);
}

TEST_CASE("one L step with a tiny eta does not raise the total loss") {
  for (int trial = 0; trial < 10; ++trial) {
    int n = 6 + static_cast<int>(g_rng() % 6);
    SparseSymMatrix a = generate_random_spd(n, 0.4, g_rng());
    Eigen::MatrixXd p = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd gamma = randn(n, n);
    Eigen::MatrixXd l = randn(n, n).triangularView<Eigen::Lower>();
    const double eta = 1e-4;
    double before = augmented_lagrangian(l, p, gamma, a, 1.0).total;
    Eigen::MatrixXd next = prox_soft_threshold(
        l - eta * grad_L_dual_quad(l, a.dense(), gamma, 1.0), eta);
    double after = augmented_lagrangian(next, p, gamma, a, 1.0).total;
    CHECK(after <= before + 1e-9);
  }
}

TEST_CASE("loss breakdown total is consistent") {
  SparseSymMatrix a = generate_random_spd(7, 0.4, 15);
  Eigen::MatrixXd l = randn(7, 7).triangularView<Eigen::Lower>();
  Eigen::MatrixXd gamma = randn(7, 7);
  LossBreakdown lb =
      augmented_lagrangian(l, Eigen::MatrixXd::Identity(7, 7), gamma, a, 1.0);
  CHECK(lb.total ==
        doctest::Approx(lb.l1 + lb.dual + lb.quad).epsilon(1e-10));
}
