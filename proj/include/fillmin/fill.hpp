#ifndef FILLMIN_FILL_HPP
#define FILLMIN_FILL_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fillmin/sparse.hpp"

namespace fillmin {

/// Structural fill statistics of a no-pivot Cholesky factorization under a
/// given ordering. fill_count counts both L and U = Lt:
/// 2*nnz_L - n - nnz_A.
struct FillReport {
  std::int64_t nnz_A = 0;
  std::int64_t nnz_L = 0;  // lower triangle including diagonal
  std::int64_t fill_count = 0;
  double fill_ratio = 0.0;

  std::string to_json() const;
};

/// Row-index sets of the factor columns (diagonal included), in the permuted
/// index space.
struct FactorPattern {
  int n = 0;
  std::vector<std::vector<int>> cols;  // sorted row indices > j plus j itself

  std::int64_t nnz() const;
};

// Exact structural elimination by elimination-graph simulation: at step k the
// pivot's remaining neighbors become a clique. Values are ignored.
FillReport symbolic_fill(const SparseSymMatrix& a, const Permutation& p);

// Independent oracle: dense Boolean Gaussian elimination on the permuted
// pattern. Bound guards the quadratic memory.
FactorPattern brute_force_fill(const SparseSymMatrix& a, const Permutation& p,
                               int bound = 512);

FillReport report_from_pattern(const FactorPattern& pattern,
                               std::int64_t nnz_A);

// Numeric lower-triangular factor with positive diagonal; throws NotSpdError
// with the failing pivot index when a pivot drops below tol.
Eigen::MatrixXd dense_cholesky(const Eigen::MatrixXd& a, double tol = 1e-12);

}  // namespace fillmin

#endif  // FILLMIN_FILL_HPP
