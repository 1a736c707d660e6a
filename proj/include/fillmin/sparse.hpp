#ifndef FILLMIN_SPARSE_HPP
#define FILLMIN_SPARSE_HPP

#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

namespace fillmin {

/// Compressed sparse rows of a structurally symmetric matrix. Both triangles
/// and the full diagonal are stored; column indices are strictly increasing
/// within each row. Immutable after construction.
struct SparseSymMatrix {
  int n = 0;
  std::vector<int> row_ptr;     // length n+1
  std::vector<int> col_idx;     // length nnz
  std::vector<double> values;   // length nnz

  int nnz() const { return static_cast<int>(col_idx.size()); }

  // Value at (i,j), 0 when the entry is not stored.
  double entry(int i, int j) const;
  bool has_entry(int i, int j) const;

  Eigen::MatrixXd dense() const;

  // Checks structural symmetry (values equal within 1e-12 relative), a fully
  // present nonzero diagonal, and sorted duplicate-free rows. Throws
  // InputError on violation.
  void validate() const;
};

struct Triplet {
  int row;
  int col;
  double value;
};

// Builds CSR from an unordered triplet list carrying both triangles.
// Duplicate (row,col) pairs are rejected.
SparseSymMatrix matrix_from_triplets(int n, std::vector<Triplet> entries);

/// Bijection between new and old indices: old_of_new[i] is the original index
/// placed at new position i. As a matrix, P[i][j] = 1 iff j = old_of_new[i],
/// so (P A Pt)[i][j] = A[old_of_new[i]][old_of_new[j]].
struct Permutation {
  std::vector<int> old_of_new;
  std::vector<int> new_of_old;

  int n() const { return static_cast<int>(old_of_new.size()); }

  static Permutation identity(int n);
  // Validates bijectivity and fills the inverse array.
  static Permutation from_old_of_new(std::vector<int> old_of_new);

  Permutation inverse() const;

  // (p.compose(q)).old_of_new[i] = q.old_of_new[p.old_of_new[i]].
  Permutation compose(const Permutation& q) const;

  Eigen::MatrixXd dense() const;
};

/// Undirected adjacency view of the off-diagonal pattern. No self-loops.
/// weight carries edge weights parallel to adj (1.0 for matrix-derived
/// graphs; coarsening aggregates them).
struct GraphView {
  int n = 0;
  std::vector<std::vector<int>> adj;        // sorted neighbor lists
  std::vector<std::vector<double>> weight;  // parallel to adj
  std::vector<int> degree;                  // adj[i].size()

  std::vector<double> weighted_degree() const;
};

SparseSymMatrix parse_matrix_market(std::istream& in);
void write_matrix_market(const SparseSymMatrix& a, std::ostream& out);

SparseSymMatrix apply_permutation(const SparseSymMatrix& a,
                                  const Permutation& p);

GraphView to_graph(const SparseSymMatrix& a);

// 5-point-stencil grid Laplacian with identity shift (diagonal = degree + 1),
// node (r,c) -> r*cols + c. SPD by construction.
SparseSymMatrix generate_grid_laplacian(int rows, int cols);

// Symmetric pattern with approximately density*n^2 stored entries and a
// diagonally dominant diagonal (1 + sum of absolute off-diagonal row
// entries). Deterministic per seed.
SparseSymMatrix generate_random_spd(int n, double density, std::uint64_t seed);

// Plain text, one 0-based old_of_new index per line.
void write_permutation(const Permutation& p, std::ostream& out);
Permutation read_permutation(std::istream& in);

}  // namespace fillmin

#endif  // FILLMIN_SPARSE_HPP
