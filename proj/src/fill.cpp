#include "fillmin/fill.hpp"

#include <bit>
#include <cmath>
#include <cstdint>

#include <nlohmann/json.hpp>

#include "fillmin/errors.hpp"

namespace fillmin {

namespace {

// Square bit matrix with 64-bit word rows; adjacency of the evolving
// elimination graph.
class BitRows {
 public:
  explicit BitRows(int n)
      : words_((n + 63) / 64), bits_(static_cast<std::size_t>(n) * words_, 0) {}

  void set(int i, int j) { row(i)[j >> 6] |= std::uint64_t{1} << (j & 63); }

  // Bits 0..b inclusive within one word.
  static std::uint64_t mask_le(int b) {
    return b == 63 ? ~std::uint64_t{0} : (std::uint64_t{2} << b) - 1;
  }
  std::uint64_t* row(int i) { return bits_.data() + static_cast<std::size_t>(i) * words_; }
  const std::uint64_t* row(int i) const {
    return bits_.data() + static_cast<std::size_t>(i) * words_;
  }
  int words() const { return words_; }

  // Appends all set columns > k of row i to out.
  void collect_above(int i, int k, std::vector<int>& out) const {
    const std::uint64_t* r = row(i);
    for (int w = k >> 6; w < words_; ++w) {
      std::uint64_t m = r[w];
      if (w == (k >> 6)) m &= ~mask_le(k & 63);  // clear <= k
      while (m) {
        int b = std::countr_zero(m);
        out.push_back(w * 64 + b);
        m &= m - 1;
      }
    }
  }

 private:
  int words_;
  std::vector<std::uint64_t> bits_;
};

}  // namespace

std::int64_t FactorPattern::nnz() const {
  std::int64_t total = 0;
  for (const auto& c : cols) total += static_cast<std::int64_t>(c.size());
  return total;
}

std::string FillReport::to_json() const {
  nlohmann::json j;
  j["nnz_A"] = nnz_A;
  j["nnz_L"] = nnz_L;
  j["fill_count"] = fill_count;
  j["fill_ratio"] = fill_ratio;
  return j.dump();
}

FillReport symbolic_fill(const SparseSymMatrix& a, const Permutation& p) {
  if (p.n() != a.n)
    throw InputError("permutation size does not match matrix size");
  const int n = a.n;
  BitRows adj(n);
  for (int i = 0; i < n; ++i)
    for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
      int j = a.col_idx[k];
      if (j == i) continue;
      adj.set(p.new_of_old[i], p.new_of_old[j]);
    }

  std::int64_t nnz_L = 0;
  std::vector<int> nbrs;
  const int words = adj.words();
  for (int k = 0; k < n; ++k) {
    nbrs.clear();
    adj.collect_above(k, k, nbrs);  // rows < k were already eliminated
    nnz_L += 1 + static_cast<std::int64_t>(nbrs.size());
    // Clique the remaining neighbors: or the pivot's tail row into each.
    const std::uint64_t* pivot = adj.row(k);
    for (int v : nbrs) {
      std::uint64_t* rv = adj.row(v);
      for (int w = k >> 6; w < words; ++w) rv[w] |= pivot[w];
      // v must not gain a self-loop or edges to eliminated nodes <= k.
      rv[v >> 6] &= ~(std::uint64_t{1} << (v & 63));
      for (int w = 0; w < (k >> 6); ++w) rv[w] = 0;
      rv[k >> 6] &= ~BitRows::mask_le(k & 63);
    }
  }

  FillReport r;
  r.nnz_A = a.nnz();
  r.nnz_L = nnz_L;
  r.fill_count = 2 * nnz_L - n - r.nnz_A;
  r.fill_ratio = static_cast<double>(r.fill_count) / static_cast<double>(r.nnz_A);
  return r;
}

FactorPattern brute_force_fill(const SparseSymMatrix& a, const Permutation& p,
                               int bound) {
  if (p.n() != a.n)
    throw InputError("permutation size does not match matrix size");
  if (a.n > bound)
    throw InputError("brute-force oracle bound exceeded: n = " +
                     std::to_string(a.n) + " > " + std::to_string(bound));
  const int n = a.n;
  std::vector<std::vector<bool>> pat(n, std::vector<bool>(n, false));
  for (int i = 0; i < n; ++i) {
    pat[i][i] = true;
    for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
      pat[p.new_of_old[i]][p.new_of_old[a.col_idx[k]]] = true;
  }
  for (int k = 0; k < n; ++k)
    for (int i = k + 1; i < n; ++i) {
      if (!pat[i][k]) continue;
      for (int j = k + 1; j < n; ++j)
        if (pat[k][j]) pat[i][j] = true;
    }

  FactorPattern f;
  f.n = n;
  f.cols.resize(n);
  for (int j = 0; j < n; ++j)
    for (int i = j; i < n; ++i)
      if (pat[i][j]) f.cols[j].push_back(i);
  return f;
}

FillReport report_from_pattern(const FactorPattern& pattern, std::int64_t nnz_A) {
  FillReport r;
  r.nnz_A = nnz_A;
  r.nnz_L = pattern.nnz();
  r.fill_count = 2 * r.nnz_L - pattern.n - nnz_A;
  r.fill_ratio = static_cast<double>(r.fill_count) / static_cast<double>(nnz_A);
  return r;
}

Eigen::MatrixXd dense_cholesky(const Eigen::MatrixXd& a, double tol) {
  if (a.rows() != a.cols()) throw InputError("dense_cholesky needs a square matrix");
  const int n = static_cast<int>(a.rows());
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    double d = a(j, j) - l.row(j).head(j).squaredNorm();
    if (d <= tol) throw NotSpdError(j, d);
    l(j, j) = std::sqrt(d);
    for (int i = j + 1; i < n; ++i)
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
  }
  return l;
}

}  // namespace fillmin
