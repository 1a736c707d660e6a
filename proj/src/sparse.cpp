#include "fillmin/sparse.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <unordered_set>

#include "fillmin/errors.hpp"

namespace fillmin {

namespace {

int find_entry(const SparseSymMatrix& a, int i, int j) {
  if (i < 0 || i >= a.n || j < 0 || j >= a.n) return -1;
  auto begin = a.col_idx.begin() + a.row_ptr[i];
  auto end = a.col_idx.begin() + a.row_ptr[i + 1];
  auto it = std::lower_bound(begin, end, j);
  if (it == end || *it != j) return -1;
  return static_cast<int>(it - a.col_idx.begin());
}

}  // namespace

double SparseSymMatrix::entry(int i, int j) const {
  int k = find_entry(*this, i, j);
  return k < 0 ? 0.0 : values[k];
}

bool SparseSymMatrix::has_entry(int i, int j) const {
  return find_entry(*this, i, j) >= 0;
}

Eigen::MatrixXd SparseSymMatrix::dense() const {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k) d(i, col_idx[k]) = values[k];
  return d;
}

void SparseSymMatrix::validate() const {
  if (n <= 0) throw InputError("empty matrix");
  if (static_cast<int>(row_ptr.size()) != n + 1)
    throw InputError("row_ptr has wrong length");
  if (col_idx.size() != values.size())
    throw InputError("col_idx/values length mismatch");
  for (int i = 0; i < n; ++i) {
    if (row_ptr[i] > row_ptr[i + 1]) throw InputError("row_ptr not monotone");
    for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
      int j = col_idx[k];
      if (j < 0 || j >= n) throw InputError("column index out of range");
      if (k > row_ptr[i] && col_idx[k - 1] >= j)
        throw InputError("row " + std::to_string(i) +
                         " has unsorted or duplicate column indices");
    }
  }
  for (int i = 0; i < n; ++i) {
    int d = find_entry(*this, i, i);
    if (d < 0)
      throw InputError("missing diagonal entry at row " + std::to_string(i));
    if (values[d] == 0.0)
      throw InputError("zero diagonal entry at row " + std::to_string(i));
    for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
      int j = col_idx[k];
      int t = find_entry(*this, j, i);
      if (t < 0)
        throw InputError("structural asymmetry: entry (" + std::to_string(i) +
                         "," + std::to_string(j) + ") has no transpose");
      double u = values[k], v = values[t];
      if (std::abs(u - v) > 1e-12 * std::max(std::abs(u), std::abs(v)))
        throw InputError("value asymmetry at (" + std::to_string(i) + "," +
                         std::to_string(j) + ")");
    }
  }
}

SparseSymMatrix matrix_from_triplets(int n, std::vector<Triplet> entries) {
  if (n <= 0) throw InputError("empty matrix");
  for (const Triplet& t : entries)
    if (t.row < 0 || t.row >= n || t.col < 0 || t.col >= n)
      throw InputError("entry (" + std::to_string(t.row + 1) + "," +
                       std::to_string(t.col + 1) + ") out of range for n = " +
                       std::to_string(n));
  std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  for (std::size_t k = 1; k < entries.size(); ++k)
    if (entries[k].row == entries[k - 1].row && entries[k].col == entries[k - 1].col)
      throw InputError("duplicate entry (" + std::to_string(entries[k].row + 1) +
                       "," + std::to_string(entries[k].col + 1) + ")");
  SparseSymMatrix a;
  a.n = n;
  a.row_ptr.assign(n + 1, 0);
  a.col_idx.reserve(entries.size());
  a.values.reserve(entries.size());
  for (const Triplet& t : entries) ++a.row_ptr[t.row + 1];
  for (int i = 0; i < n; ++i) a.row_ptr[i + 1] += a.row_ptr[i];
  for (const Triplet& t : entries) {
    a.col_idx.push_back(t.col);
    a.values.push_back(t.value);
  }
  return a;
}

Permutation Permutation::identity(int n) {
  Permutation p;
  p.old_of_new.resize(n);
  p.new_of_old.resize(n);
  for (int i = 0; i < n; ++i) p.old_of_new[i] = p.new_of_old[i] = i;
  return p;
}

Permutation Permutation::from_old_of_new(std::vector<int> old_of_new) {
  const int n = static_cast<int>(old_of_new.size());
  std::vector<int> inv(n, -1);
  for (int i = 0; i < n; ++i) {
    int v = old_of_new[i];
    if (v < 0 || v >= n)
      throw InputError("permutation entry " + std::to_string(v) +
                       " out of range");
    if (inv[v] != -1)
      throw InputError("permutation is not a bijection: index " +
                       std::to_string(v) + " repeated");
    inv[v] = i;
  }
  Permutation p;
  p.old_of_new = std::move(old_of_new);
  p.new_of_old = std::move(inv);
  return p;
}

Permutation Permutation::inverse() const {
  Permutation p;
  p.old_of_new = new_of_old;
  p.new_of_old = old_of_new;
  return p;
}

Permutation Permutation::compose(const Permutation& q) const {
  if (n() != q.n()) throw InputError("composing permutations of different size");
  std::vector<int> o(n());
  for (int i = 0; i < n(); ++i) o[i] = q.old_of_new[old_of_new[i]];
  return from_old_of_new(std::move(o));
}

Eigen::MatrixXd Permutation::dense() const {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n(), n());
  for (int i = 0; i < n(); ++i) p(i, old_of_new[i]) = 1.0;
  return p;
}

std::vector<double> GraphView::weighted_degree() const {
  std::vector<double> d(n, 0.0);
  for (int i = 0; i < n; ++i)
    for (double w : weight[i]) d[i] += w;
  return d;
}

namespace {

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

SparseSymMatrix parse_matrix_market(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty Matrix Market stream");
  std::istringstream hs(line);
  std::string banner, object, format, field, symmetry;
  hs >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%MatrixMarket")
    throw InputError("malformed header: missing %%MatrixMarket banner");
  object = lower(object);
  format = lower(format);
  field = lower(field);
  symmetry = lower(symmetry);
  if (object != "matrix" || format != "coordinate")
    throw InputError("only 'matrix coordinate' files are supported");
  if (field != "real" && field != "integer")
    throw InputError("unsupported field '" + field + "' (need real or integer)");
  if (symmetry != "symmetric" && symmetry != "general")
    throw InputError("unsupported symmetry '" + symmetry +
                     "' (need symmetric or general)");

  // Size line: first non-comment, non-blank line.
  long rows = -1, cols = -1, count = -1;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '%') continue;
    std::istringstream ls(line);
    if (!(ls >> rows >> cols >> count)) throw InputError("malformed size line");
    break;
  }
  if (rows < 0) throw InputError("missing size line");
  if (rows != cols) throw InputError("matrix is not square");
  if (rows == 0) throw InputError("empty matrix");
  const int n = static_cast<int>(rows);

  std::vector<Triplet> entries;
  entries.reserve(static_cast<std::size_t>(count) * 2);
  long seen = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '%') continue;
    std::istringstream ls(line);
    long i1 = 0, j1 = 0;
    double v = 0.0;
    if (!(ls >> i1 >> j1 >> v))
      throw InputError("malformed entry line: '" + line + "'");
    ++seen;
    if (i1 < 1 || i1 > n || j1 < 1 || j1 > n)
      throw InputError("entry (" + std::to_string(i1) + "," +
                       std::to_string(j1) + ") out of range for n = " +
                       std::to_string(n));
    int i = static_cast<int>(i1 - 1), j = static_cast<int>(j1 - 1);
    entries.push_back({i, j, v});
    if (symmetry == "symmetric" && i != j) entries.push_back({j, i, v});
  }
  if (seen != count)
    throw InputError("entry count mismatch: size line declares " +
                     std::to_string(count) + ", file has " +
                     std::to_string(seen));

  SparseSymMatrix a = matrix_from_triplets(n, std::move(entries));
  a.validate();  // rejects asymmetric general inputs and missing diagonals
  return a;
}

void write_matrix_market(const SparseSymMatrix& a, std::ostream& out) {
  // Lower triangle plus diagonal, 1-based, symmetric qualifier.
  long count = 0;
  for (int i = 0; i < a.n; ++i)
    for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
      if (a.col_idx[k] <= i) ++count;
  out << "%%MatrixMarket matrix coordinate real symmetric\n";
  out << a.n << " " << a.n << " " << count << "\n";
  char buf[64];
  for (int i = 0; i < a.n; ++i)
    for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
      if (a.col_idx[k] > i) continue;
      std::snprintf(buf, sizeof buf, "%d %d %.17g\n", i + 1, a.col_idx[k] + 1,
                    a.values[k]);
      out << buf;
    }
}

SparseSymMatrix apply_permutation(const SparseSymMatrix& a, const Permutation& p) {
  if (p.n() != a.n)
    throw InputError("permutation size " + std::to_string(p.n()) +
                     " does not match matrix size " + std::to_string(a.n));
  SparseSymMatrix b;
  b.n = a.n;
  b.row_ptr.assign(a.n + 1, 0);
  b.col_idx.resize(a.col_idx.size());
  b.values.resize(a.values.size());
  for (int i = 0; i < a.n; ++i) {
    int r = p.old_of_new[i];
    b.row_ptr[i + 1] = b.row_ptr[i] + (a.row_ptr[r + 1] - a.row_ptr[r]);
  }
  std::vector<std::pair<int, double>> row;
  for (int i = 0; i < a.n; ++i) {
    int r = p.old_of_new[i];
    row.clear();
    for (int k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k)
      row.emplace_back(p.new_of_old[a.col_idx[k]], a.values[k]);
    std::sort(row.begin(), row.end());
    int base = b.row_ptr[i];
    for (std::size_t k = 0; k < row.size(); ++k) {
      b.col_idx[base + k] = row[k].first;
      b.values[base + k] = row[k].second;
    }
  }
  return b;
}

GraphView to_graph(const SparseSymMatrix& a) {
  GraphView g;
  g.n = a.n;
  g.adj.resize(a.n);
  g.weight.resize(a.n);
  g.degree.resize(a.n);
  for (int i = 0; i < a.n; ++i) {
    for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
      int j = a.col_idx[k];
      if (j == i) continue;
      g.adj[i].push_back(j);
      g.weight[i].push_back(1.0);
    }
    g.degree[i] = static_cast<int>(g.adj[i].size());
  }
  return g;
}

SparseSymMatrix generate_grid_laplacian(int rows, int cols) {
  if (rows < 1 || cols < 1) throw InputError("grid dimensions must be >= 1");
  constexpr long kMaxNodes = 4'000'000;
  if (static_cast<long>(rows) * cols > kMaxNodes)
    throw InputError("grid has too many nodes");
  const int n = rows * cols;
  auto id = [cols](int r, int c) { return r * cols + c; };
  std::vector<Triplet> entries;
  entries.reserve(static_cast<std::size_t>(n) * 5);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      int u = id(r, c);
      int deg = (r > 0) + (r + 1 < rows) + (c > 0) + (c + 1 < cols);
      entries.push_back({u, u, static_cast<double>(deg) + 1.0});
      if (c + 1 < cols) {
        entries.push_back({u, id(r, c + 1), -1.0});
        entries.push_back({id(r, c + 1), u, -1.0});
      }
      if (r + 1 < rows) {
        entries.push_back({u, id(r + 1, c), -1.0});
        entries.push_back({id(r + 1, c), u, -1.0});
      }
    }
  return matrix_from_triplets(n, std::move(entries));
}

SparseSymMatrix generate_random_spd(int n, double density, std::uint64_t seed) {
  if (n < 1) throw InputError("matrix size must be >= 1");
  if (!(density > 0.0 && density <= 1.0))
    throw InputError("density must be in (0, 1]");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, n - 1);
  std::uniform_real_distribution<double> val(-1.0, 1.0);

  const double target = density * static_cast<double>(n) * n;
  long pairs = std::lround(std::max(0.0, (target - n) / 2.0));
  const long max_pairs = static_cast<long>(n) * (n - 1) / 2;
  pairs = std::min(pairs, max_pairs);

  std::unordered_set<long> used;
  std::vector<Triplet> entries;
  entries.reserve(static_cast<std::size_t>(pairs) * 2 + n);
  long placed = 0, attempts = 0;
  const long max_attempts = 64 * (pairs + 16);
  while (placed < pairs && attempts < max_attempts) {
    ++attempts;
    int i = pick(rng), j = pick(rng);
    if (i == j) continue;
    if (i > j) std::swap(i, j);
    long key = static_cast<long>(i) * n + j;
    if (!used.insert(key).second) continue;
    double v = val(rng);
    entries.push_back({i, j, v});
    entries.push_back({j, i, v});
    ++placed;
  }
  std::vector<double> rowsum(n, 0.0);
  for (const Triplet& t : entries) rowsum[t.row] += std::abs(t.value);
  for (int i = 0; i < n; ++i) entries.push_back({i, i, 1.0 + rowsum[i]});
  return matrix_from_triplets(n, std::move(entries));
}

void write_permutation(const Permutation& p, std::ostream& out) {
  for (int v : p.old_of_new) out << v << "\n";
}

Permutation read_permutation(std::istream& in) {
  std::vector<int> o;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t pos = 0;
    int v;
    try {
      v = std::stoi(line, &pos);
    } catch (const std::exception&) {
      throw InputError("permutation file has non-integer line: '" + line + "'");
    }
    while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos])))
      ++pos;
    if (pos != line.size())
      throw InputError("permutation file has trailing junk: '" + line + "'");
    o.push_back(v);
  }
  if (o.empty()) throw InputError("empty permutation file");
  return Permutation::from_old_of_new(std::move(o));
}

}  // namespace fillmin
