#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "sketchkrylov/core.hpp"

namespace skrylov {

/// Compressed sparse row storage of a real matrix.
///
/// Invariants (checked on every construction): row offsets are
/// non-decreasing with `row_offsets.back() == nnz`, column indices are
/// strictly increasing inside each row and lie in `[0, cols)`.
class SparseMatrix {
 public:
  struct Triplet {
    Index row;
    Index col;
    double value;
  };

  SparseMatrix() : row_offsets_(1, 0) {}

  SparseMatrix(Index rows, Index cols, std::vector<Index> row_offsets,
               std::vector<Index> col_indices, std::vector<double> values)
      : rows_(rows),
        cols_(cols),
        row_offsets_(std::move(row_offsets)),
        col_indices_(std::move(col_indices)),
        values_(std::move(values)) {
    validate();
  }

  /// Builds from unordered coordinates; duplicate coordinates are summed.
  static SparseMatrix from_triplets(Index rows, Index cols,
                                    std::vector<Triplet> entries) {
    detail::require(rows >= 0 && cols >= 0, "from_triplets: negative shape");
    for (const auto& e : entries)
      detail::require(e.row >= 0 && e.row < rows && e.col >= 0 && e.col < cols,
                      "from_triplets: coordinate out of range");
    std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    std::vector<Index> offsets(static_cast<std::size_t>(rows) + 1, 0);
    std::vector<Index> cols_out;
    std::vector<double> vals;
    cols_out.reserve(entries.size());
    vals.reserve(entries.size());
    for (std::size_t i = 0; i < entries.size();) {
      const Index r = entries[i].row;
      const Index c = entries[i].col;
      double sum = 0.0;
      for (; i < entries.size() && entries[i].row == r && entries[i].col == c; ++i)
        sum += entries[i].value;
      cols_out.push_back(c);
      vals.push_back(sum);
      ++offsets[static_cast<std::size_t>(r) + 1];
    }
    std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
    return {rows, cols, std::move(offsets), std::move(cols_out), std::move(vals)};
  }

  static SparseMatrix from_dense(const Matrix& dense) {
    std::vector<Triplet> entries;
    for (Index i = 0; i < dense.rows(); ++i)
      for (Index j = 0; j < dense.cols(); ++j)
        if (dense(i, j) != 0.0) entries.push_back({i, j, dense(i, j)});
    return from_triplets(dense.rows(), dense.cols(), std::move(entries));
  }

  static SparseMatrix identity(Index n) {
    std::vector<Triplet> entries;
    for (Index i = 0; i < n; ++i) entries.push_back({i, i, 1.0});
    return from_triplets(n, n, std::move(entries));
  }

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index nnz() const { return static_cast<Index>(values_.size()); }

  std::span<const Index> row_offsets() const { return row_offsets_; }
  std::span<const Index> col_indices() const { return col_indices_; }
  std::span<const double> values() const { return values_; }

  Matrix to_dense() const {
    Matrix out = Matrix::Zero(rows_, cols_);
    for (Index i = 0; i < rows_; ++i)
      for (Index p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p)
        out(i, col_indices_[p]) = values_[p];
    return out;
  }

  SparseMatrix transpose() const {
    std::vector<Triplet> entries;
    entries.reserve(values_.size());
    for (Index i = 0; i < rows_; ++i)
      for (Index p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p)
        entries.push_back({col_indices_[p], i, values_[p]});
    return from_triplets(cols_, rows_, std::move(entries));
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (double v : values_) s += v * v;
    return std::sqrt(s);
  }

  /// Power-iteration estimate of the spectral norm (sqrt of the dominant
  /// eigenvalue of AᵀA). Deterministic start vector.
  double norm_estimate(int iterations = 8) const;

  /// A stable hash of shape, structure and values.
  std::uint64_t fingerprint() const {
    std::uint64_t h = detail::fnv1a(&rows_, sizeof rows_);
    h = detail::fnv1a(&cols_, sizeof cols_, h);
    h = detail::fnv1a(col_indices_.data(), col_indices_.size() * sizeof(Index), h);
    return detail::fnv1a(values_.data(), values_.size() * sizeof(double), h);
  }

 private:
  void validate() const {
    detail::require(rows_ >= 0 && cols_ >= 0, "SparseMatrix: negative shape");
    detail::require(row_offsets_.size() == static_cast<std::size_t>(rows_) + 1,
                    "SparseMatrix: row_offsets must have rows+1 entries");
    detail::require(row_offsets_.front() == 0, "SparseMatrix: row_offsets[0] != 0");
    detail::require(col_indices_.size() == values_.size(),
                    "SparseMatrix: col_indices/values length mismatch");
    detail::require(row_offsets_.back() == static_cast<Index>(values_.size()),
                    "SparseMatrix: last row offset must equal nnz");
    for (Index i = 0; i < rows_; ++i) {
      detail::require(row_offsets_[i] <= row_offsets_[i + 1],
                      "SparseMatrix: row_offsets must be non-decreasing");
      for (Index p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p) {
        detail::require(col_indices_[p] >= 0 && col_indices_[p] < cols_,
                        "SparseMatrix: column index out of range");
        detail::require(p == row_offsets_[i] || col_indices_[p - 1] < col_indices_[p],
                        "SparseMatrix: columns within a row must be strictly increasing");
      }
    }
  }

  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<Index> row_offsets_;
  std::vector<Index> col_indices_;
  std::vector<double> values_;
};

/// y = A x, accumulated left to right within each row.
inline Vector spmv(const SparseMatrix& a, const Vector& x) {
  if (a.cols() != x.size())
    throw std::invalid_argument("spmv: dimension mismatch (" + std::to_string(a.cols()) +
                                " columns vs vector of length " +
                                std::to_string(x.size()) + ")");
  const auto offsets = a.row_offsets();
  const auto cols = a.col_indices();
  const auto vals = a.values();
  Vector y(a.rows());
  for (Index i = 0; i < a.rows(); ++i) {
    double acc = 0.0;
    for (Index p = offsets[i]; p < offsets[i + 1]; ++p) acc += vals[p] * x[cols[p]];
    y[i] = acc;
  }
  return y;
}

inline Vector operator*(const SparseMatrix& a, const Vector& x) { return spmv(a, x); }

inline double SparseMatrix::norm_estimate(int iterations) const {
  if (nnz() == 0) return 0.0;
  const SparseMatrix at = transpose();
  Vector x = Vector::Ones(cols_) / std::sqrt(static_cast<double>(cols_));
  double estimate = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Vector y = spmv(*this, x);
    estimate = std::max(estimate, y.norm());
    Vector z = spmv(at, y);
    const double nz = z.norm();
    if (nz == 0.0) break;
    x = z / nz;
  }
  // Power iteration underestimates; the Frobenius norm caps the overshoot.
  return std::max(estimate, frobenius_norm() / std::sqrt(static_cast<double>(std::max(rows_, cols_))));
}

enum class WindField { example, none };

/// Centered finite differences of -nu*Laplace(u) + w.grad(u) on the unit
/// square, Dirichlet boundary, N interior points per side (h = 1/(N+1)),
/// lexicographic ordering with x fastest. Wind w = (3/2 y(1-x^2), -3x(1-y^2)).
inline SparseMatrix gen_condiff(Index grid_points, double nu,
                                WindField wind = WindField::example) {
  detail::require(grid_points >= 3, "gen_condiff: need at least 3 grid points per side");
  detail::require(nu > 0.0, "gen_condiff: viscosity must be positive");
  const Index n = grid_points;
  const double h = 1.0 / static_cast<double>(n + 1);
  const double diff = nu / (h * h);
  std::vector<SparseMatrix::Triplet> entries;
  entries.reserve(static_cast<std::size_t>(5 * n * n));
  for (Index j = 0; j < n; ++j) {
    const double y = static_cast<double>(j + 1) * h;
    for (Index i = 0; i < n; ++i) {
      const double x = static_cast<double>(i + 1) * h;
      double wx = 0.0;
      double wy = 0.0;
      if (wind == WindField::example) {
        wx = 1.5 * y * (1.0 - x * x);
        wy = -3.0 * x * (1.0 - y * y);
      }
      const Index row = j * n + i;
      const double cx = wx / (2.0 * h);
      const double cy = wy / (2.0 * h);
      if (j > 0) entries.push_back({row, row - n, -diff - cy});
      if (i > 0) entries.push_back({row, row - 1, -diff - cx});
      entries.push_back({row, row, 4.0 * diff});
      if (i + 1 < n) entries.push_back({row, row + 1, -diff + cx});
      if (j + 1 < n) entries.push_back({row, row + n, -diff + cy});
    }
  }
  return SparseMatrix::from_triplets(n * n, n * n, std::move(entries));
}

/// Dense Toeplitz test matrix: -4 on the diagonal, 2 on the first
/// subdiagonal, 1/2 on the first two superdiagonals.
inline Matrix gen_toeplitz(Index d) {
  detail::require(d >= 4, "gen_toeplitz: dimension must be at least 4");
  Matrix m = Matrix::Zero(d, d);
  for (Index i = 0; i < d; ++i) {
    m(i, i) = -4.0;
    if (i + 1 < d) {
      m(i + 1, i) = 2.0;
      m(i, i + 1) = 0.5;
    }
    if (i + 2 < d) m(i, i + 2) = 0.5;
  }
  return m;
}

// Matrix Market coordinate I/O.

inline SparseMatrix read_matrix_market(std::istream& in, const std::string& source = "<stream>") {
  auto fail = [&](const std::string& why) -> std::runtime_error {
    return std::runtime_error("read_matrix_market(" + source + "): " + why);
  };
  std::string line;
  if (!std::getline(in, line)) throw fail("empty input");
  std::istringstream banner(line);
  std::string tag, object, format, field, symmetry;
  banner >> tag >> object >> format >> field >> symmetry;
  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
  };
  if (tag != "%%MatrixMarket") throw fail("missing %%MatrixMarket banner");
  object = lower(object);
  format = lower(format);
  field = lower(field);
  symmetry = lower(symmetry);
  if (object != "matrix") throw fail("unsupported object '" + object + "'");
  if (format != "coordinate") throw fail("only coordinate format is supported, got '" + format + "'");
  if (field != "real" && field != "integer" && field != "double")
    throw fail("unsupported field type '" + field + "'");
  if (symmetry != "general" && symmetry != "symmetric" && symmetry != "skew-symmetric")
    throw fail("unsupported symmetry '" + symmetry + "'");

  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '%') continue;
    break;
  }
  Index rows = 0, cols = 0, count = 0;
  {
    std::istringstream size_line(line);
    if (!(size_line >> rows >> cols >> count) || rows < 0 || cols < 0 || count < 0)
      throw fail("malformed size line '" + line + "'");
  }
  std::vector<SparseMatrix::Triplet> entries;
  entries.reserve(static_cast<std::size_t>(symmetry == "general" ? count : 2 * count));
  for (Index k = 0; k < count; ++k) {
    if (!std::getline(in, line)) throw fail("unexpected end of file after " + std::to_string(k) + " entries");
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '%') {
      --k;
      continue;
    }
    std::istringstream entry(line);
    Index i = 0, j = 0;
    double v = 0.0;
    if (!(entry >> i >> j >> v)) throw fail("malformed entry '" + line + "'");
    if (i < 1 || i > rows || j < 1 || j > cols) throw fail("entry index out of range: '" + line + "'");
    entries.push_back({i - 1, j - 1, v});
    if (symmetry != "general" && i != j)
      entries.push_back({j - 1, i - 1, symmetry == "symmetric" ? v : -v});
  }
  return SparseMatrix::from_triplets(rows, cols, std::move(entries));
}

inline SparseMatrix read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_matrix_market: cannot open '" + path + "'");
  return read_matrix_market(in, path);
}

inline void write_matrix_market(std::ostream& out, const SparseMatrix& a) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << a.rows() << ' ' << a.cols() << ' ' << a.nnz() << '\n';
  out << std::setprecision(17);
  const auto offsets = a.row_offsets();
  for (Index i = 0; i < a.rows(); ++i)
    for (Index p = offsets[i]; p < offsets[i + 1]; ++p)
      out << (i + 1) << ' ' << (a.col_indices()[p] + 1) << ' ' << a.values()[p] << '\n';
}

inline void write_matrix_market(const std::string& path, const SparseMatrix& a) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_matrix_market: cannot open '" + path + "'");
  write_matrix_market(out, a);
}

}  // namespace skrylov
