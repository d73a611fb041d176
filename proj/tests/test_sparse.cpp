#include <sstream>

#include "test_util.hpp"

using namespace skrylov;
using skrylov::testing::random_vector;

namespace {

SparseMatrix random_sparse(Index rows, Index cols, double density, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> normal;
  std::vector<SparseMatrix::Triplet> e;
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j)
      if (u(rng) < density) e.push_back({i, j, normal(rng)});
  return SparseMatrix::from_triplets(rows, cols, std::move(e));
}

}  // namespace

TEST(SparseMatrix, TripletsAreSortedAndDuplicatesSummed) {
  auto a = SparseMatrix::from_triplets(3, 3, {{2, 1, 1.0}, {0, 2, 2.0}, {0, 0, 3.0}, {2, 1, 0.5}});
  EXPECT_EQ(a.nnz(), 3);
  const Matrix d = a.to_dense();
  EXPECT_EQ(d(2, 1), 1.5);
  EXPECT_EQ(d(0, 0), 3.0);
  EXPECT_EQ(d(0, 2), 2.0);
  const auto cols = a.col_indices();
  EXPECT_LT(cols[0], cols[1]);
}

TEST(SparseMatrix, RejectsMalformedCsr) {
  // Offsets not ending at nnz.
  EXPECT_THROW(SparseMatrix(2, 2, {0, 1, 1}, {0, 1}, {1.0, 2.0}), std::invalid_argument);
  // Unsorted columns in a row.
  EXPECT_THROW(SparseMatrix(1, 3, {0, 2}, {2, 0}, {1.0, 2.0}), std::invalid_argument);
  // Duplicate column in a row.
  EXPECT_THROW(SparseMatrix(1, 3, {0, 2}, {1, 1}, {1.0, 2.0}), std::invalid_argument);
  // Column out of range.
  EXPECT_THROW(SparseMatrix(1, 2, {0, 1}, {2}, {1.0}), std::invalid_argument);
  // Decreasing offsets.
  EXPECT_THROW(SparseMatrix(2, 2, {0, 2, 1}, {0}, {1.0}), std::invalid_argument);
  EXPECT_THROW(SparseMatrix::from_triplets(2, 2, {{2, 0, 1.0}}), std::invalid_argument);
}

TEST(SparseMatrix, EmptyShapes) {
  const SparseMatrix a = SparseMatrix::from_triplets(0, 0, {});
  EXPECT_EQ(a.nnz(), 0);
  EXPECT_EQ(spmv(a, Vector(0)).size(), 0);
  const SparseMatrix z = SparseMatrix::from_triplets(3, 4, {});
  EXPECT_EQ(spmv(z, Vector::Ones(4)), Vector::Zero(3));
  EXPECT_EQ(z.norm_estimate(), 0.0);
}

TEST(Spmv, MatchesDenseProduct) {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 10; ++rep) {
    const SparseMatrix a = random_sparse(60, 45, 0.15, rng);
    const Vector x = random_vector(45, rng);
    const Vector dense = a.to_dense() * x;
    EXPECT_LE((spmv(a, x) - dense).norm(), 1e-14 * std::max(1.0, dense.norm()));
  }
}

TEST(Spmv, DimensionMismatchThrows) {
  const SparseMatrix a = SparseMatrix::identity(4);
  EXPECT_THROW(spmv(a, Vector::Ones(5)), std::invalid_argument);
}

TEST(SparseMatrix, TransposeAndDenseRoundTrip) {
  std::mt19937_64 rng(5);
  const SparseMatrix a = random_sparse(20, 30, 0.2, rng);
  EXPECT_EQ(a.transpose().to_dense(), a.to_dense().transpose());
  EXPECT_EQ(SparseMatrix::from_dense(a.to_dense()).to_dense(), a.to_dense());
  EXPECT_EQ(a.transpose().transpose().fingerprint(), a.fingerprint());
}

TEST(SparseMatrix, FingerprintSeesValues) {
  auto a = SparseMatrix::from_triplets(2, 2, {{0, 0, 1.0}, {1, 1, 2.0}});
  auto b = SparseMatrix::from_triplets(2, 2, {{0, 0, 1.0}, {1, 1, 2.0 + 1e-15}});
  EXPECT_NE(a.fingerprint(), b.fingerprint());
  EXPECT_EQ(a.fingerprint(), SparseMatrix::from_dense(a.to_dense()).fingerprint());
}

TEST(SparseMatrix, NormEstimateIsBelowAndNearSpectralNorm) {
  const SparseMatrix a = gen_condiff(12, 1e-2);
  const double exact = Eigen::JacobiSVD<Matrix>(a.to_dense()).singularValues()(0);
  const double est = a.norm_estimate();
  EXPECT_LE(est, exact * (1 + 1e-12));
  EXPECT_GE(est, 0.5 * exact);
}

TEST(MatrixMarket, RoundTripIsExact) {
  std::mt19937_64 rng(7);
  const SparseMatrix a = random_sparse(15, 11, 0.3, rng);
  std::stringstream buf;
  write_matrix_market(buf, a);
  const SparseMatrix b = read_matrix_market(buf);
  EXPECT_EQ(b.rows(), 15);
  EXPECT_EQ(b.cols(), 11);
  EXPECT_EQ(b.fingerprint(), a.fingerprint());
}

TEST(MatrixMarket, SymmetricStorageIsExpanded) {
  std::stringstream in(
      "%%MatrixMarket matrix coordinate real symmetric\n% comment\n3 3 3\n1 1 2.0\n2 1 -1.5\n3 3 4\n");
  const Matrix d = read_matrix_market(in).to_dense();
  EXPECT_EQ(d(0, 1), -1.5);
  EXPECT_EQ(d(1, 0), -1.5);
  EXPECT_EQ(d(2, 2), 4.0);
  std::stringstream skew("%%MatrixMarket matrix coordinate real skew-symmetric\n2 2 1\n2 1 3\n");
  const Matrix s = read_matrix_market(skew).to_dense();
  EXPECT_EQ(s(0, 1), -3.0);
}

TEST(MatrixMarket, MalformedInputIsRejected) {
  std::stringstream no_banner("3 3 1\n1 1 1\n");
  EXPECT_THROW(read_matrix_market(no_banner), std::runtime_error);
  std::stringstream arr("%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n");
  EXPECT_THROW(read_matrix_market(arr), std::runtime_error);
  std::stringstream cplx_field("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n");
  EXPECT_THROW(read_matrix_market(cplx_field), std::runtime_error);
  std::stringstream short_file("%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 1\n");
  EXPECT_THROW(read_matrix_market(short_file), std::runtime_error);
  std::stringstream range("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1\n");
  EXPECT_THROW(read_matrix_market(range), std::runtime_error);
  EXPECT_THROW(read_matrix_market(std::string("/nonexistent/file.mtx")), std::runtime_error);
}

TEST(Generators, CondiffStructure) {
  const Index n = 10;
  const double nu = 1e-2;
  const SparseMatrix a = gen_condiff(n, nu);
  EXPECT_EQ(a.rows(), n * n);
  EXPECT_EQ(a.nnz(), 5 * n * n - 4 * n);
  const double h = 1.0 / (n + 1);
  const Matrix d = a.to_dense();
  for (Index i = 0; i < n * n; ++i) EXPECT_DOUBLE_EQ(d(i, i), 4.0 * nu / (h * h));
  // Without wind the operator is the symmetric 5-point Laplacian.
  const Matrix l = gen_condiff(n, nu, WindField::none).to_dense();
  EXPECT_EQ((l - l.transpose()).norm(), 0.0);
  // With wind it is not; the difference is the centered first-derivative
  // stencil, e.g. east neighbour of grid point (i, j) = (2, 3).
  EXPECT_GT((d - d.transpose()).norm(), 0.0);
  const double x = 3 * h, y = 4 * h;
  const Index row = 3 * n + 2;
  EXPECT_NEAR(d(row, row + 1) - l(row, row + 1), 1.5 * y * (1 - x * x) / (2 * h), 1e-12);
  EXPECT_NEAR(d(row, row + n) - l(row, row + n), -3.0 * x * (1 - y * y) / (2 * h), 1e-12);
  EXPECT_EQ((d - l).diagonal().norm(), 0.0);
  EXPECT_THROW(gen_condiff(2, nu), std::invalid_argument);
  EXPECT_THROW(gen_condiff(5, 0.0), std::invalid_argument);
}

TEST(Generators, ToeplitzBands) {
  const Matrix m = gen_toeplitz(8);
  for (Index i = 0; i < 8; ++i)
    for (Index j = 0; j < 8; ++j) {
      double expect = 0.0;
      if (i == j) expect = -4.0;
      else if (i == j + 1) expect = 2.0;
      else if (j == i + 1 || j == i + 2) expect = 0.5;
      EXPECT_EQ(m(i, j), expect) << i << "," << j;
    }
  EXPECT_THROW(gen_toeplitz(3), std::invalid_argument);
}
