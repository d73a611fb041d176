#include <numbers>

#include "test_util.hpp"

using namespace skrylov;
using namespace skrylov::testing;

// --- expm ------------------------------------------------------------------

TEST(Expm, MatchesTaylorOnUnitBall) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 40; ++rep) {
    const Index n = 2 + rep % 9;
    Matrix m = random_matrix(n, n, rng);
    // Spread the 1-norms over every Padé degree, up to 1.
    const double target = std::pow(10.0, -3.0 + 3.0 * rep / 39.0);
    m *= target / m.cwiseAbs().colwise().sum().maxCoeff();
    EXPECT_LE(rel(expm(m), taylor_expm(m)), 1e-12) << "norm1 " << target;
  }
}

TEST(Expm, LargeNormAgainstScaledTaylor) {
  std::mt19937_64 rng(12);
  for (int rep = 0; rep < 10; ++rep) {
    const Matrix m = random_matrix(8, 8, rng, 2.0);
    EXPECT_LE(rel(expm(m), taylor_expm_scaled(m)), 1e-10);
  }
}

TEST(Expm, ClosedForms) {
  EXPECT_EQ(expm(Matrix::Zero(4, 4)), Matrix::Identity(4, 4));
  Vector diag(4);
  diag << -3.0, 0.0, 1.0, 7.5;
  const Matrix e = expm(Matrix(diag.asDiagonal()));
  for (Index i = 0; i < 4; ++i) EXPECT_NEAR(e(i, i) / std::exp(diag(i)), 1.0, 1e-14);
  // Rotation generator.
  Matrix rot(2, 2);
  rot << 0.0, -2.0, 2.0, 0.0;
  const Matrix r = expm(rot);
  EXPECT_NEAR(r(0, 0), std::cos(2.0), 1e-14);
  EXPECT_NEAR(r(1, 0), std::sin(2.0), 1e-14);
  // Nilpotent Jordan block: exp(N) = I + N + N²/2.
  Matrix nil = Matrix::Zero(3, 3);
  nil(0, 1) = 5.0;
  nil(1, 2) = 5.0;
  const Matrix en = expm(nil);
  EXPECT_NEAR(en(0, 2), 12.5, 1e-12);
  EXPECT_EQ(expm(Matrix(0, 0)).size(), 0);
}

TEST(Expm, SchurRouteAgrees) {
  std::mt19937_64 rng(13);
  for (int rep = 0; rep < 10; ++rep) {
    const Matrix m = random_hessenberg(12, rng, 1.5);
    EXPECT_LE(rel(expm_via_schur(m), expm(m)), 1e-11);
  }
}

TEST(Expm, OverflowAndBadInput) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = 1000.0;
  EXPECT_THROW(expm(m), numerical_error);
  m(0, 0) = std::nan("");
  EXPECT_THROW(expm(m), std::invalid_argument);
  EXPECT_THROW(expm(Matrix::Zero(2, 3)), std::invalid_argument);
}

// --- eigen / Schur -----------------------------------------------------------

TEST(Eigen, ResidualsAndInverse) {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 30; ++rep) {
    const Index d = 4 + rep % 20;
    const Matrix m = random_hessenberg(d, rng);
    const EigenDecomposition eig = hessenberg_eig(m);
    const CMatrix mc = m.cast<cplx>();
    const double res = (mc * eig.X - eig.X * eig.lambdas.asDiagonal()).norm();
    EXPECT_LE(res, 1e-10 * m.norm());
    EXPECT_LE((eig.Xinv * eig.X - CMatrix::Identity(d, d)).norm(), 1e-10 * eig.eigenvector_condition());
    for (Index k = 0; k < d; ++k) EXPECT_NEAR(eig.X.col(k).norm(), 1.0, 1e-12);
  }
}

TEST(Eigen, ConjugatePairsHaveConjugateVectors) {
  Matrix m(3, 3);
  m << 0.0, -1.0, 0.5, 1.0, 0.0, 0.2, 0.0, 0.3, 2.0;
  const EigenDecomposition eig = hessenberg_eig(m);
  int pairs = 0;
  for (Index k = 0; k + 1 < 3; ++k)
    if (eig.lambdas(k).imag() > 0.0) {
      EXPECT_EQ(eig.lambdas(k + 1), std::conj(eig.lambdas(k)));
      EXPECT_EQ(eig.X.col(k + 1), eig.X.col(k).conjugate());
      ++pairs;
    }
  EXPECT_EQ(pairs, 1);
}

TEST(Eigen, BalancingPreservesEigenpairs) {
  std::mt19937_64 rng(22);
  Matrix m = random_hessenberg(10, rng);
  for (Index i = 0; i < 10; ++i) m.row(i) *= std::pow(10.0, i % 4);
  for (Index i = 0; i < 10; ++i) m.col(i) /= std::pow(10.0, i % 4);
  EigOptions opts;
  opts.balance = true;
  const EigenDecomposition eig = hessenberg_eig(m, opts);
  const CMatrix mc = m.cast<cplx>();
  EXPECT_LE((mc * eig.X - eig.X * eig.lambdas.asDiagonal()).norm(), 1e-10 * m.norm());
}

TEST(Eigen, FlagsAndErrors) {
  const EigenDecomposition id = hessenberg_eig(Matrix::Identity(3, 3));
  EXPECT_TRUE(id.near_defective);
  Matrix full = Matrix::Ones(4, 4);
  EXPECT_THROW(hessenberg_eig(full), std::invalid_argument);
  EXPECT_THROW(hessenberg_eig(Matrix::Zero(2, 3)), std::invalid_argument);
  EXPECT_EQ(hessenberg_eig(Matrix(0, 0)).size(), 0);
}

TEST(Schur, FactorizationAndEigenvalues) {
  std::mt19937_64 rng(23);
  const Matrix m = random_hessenberg(15, rng);
  const SchurForm s = real_schur(m);
  EXPECT_LE((s.Z * s.R * s.Z.transpose() - m).norm(), 1e-12 * m.norm());
  EXPECT_LE((s.Z.transpose() * s.Z - Matrix::Identity(15, 15)).norm(), 1e-12);
  for (Index j = 0; j < 15; ++j)
    for (Index i = j + 2; i < 15; ++i) EXPECT_EQ(s.R(i, j), 0.0);
  const CVector a = schur_eigenvalues(s.R);
  const CVector b = hessenberg_eig(m).lambdas;
  for (Index i = 0; i < a.size(); ++i) {
    double best = 1e300;
    for (Index j = 0; j < b.size(); ++j) best = std::min(best, std::abs(a(i) - b(j)));
    EXPECT_LE(best, 1e-10 * m.norm());
  }
}

// --- QR ----------------------------------------------------------------------

TEST(QR, BatchFactorization) {
  std::mt19937_64 rng(31);
  const Matrix b = random_matrix(40, 12, rng);
  const QRFactors qr = thin_qr(b);
  EXPECT_LE((qr.Q * qr.T - b).norm(), 1e-13 * b.norm());
  EXPECT_LE((qr.Q.transpose() * qr.Q - Matrix::Identity(12, 12)).norm(), 1e-13);
  for (Index j = 0; j < 12; ++j) EXPECT_GE(qr.T(j, j), 0.0);
  EXPECT_FALSE(qr.rank_deficient());
}

TEST(QR, IncrementalMatchesBatch) {
  std::mt19937_64 rng(32);
  const Matrix b = random_matrix(50, 20, rng);
  QRFactors inc;
  for (Index j = 0; j < 20; ++j) inc = qr_append_column(std::move(inc), b.col(j));
  const QRFactors batch = thin_qr(b);
  EXPECT_LE((inc.T - batch.T).norm(), 1e-10 * batch.T.norm());
  EXPECT_LE((inc.Q - batch.Q).norm(), 1e-10);
}

TEST(QR, DependentColumnIsFlagged) {
  std::mt19937_64 rng(33);
  Matrix b = random_matrix(10, 3, rng);
  b.col(2) = b.col(0) - 2.0 * b.col(1);
  EXPECT_TRUE(thin_qr(b).rank_deficient());
  QRFactors inc;
  for (Index j = 0; j < 3; ++j) inc = qr_append_column(std::move(inc), b.col(j));
  ASSERT_EQ(inc.deficient_columns.size(), 1u);
  EXPECT_EQ(inc.deficient_columns[0], 2);
}

TEST(QR, ShapeErrors) {
  EXPECT_THROW(thin_qr(Matrix::Ones(2, 3)), std::invalid_argument);
  QRFactors qr = thin_qr(Matrix::Identity(2, 2));
  EXPECT_THROW(qr_append_column(qr, Vector::Ones(2)), std::invalid_argument);
  EXPECT_THROW(qr_append_column(thin_qr(Matrix::Identity(3, 1)), Vector::Ones(4)), std::invalid_argument);
}

// --- funm --------------------------------------------------------------------

TEST(Funm, EigRouteMatchesExpmAndPowers) {
  std::mt19937_64 rng(41);
  const Matrix m = random_hessenberg(10, rng);
  EXPECT_LE(rel(funm_eig(m, [](cplx z) { return std::exp(z); }), expm(m)), 1e-10);
  const Matrix cube = m * m * m;
  EXPECT_LE(rel(funm_eig(m, [](cplx z) { return z * z * z; }), cube), 1e-10);
  const AnalyticFunction p = power_function(3);
  EXPECT_LE(rel(p.matrix(m), cube), 1e-14);
}

TEST(Funm, RefusesIllConditionedBasis) {
  Matrix j = Matrix::Zero(3, 3);
  j(0, 0) = j(1, 1) = j(2, 2) = 1.0;
  j(0, 1) = j(1, 2) = 1.0;
  j(2, 2) += 1e-12;
  EXPECT_THROW(funm_eig(j, [](cplx z) { return std::exp(z); }), numerical_error);
}

// --- divided differences -----------------------------------------------------

TEST(DividedDifference, FirstOrder) {
  const AnalyticFunction f = exp_function();
  EXPECT_NEAR(std::abs(divided_difference(f, 1.0, 0.0) - (std::exp(1.0) - 1.0)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(divided_difference(f, 2.0, 2.0 + 1e-10) - std::exp(2.0)), 0.0, 1e-12);
}

TEST(DividedDifference, ConfluentTableIsScaledDerivative) {
  const AnalyticFunction f = exp_function();
  const cplx z(0.3, -0.7);
  for (int m = 1; m <= 8; ++m) {
    std::vector<cplx> nodes(static_cast<std::size_t>(m), z);
    const cplx want = std::exp(z) / std::tgamma(static_cast<double>(m));
    EXPECT_LE(std::abs(divided_difference_table(f, nodes) - want), 1e-13 * std::abs(want));
  }
}

TEST(DividedDifference, PolynomialIdentities) {
  // z^p over p+1 distinct nodes is 1, over p+2 nodes 0.
  const AnalyticFunction f = power_function(4);
  const std::vector<cplx> five = {0.1, -0.5, cplx(0.2, 0.4), 1.3, cplx(-0.7, -0.1)};
  EXPECT_LE(std::abs(divided_difference_table(f, five) - 1.0), 1e-12);
  std::vector<cplx> six = five;
  six.push_back(0.9);
  EXPECT_LE(std::abs(divided_difference_table(f, six)), 1e-12);
}

TEST(DividedDifference, PermutationInvariance) {
  std::mt19937_64 rng(51);
  std::normal_distribution<double> normal;
  const AnalyticFunction f = exp_function();
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<cplx> nodes;
    for (int i = 0; i < 7; ++i) nodes.emplace_back(normal(rng), normal(rng));
    if (rep % 4 == 0) nodes[3] = nodes[1];  // a confluent pair
    const cplx ref = divided_difference_table(f, nodes);
    for (int p = 0; p < 5; ++p) {
      std::shuffle(nodes.begin(), nodes.end(), rng);
      EXPECT_LE(std::abs(divided_difference_table(f, nodes) - ref), 1e-10 * std::abs(ref));
    }
    EXPECT_LE(divided_difference_table_checked(f, nodes).relative_spread, 1e-10);
  }
}

TEST(DividedDifference, Errors) {
  const AnalyticFunction f = exp_function();
  EXPECT_THROW(divided_difference_table(f, std::vector<cplx>{}), std::invalid_argument);
  EXPECT_THROW(divided_difference_table(f, std::vector<cplx>{cplx(std::nan(""), 0.0)}), std::invalid_argument);
  AnalyticFunction no_deriv;
  no_deriv.name = "plain";
  no_deriv.value = [](cplx z) { return z; };
  EXPECT_THROW(divided_difference_table(no_deriv, std::vector<cplx>{1.0, 1.0}), std::invalid_argument);
}

TEST(MatrixDividedDifference, RoutesAgreeAndReduceToScalar) {
  std::mt19937_64 rng(52);
  const AnalyticFunction f = exp_function();
  const Matrix m = random_hessenberg(6, rng, 0.5);
  const std::vector<cplx> nodes = {3.0, cplx(2.0, 1.0), cplx(2.0, -1.0), -3.5};
  const CMatrix pf = matrix_divided_difference(f, m, nodes);
  const CMatrix rec = matrix_divided_difference_recursive(f, m, nodes);
  EXPECT_LE((pf - rec).norm(), 1e-10 * pf.norm());

  Matrix one(1, 1);
  one(0, 0) = 0.25;
  std::vector<cplx> all = nodes;
  all.push_back(0.25);
  const cplx scalar = divided_difference_table(f, all);
  EXPECT_LE(std::abs(matrix_divided_difference(f, one, nodes)(0, 0) - scalar), 1e-12 * std::abs(scalar));

  EXPECT_THROW(matrix_divided_difference(f, m, std::vector<cplx>{1.0, 1.0}), std::invalid_argument);
  Matrix diag = Matrix::Identity(3, 3);
  EXPECT_THROW(matrix_divided_difference(f, diag, std::vector<cplx>{1.0}), numerical_error);
}

// --- field of values ---------------------------------------------------------

TEST(FieldOfValues, HermitianIsTheEigenvalueInterval) {
  Matrix s(3, 3);
  s << 2.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, -1.0;
  const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(s).eigenvalues();
  const auto pts = fov_boundary(s, 64);
  double lo = 1e300, hi = -1e300;
  for (cplx z : pts) {
    EXPECT_NEAR(z.imag(), 0.0, 1e-12);
    lo = std::min(lo, z.real());
    hi = std::max(hi, z.real());
  }
  EXPECT_NEAR(lo, ev(0), 1e-12);
  EXPECT_NEAR(hi, ev(2), 1e-12);
}

TEST(FieldOfValues, ContainsSpectrumAndNormalCase) {
  std::mt19937_64 rng(61);
  const Matrix m = random_hessenberg(12, rng);
  const auto pts = fov_boundary(m, 256);
  const CVector lam = hessenberg_eig(m).lambdas;
  for (Index i = 0; i < lam.size(); ++i) EXPECT_TRUE(polygon_contains(pts, lam(i), 1e-10));
  const cplx far(100.0, 0.0);
  EXPECT_FALSE(polygon_contains(pts, far));
  EXPECT_GT(polygon_distance(pts, far), 90.0);

  // Normal matrix: F is the convex hull of the eigenvalues, here a square.
  CMatrix d = CMatrix::Zero(4, 4);
  d(0, 0) = cplx(1, 1);
  d(1, 1) = cplx(-1, 1);
  d(2, 2) = cplx(-1, -1);
  d(3, 3) = cplx(1, -1);
  const auto sq = fov_boundary(d, 64);
  for (cplx z : sq) EXPECT_LE(std::max(std::abs(z.real()), std::abs(z.imag())), 1.0 + 1e-12);
  EXPECT_NEAR(polygon_distance(sq, cplx(3.0, 0.0)), 2.0, 1e-12);
}

TEST(FieldOfValues, CrouzeixPalenciaSampledBound) {
  // Advisory in nature: the boundary is sampled, hence the slack.
  std::mt19937_64 rng(62);
  std::normal_distribution<double> normal;
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix m = random_matrix(6, 6, rng);
    const int deg = 1 + rep % 5;
    std::vector<double> c(static_cast<std::size_t>(deg + 1));
    for (auto& v : c) v = normal(rng);
    auto h = [&](cplx z) {
      cplx acc = 0.0;
      for (int k = deg; k >= 0; --k) acc = acc * z + c[static_cast<std::size_t>(k)];
      return acc;
    };
    Matrix hm = Matrix::Zero(6, 6);
    for (int k = deg; k >= 0; --k) hm = hm * m + c[static_cast<std::size_t>(k)] * Matrix::Identity(6, 6);
    const double lhs = Eigen::JacobiSVD<Matrix>(hm).singularValues()(0);
    double sampled = 0.0;
    for (cplx z : fov_boundary(m, 512)) sampled = std::max(sampled, std::abs(h(z)));
    EXPECT_LE(lhs, (1.0 + std::numbers::sqrt2) * sampled * (1.0 + 1e-6));
  }
}
