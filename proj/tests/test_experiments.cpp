#include <map>
#include <sstream>

#include "test_util.hpp"

using namespace skrylov;
using namespace skrylov::testing;

namespace {

RunConfig small_config() {
  RunConfig c;
  c.matrix.generator = "condiff";
  c.matrix.gen_args = {{"N", "10"}};
  c.d_max = 20;
  c.variants = {Variant::fom, Variant::trfom, Variant::sfom_pinv, Variant::sfom_rankone_expm,
                Variant::sfom_rankone_schur, Variant::sfom_whitened};
  c.func = "nexp";
  return c;
}

std::string csv_of(const ConvergenceTrace& t) {
  std::ostringstream out;
  write_trace_csv(out, t);
  return out.str();
}

}  // namespace

TEST(Toeplitz, ModificationIsSeededAndWeighted) {
  const Vector a = toeplitz_modification(10, 21);
  EXPECT_EQ(a, toeplitz_modification(10, 21));
  EXPECT_NE(a, toeplitz_modification(10, 22));
  EXPECT_EQ(a.size(), 10);
}

TEST(Toeplitz, QuadPrecisionDifferenceMatchesDoubleWhereResolvable) {
  const auto rows = toeplitz_bound_experiment(21, {5, 10});
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) EXPECT_NEAR(r.true_diff / r.true_diff_double, 1.0, 1e-8) << r.d;
}

TEST(Toeplitz, QuadExponentialAgreesWithPade) {
  std::mt19937_64 rng(5);
  const Matrix m = random_hessenberg(8, rng, 2.0);
  const auto col = detail::expm_first_column_quad(m);
  const Vector ref = expm(m).col(0);
  for (Index i = 0; i < 8; ++i)
    EXPECT_NEAR(static_cast<double>(col[static_cast<std::size_t>(i)]), ref(i), 1e-12 * ref.norm());
}

TEST(Toeplitz, BoundExperimentShape) {
  const auto rows = toeplitz_bound_experiment(21);
  ASSERT_EQ(rows.size(), 6u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].d, static_cast<Index>(5 * (i + 1)));
    EXPECT_GE(rows[i].bound, rows[i].true_diff);
  }
  std::ostringstream out;
  write_toeplitz_csv(out, rows, {{"seed", 21}});
  std::istringstream in(out.str());
  std::string line;
  int n = 0;
  while (std::getline(in, line)) ++n;
  EXPECT_EQ(n, 8);  // metadata, header, six rows
  EXPECT_TRUE(all_passed(assess_toeplitz_bound(rows)));
}

TEST(EigvecGrowth, ProfilesAreNormalized) {
  const EigvecGrowthResult r = eigvec_growth_experiment(21, 40, 64);
  ASSERT_FALSE(r.picks.empty());
  for (const auto& p : r.picks) {
    EXPECT_EQ(p.profile.phi(p.profile.phi.size() - 1), 1.0);
    EXPECT_EQ(p.profile.eta.size(), 40);
    EXPECT_GE(p.profile.lambda.imag(), 0.0);
  }
}

TEST(Config, NamesRoundTrip) {
  for (ReferenceMode m : {ReferenceMode::automatic, ReferenceMode::dense, ReferenceMode::long_fom})
    EXPECT_EQ(reference_mode_from_string(to_string(m)), m);
  EXPECT_THROW(reference_mode_from_string("exact"), std::invalid_argument);
  EXPECT_THROW(function_by_name("sin"), std::invalid_argument);
}

TEST(Config, KeyValueParsing) {
  const auto kv = detail::parse_kv("N=20,nu=0.01");
  EXPECT_EQ(kv.at("N"), "20");
  EXPECT_EQ(kv.at("nu"), "0.01");
  EXPECT_THROW(detail::parse_kv("N20"), std::invalid_argument);
  EXPECT_THROW(detail::arg_double({{"N", "2x"}}, "N", 1.0), std::invalid_argument);
}

TEST(Config, LoadMatrixValidatesGenerators) {
  MatrixSource src;
  src.generator = "condiff";
  src.gen_args = {{"N", "6"}, {"nu", "0.02"}};
  EXPECT_EQ(load_matrix(src).rows(), 36);
  src.gen_args = {{"M", "6"}};
  EXPECT_THROW(load_matrix(src), std::invalid_argument);
  src.gen_args = {{"wind", "gale"}};
  EXPECT_THROW(load_matrix(src), std::invalid_argument);
  src.generator = "toeplitz";
  src.gen_args = {{"d", "9"}};
  EXPECT_EQ(load_matrix(src).rows(), 9);
  src.generator = "laplace";
  src.gen_args.clear();
  EXPECT_THROW(load_matrix(src), std::invalid_argument);
}

TEST(Reference, DenseAndLongFomAgree) {
  const SparseMatrix a = gen_condiff(10, 1e-2);
  const Vector b = ones_normalized(100);
  const AnalyticFunction f = exp_function(-1.0);
  const Reference dense = compute_reference(a, b, f, ReferenceMode::dense, 50);
  const Reference lf = compute_reference(a, b, f, ReferenceMode::long_fom, 50);
  EXPECT_EQ(dense.mode, "dense");
  EXPECT_EQ(lf.mode, "long-fom");
  EXPECT_LE(rel(lf.value, dense.value), 1e-12);
  EXPECT_TRUE(lf.stagnated);
  EXPECT_EQ(compute_reference(a, b, f, ReferenceMode::automatic, 50).mode, "dense");
}

TEST(RunTrace, RowsAreOrderedAndCheckPasses) {
  const ConvergenceTrace t = run_trace(small_config());
  EXPECT_EQ(t.rows.size(), 6u * 20u);
  for (Variant v : small_config().variants) {
    const auto e = t.errors(v);
    ASSERT_EQ(e.size(), 20u) << to_string(v);
    for (double x : e) EXPECT_GE(x, 0.0);
  }
  std::map<Variant, Index> last;
  for (const auto& r : t.rows) {
    EXPECT_GT(r.d, last[r.variant]);
    last[r.variant] = r.d;
  }
  EXPECT_TRUE(all_passed(t.checks));
  EXPECT_EQ(t.metadata.at("seed"), 1);
  EXPECT_EQ(t.metadata.at("matrix").at("rows"), 100);
}

TEST(RunTrace, DeterministicCsv) {
  const std::string a = csv_of(run_trace(small_config()));
  RunConfig threaded = small_config();
  threaded.threads = 4;
  const std::string b = csv_of(run_trace(threaded));
  EXPECT_EQ(a, b);
  RunConfig other = small_config();
  other.seed = 2;
  EXPECT_NE(a, csv_of(run_trace(other)));
  EXPECT_EQ(a.rfind("# {", 0), 0u);
  EXPECT_NE(a.find("\nd,variant,rel_error,kappa_Ud,epsilon_hat,norm_r,tau_ratio,wallclock_ms\n"), std::string::npos);
}

TEST(RunTrace, MetadataReproducesTheRun) {
  const ConvergenceTrace t = run_trace(small_config());
  const auto& cfg = t.metadata.at("config");
  EXPECT_EQ(cfg.at("dmax"), 20);
  EXPECT_EQ(cfg.at("func"), "nexp");
  EXPECT_EQ(cfg.at("gen"), "condiff");
  EXPECT_EQ(cfg.at("sketch_kind"), "sparse-sign");
  EXPECT_EQ(t.metadata.at("version"), version);
}

TEST(RunTrace, BreakdownTruncatesTheTrace) {
  RunConfig c;
  c.matrix.generator = "toeplitz";
  c.matrix.gen_args = {{"d", "6"}};
  c.d_max = 20;
  c.variants = {Variant::fom};
  const ConvergenceTrace t = run_trace(c);
  EXPECT_LE(t.rows.size(), 6u);
  EXPECT_LE(t.errors(Variant::fom).back(), 1e-12);
}

TEST(Condiff, PresetMatchesTheExperiment) {
  const RunConfig c = condiff_preset();
  EXPECT_EQ(c.d_max, 200);
  EXPECT_EQ(c.trunc_k, 2);
  EXPECT_EQ(c.sketch_dim, 400);
  EXPECT_EQ(c.func, "nexp");
  EXPECT_EQ(c.matrix.gen_args.at("N"), "50");
}

TEST(Condiff, SegmentDetection) {
  const std::vector<double> flat(30, 1e-3);
  EXPECT_FALSE(detail::increasing_segment(flat, 1, 10, 1e-12));
  std::vector<double> bump = flat;
  for (std::size_t i = 5; i < 20; ++i) bump[i] = 1e-3 * (1.0 + static_cast<double>(i - 4));
  EXPECT_TRUE(detail::increasing_segment(bump, 1, 10, 1e-12));
  std::vector<double> tiny(30, 1e-15);
  for (std::size_t i = 0; i < 30; ++i) tiny[i] *= 1.0 + static_cast<double>(i);
  EXPECT_FALSE(detail::increasing_segment(tiny, 1, 10, 1e-12));
  EXPECT_EQ(detail::first_below({1.0, 0.5, 0.1}, 0.5), 2);
}
