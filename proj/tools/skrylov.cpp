// skrylov: f(A)b by full, truncated and sketched Krylov methods, plus the
// rank-one diagnostics experiments. CSV goes to --out (or stdout); a JSON
// status report always goes to stderr.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "sketchkrylov.hpp"

namespace {

using namespace skrylov;

enum ExitCode { ok = 0, assertion_failed = 1, bad_input = 2, numerical_failure = 3 };

std::vector<Variant> parse_variants(const std::string& list) {
  std::vector<Variant> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) {
      if (item == "all") {
        out = {Variant::fom, Variant::trfom, Variant::sfom_pinv, Variant::sfom_rankone_expm,
               Variant::sfom_rankone_schur, Variant::sfom_whitened};
        continue;
      }
      const Variant v = variant_from_string(item);
      if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
    }
  if (out.empty()) throw std::invalid_argument("--variant: no variants given");
  return out;
}

// Opens --out, or hands back stdout for "-" / empty.
struct Output {
  std::ofstream file;
  std::ostream* stream = &std::cout;
  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") return;
    file.open(path);
    if (!file) throw std::runtime_error("cannot open '" + path + "' for writing");
    stream = &file;
  }
  std::ostream& operator*() { return *stream; }
};

std::string with_suffix(const std::string& path, const std::string& suffix) {
  const auto dot = path.rfind('.');
  const auto slash = path.rfind('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path + suffix + ".csv";
  return path.substr(0, dot) + suffix + path.substr(dot);
}

int report(const std::string& command, const std::vector<Check>& checks, const std::vector<std::string>& files) {
  nlohmann::json j;
  j["command"] = command;
  j["status"] = all_passed(checks) ? "ok" : "failed";
  j["checks"] = checks_to_json(checks);
  j["outputs"] = files;
  std::cerr << j.dump() << "\n";
  return all_passed(checks) ? ok : assertion_failed;
}

int report_error(const std::string& command, const std::string& kind, const std::string& what) {
  nlohmann::json j{{"command", command}, {"status", "error"}, {"error", kind}, {"message", what}};
  std::cerr << j.dump() << "\n";
  return kind == "numerical" ? numerical_failure : bad_input;
}

struct RunOptions {
  std::string matrix, gen, gen_args, sketch_kind = "sparse-sign", variants = "fom", func = "exp", ref = "auto", out;
  Index dmax = 50, trunc_k = 2, sketch_dim = 0;
  std::uint64_t seed = 1;
  bool timing = false;
};

void add_run_flags(CLI::App* app, RunOptions& o, bool with_matrix) {
  if (with_matrix) {
    auto* m = app->add_option("--matrix", o.matrix, "Matrix Market file (coordinate, real)");
    auto* g = app->add_option("--gen", o.gen, "Generated matrix")->check(CLI::IsMember({"condiff", "toeplitz"}));
    m->excludes(g);
  }
  app->add_option("--gen-args", o.gen_args, "Generator parameters, k=v,... (condiff: N, nu, wind; toeplitz: d)");
  app->add_option("--dmax", o.dmax, "Largest Krylov dimension")->check(CLI::PositiveNumber);
  app->add_option("--trunc-k", o.trunc_k, "Truncation window (0 = full orthogonalization)")->check(CLI::NonNegativeNumber);
  app->add_option("--sketch-kind", o.sketch_kind, "gaussian | sparse-sign | srdct")
      ->check(CLI::IsMember({"gaussian", "sparse-sign", "sparse_sign", "srdct"}));
  app->add_option("--sketch-dim", o.sketch_dim, "Sketch rows s (0 = 2 dmax)")->check(CLI::NonNegativeNumber);
  app->add_option("--seed", o.seed, "Embedding seed");
  app->add_option("--out", o.out, "Output CSV path ('-' = stdout)");
  app->add_flag("--timing", o.timing, "Record wall-clock times (makes output run-dependent)");
}

RunConfig to_config(const RunOptions& o) {
  RunConfig c;
  c.matrix.path = o.matrix;
  c.matrix.generator = o.gen;
  c.matrix.gen_args = detail::parse_kv(o.gen_args);
  c.d_max = o.dmax;
  c.trunc_k = o.trunc_k;
  c.sketch_kind = embedding_kind_from_string(o.sketch_kind);
  c.sketch_dim = o.sketch_dim;
  c.seed = o.seed;
  c.variants = parse_variants(o.variants);
  c.func = o.func;
  c.ref = reference_mode_from_string(o.ref);
  c.record_timing = o.timing;
  c.threads = static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
  return c;
}

int cmd_run(const RunOptions& o) {
  if (o.matrix.empty() && o.gen.empty()) throw std::invalid_argument("run: give --matrix PATH or --gen NAME");
  const RunConfig cfg = to_config(o);
  const ConvergenceTrace t = run_trace(cfg);
  Output out(o.out);
  write_trace_csv(*out, t);
  return report("run", t.checks, {o.out.empty() ? "-" : o.out});
}

int cmd_toeplitz(std::uint64_t seed, const std::string& path) {
  const auto rows = toeplitz_bound_experiment(seed);
  nlohmann::json md{{"experiment", "toeplitz-bound"}, {"version", version}, {"seed", seed},
                    {"dims", {5, 10, 15, 20, 25, 30}}, {"true_diff", "113-bit arithmetic"}};
  Output out(path);
  write_toeplitz_csv(*out, rows, md);
  return report("experiment-toeplitz-bound", assess_toeplitz_bound(rows), {path.empty() ? "-" : path});
}

int cmd_eigvec(std::uint64_t seed, Index d, const std::string& path) {
  const auto r = eigvec_growth_experiment(seed, d);
  nlohmann::json md{{"experiment", "eigvec-growth"}, {"version", version}, {"seed", seed}, {"d", d},
                    {"outliers", r.n_outliers}};
  nlohmann::json picks = nlohmann::json::array();
  for (const auto& p : r.picks)
    picks.push_back({{"lambda", {p.lambda.real(), p.lambda.imag()}}, {"dist", p.dist}, {"gamma", p.gamma}});
  md["picks"] = picks;
  if (r.n_outliers == 0) md["note"] = "no eigenvalue with gamma > 1; profiles are for the two largest-gamma eigenvalues";
  std::vector<std::string> files;
  {
    Output out(path);
    *out << "# " << md.dump() << "\n";
    *out << "k";
    for (std::size_t i = 0; i < r.picks.size(); ++i) *out << ",eta_" << i + 1 << ",phi_" << i + 1;
    *out << "\n";
    for (Index k = 0; k < d; ++k) {
      *out << k + 1;
      for (const auto& p : r.picks) *out << ',' << detail::fmt(p.profile.eta(k)) << ',' << detail::fmt(p.profile.phi(k));
      *out << "\n";
    }
    files.push_back(path.empty() ? "-" : path);
  }
  if (!path.empty() && path != "-") {
    const std::string fov_path = with_suffix(path, "_fov");
    std::ofstream fov(fov_path);
    fov << "re,im\n";
    for (cplx z : r.fov) fov << detail::fmt(z.real()) << ',' << detail::fmt(z.imag()) << "\n";
    const std::string spec_path = with_suffix(path, "_spectra");
    std::ofstream sp(spec_path);
    sp << "matrix,re,im\n";
    for (Index i = 0; i < r.lambdas_M.size(); ++i)
      sp << "M," << detail::fmt(r.lambdas_M(i).real()) << ',' << detail::fmt(r.lambdas_M(i).imag()) << "\n";
    for (Index i = 0; i < r.lambdas_mod.size(); ++i)
      sp << "M_mod," << detail::fmt(r.lambdas_mod(i).real()) << ',' << detail::fmt(r.lambdas_mod(i).imag()) << "\n";
    files.push_back(fov_path);
    files.push_back(spec_path);
  }
  return report("experiment-eigvec-growth", assess_eigvec_growth(r), files);
}

int cmd_condiff(const RunOptions& o, const std::string& prefix) {
  RunConfig cfg = condiff_preset(o.seed);
  if (!o.gen_args.empty()) cfg.matrix.gen_args = detail::parse_kv(o.gen_args);
  cfg.d_max = o.dmax;
  cfg.trfom_extra_steps = (15 * cfg.d_max + 99) / 100;
  cfg.trunc_k = o.trunc_k;
  cfg.sketch_kind = embedding_kind_from_string(o.sketch_kind);
  cfg.sketch_dim = o.sketch_dim;
  cfg.record_timing = o.timing;
  cfg.threads = static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
  const ConvergenceTrace t = run_trace(cfg);
  const std::string left = prefix + "_variants.csv";
  const std::string right = prefix + "_truncated.csv";
  {
    std::ofstream out(left);
    if (!out) throw std::runtime_error("cannot open '" + left + "' for writing");
    write_trace_csv(out, t, [](const TraceRow& r) { return r.variant != Variant::trfom; });
  }
  {
    std::ofstream out(right);
    if (!out) throw std::runtime_error("cannot open '" + right + "' for writing");
    write_trace_csv(out, t, [](const TraceRow& r) {
      return r.variant == Variant::trfom || r.variant == Variant::sfom_whitened;
    });
  }
  std::vector<Check> checks = t.checks;
  const auto more = assess_condiff(t, cfg.d_max);
  checks.insert(checks.end(), more.begin(), more.end());
  return report("experiment-condiff", checks, {left, right});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"f(A)b with full, truncated and sketched Krylov methods"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(skrylov::version));

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Convergence trace of the requested variants");
  add_run_flags(run_cmd, run, true);
  run_cmd->add_option("--variant", run.variants,
                      "fom,trfom,sfom_pinv,sfom_rankone_expm,sfom_rankone_schur,sfom_whitened or all");
  run_cmd->add_option("--func", run.func, "exp | nexp (exp(-z))")->check(CLI::IsMember({"exp", "nexp"}));
  run_cmd->add_option("--ref", run.ref, "Reference: dense | long-fom (default: dense for n <= 500)")
      ->check(CLI::IsMember({"auto", "dense", "long-fom"}));

  std::uint64_t toe_seed = 21;
  std::string toe_out;
  auto* toe_cmd = app.add_subcommand("experiment-toeplitz-bound", "Rank-one update bound on Toeplitz matrices");
  toe_cmd->add_option("--seed", toe_seed, "Seed for the perturbation draws");
  toe_cmd->add_option("--out", toe_out, "Output CSV path ('-' = stdout)");

  std::uint64_t eig_seed = 21;
  Index eig_d = 100;
  std::string eig_out;
  auto* eig_cmd = app.add_subcommand("experiment-eigvec-growth", "Eigenvector component growth for outlying eigenvalues");
  eig_cmd->add_option("--seed", eig_seed, "Seed for the perturbation draws");
  eig_cmd->add_option("--dmax", eig_d, "Matrix dimension")->check(CLI::Range(4, 2000));
  eig_cmd->add_option("--out", eig_out, "Output CSV path; _fov and _spectra files are written alongside");

  RunOptions cd;
  cd.dmax = 200;
  cd.sketch_dim = 400;
  cd.out = "condiff";
  auto* cd_cmd = app.add_subcommand("experiment-condiff", "Sketched vs truncated FOM on convection-diffusion");
  add_run_flags(cd_cmd, cd, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return report_error("skrylov", "usage", e.what());
  }

  std::string which = "skrylov";
  try {
    if (*run_cmd) {
      which = "run";
      return cmd_run(run);
    }
    if (*toe_cmd) {
      which = "experiment-toeplitz-bound";
      return cmd_toeplitz(toe_seed, toe_out);
    }
    if (*eig_cmd) {
      which = "experiment-eigvec-growth";
      return cmd_eigvec(eig_seed, eig_d, eig_out);
    }
    if (*cd_cmd) {
      which = "experiment-condiff";
      return cmd_condiff(cd, cd.out);
    }
  } catch (const skrylov::numerical_error& e) {
    return report_error(which, "numerical", e.what());
  } catch (const std::exception& e) {
    return report_error(which, "input", e.what());
  }
  return bad_input;
}
