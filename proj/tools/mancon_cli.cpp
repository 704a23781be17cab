// mancon: experiment runner and regularity verifier.
//
// Exit codes: 0 success, 1 inequality violation (validate), 2 configuration
// error, 3 numerical failure or exhausted sampling.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "mancon/mancon.hpp"

namespace {

using namespace mancon;

constexpr int kExitViolation = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct CommonFlags {
  std::string manifold = "stiefel";
  int d = 200;
  int r = 2;
  std::string graph = "random";
  int n = 15;
  double p = 0.5;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> graph_seed;
  bool json = false;
};

void add_manifold_flags(CLI::App* app, CommonFlags& f) {
  app->add_option("--manifold", f.manifold, "stiefel | oblique | sphere | euclidean")->capture_default_str();
  app->add_option("--d", f.d, "ambient rows")->capture_default_str();
  app->add_option("--r", f.r, "columns (ignored for sphere)")->capture_default_str();
}

void add_graph_flags(CLI::App* app, CommonFlags& f) {
  app->add_option("--graph", f.graph, "random | star | cycle | complete")->capture_default_str();
  app->add_option("--n", f.n, "number of agents")->capture_default_str();
  app->add_option("--p", f.p, "edge probability of random graphs")->capture_default_str();
  app->add_option("--graph-seed", f.graph_seed, "random-graph seed (defaults to --seed)");
}

void add_seed_flags(CLI::App* app, CommonFlags& f) {
  app->add_option("--seed", f.seed, "seed; MC_SEED sets the default")->capture_default_str();
  app->add_flag("--json", f.json, "machine-readable summary on stdout");
}

GraphSpec graph_spec(const CommonFlags& f) {
  return {parse_graph_kind(f.graph), f.n, f.p, f.graph_seed.value_or(f.seed)};
}

std::uint64_t default_seed() {
  const char* env = std::getenv("MC_SEED");
  if (!env || !*env) return 0;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (errno != 0 || *end != '\0' || env[0] == '-') {
    throw Error(ErrorCode::InvalidArgument, std::string("MC_SEED is not an unsigned integer: '") + env + "'");
  }
  return v;
}

bool is_config_error(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::Disconnected:
    case ErrorCode::NotSymmetric:
    case ErrorCode::NotStochastic:
    case ErrorCode::InsufficientScales:
    case ErrorCode::UnknownInequality: return true;
    default: return false;
  }
}

// ---- run --------------------------------------------------------------------

struct RunFlags {
  CommonFlags common;
  std::string method = "rgd-qr";
  std::string alpha = "1";
  int t = 1;
  int max_iters = 1000;
  double tol = 2e-16;
  std::optional<double> spread;
  std::string out = "out";
  std::string name;
};

int cmd_run(const RunFlags& f) {
  RunConfig c;
  c.manifold = make_manifold(f.common.manifold, f.common.d, f.common.r);
  c.graph = graph_spec(f.common);
  c.method = parse_method(f.method);
  c.alpha = parse_step(f.alpha);
  c.t = f.t;
  c.max_iters = f.max_iters;
  c.tol = f.tol;
  c.init_seed = f.common.seed;
  c.init_spread = f.spread.value_or(kInf);
  const std::string name = f.name.empty() ? run_name(c, true) : f.name;
  Trajectory tr;
  const SuiteResult res = execute_run({name, c}, f.out, &tr);
  if (!res.ok) {
    std::cerr << "error: " << res.message << '\n';
    return kExitNumerical;
  }
  const io::Json meta = io::trajectory_metadata(tr, res.rate);
  if (f.common.json) {
    io::Json s;
    s["name"] = name;
    s["csv"] = (std::filesystem::path(f.out) / (name + ".csv")).string();
    for (const char* key : {"terminal_reason", "iterations", "alpha_resolved", "final_normalized_err", "rate", "theory"}) {
      s[key] = meta[key];
    }
    std::cout << s.dump(2) << '\n';
    return 0;
  }
  const double s2t = tr.spectral.sigma2_t();
  std::printf("%s: %s after %d iterations, alpha=%.17g, final normalized error %.3e\n", name.c_str(),
              to_string(res.terminal).c_str(), res.iterations, tr.alpha, tr.records.back().metrics.normalized_error);
  if (res.rate) {
    std::printf("rate: fitted rho=%.6g (R^2=%.4f, max step ratio %.6g); bounds (1+2 sigma2^t)/2=%.6g, sigma2^t=%.6g\n",
                res.rate->rho, res.rate->r_squared, res.rate->max_step_ratio, (1.0 + 2.0 * s2t) / 2.0, s2t);
  } else {
    std::printf("rate: too few records to fit; bounds (1+2 sigma2^t)/2=%.6g, sigma2^t=%.6g\n", (1.0 + 2.0 * s2t) / 2.0,
                s2t);
  }
  return 0;
}

// ---- suite ------------------------------------------------------------------

struct SuiteFlags {
  std::string name;
  std::string grid;
  std::uint64_t seed = 0;
  int seed_count = 1;
  int jobs = 0;
  std::string out;
  bool json = false;
};

int cmd_suite(const SuiteFlags& f) {
  if (f.name.empty() == f.grid.empty()) {
    std::cerr << "error: give exactly one of a built-in suite name or --grid FILE\n";
    return kExitConfig;
  }
  if (f.seed_count < 1) throw Error(ErrorCode::InvalidArgument, "--seed-count must be positive");
  std::vector<std::uint64_t> seeds;
  for (int k = 0; k < f.seed_count; ++k) seeds.push_back(f.seed + static_cast<std::uint64_t>(k));
  ExperimentSuite suite;
  if (!f.grid.empty()) {
    std::ifstream in(f.grid);
    if (!in) throw Error(ErrorCode::InvalidArgument, "cannot read grid file " + f.grid);
    io::Json j;
    try {
      j = io::Json::parse(in);
      suite = suite_from_json(j, seeds);
    } catch (const io::Json::exception& e) {
      throw Error(ErrorCode::InvalidArgument, std::string("malformed grid file: ") + e.what());
    }
  } else {
    suite = builtin_suite(f.name, seeds);
  }
  const std::filesystem::path dir = f.out.empty() ? std::filesystem::path("out") / suite.name : std::filesystem::path(f.out);
  const int jobs = f.jobs > 0 ? f.jobs : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const auto results = run_suite(suite, dir, jobs, [&](const SuiteResult& r) {
    if (!f.json) {
      std::fprintf(stderr, "  %-40s %-16s %5d\n", r.name.c_str(), r.ok ? to_string(r.terminal).c_str() : "Error",
                   r.iterations);
    }
  });
  io::write_atomic(dir / "summary.csv", suite_summary_csv(results));
  io::Json summary;
  summary["suite"] = suite.name;
  summary["seeds"] = seeds;
  io::Json runs = io::Json::array();
  int failed = 0;
  for (const auto& r : results) {
    io::Json e;
    e["name"] = r.name;
    e["config"] = io::to_json(r.config);
    e["ok"] = r.ok;
    e["terminal_reason"] = r.ok ? to_string(r.terminal) : "Error";
    e["iterations"] = r.iterations;
    e["first_iter_le_1e-13"] = r.first_below_1e13;
    e["rate"] = r.rate ? io::to_json(*r.rate) : io::Json(nullptr);
    if (!r.message.empty()) e["message"] = r.message;
    runs.push_back(e);
    failed += r.ok ? 0 : 1;
  }
  summary["runs"] = runs;
  summary["failed"] = failed;
  io::write_atomic(dir / "summary.json", summary.dump(2) + "\n");
  if (f.json) {
    std::cout << summary.dump(2) << '\n';
  } else {
    std::cout << suite_summary_csv(results);
    std::cout << "artifacts in " << dir.string() << '\n';
  }
  return failed ? kExitNumerical : 0;
}

// ---- validate -----------------------------------------------------------------

struct ValidateFlags {
  CommonFlags common;
  int t = 1;
  int samples = 1000;
  double eps = 0.05;
  double beta = 1.0;
  double nu = 0.5;
  std::string scheme = "qr";
  std::string out;
};

int cmd_validate(const ValidateFlags& f) {
  const Manifold m = make_manifold(f.common.manifold, f.common.d, f.common.r);
  const MixingMatrix w = metropolis_weights(build_graph(graph_spec(f.common))).with_power(f.t);
  ValidateOptions o;
  o.samples = f.samples;
  o.eps = f.eps;
  o.beta = f.beta;
  o.nu = f.nu;
  o.seed = f.common.seed;
  if (f.scheme == "qr") {
    o.scheme = Retraction::QR;
  } else if (f.scheme == "polar") {
    o.scheme = Retraction::Polar;
  } else {
    throw Error(ErrorCode::InvalidArgument, "--scheme must be qr or polar");
  }
  const RegularityReport rep = validate(m, w, o);
  io::Json j = io::to_json(rep);
  j["graph"] = io::to_json(graph_spec(f.common));
  if (!f.out.empty()) {
    io::write_atomic(std::filesystem::path(f.out) / "report.json", j.dump(2) + "\n");
    io::write_atomic(std::filesystem::path(f.out) / "report.txt", io::report_table(rep));
  }
  if (f.common.json) {
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << m.name() << ", " << to_string(graph_spec(f.common).kind) << " graph, N=" << w.n() << ", t=" << f.t
              << ", " << f.samples << " samples, eps=" << f.eps << '\n'
              << io::report_table(rep);
    std::cout << "total violations: " << rep.total_violations() << '\n';
  }
  return rep.total_violations() > 0 ? kExitViolation : 0;
}

// ---- spectrum -----------------------------------------------------------------

struct SpectrumFlags {
  CommonFlags common;
  std::vector<int> ts{1};
  double beta = 1.0;
  std::string csv_dir;
};

int cmd_spectrum(const SpectrumFlags& f) {
  const GraphSpec gs = graph_spec(f.common);
  const MixingMatrix w = metropolis_weights(build_graph(gs));
  io::Json j;
  j["graph"] = io::to_json(gs);
  io::Json per_t = io::Json::array();
  for (int t : f.ts) {
    const SpectralSummary s = spectral_summary(w, t);
    per_t.push_back(io::to_json(s));
    if (!f.csv_dir.empty()) {
      io::write_atomic(std::filesystem::path(f.csv_dir) / ("spectral_t" + std::to_string(t) + ".csv"),
                       io::spectral_csv(s));
    }
  }
  j["spectra"] = per_t;
  const SpectralSummary s1 = spectral_summary(w, 1);
  io::Json th = io::to_json(power_thresholds(s1.sigma2, gs.n, f.beta));
  th["beta"] = f.beta;
  th["convention"] = "sigma2 = 0: every t >= 1 qualifies, thresholds reported as 1";
  j["thresholds"] = th;
  if (!f.csv_dir.empty()) io::write_atomic(std::filesystem::path(f.csv_dir) / "W.csv", io::matrix_csv(w.weights()));
  std::cout << j.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Consensus on compact submanifolds: experiments and regularity checks"};
  app.require_subcommand(1);

  std::uint64_t seed0 = 0;
  try {
    seed0 = default_seed();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  RunFlags rf;
  rf.common.seed = seed0;
  auto* run_cmd = app.add_subcommand("run", "run one configuration and write its trajectory");
  add_manifold_flags(run_cmd, rf.common);
  add_graph_flags(run_cmd, rf.common);
  add_seed_flags(run_cmd, rf.common);
  run_cmd->add_option("--method", rf.method, "rgd-qr | rgd-polar | pgd")->capture_default_str();
  run_cmd->add_option("--alpha", rf.alpha, "1 | two-over-l-plus-mu | positive number")->capture_default_str();
  run_cmd->add_option("--t", rf.t, "communication rounds per iteration")->capture_default_str();
  run_cmd->add_option("--max-iters", rf.max_iters)->capture_default_str();
  run_cmd->add_option("--tol", rf.tol, "tolerance on ||x - x_bar|| / N")->capture_default_str();
  run_cmd->add_option("--spread", rf.spread, "initialize within this spread of a random point");
  run_cmd->add_option("--out", rf.out, "artifact directory")->capture_default_str();
  run_cmd->add_option("--name", rf.name, "artifact base name");

  SuiteFlags sf;
  sf.seed = seed0;
  auto* suite_cmd = app.add_subcommand("suite", "run a built-in figure grid or a user grid file");
  suite_cmd->add_option("name", sf.name, "figure2 | figure3 | figure4 | figure5 | figure6");
  suite_cmd->add_option("--grid", sf.grid, "JSON grid file");
  suite_cmd->add_option("--seed", sf.seed, "first seed; MC_SEED sets the default")->capture_default_str();
  suite_cmd->add_option("--seed-count", sf.seed_count, "number of consecutive seeds")->capture_default_str();
  suite_cmd->add_option("--jobs", sf.jobs, "concurrent runs (0: hardware threads)")->capture_default_str();
  suite_cmd->add_option("--out", sf.out, "artifact directory (default out/<suite>)");
  suite_cmd->add_flag("--json", sf.json, "machine-readable summary on stdout");

  ValidateFlags vf;
  vf.common.manifold = "sphere";
  vf.common.d = 10;
  vf.common.r = 1;
  vf.common.graph = "star";
  vf.common.seed = seed0;
  auto* val_cmd = app.add_subcommand("validate", "fit constants and check every regularity inequality");
  add_manifold_flags(val_cmd, vf.common);
  add_graph_flags(val_cmd, vf.common);
  add_seed_flags(val_cmd, vf.common);
  val_cmd->add_option("--t", vf.t)->capture_default_str();
  val_cmd->add_option("--samples", vf.samples)->capture_default_str();
  val_cmd->add_option("--eps", vf.eps, "sampling radius")->capture_default_str();
  val_cmd->add_option("--beta", vf.beta, "tube fraction in (0, 2)")->capture_default_str();
  val_cmd->add_option("--nu", vf.nu, "RSI mixing weight in [0, 1]")->capture_default_str();
  val_cmd->add_option("--scheme", vf.scheme, "retraction used for fitting: qr | polar")->capture_default_str();
  val_cmd->add_option("--out", vf.out, "write report.json and report.txt here");

  SpectrumFlags pf;
  pf.common.seed = seed0;
  auto* spec_cmd = app.add_subcommand("spectrum", "print mixing spectra and power thresholds as JSON");
  add_graph_flags(spec_cmd, pf.common);
  spec_cmd->add_option("--seed", pf.common.seed, "random-graph seed; MC_SEED sets the default")->capture_default_str();
  spec_cmd->add_option("--t", pf.ts, "one or more powers")->capture_default_str();
  spec_cmd->add_option("--beta", pf.beta)->capture_default_str();
  spec_cmd->add_option("--csv-dir", pf.csv_dir, "also write W.csv and spectral_t<t>.csv here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*run_cmd) return cmd_run(rf);
    if (*suite_cmd) return cmd_suite(sf);
    if (*val_cmd) return cmd_validate(vf);
    if (*spec_cmd) return cmd_spectrum(pf);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return is_config_error(e.code()) ? kExitConfig : kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitConfig;
}
