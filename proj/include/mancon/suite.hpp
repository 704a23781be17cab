#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "mancon/io.hpp"

namespace mancon {

// ---- name parsing shared by the CLI and grid files -------------------------

inline Method parse_method(const std::string& s) {
  if (s == "rgd-qr") return Method::RgdQR;
  if (s == "rgd-polar") return Method::RgdPolar;
  if (s == "pgd") return Method::Pgd;
  throw Error(ErrorCode::InvalidArgument, "unknown method '" + s + "' (rgd-qr, rgd-polar, pgd)");
}

inline GraphKind parse_graph_kind(const std::string& s) {
  if (s == "random") return GraphKind::Random;
  if (s == "star") return GraphKind::Star;
  if (s == "cycle") return GraphKind::Cycle;
  if (s == "complete") return GraphKind::Complete;
  throw Error(ErrorCode::InvalidArgument, "unknown graph '" + s + "' (random, star, cycle, complete)");
}

inline Manifold make_manifold(const std::string& kind, int d, int r) {
  if (kind == "stiefel") return Manifold::stiefel(d, r);
  if (kind == "oblique") return Manifold::oblique(d, r);
  if (kind == "sphere") return Manifold::sphere(d);
  if (kind == "euclidean") return Manifold::euclidean(d, r);
  throw Error(ErrorCode::InvalidArgument, "unknown manifold '" + kind + "' (stiefel, oblique, sphere, euclidean)");
}

/// "1", "two-over-l-plus-mu", or a positive number.
inline StepSize parse_step(const std::string& s) {
  if (s == "1" || s == "unit") return StepSize::unit();
  if (s == "two-over-l-plus-mu") return StepSize::optimal();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || !(v > 0.0) || !std::isfinite(v)) {
    throw Error(ErrorCode::InvalidArgument, "step size must be 1, two-over-l-plus-mu or a positive number, got '" + s + "'");
  }
  return StepSize::fixed(v);
}

// ---- suites ----------------------------------------------------------------

struct SuiteRun {
  std::string name;
  RunConfig config;
};

struct ExperimentSuite {
  std::string name;
  std::vector<SuiteRun> runs;

  void require_unique_names() const {
    std::set<std::string> seen;
    for (const auto& r : runs) {
      if (!seen.insert(r.name).second) throw Error(ErrorCode::InvalidArgument, "duplicate run name '" + r.name + "'");
    }
  }
};

inline std::string run_name(const RunConfig& c, bool with_manifold) {
  std::string alpha = to_string(c.alpha);
  if (c.alpha.kind == StepSize::Kind::TwoOverLPlusMu) alpha = "opt";
  std::string name = with_manifold ? to_string(c.manifold.kind()) + "-" : std::string();
  name += to_string(c.graph.kind) + "-" + to_string(c.method) + "-a" + alpha + "-t" + std::to_string(c.t) + "-s" +
          std::to_string(c.init_seed);
  return name;
}

/// Every method sharing a seed also shares the graph and x0, so comparisons
/// within a suite are paired.
inline RunConfig protocol_config(const Manifold& m, GraphKind g, Method method, StepSize alpha, int t,
                                 std::uint64_t seed) {
  RunConfig c;
  c.manifold = m;
  c.graph = {g, 15, 0.5, seed};
  c.method = method;
  c.alpha = alpha;
  c.t = t;
  c.init_seed = seed;
  return c;
}

inline const std::vector<std::string>& builtin_suite_names() {
  static const std::vector<std::string> names = {"figure2", "figure3", "figure4", "figure5", "figure6"};
  return names;
}

/// Built-in grids:
///   figure2: St(200,2), {random, star, cycle} x {PGD, RGD-QR, RGD-Polar}, alpha = 1, t = 1;
///   figure3/4: St(200,2) star/cycle; figure5/6: Ob(200,5) star/cycle. Each of
///   these compares alpha in {1, 2/(L+mu)} at t = 1 and t in {1, 10} at
///   alpha = 1 for PGD and RGD-QR, the shared (1, 1) configuration run once.
inline ExperimentSuite builtin_suite(const std::string& name, const std::vector<std::uint64_t>& seeds) {
  ExperimentSuite s;
  s.name = name;
  if (name == "figure2") {
    const Manifold m = Manifold::stiefel(200, 2);
    for (std::uint64_t seed : seeds)
      for (GraphKind g : {GraphKind::Random, GraphKind::Star, GraphKind::Cycle})
        for (Method me : {Method::Pgd, Method::RgdQR, Method::RgdPolar}) {
          RunConfig c = protocol_config(m, g, me, StepSize::unit(), 1, seed);
          s.runs.push_back({run_name(c, false), c});
        }
    return s;
  }
  const bool known = name == "figure3" || name == "figure4" || name == "figure5" || name == "figure6";
  if (!known) throw Error(ErrorCode::InvalidArgument, "unknown suite '" + name + "'");
  const Manifold m = (name == "figure3" || name == "figure4") ? Manifold::stiefel(200, 2) : Manifold::oblique(200, 5);
  const GraphKind g = (name == "figure3" || name == "figure5") ? GraphKind::Star : GraphKind::Cycle;
  for (std::uint64_t seed : seeds)
    for (Method me : {Method::Pgd, Method::RgdQR}) {
      for (auto [alpha, t] : {std::pair{StepSize::unit(), 1}, std::pair{StepSize::optimal(), 1},
                              std::pair{StepSize::unit(), 10}}) {
        RunConfig c = protocol_config(m, g, me, alpha, t, seed);
        s.runs.push_back({run_name(c, false), c});
      }
    }
  return s;
}

/// User grid: a JSON object whose list-valued keys are crossed, e.g.
///   {"name": "mine", "manifolds": [{"kind": "stiefel", "d": 200, "r": 2}],
///    "graphs": ["star"], "methods": ["pgd", "rgd-qr"],
///    "alphas": ["1", "two-over-l-plus-mu"], "ts": [1, 10],
///    "n": 15, "p": 0.5, "max_iters": 1000, "tol": 2e-16}
/// Seeds come from the command line. Any empty list makes the grid empty,
/// which is rejected.
inline ExperimentSuite suite_from_json(const io::Json& j, const std::vector<std::uint64_t>& seeds) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "grid file must hold a JSON object");
  auto list = [&](const char* key) {
    if (!j.contains(key)) throw Error(ErrorCode::InvalidArgument, std::string("grid file lacks '") + key + "'");
    const auto& v = j.at(key);
    if (!v.is_array()) throw Error(ErrorCode::InvalidArgument, std::string("'") + key + "' must be a list");
    return v;
  };
  ExperimentSuite s;
  s.name = j.value("name", std::string("grid"));
  const int n = j.value("n", 15);
  const double p = j.value("p", 0.5);
  const int max_iters = j.value("max_iters", 1000);
  const double tol = j.value("tol", 2e-16);
  const auto manifolds = list("manifolds");
  const auto graphs = list("graphs");
  const auto methods = list("methods");
  const auto alphas = list("alphas");
  const auto ts = list("ts");
  for (std::uint64_t seed : seeds)
    for (const auto& mj : manifolds) {
      const Manifold m = make_manifold(mj.at("kind").get<std::string>(), mj.value("d", 200), mj.value("r", 1));
      for (const auto& gj : graphs)
        for (const auto& me : methods)
          for (const auto& aj : alphas)
            for (const auto& tj : ts) {
              RunConfig c = protocol_config(m, parse_graph_kind(gj.get<std::string>()),
                                            parse_method(me.get<std::string>()),
                                            parse_step(aj.is_string() ? aj.get<std::string>() : io::fmt(aj.get<double>())),
                                            tj.get<int>(), seed);
              c.graph.n = n;
              c.graph.p = p;
              c.max_iters = max_iters;
              c.tol = tol;
              s.runs.push_back({m.name() + "-" + run_name(c, false), c});
            }
    }
  if (s.runs.empty()) throw Error(ErrorCode::InvalidArgument, "grid is empty");
  return s;
}

struct SuiteResult {
  std::string name;
  RunConfig config;
  bool ok = false;  // false: configuration or numerical error
  TerminalReason terminal = TerminalReason::MaxIters;
  int iterations = 0;
  int first_below_1e13 = -1;  // first iteration with normalized error <= 1e-13
  std::optional<RateEstimate> rate;
  std::string message;
};

inline int first_iteration_below(const Trajectory& tr, double level) {
  for (const auto& r : tr.records) {
    if (r.metrics.in_tube && r.metrics.normalized_error <= level) return r.iter;
  }
  return -1;
}

inline std::optional<RateEstimate> try_estimate_rate(const Trajectory& tr, double tail_fraction = 0.5) {
  try {
    return estimate_rate(tr, tail_fraction);
  } catch (const Error&) {
    return std::nullopt;
  }
}

/// Executes a run and writes <dir>/<name>.csv and <dir>/<name>.json. The
/// trajectory is handed back through `keep` when given.
inline SuiteResult execute_run(const SuiteRun& r, const std::filesystem::path& dir, Trajectory* keep = nullptr) {
  SuiteResult res;
  res.name = r.name;
  res.config = r.config;
  try {
    const Trajectory tr = run(r.config);
    res.terminal = tr.terminal_reason;
    res.iterations = tr.iterations();
    res.first_below_1e13 = first_iteration_below(tr, 1e-13);
    res.rate = try_estimate_rate(tr);
    res.ok = tr.terminal_reason != TerminalReason::NumericalFailure;
    res.message = tr.message;
    if (!dir.empty()) {
      io::write_atomic(dir / (r.name + ".csv"), io::trajectory_csv(tr));
      io::write_atomic(dir / (r.name + ".json"), io::trajectory_metadata(tr, res.rate).dump(2) + "\n");
    }
    if (keep) *keep = tr;
  } catch (const Error& e) {
    res.ok = false;
    res.message = e.what();
  }
  return res;
}

/// Runs the suite on up to `jobs` threads. Results keep suite order whatever
/// the completion order.
inline std::vector<SuiteResult> run_suite(const ExperimentSuite& s, const std::filesystem::path& dir, int jobs,
                                          const std::function<void(const SuiteResult&)>& on_done = {}) {
  s.require_unique_names();
  if (!dir.empty()) std::filesystem::create_directories(dir);
  std::vector<SuiteResult> out(s.runs.size());
  std::atomic<std::size_t> next{0};
  std::mutex report_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < s.runs.size(); i = next++) {
      out[i] = execute_run(s.runs[i], dir);
      if (on_done) {
        std::lock_guard<std::mutex> lock(report_mutex);
        on_done(out[i]);
      }
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(s.runs.size())));
  std::vector<std::thread> pool;
  for (int k = 1; k < n; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return out;
}

inline std::string suite_summary_csv(const std::vector<SuiteResult>& results) {
  std::ostringstream os;
  os << "name,manifold,graph,method,alpha,t,seed,terminal,iterations,first_iter_le_1e-13,rho,r_squared\n";
  for (const auto& r : results) {
    const auto& c = r.config;
    os << r.name << ',' << c.manifold.name() << ',' << to_string(c.graph.kind) << ',' << to_string(c.method) << ','
       << to_string(c.alpha) << ',' << c.t << ',' << c.init_seed << ','
       << (r.ok ? to_string(r.terminal) : std::string("Error")) << ',' << r.iterations << ',' << r.first_below_1e13
       << ',' << (r.rate ? io::fmt(r.rate->rho) : "") << ',' << (r.rate ? io::fmt(r.rate->r_squared) : "") << '\n';
  }
  return os.str();
}

}  // namespace mancon
