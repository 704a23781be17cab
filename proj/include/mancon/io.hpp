#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "mancon/verify.hpp"

namespace mancon::io {

using Json = nlohmann::ordered_json;

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Non-finite values become null, the only portable JSON spelling.
inline Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

/// Writes through a sibling temporary and renames it into place, so readers
/// never observe a partially written file.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::InvalidArgument, "cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw Error(ErrorCode::InvalidArgument, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

// ---- mixing ---------------------------------------------------------------

inline std::string matrix_csv(const Matrix& w) {
  std::ostringstream os;
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) os << (j ? "," : "") << fmt(w(i, j));
    os << '\n';
  }
  return os.str();
}

inline std::string spectral_csv(const SpectralSummary& s) {
  std::ostringstream os;
  os << "t,sigma2,sigma2_t,lambda2_t,lambdaN_t,L_t,mu_t,alpha_opt\n";
  os << s.t << ',' << fmt(s.sigma2) << ',' << fmt(s.sigma2_t()) << ',' << fmt(s.lambda2_t) << ','
     << fmt(s.lambdaN_t) << ',' << fmt(s.L_t) << ',' << fmt(s.mu_t) << ',' << fmt(s.alpha_opt) << '\n';
  return os.str();
}

inline Json to_json(const GraphSpec& g) {
  Json j;
  j["kind"] = to_string(g.kind);
  j["n"] = g.n;
  j["edge_probability"] = g.p;
  j["seed"] = g.seed;
  j["weights"] = "metropolis";
  return j;
}

inline Json to_json(const SpectralSummary& s) {
  Json j;
  j["t"] = s.t;
  j["sigma2"] = s.sigma2;
  j["sigma2_t"] = s.sigma2_t();
  j["lambda2_t"] = s.lambda2_t;
  j["lambdaN_t"] = s.lambdaN_t;
  j["L_t"] = s.L_t;
  j["mu_t"] = s.mu_t;
  j["alpha_opt"] = s.alpha_opt;
  j["optimal_rate"] = s.optimal_rate();
  Json ev = Json::array();
  for (Eigen::Index k = 0; k < s.eigenvalues.size(); ++k) ev.push_back(s.eigenvalues(k));
  j["eigenvalues"] = ev;
  return j;
}

inline Json to_json(const PowerThresholds& p) {
  Json j;
  j["unit_step"] = p.unit_step;
  j["general_step"] = p.general_step;
  j["error_bound"] = p.error_bound;
  return j;
}

// ---- trajectories ---------------------------------------------------------

inline constexpr const char* kTrajectoryHeader =
    "iter,objective,euclid_err,manifold_err,finf_err,normalized_err,rgrad_norm,mean_drift";

inline std::string trajectory_csv(const Trajectory& tr) {
  std::ostringstream os;
  os << kTrajectoryHeader << '\n';
  for (const auto& r : tr.records) {
    const auto& m = r.metrics;
    os << r.iter << ',' << fmt(m.objective) << ',' << fmt(m.euclidean_error) << ',' << fmt(m.manifold_error) << ','
       << fmt(m.finf_error) << ',' << fmt(m.normalized_error) << ',' << fmt(m.rgrad_norm) << ','
       << fmt(r.mean_drift) << '\n';
  }
  return os.str();
}

inline Json to_json(const Manifold& m) {
  Json j;
  j["kind"] = to_string(m.kind());
  j["d"] = m.rows();
  j["r"] = m.cols();
  j["name"] = m.name();
  j["gamma"] = num(m.gamma());
  j["feasibility_tol"] = m.feasibility_tol();
  return j;
}

inline Json to_json(const RunConfig& c) {
  Json j;
  j["manifold"] = to_json(c.manifold);
  j["graph"] = to_json(c.graph);
  j["t"] = c.t;
  j["alpha"] = to_string(c.alpha);
  j["method"] = to_string(c.method);
  j["max_iters"] = c.max_iters;
  j["tol"] = c.tol;
  j["tol_applies_to"] = "normalized_err = ||x - x_bar|| / N";
  j["init_seed"] = c.init_seed;
  j["init_spread"] = std::isinf(c.init_spread) ? Json("gaussian-projection") : Json(c.init_spread);
  return j;
}

inline Json to_json(const RateEstimate& r) {
  Json j;
  j["rho"] = r.rho;
  j["max_step_ratio"] = r.max_step_ratio;
  j["r_squared"] = r.r_squared;
  j["first_iter"] = r.first_iter;
  j["count"] = r.count;
  return j;
}

inline Json trajectory_metadata(const Trajectory& tr, const std::optional<RateEstimate>& rate) {
  Json j;
  j["config"] = to_json(tr.config);
  j["alpha_resolved"] = tr.alpha;
  j["alpha_source"] = tr.config.alpha.kind == StepSize::Kind::TwoOverLPlusMu ? "t=1 spectrum" : "config";
  j["spectral"] = to_json(tr.spectral);
  j["spectral_t1"] = to_json(tr.spectral_t1);
  j["terminal_reason"] = to_string(tr.terminal_reason);
  j["iterations"] = tr.iterations();
  j["final_normalized_err"] = tr.records.empty() ? Json(nullptr) : num(tr.records.back().metrics.normalized_error);
  if (!tr.message.empty()) j["message"] = tr.message;
  const double s2t = tr.spectral.sigma2_t();
  j["theory"] = {{"unit_step_rate", (1.0 + 2.0 * s2t) / 2.0}, {"sigma2_t", s2t}};
  j["rate"] = rate ? to_json(*rate) : Json(nullptr);
  j["fitted_constants"] = nullptr;  // runs do not consume fitted constants
  return j;
}

// ---- regularity report ----------------------------------------------------

inline Json to_json(const EstimatedConstants& k) {
  Json j;
  j["M0"] = k.M0;
  j["M1"] = k.M1;
  j["M2"] = k.M2;
  j["Lp"] = k.Lp;
  j["Q"] = k.Q;
  j["observed"] = {{"M0", k.M0_observed}, {"M1", k.M1_observed}, {"M2", k.M2_observed},
                   {"Lp", k.Lp_observed}, {"Q", k.Q_observed}};
  j["safety"] = k.safety;
  j["sample_count"] = k.sample_count;
  j["degenerate"] = k.degenerate;
  j["confidence_note"] = k.confidence_note;
  return j;
}

inline Json to_json(const NeighborhoodConstants& c) {
  Json j;
  j["gamma"] = num(c.gamma);
  j["beta"] = c.beta;
  j["nu"] = c.nu;
  j["finf"] = c.finf;
  j["sigma2_t"] = c.sigma2_t;
  j["delta0"] = num(c.delta0);
  j["delta1"] = num(c.delta1);
  j["delta2"] = num(c.delta2);
  j["Phi"] = c.Phi;
  j["gammaR"] = c.gammaR;
  j["gammaR_tilde"] = c.gammaR_tilde;
  j["alpha_max"] = num(c.alpha_max);
  j["c_hat"] = c.c_hat;
  j["c_r"] = c.c_r;
  j["delta_r"] = num(c.delta_r);
  j["Q_eb"] = c.Q_eb;
  j["thresholds"] = {{"unit_step", c.unit_step_threshold},
                     {"general_step", c.general_step_threshold},
                     {"error_bound", c.error_bound_threshold}};
  j["positive"] = c.positive;
  j["notes"] = c.notes;
  return j;
}

inline Json to_json(const InequalityRecord& r) {
  Json j;
  j["name"] = r.name;
  j["statement"] = r.statement;
  j["samples_tested"] = r.samples_tested;
  j["held"] = r.held;
  j["violations"] = r.violations;
  j["hypothesis_failed"] = r.hypothesis_failed;
  j["worst_margin"] = num(r.worst_margin);
  j["worst_relative_margin"] = num(r.worst_relative_margin);
  Json p;
  for (const auto& [k, v] : r.parameters) p[k] = num(v);
  j["parameters"] = p;
  return j;
}

inline Json to_json(const ErrorBoundEquivalence& e) {
  Json j;
  j["tested"] = e.tested;
  j["skipped"] = e.skipped;
  j["c"] = num(e.c_fit);
  j["c_hat"] = num(e.c_hat_fit);
  j["delta"] = e.delta;
  j["Q_eb"] = e.Q_eb;
  j["gap"] = e.gap;
  j["bound"] = e.bound;
  j["residual_violations"] = e.residual_violations;
  j["implied_tested"] = e.implied_tested;
  j["implied_violations"] = e.implied_violations;
  j["consistent"] = e.consistent;
  return j;
}

inline Json to_json(const RegularityReport& r) {
  Json j;
  j["manifold"] = r.manifold;
  j["n"] = r.n;
  j["t"] = r.t;
  j["options"] = {{"samples", r.options.samples}, {"eps", r.options.eps},   {"beta", r.options.beta},
                  {"nu", r.options.nu},           {"seed", r.options.seed}, {"scheme", to_string(r.options.scheme)}};
  j["spectral"] = to_json(r.spectral);
  j["constants"] = to_json(r.constants);
  j["neighborhood"] = to_json(r.neighborhood);
  Json recs = Json::array();
  for (const auto& rec : r.records) recs.push_back(to_json(rec));
  j["inequalities"] = recs;
  j["error_bound_equivalence"] = to_json(r.error_bound);
  j["rsi_consistency_gap"] = r.rsi_consistency_gap;
  j["total_violations"] = r.total_violations();
  return j;
}

inline std::string report_table(const RegularityReport& r) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-28s %8s %8s %8s %10s %14s\n", "inequality", "tested", "held", "violated",
                "hyp-failed", "worst-rel");
  os << line;
  for (const auto& rec : r.records) {
    std::snprintf(line, sizeof line, "%-28s %8d %8d %8d %10d %14.6e\n", rec.name.c_str(), rec.samples_tested,
                  rec.held, rec.violations, rec.hypothesis_failed, rec.worst_relative_margin);
    os << line;
  }
  const auto& k = r.constants;
  std::snprintf(line, sizeof line, "constants (empirical, x%.2g): M0=%.4g M1=%.4g M2=%.4g Lp=%.4g Q=%.4g\n", k.safety,
                k.M0, k.M1, k.M2, k.Lp, k.Q);
  os << line;
  const auto& nb = r.neighborhood;
  std::snprintf(line, sizeof line, "delta0=%.4g delta1=%.4g delta2=%.4g c_hat=%.4g c_r=%.4g alpha_max=%.4g\n",
                nb.delta0, nb.delta1, nb.delta2, nb.c_hat, nb.c_r, nb.alpha_max);
  os << line;
  for (const auto& n : nb.notes) os << "note: " << n << '\n';
  std::snprintf(line, sizeof line, "error-bound equivalence: c=%.6g c_hat=%.6g gap=%.3g bound=%.3g -> %s\n",
                r.error_bound.c_fit, r.error_bound.c_hat_fit, r.error_bound.gap, r.error_bound.bound,
                r.error_bound.consistent ? "consistent" : "INCONSISTENT");
  os << line;
  return os.str();
}

}  // namespace mancon::io
