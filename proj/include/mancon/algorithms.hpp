#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "mancon/problem.hpp"

namespace mancon {

enum class Method { RgdQR, RgdPolar, Pgd };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::RgdQR: return "rgd-qr";
    case Method::RgdPolar: return "rgd-polar";
    case Method::Pgd: return "pgd";
  }
  return "unknown";
}

struct StepSize {
  enum class Kind { Unit, TwoOverLPlusMu, Fixed };
  Kind kind = Kind::Unit;
  double value = 1.0;  // Fixed only

  static StepSize unit() { return {Kind::Unit, 1.0}; }
  static StepSize optimal() { return {Kind::TwoOverLPlusMu, 0.0}; }
  static StepSize fixed(double a) { return {Kind::Fixed, a}; }
};

inline std::string to_string(const StepSize& a) {
  switch (a.kind) {
    case StepSize::Kind::Unit: return "1";
    case StepSize::Kind::TwoOverLPlusMu: return "two-over-l-plus-mu";
    case StepSize::Kind::Fixed: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", a.value);
      return buf;
    }
  }
  return "?";
}

struct RunConfig {
  Manifold manifold = Manifold::stiefel(200, 2);
  GraphSpec graph{};
  int t = 1;
  StepSize alpha = StepSize::unit();
  Method method = Method::RgdQR;
  int max_iters = 1000;
  double tol = 2e-16;  // on normalized_error = ||x - x_bar|| / N
  std::uint64_t init_seed = 0;
  double init_spread = kInf;  // kInf: independent Gaussian projections
};

enum class TerminalReason { ToleranceMet, MaxIters, OutsideTube, NumericalFailure };

inline std::string to_string(TerminalReason r) {
  switch (r) {
    case TerminalReason::ToleranceMet: return "ToleranceMet";
    case TerminalReason::MaxIters: return "MaxIters";
    case TerminalReason::OutsideTube: return "OutsideTube";
    case TerminalReason::NumericalFailure: return "NumericalFailure";
  }
  return "?";
}

struct IterationRecord {
  int iter = 0;
  ConsensusMetrics metrics;
  double mean_drift = std::numeric_limits<double>::quiet_NaN();  // ||x_bar_{k+1} - x_bar_k||
};

struct Trajectory {
  RunConfig config;
  SpectralSummary spectral;     // of W at the configured t
  SpectralSummary spectral_t1;  // of W at t = 1; source of the 2/(L+mu) step
  double alpha = 1.0;           // resolved step size
  std::vector<IterationRecord> records;
  TerminalReason terminal_reason = TerminalReason::MaxIters;
  std::string message;

  /// Index of the record that met the tolerance, or the record count.
  int iterations() const { return records.empty() ? 0 : records.back().iter; }
};

/// x_i <- R_{x_i}(-alpha grad_i phi^t(x)).
inline AgentStack rgd_step(const AgentStack& s, const MixingMatrix& w, double alpha, Retraction scheme,
                           const Blocks* rgrad = nullptr) {
  if (!(alpha > 0.0)) throw Error(ErrorCode::InvalidArgument, "step size must be positive");
  Blocks g = rgrad ? *rgrad : riemannian_gradient(s, w);
  Blocks next;
  next.reserve(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) next.push_back(s.manifold().retract(scheme, s[i], -alpha * g[i]));
  return AgentStack(s.manifold(), std::move(next));
}

/// x_i <- P_M(x_i - alpha grad_i^E phi^t(x)); with alpha = 1 this is P_M(sum_j W^t_ij x_j).
inline AgentStack pgd_step(const AgentStack& s, const MixingMatrix& w, double alpha, const Blocks* egrad = nullptr) {
  if (!(alpha > 0.0)) throw Error(ErrorCode::InvalidArgument, "step size must be positive");
  const Blocks g = egrad ? *egrad : euclidean_gradient(s, w);
  const auto a = static_cast<long double>(alpha);
  Blocks next;
  next.reserve(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    next.push_back(narrow(s.manifold().project_wide(widen(s[i]) - a * widen(g[i]))));
  }
  return AgentStack(s.manifold(), std::move(next));
}

/// Seeded initial stack. Infinite spread: every block is the projection of an
/// independent standard Gaussian matrix. Finite spread s: a random base point
/// z and blocks R_z(s * xi_i) with xi_i random unit tangent vectors (polar
/// retraction), so that max_i ||x_i - z|| <= s + M0 s^2.
inline AgentStack initialize(const Manifold& m, int n, double spread, std::uint64_t seed) {
  if (!(spread >= 0.0)) throw Error(ErrorCode::InvalidArgument, "spread must be nonnegative");
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 agents");
  Rng rng(seed);
  Blocks blocks;
  blocks.reserve(static_cast<std::size_t>(n));
  if (std::isinf(spread)) {
    for (int i = 0; i < n; ++i) blocks.push_back(m.random_point(rng));
  } else {
    const Matrix z = m.random_point(rng);
    for (int i = 0; i < n; ++i) {
      const Matrix xi = m.random_unit_tangent(z, rng);
      blocks.push_back(m.retract(Retraction::Polar, z, spread * xi));
    }
  }
  return AgentStack(m, std::move(blocks));
}

inline double resolve_step(const StepSize& a, const SpectralSummary& t1) {
  switch (a.kind) {
    case StepSize::Kind::Unit: return 1.0;
    case StepSize::Kind::TwoOverLPlusMu: return t1.alpha_opt;
    case StepSize::Kind::Fixed:
      if (!(a.value > 0.0)) throw Error(ErrorCode::InvalidArgument, "step size must be positive");
      return a.value;
  }
  return 1.0;
}

/// Iterates from x0 until the normalized manifold error drops to cfg.tol or
/// cfg.max_iters steps were taken. Record k describes iterate k; numerical
/// failures end the run with NumericalFailure instead of propagating.
inline Trajectory run(const RunConfig& cfg, const MixingMatrix& w, AgentStack x0) {
  if (!(cfg.tol >= 0.0)) throw Error(ErrorCode::InvalidArgument, "tolerance must be nonnegative");
  if (cfg.max_iters < 1) throw Error(ErrorCode::InvalidArgument, "max_iters must be positive");
  if (w.t() != cfg.t) throw Error(ErrorCode::InvalidArgument, "mixing matrix power differs from config t");
  Trajectory traj;
  traj.config = cfg;
  traj.spectral = spectral_summary(w, cfg.t);
  traj.spectral_t1 = spectral_summary(w, 1);
  traj.alpha = resolve_step(cfg.alpha, traj.spectral_t1);

  AgentStack x = std::move(x0);
  StackState st = analyze(x, w);
  std::optional<Matrix> prev_mean;
  for (int k = 0;; ++k) {
    IterationRecord rec;
    rec.iter = k;
    rec.metrics = metrics_from(x, w, st);
    if (!traj.records.empty() && prev_mean && st.in_tube) {
      traj.records.back().mean_drift = (st.manifold_mean - *prev_mean).norm();
    }
    prev_mean = st.in_tube ? std::optional<Matrix>(st.manifold_mean) : std::nullopt;
    traj.records.push_back(rec);

    if (st.in_tube && rec.metrics.normalized_error <= cfg.tol) {
      traj.terminal_reason = TerminalReason::ToleranceMet;
      break;
    }
    if (k >= cfg.max_iters) {
      traj.terminal_reason = st.in_tube ? TerminalReason::MaxIters : TerminalReason::OutsideTube;
      break;
    }
    try {
      switch (cfg.method) {
        case Method::RgdQR: x = rgd_step(x, w, traj.alpha, Retraction::QR, &st.rgrad); break;
        case Method::RgdPolar: x = rgd_step(x, w, traj.alpha, Retraction::Polar, &st.rgrad); break;
        case Method::Pgd: x = pgd_step(x, w, traj.alpha, &st.egrad); break;
      }
      st = analyze(x, w);
    } catch (const Error& e) {
      traj.terminal_reason = TerminalReason::NumericalFailure;
      traj.message = "iteration " + std::to_string(k) + ": " + e.what();
      break;
    }
  }
  return traj;
}

inline Trajectory run(const RunConfig& cfg) {
  const Graph g = build_graph(cfg.graph);
  const MixingMatrix w = metropolis_weights(g).with_power(cfg.t);
  return run(cfg, w, initialize(cfg.manifold, cfg.graph.n, cfg.init_spread, cfg.init_seed));
}

struct RateEstimate {
  double rho = 0.0;             // exp(slope) of the log-error least-squares fit
  double max_step_ratio = 0.0;  // max e_{k+1}/e_k over the window
  double r_squared = 0.0;
  int first_iter = 0;
  int count = 0;
};

/// Geometric rate fitted on the last `tail_fraction` of the pre-tolerance
/// records that carry a positive manifold error.
inline RateEstimate estimate_rate(const Trajectory& traj, double tail_fraction) {
  if (!(tail_fraction > 0.0 && tail_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "tail_fraction must lie in (0, 1)");
  }
  std::vector<std::pair<double, double>> pts;  // (iter, log error)
  for (const auto& r : traj.records) {
    const double e = r.metrics.manifold_error;
    if (!r.metrics.in_tube || !(e > 0.0)) continue;
    if (r.metrics.normalized_error <= traj.config.tol) break;
    pts.emplace_back(static_cast<double>(r.iter), std::log(e));
  }
  const auto total = pts.size();
  const auto take = static_cast<std::size_t>(std::ceil(tail_fraction * static_cast<double>(total)));
  if (take < 5) throw Error(ErrorCode::InsufficientData, "fewer than 5 records in the tail window");
  const std::vector<std::pair<double, double>> tail(pts.end() - static_cast<std::ptrdiff_t>(take), pts.end());

  double mx = 0.0, my = 0.0;
  for (auto [x, y] : tail) {
    mx += x;
    my += y;
  }
  mx /= static_cast<double>(take);
  my /= static_cast<double>(take);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (auto [x, y] : tail) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
    syy += (y - my) * (y - my);
  }
  RateEstimate est;
  const double slope = sxy / sxx;
  est.rho = std::exp(slope);
  est.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  est.first_iter = static_cast<int>(tail.front().first);
  est.count = static_cast<int>(take);
  for (std::size_t k = 1; k < tail.size(); ++k) {
    if (tail[k].first == tail[k - 1].first + 1.0) {
      est.max_step_ratio = std::max(est.max_step_ratio, std::exp(tail[k].second - tail[k - 1].second));
    }
  }
  return est;
}

}  // namespace mancon
