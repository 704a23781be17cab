#pragma once

#include <limits>
#include <utility>

#include "mancon/manifold.hpp"
#include "mancon/mixing.hpp"

namespace mancon {

/// N >= 2 agents, each holding a point of the same manifold.
class AgentStack {
 public:
  AgentStack(Manifold m, Blocks blocks) : manifold_(std::move(m)), blocks_(std::move(blocks)) {
    if (blocks_.size() < 2) throw Error(ErrorCode::InvalidArgument, "a stack needs at least 2 agents");
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      if (!manifold_.contains(blocks_[i])) {
        throw Error(ErrorCode::InfeasiblePoint,
                    "block " + std::to_string(i) + " is not on " + manifold_.name());
      }
    }
  }

  const Manifold& manifold() const noexcept { return manifold_; }
  const Blocks& blocks() const noexcept { return blocks_; }
  const Matrix& operator[](std::size_t i) const { return blocks_[i]; }
  int size() const noexcept { return static_cast<int>(blocks_.size()); }

 private:
  Manifold manifold_;
  Blocks blocks_;
};

namespace detail {
inline void require_compatible(const AgentStack& s, const MixingMatrix& w) {
  if (w.n() != s.size()) {
    throw Error(ErrorCode::DimensionMismatch, "mixing matrix size " + std::to_string(w.n()) +
                                                  " != agent count " + std::to_string(s.size()));
  }
}
}  // namespace detail

/// Row i of W^t applied to the stack: sum_j W^t_ij x_j.
inline Blocks mix(const AgentStack& s, const MixingMatrix& w) {
  detail::require_compatible(s, w);
  const Matrix& wt = w.powered();
  const int n = s.size();
  Blocks out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    WideMatrix acc = WideMatrix::Zero(s.manifold().rows(), s.manifold().cols());
    for (int j = 0; j < n; ++j) {
      const double wij = wt(i, j);
      if (wij != 0.0) acc += static_cast<long double>(wij) * widen(s[static_cast<std::size_t>(j)]);
    }
    out.push_back(narrow(acc));
  }
  return out;
}

/// phi^t(x) = 1/4 sum_ij W^t_ij ||x_i - x_j||^2.
inline double objective(const AgentStack& s, const MixingMatrix& w) {
  detail::require_compatible(s, w);
  const Matrix& wt = w.powered();
  const int n = s.size();
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double wij = wt(i, j) + wt(j, i);
      if (wij != 0.0) acc += wij * (s[static_cast<std::size_t>(i)] - s[static_cast<std::size_t>(j)]).squaredNorm();
    }
  }
  return 0.25 * acc;
}

/// Block i: x_i - sum_j W^t_ij x_j, evaluated as sum_j W^t_ij (x_i - x_j).
/// Near consensus the differences are exact, so the gradient keeps full
/// relative accuracy instead of inheriting an ulp of x_i as absolute noise.
inline Blocks euclidean_gradient(const AgentStack& s, const MixingMatrix& w) {
  detail::require_compatible(s, w);
  const Matrix& wt = w.powered();
  const int n = s.size();
  Blocks g;
  g.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Matrix& xi = s[static_cast<std::size_t>(i)];
    WideMatrix acc = WideMatrix::Zero(xi.rows(), xi.cols());
    for (int j = 0; j < n; ++j) {
      const double wij = wt(i, j);
      if (wij != 0.0 && j != i) acc += static_cast<long double>(wij) * widen(xi - s[static_cast<std::size_t>(j)]);
    }
    g.push_back(narrow(acc));
  }
  return g;
}

inline Blocks riemannian_gradient(const AgentStack& s, const Blocks& egrad) {
  Blocks g;
  g.reserve(egrad.size());
  for (std::size_t i = 0; i < egrad.size(); ++i) g.push_back(s.manifold().tangent_project(s[i], egrad[i]));
  return g;
}

inline Blocks riemannian_gradient(const AgentStack& s, const MixingMatrix& w) {
  return riemannian_gradient(s, euclidean_gradient(s, w));
}

inline WideMatrix euclidean_mean_wide(const AgentStack& s) {
  WideMatrix acc = WideMatrix::Zero(s.manifold().rows(), s.manifold().cols());
  for (const auto& b : s.blocks()) acc += widen(b);
  return acc / static_cast<long double>(s.size());
}

inline Matrix euclidean_mean(const AgentStack& s) { return narrow(euclidean_mean_wide(s)); }

namespace detail {
inline Matrix induced_mean_wide(const Manifold& m, const WideMatrix& euclid_mean) {
  WideMatrix projected;
  try {
    projected = m.project_wide(euclid_mean);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::RankDeficient || e.code() == ErrorCode::ZeroColumn) {
      throw Error(ErrorCode::OutsideTube, std::string("mean has no unique projection (") + e.what() + ")");
    }
    throw;
  }
  const double dist = static_cast<double>((euclid_mean - projected).norm());
  if (!(dist < m.proximal_radius())) {
    throw Error(ErrorCode::OutsideTube, "mean lies at distance " + std::to_string(dist) +
                                            " >= proximal radius " + std::to_string(m.proximal_radius()));
  }
  return narrow(projected);
}
}  // namespace detail

/// Projection of the Euclidean mean onto the manifold. Throws OutsideTube when
/// the mean is not within the proximal radius, where the minimizer over M of
/// sum ||y - x_i||^2 need not be unique.
inline Matrix induced_mean(const Manifold& m, const Matrix& euclid_mean) {
  if (euclid_mean.rows() != m.rows() || euclid_mean.cols() != m.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "mean shape differs from the manifold");
  }
  return detail::induced_mean_wide(m, widen(euclid_mean));
}

inline Matrix induced_mean(const AgentStack& s) {
  return detail::induced_mean_wide(s.manifold(), euclidean_mean_wide(s));
}

struct ConsensusMetrics {
  double euclidean_error = 0.0;   // ||x - x_hat||
  double manifold_error = 0.0;    // ||x - x_bar||
  double finf_error = 0.0;        // max_i ||x_i - x_bar||
  double normalized_error = 0.0;  // manifold_error / N
  double objective = 0.0;
  double rgrad_norm = 0.0;
  bool in_tube = true;  // false: manifold fields are NaN
};

/// Everything needed to evaluate consensus quantities at one stack.
struct StackState {
  Matrix euclid_mean;
  Matrix manifold_mean;  // empty when outside the tube
  Blocks egrad;
  Blocks rgrad;
  bool in_tube = true;
};

inline StackState analyze(const AgentStack& s, const MixingMatrix& w) {
  StackState st;
  const WideMatrix mean = euclidean_mean_wide(s);
  st.euclid_mean = narrow(mean);
  try {
    st.manifold_mean = detail::induced_mean_wide(s.manifold(), mean);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::OutsideTube) throw;
    st.in_tube = false;
  }
  st.egrad = euclidean_gradient(s, w);
  st.rgrad = riemannian_gradient(s, st.egrad);
  return st;
}

inline ConsensusMetrics metrics_from(const AgentStack& s, const MixingMatrix& w, const StackState& st) {
  ConsensusMetrics m;
  m.euclidean_error = norm(subtract_common(s.blocks(), st.euclid_mean));
  m.objective = objective(s, w);
  m.rgrad_norm = norm(st.rgrad);
  m.in_tube = st.in_tube;
  if (st.in_tube) {
    const Blocks dev = subtract_common(s.blocks(), st.manifold_mean);
    m.manifold_error = norm(dev);
    m.finf_error = finf_norm(dev);
    m.normalized_error = m.manifold_error / static_cast<double>(s.size());
  } else {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    m.manifold_error = m.finf_error = m.normalized_error = nan;
  }
  return m;
}

/// Consensus metrics that tolerate dispersed stacks (manifold fields NaN).
inline ConsensusMetrics evaluate(const AgentStack& s, const MixingMatrix& w) {
  return metrics_from(s, w, analyze(s, w));
}

/// Consensus metrics; throws OutsideTube when the induced mean is undefined.
inline ConsensusMetrics metrics(const AgentStack& s, const MixingMatrix& w) {
  ConsensusMetrics m = evaluate(s, w);
  if (!m.in_tube) throw Error(ErrorCode::OutsideTube, "induced mean undefined for this stack");
  return m;
}

}  // namespace mancon
