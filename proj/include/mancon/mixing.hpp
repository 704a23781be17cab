#pragma once

#include <algorithm>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "mancon/types.hpp"

namespace mancon {

enum class GraphKind { Random, Star, Cycle, Complete };

inline std::string to_string(GraphKind k) {
  switch (k) {
    case GraphKind::Random: return "random";
    case GraphKind::Star: return "star";
    case GraphKind::Cycle: return "cycle";
    case GraphKind::Complete: return "complete";
  }
  return "unknown";
}

struct GraphSpec {
  GraphKind kind = GraphKind::Random;
  int n = 15;
  double p = 0.5;  // edge probability, Random only
  std::uint64_t seed = 0;
};

/// Undirected simple graph on agents 0..n-1. Edges are stored once with
/// first < second; self-weights live on the mixing matrix diagonal.
struct Graph {
  GraphSpec spec;
  std::vector<std::pair<int, int>> edges;

  int n() const noexcept { return spec.n; }

  std::vector<int> degrees() const {
    std::vector<int> deg(static_cast<std::size_t>(spec.n), 0);
    for (auto [i, j] : edges) {
      ++deg[static_cast<std::size_t>(i)];
      ++deg[static_cast<std::size_t>(j)];
    }
    return deg;
  }

  bool connected() const {
    const auto n = static_cast<std::size_t>(spec.n);
    std::vector<std::vector<int>> adj(n);
    for (auto [i, j] : edges) {
      adj[static_cast<std::size_t>(i)].push_back(j);
      adj[static_cast<std::size_t>(j)].push_back(i);
    }
    std::vector<bool> seen(n, false);
    std::queue<int> frontier;
    frontier.push(0);
    seen[0] = true;
    std::size_t count = 1;
    while (!frontier.empty()) {
      const int v = frontier.front();
      frontier.pop();
      for (int w : adj[static_cast<std::size_t>(v)]) {
        if (!seen[static_cast<std::size_t>(w)]) {
          seen[static_cast<std::size_t>(w)] = true;
          ++count;
          frontier.push(w);
        }
      }
    }
    return count == n;
  }
};

inline Graph build_graph(const GraphSpec& spec) {
  if (spec.n < 2) throw Error(ErrorCode::InvalidArgument, "graph needs at least 2 agents");
  Graph g{spec, {}};
  const int n = spec.n;
  switch (spec.kind) {
    case GraphKind::Star:
      for (int i = 1; i < n; ++i) g.edges.emplace_back(0, i);
      return g;
    case GraphKind::Cycle:
      for (int i = 0; i < n; ++i) {
        const int j = (i + 1) % n;
        if (i == j) continue;
        const auto e = std::minmax(i, j);
        if (std::find(g.edges.begin(), g.edges.end(), std::pair<int, int>(e)) == g.edges.end()) {
          g.edges.emplace_back(e);
        }
      }
      return g;
    case GraphKind::Complete:
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) g.edges.emplace_back(i, j);
      return g;
    case GraphKind::Random: {
      if (!(spec.p > 0.0 && spec.p <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "edge probability must lie in (0, 1]");
      }
      Rng rng(spec.seed);
      constexpr int kMaxAttempts = 100;
      for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        g.edges.clear();
        for (int i = 0; i < n; ++i)
          for (int j = i + 1; j < n; ++j)
            if (uniform01(rng) < spec.p) g.edges.emplace_back(i, j);
        if (g.connected()) return g;
      }
      throw Error(ErrorCode::Disconnected,
                  "random graph disconnected after 100 attempts (seed " + std::to_string(spec.seed) + ")");
    }
  }
  return g;
}

/// Second-largest singular value and the curvature constants of W^t.
struct SpectralSummary {
  int t = 1;
  Vector eigenvalues;  // of W, descending
  double sigma2 = 0.0;
  double lambda2_t = 0.0;
  double lambdaN_t = 0.0;
  double L_t = 0.0;
  double mu_t = 0.0;
  double alpha_opt = 0.0;

  double sigma2_t() const { return std::pow(sigma2, t); }
  /// (L_t - mu_t)/(L_t + mu_t), the optimal-step Euclidean rate.
  double optimal_rate() const { return (L_t - mu_t) / (L_t + mu_t); }
};

/// Symmetric doubly stochastic W together with W^t for a fixed power t.
class MixingMatrix {
 public:
  static constexpr double kStochasticTol = 1e-12;

  /// Validates the weight invariants; throws NotSymmetric / NotStochastic /
  /// InvalidArgument on failure.
  static MixingMatrix from_weights(Matrix w, int t = 1) {
    validate(w);
    return MixingMatrix(std::move(w), t);
  }

  const Matrix& weights() const noexcept { return w_; }
  const Matrix& powered() const noexcept { return wt_; }
  int t() const noexcept { return t_; }
  int n() const noexcept { return static_cast<int>(w_.rows()); }

  MixingMatrix with_power(int t) const { return MixingMatrix(w_, t); }

  /// W^t by repeated multiplication.
  static Matrix power(const Matrix& w, int t) {
    if (t < 1) throw Error(ErrorCode::InvalidArgument, "power t must be >= 1");
    Matrix out = w;
    for (int k = 1; k < t; ++k) out = out * w;
    return out;
  }

  static void validate(const Matrix& w) {
    if (w.rows() != w.cols() || w.rows() < 2) {
      throw Error(ErrorCode::DimensionMismatch, "mixing matrix must be square with N >= 2");
    }
    if (!w.allFinite()) throw Error(ErrorCode::InvalidArgument, "mixing matrix has non-finite entries");
    if ((w - w.transpose()).cwiseAbs().maxCoeff() > kStochasticTol) {
      throw Error(ErrorCode::NotSymmetric, "W != W^T");
    }
    if ((w.rowwise().sum().array() - 1.0).abs().maxCoeff() > kStochasticTol) {
      throw Error(ErrorCode::NotStochastic, "W 1 != 1");
    }
    if (w.minCoeff() < 0.0) throw Error(ErrorCode::NotStochastic, "negative weight");
    if (w.diagonal().minCoeff() <= 0.0) throw Error(ErrorCode::NotStochastic, "zero self-weight");
  }

 private:
  MixingMatrix(Matrix w, int t) : w_(std::move(w)), t_(t) {
    if (t < 1) throw Error(ErrorCode::InvalidArgument, "power t must be >= 1");
    wt_ = power(w_, t);
  }

  Matrix w_;
  Matrix wt_;
  int t_;
};

/// Metropolis-Hastings weights: W_ij = 1/(1 + max(deg_i, deg_j)) on edges,
/// diagonal fills each row to one.
inline MixingMatrix metropolis_weights(const Graph& g) {
  if (!g.connected()) throw Error(ErrorCode::Disconnected, "metropolis weights need a connected graph");
  const int n = g.n();
  const auto deg = g.degrees();
  Matrix w = Matrix::Zero(n, n);
  for (auto [i, j] : g.edges) {
    const double wij =
        1.0 / (1.0 + std::max(deg[static_cast<std::size_t>(i)], deg[static_cast<std::size_t>(j)]));
    w(i, j) = wij;
    w(j, i) = wij;
  }
  for (int i = 0; i < n; ++i) w(i, i) = 1.0 - (w.row(i).sum() - w(i, i));
  return MixingMatrix::from_weights(std::move(w), 1);
}

inline SpectralSummary spectral_summary(const MixingMatrix& mix, int t) {
  if (t < 1) throw Error(ErrorCode::InvalidArgument, "power t must be >= 1");
  const Matrix& w = mix.weights();
  MixingMatrix::validate(w);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(w);
  if (eig.info() != Eigen::Success) throw Error(ErrorCode::NotSymmetric, "eigendecomposition failed");
  const Vector& ev = eig.eigenvalues();  // ascending
  const Matrix& vecs = eig.eigenvectors();
  const double wnorm = w.norm();
  for (Eigen::Index k = 0; k < ev.size(); ++k) {
    if ((w * vecs.col(k) - ev(k) * vecs.col(k)).norm() > 1e-10 * wnorm) {
      throw Error(ErrorCode::NotSymmetric, "eigenpair residual above tolerance");
    }
  }
  SpectralSummary s;
  s.t = t;
  s.eigenvalues = ev.reverse();
  std::vector<double> mags(static_cast<std::size_t>(ev.size()));
  std::vector<double> powered(static_cast<std::size_t>(ev.size()));
  for (Eigen::Index k = 0; k < ev.size(); ++k) {
    mags[static_cast<std::size_t>(k)] = std::abs(ev(k));
    powered[static_cast<std::size_t>(k)] = std::pow(ev(k), t);
  }
  std::sort(mags.begin(), mags.end(), std::greater<>());
  std::sort(powered.begin(), powered.end(), std::greater<>());
  s.sigma2 = mags[1];
  s.lambda2_t = powered[1];
  s.lambdaN_t = powered.back();
  s.L_t = 1.0 - s.lambdaN_t;
  s.mu_t = 1.0 - s.lambda2_t;
  s.alpha_opt = 2.0 / (s.mu_t + s.L_t);
  if (!(s.sigma2 < 1.0)) throw Error(ErrorCode::NotStochastic, "sigma2 >= 1: null space of I - W exceeds span(1)");
  return s;
}

/// log_{sigma2}(x): the smallest real power t with sigma2^t <= x. With
/// sigma2 == 0 every t >= 1 qualifies and 1 is returned.
inline double log_base_sigma(double sigma2, double x) {
  if (sigma2 <= 1e-14) return 1.0;
  return std::log(x) / std::log(sigma2);
}

struct PowerThresholds {
  double unit_step;     // log_{sigma2}(1/(4 sqrt N)), unit-step RGD neighborhood
  double general_step;  // log_{sigma2}(1/(2 sqrt N)), general-step neighborhood
  double error_bound;   // log_{sigma2}((2 - beta)/2), error bound / Lipschitz RSI
};

inline PowerThresholds power_thresholds(double sigma2, int n, double beta = 1.0) {
  const double sn = std::sqrt(static_cast<double>(n));
  return {log_base_sigma(sigma2, 1.0 / (4.0 * sn)), log_base_sigma(sigma2, 1.0 / (2.0 * sn)),
          log_base_sigma(sigma2, (2.0 - beta) / 2.0)};
}

}  // namespace mancon
