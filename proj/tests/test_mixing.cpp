#include <gtest/gtest.h>

#include "mancon/mancon.hpp"

using namespace mancon;

namespace {

MixingMatrix metropolis(GraphKind k, int n, std::uint64_t seed = 0) {
  return metropolis_weights(build_graph({k, n, 0.5, seed}));
}

std::vector<MixingMatrix> zoo() {
  std::vector<MixingMatrix> out;
  for (int n : {2, 3, 4, 7, 15}) {
    out.push_back(metropolis(GraphKind::Star, n));
    out.push_back(metropolis(GraphKind::Cycle, n));
    out.push_back(metropolis(GraphKind::Complete, n));
  }
  for (std::uint64_t s = 0; s < 10; ++s) out.push_back(metropolis(GraphKind::Random, 15, s));
  return out;
}

}  // namespace

TEST(BuildGraph, StarAndCycleEdges) {
  const Graph star = build_graph({GraphKind::Star, 3});
  const std::vector<std::pair<int, int>> star_edges = {{0, 1}, {0, 2}};
  EXPECT_EQ(star.edges, star_edges);
  const Graph cyc = build_graph({GraphKind::Cycle, 3});
  const std::vector<std::pair<int, int>> cyc_edges = {{0, 1}, {1, 2}, {0, 2}};
  EXPECT_EQ(cyc.edges, cyc_edges);
  EXPECT_EQ(build_graph({GraphKind::Cycle, 2}).edges.size(), 1u);
  EXPECT_EQ(build_graph({GraphKind::Complete, 5}).edges.size(), 10u);
}

TEST(BuildGraph, RandomIsConnectedAndDeterministic) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Graph a = build_graph({GraphKind::Random, 15, 0.5, seed});
    const Graph b = build_graph({GraphKind::Random, 15, 0.5, seed});
    EXPECT_TRUE(a.connected());
    EXPECT_EQ(a.edges, b.edges);
    for (auto [i, j] : a.edges) EXPECT_LT(i, j);
  }
  EXPECT_NE(build_graph({GraphKind::Random, 15, 0.5, 1}).edges, build_graph({GraphKind::Random, 15, 0.5, 2}).edges);
}

TEST(BuildGraph, Errors) {
  EXPECT_THROW(build_graph({GraphKind::Star, 1}), Error);
  EXPECT_THROW(build_graph({GraphKind::Random, 10, 0.0, 0}), Error);
  try {
    build_graph({GraphKind::Random, 40, 0.01, 5});
    FAIL() << "expected Disconnected";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Disconnected);
    EXPECT_NE(std::string(e.what()).find("seed 5"), std::string::npos);
  }
}

TEST(Metropolis, CycleThreeIsAveraging) {
  const MixingMatrix w = metropolis(GraphKind::Cycle, 3);
  EXPECT_LE((w.weights() - Matrix::Constant(3, 3, 1.0 / 3.0)).norm(), 1e-15);
  EXPECT_NEAR(spectral_summary(w, 1).sigma2, 0.0, 1e-12);
}

TEST(Metropolis, StarThree) {
  const MixingMatrix w = metropolis(GraphKind::Star, 3);
  Matrix expect(3, 3);
  expect << 1.0 / 3, 1.0 / 3, 1.0 / 3, 1.0 / 3, 2.0 / 3, 0, 1.0 / 3, 0, 2.0 / 3;
  EXPECT_LE((w.weights() - expect).norm(), 1e-15);
  const SpectralSummary s = spectral_summary(w, 1);
  EXPECT_NEAR(s.eigenvalues(0), 1.0, 1e-12);
  EXPECT_NEAR(s.eigenvalues(1), 2.0 / 3, 1e-12);
  EXPECT_NEAR(s.eigenvalues(2), 0.0, 1e-12);
  EXPECT_NEAR(s.sigma2, 2.0 / 3, 1e-12);
}

TEST(Metropolis, CycleFour) {
  const MixingMatrix w = metropolis(GraphKind::Cycle, 4);
  Eigen::RowVector4d first;
  first << 1.0 / 3, 1.0 / 3, 0, 1.0 / 3;
  EXPECT_LE((w.weights().row(0) - first).norm(), 1e-15);
  const SpectralSummary s = spectral_summary(w, 1);
  EXPECT_NEAR(s.sigma2, 1.0 / 3, 1e-12);
  EXPECT_NEAR(s.L_t, 4.0 / 3, 1e-12);
  EXPECT_NEAR(s.mu_t, 2.0 / 3, 1e-12);
  EXPECT_NEAR(s.alpha_opt, 1.0, 1e-12);
}

TEST(Metropolis, InvariantsOnEveryGraph) {
  for (const MixingMatrix& m : zoo()) {
    const Matrix& w = m.weights();
    EXPECT_LE((w - w.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((w.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
    EXPECT_GE(w.minCoeff(), 0.0);
    EXPECT_GT(w.diagonal().minCoeff(), 0.0);
    EXPECT_LT(spectral_summary(m, 1).sigma2, 1.0);
  }
}

TEST(Metropolis, SparsityMatchesEdges) {
  const Graph g = build_graph({GraphKind::Random, 15, 0.5, 3});
  const Matrix w = metropolis_weights(g).weights();
  Eigen::MatrixXi adj = Eigen::MatrixXi::Zero(15, 15);
  for (auto [i, j] : g.edges) adj(i, j) = adj(j, i) = 1;
  for (int i = 0; i < 15; ++i)
    for (int j = 0; j < 15; ++j)
      if (i != j) {
        EXPECT_EQ(w(i, j) > 0.0, adj(i, j) == 1);
      }
}

TEST(MixingMatrix, ValidationErrors) {
  Matrix w(2, 2);
  w << 0.5, 0.6, 0.4, 0.5;
  try {
    MixingMatrix::from_weights(w);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotSymmetric);
  }
  w << 0.5, 0.6, 0.6, 0.5;
  try {
    MixingMatrix::from_weights(w);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotStochastic);
  }
  w << 0.0, 1.0, 1.0, 0.0;  // no self-weight
  EXPECT_THROW(MixingMatrix::from_weights(w), Error);
  EXPECT_THROW(MixingMatrix::from_weights(Matrix::Identity(2, 3)), Error);
  // Identity is doubly stochastic but sigma2 = 1: the null space of I - W is too big.
  try {
    spectral_summary(MixingMatrix::from_weights(Matrix::Identity(3, 3)), 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotStochastic);
  }
}

TEST(Spectral, Examples) {
  const SpectralSummary c3 = spectral_summary(metropolis(GraphKind::Cycle, 3), 1);
  EXPECT_NEAR(c3.mu_t, 1.0, 1e-12);
  EXPECT_NEAR(c3.L_t, 1.0, 1e-12);
  EXPECT_NEAR(c3.alpha_opt, 1.0, 1e-12);
  const MixingMatrix s3 = metropolis(GraphKind::Star, 3);
  const SpectralSummary a = spectral_summary(s3, 1);
  EXPECT_NEAR(a.lambda2_t, 2.0 / 3, 1e-12);
  EXPECT_NEAR(a.lambdaN_t, 0.0, 1e-12);
  EXPECT_NEAR(a.L_t, 1.0, 1e-12);
  EXPECT_NEAR(a.mu_t, 1.0 / 3, 1e-12);
  EXPECT_NEAR(a.alpha_opt, 1.5, 1e-12);
  const SpectralSummary b = spectral_summary(s3, 2);
  EXPECT_NEAR(b.lambda2_t, 4.0 / 9, 1e-12);
  EXPECT_NEAR(b.mu_t, 5.0 / 9, 1e-12);
  EXPECT_NEAR(b.lambdaN_t, 0.0, 1e-12);
  EXPECT_NEAR(b.L_t, 1.0, 1e-12);
  EXPECT_THROW(spectral_summary(s3, 0), Error);
}

TEST(Spectral, CurvatureOrderingAndRateComparison) {
  for (const MixingMatrix& m : zoo()) {
    for (int t : {1, 2, 5, 10}) {
      const SpectralSummary s = spectral_summary(m, t);
      EXPECT_GT(s.mu_t, 0.0);
      EXPECT_LE(s.mu_t, s.L_t + 1e-15);
      EXPECT_LE(s.L_t, 2.0);
      EXPECT_LE(s.optimal_rate(), s.sigma2_t() + 1e-12);
    }
  }
}

TEST(Power, Examples) {
  const MixingMatrix s3 = metropolis(GraphKind::Star, 3);
  EXPECT_EQ(MixingMatrix::power(s3.weights(), 1), s3.weights());
  Matrix expect(3, 3);
  expect << 1.0 / 3, 1.0 / 3, 1.0 / 3, 1.0 / 3, 5.0 / 9, 1.0 / 9, 1.0 / 3, 1.0 / 9, 5.0 / 9;
  EXPECT_LE((s3.with_power(2).powered() - expect).norm(), 1e-15);
  const Matrix j = Matrix::Constant(4, 4, 0.25);
  for (int t : {1, 3, 8}) EXPECT_LE((MixingMatrix::power(j, t) - j).norm(), 1e-15);
  EXPECT_THROW(MixingMatrix::power(j, 0), Error);
}

TEST(Power, StaysSymmetricDoublyStochastic) {
  for (const MixingMatrix& m : zoo()) {
    const Matrix wt = m.with_power(10).powered();
    EXPECT_LE((wt - wt.transpose()).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((wt.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-10);
  }
}

TEST(Power, RowDistanceBound) {
  // sum_j |W^t_ij - 1/N| <= sqrt(N) sigma2^t for every row.
  for (const MixingMatrix& m : zoo()) {
    const int n = m.n();
    const double s2 = spectral_summary(m, 1).sigma2;
    for (int t = 1; t <= 10; ++t) {
      const Matrix wt = m.with_power(t).powered();
      for (int i = 0; i < n; ++i) {
        const double dist = (wt.row(i).array() - 1.0 / n).abs().sum();
        EXPECT_LE(dist, std::sqrt(double(n)) * std::pow(s2, t) + 1e-12);
      }
    }
  }
}

TEST(Power, ContractionOnDisagreement) {
  Rng rng(31);
  for (const MixingMatrix& m : zoo()) {
    const int n = m.n();
    const double s2 = spectral_summary(m, 1).sigma2;
    const Matrix j = Matrix::Constant(n, n, 1.0 / n);
    for (int t : {1, 3}) {
      const Matrix wt = m.with_power(t).powered();
      for (int k = 0; k < 100; ++k) {
        const Vector y = gaussian_matrix(n, 1, rng);
        EXPECT_LE(((wt - j) * y).norm(), std::pow(s2, t) * (y - j * y).norm() + 1e-12);
      }
    }
  }
}

TEST(Thresholds, LogBaseSigma) {
  const PowerThresholds star3 = power_thresholds(2.0 / 3, 3, 1.0);
  EXPECT_NEAR(star3.unit_step, std::log(1.0 / (4.0 * std::sqrt(3.0))) / std::log(2.0 / 3), 1e-12);
  EXPECT_NEAR(star3.unit_step, 4.7738, 1e-4);
  EXPECT_NEAR(star3.error_bound, std::log(0.5) / std::log(2.0 / 3), 1e-12);
  const PowerThresholds zero = power_thresholds(0.0, 3, 1.0);
  EXPECT_EQ(zero.unit_step, 1.0);
  EXPECT_EQ(zero.general_step, 1.0);
  EXPECT_EQ(zero.error_bound, 1.0);
}
