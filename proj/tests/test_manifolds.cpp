#include <gtest/gtest.h>

#include "mancon/mancon.hpp"

using namespace mancon;

namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  const auto r = static_cast<Eigen::Index>(rows.size());
  const auto c = static_cast<Eigen::Index>(rows.begin()->size());
  Matrix m(r, c);
  Eigen::Index i = 0;
  for (const auto& row : rows) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

Matrix col(std::initializer_list<double> v) {
  Matrix m(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

// Oracle for the Stiefel projection: U V^T from a double-precision SVD.
Matrix svd_polar(const Matrix& y) {
  Eigen::JacobiSVD<Matrix> svd(y, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return svd.matrixU() * svd.matrixV().transpose();
}

std::vector<Manifold> all_kinds() {
  return {Manifold::stiefel(7, 3), Manifold::oblique(6, 4), Manifold::sphere(5), Manifold::euclidean(4, 2)};
}

}  // namespace

TEST(Project, SphereScalesPointOnRay) {
  const Manifold s = Manifold::sphere(2);
  EXPECT_TRUE(s.project(col({2, 0})).isApprox(col({1, 0}), 1e-15));
}

TEST(Project, StiefelPolarOfScaledIdentity) {
  const Manifold st = Manifold::stiefel(2, 2);
  EXPECT_LE((st.project(2.0 * Matrix::Identity(2, 2)) - Matrix::Identity(2, 2)).norm(), 1e-15);
}

TEST(Project, ObliqueNormalizesColumns) {
  const Manifold ob = Manifold::oblique(2, 2);
  EXPECT_LE((ob.project(mat({{3, 0}, {0, 0.5}})) - Matrix::Identity(2, 2)).norm(), 1e-15);
}

TEST(Project, StiefelMatchesSvdPolarFactor) {
  Rng rng(11);
  const Manifold st = Manifold::stiefel(200, 2);
  for (int k = 0; k < 20; ++k) {
    const Matrix y = gaussian_matrix(200, 2, rng);
    EXPECT_LE((st.project(y) - svd_polar(y)).norm(), 1e-10);
  }
  // Ill-conditioned input takes the SVD route inside the projection.
  Matrix y = gaussian_matrix(6, 3, rng);
  y.col(2) = y.col(0) + 1e-5 * y.col(2);
  EXPECT_LE((Manifold::stiefel(6, 3).project(y) - svd_polar(y)).norm(), 1e-9);
}

TEST(Project, ResultIsFeasibleAndNearest) {
  Rng rng(3);
  for (const Manifold& m : all_kinds()) {
    for (int k = 0; k < 10; ++k) {
      const Matrix y = gaussian_matrix(m.rows(), m.cols(), rng);
      const Matrix p = m.project(y);
      EXPECT_TRUE(m.contains(p)) << m.name();
      // No random feasible point is closer than the projection.
      for (int q = 0; q < 20; ++q) {
        EXPECT_LE((y - p).norm(), (y - m.random_point(rng)).norm() + 1e-12) << m.name();
      }
    }
  }
}

TEST(Project, DegenerateInputsThrow) {
  Matrix y = Matrix::Zero(3, 2);
  y(0, 0) = 1.0;
  y(1, 0) = 1.0;  // second column zero
  try {
    Manifold::oblique(3, 2).project(y);
    FAIL() << "expected ZeroColumn";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroColumn);
  }
  Matrix z(3, 2);
  z << 1, 2, 2, 4, 3, 6;  // rank one
  try {
    Manifold::stiefel(3, 2).project(z);
    FAIL() << "expected RankDeficient";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RankDeficient);
  }
  EXPECT_THROW(Manifold::sphere(3).project(Matrix::Zero(2, 1)), Error);
}

TEST(TangentProject, CircleTangentIsVertical) {
  const Manifold st = Manifold::stiefel(2, 1);
  EXPECT_TRUE(st.tangent_project(col({1, 0}), col({0.7, -2.5})).isApprox(col({0, -2.5})));
  EXPECT_EQ(st.tangent_project(col({1, 0}), col({0.7, -2.5}))(0, 0), 0.0);
}

TEST(TangentProject, ObliquePerColumnFormula) {
  const Manifold ob = Manifold::oblique(2, 2);
  EXPECT_LE((ob.tangent_project(Matrix::Identity(2, 2), Matrix::Ones(2, 2)) - mat({{0, 1}, {1, 0}})).norm(), 0.0);
}

TEST(TangentProject, IdempotentLinearAndOrthogonalToNormal) {
  Rng rng(5);
  for (const Manifold& m : all_kinds()) {
    for (int k = 0; k < 20; ++k) {
      const Matrix x = m.random_point(rng);
      const Matrix v = gaussian_matrix(m.rows(), m.cols(), rng);
      const Matrix w = gaussian_matrix(m.rows(), m.cols(), rng);
      const Matrix t = m.tangent_project(x, v);
      const Matrix n = m.normal_project(x, v);
      EXPECT_LE((m.tangent_project(x, t) - t).norm(), 1e-12 * v.norm()) << m.name();
      EXPECT_LE((m.tangent_project(x, 2.0 * v - 3.0 * w) - (2.0 * t - 3.0 * m.tangent_project(x, w))).norm(),
                1e-12 * (v.norm() + w.norm()))
          << m.name();
      EXPECT_LE((t + n - v).norm(), 1e-15 * v.norm()) << m.name();  // one rounding per entry
      EXPECT_LE(std::abs(t.cwiseProduct(n).sum()), 1e-12 * v.squaredNorm()) << m.name();
    }
  }
}

TEST(TangentProject, StiefelTangentCondition) {
  Rng rng(8);
  const Manifold st = Manifold::stiefel(9, 3);
  const Matrix x = st.random_point(rng);
  const Matrix t = st.tangent_project(x, gaussian_matrix(9, 3, rng));
  const Matrix s = x.transpose() * t;
  EXPECT_LE((s + s.transpose()).norm(), 1e-13);
}

TEST(TangentProject, InfeasiblePointThrows) {
  try {
    Manifold::sphere(3).tangent_project(col({2, 0, 0}), col({1, 1, 1}));
    FAIL() << "expected InfeasiblePoint";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InfeasiblePoint);
  }
  EXPECT_THROW(Manifold::sphere(3).normal_project(col({2, 0, 0}), col({1, 1, 1})), Error);
}

TEST(NormalProject, Examples) {
  EXPECT_TRUE(Manifold::stiefel(2, 1).normal_project(col({1, 0}), col({0.7, -2.5})).isApprox(col({0.7, 0})));
  Rng rng(2);
  const Manifold eu = Manifold::euclidean(3, 2);
  EXPECT_EQ(eu.normal_project(gaussian_matrix(3, 2, rng), gaussian_matrix(3, 2, rng)).norm(), 0.0);
  EXPECT_TRUE(Manifold::oblique(2, 1).normal_project(col({0, 1}), col({3, 5})).isApprox(col({0, 5})));
}

TEST(NormalProject, OrthogonalToEveryTangent) {
  Rng rng(4);
  for (const Manifold& m : all_kinds()) {
    const Matrix x = m.random_point(rng);
    const Matrix n = m.normal_project(x, gaussian_matrix(m.rows(), m.cols(), rng));
    for (int k = 0; k < 10; ++k) {
      const Matrix t = m.tangent_project(x, gaussian_matrix(m.rows(), m.cols(), rng));
      EXPECT_LE(std::abs(n.cwiseProduct(t).sum()), 1e-12 * (1.0 + n.norm() * t.norm())) << m.name();
    }
  }
}

TEST(Retract, ZeroStepIsIdentity) {
  Rng rng(9);
  for (const Manifold& m : all_kinds()) {
    const Matrix x = m.random_point(rng);
    for (Retraction r : {Retraction::QR, Retraction::Polar}) {
      EXPECT_LE((m.retract(r, x, Matrix::Zero(m.rows(), m.cols())) - x).lpNorm<Eigen::Infinity>(), 4e-16)
          << m.name() << ' ' << to_string(r);
    }
  }
}

TEST(Retract, QrSingleColumnNormalizes) {
  const Manifold st = Manifold::stiefel(2, 1);
  for (double s : {0.1, 1.0, 3.0}) {
    const Matrix expect = col({1, s}) / std::sqrt(1.0 + s * s);
    EXPECT_LE((st.retract(Retraction::QR, col({1, 0}), col({0, s})) - expect).norm(), 1e-15);
  }
}

TEST(Retract, QrHasPositiveDiagonalAndSpansInput) {
  Rng rng(10);
  const Manifold st = Manifold::stiefel(8, 3);
  const Matrix x = st.random_point(rng);
  const Matrix u = st.tangent_project(x, 0.5 * gaussian_matrix(8, 3, rng));
  const Matrix q = st.retract(Retraction::QR, x, u);
  EXPECT_TRUE(st.contains(q));
  const Matrix r = q.transpose() * (x + u);  // upper triangular with positive diagonal
  for (int i = 0; i < 3; ++i) {
    EXPECT_GT(r(i, i), 0.0);
    for (int j = 0; j < i; ++j) EXPECT_NEAR(r(i, j), 0.0, 1e-13);
  }
  // Independent oracle: Householder QR with signs fixed.
  Eigen::HouseholderQR<Matrix> qr(x + u);
  Matrix qh = qr.householderQ() * Matrix::Identity(8, 3);
  const Matrix rh = qr.matrixQR().topRows(3).triangularView<Eigen::Upper>();
  for (int j = 0; j < 3; ++j)
    if (rh(j, j) < 0) qh.col(j) *= -1.0;
  EXPECT_LE((q - qh).norm(), 1e-13);
}

TEST(Retract, SchemesCoincideOffStiefelAndOnEuclidean) {
  Rng rng(12);
  const Manifold ob = Manifold::oblique(5, 3);
  const Matrix x = ob.random_point(rng);
  const Matrix u = ob.tangent_project(x, gaussian_matrix(5, 3, rng));
  EXPECT_EQ((ob.retract(Retraction::QR, x, u) - ob.retract(Retraction::Polar, x, u)).norm(), 0.0);
  EXPECT_LE((ob.retract(Retraction::QR, x, u) - ob.project(x + u)).norm(), 1e-15);
  const Manifold eu = Manifold::euclidean(3, 2);
  const Matrix a = gaussian_matrix(3, 2, rng), b = gaussian_matrix(3, 2, rng);
  EXPECT_EQ((eu.retract(Retraction::QR, a, b) - (a + b)).norm(), 0.0);
}

TEST(Retract, SecondOrderBoundWithFittedM0) {
  // Stiefel(3,2): ||R_x(u) - x - u|| <= M0 ||u||^2 on 1000 fresh (x, u) with
  // ||u|| <= 0.1, M0 fitted on separate samples.
  const Manifold st = Manifold::stiefel(3, 2);
  const auto fit = sample_near_consensus(st, 4, 0.05, 400, 77);
  FitOptions fo;
  fo.seed = 78;
  for (Retraction scheme : {Retraction::QR, Retraction::Polar}) {
    const EstimatedConstants k = fit_constants(st, scheme, fit, fo);
    Rng rng(79);
    for (int i = 0; i < 1000; ++i) {
      const Matrix x = st.random_point(rng);
      const Matrix u = (0.1 * uniform01(rng)) * st.random_unit_tangent(x, rng);
      EXPECT_LE((st.retract(scheme, x, u) - x - u).norm(), k.M0 * u.squaredNorm() + 1e-15);
    }
  }
}

TEST(Retract, SchemesAgreeToFirstOrder) {
  Rng rng(13);
  const Manifold st = Manifold::stiefel(10, 3);
  for (int k = 0; k < 10; ++k) {
    const Matrix x = st.random_point(rng);
    const Matrix u = st.random_unit_tangent(x, rng);
    double prev = kInf;
    for (double s : {1e-1, 1e-2, 1e-3}) {
      const double gap = (st.retract(Retraction::QR, x, s * u) - st.retract(Retraction::Polar, x, s * u)).norm() / s;
      EXPECT_LT(gap, prev);
      EXPECT_LE(gap, 2.0 * s);  // the gap itself is second order
      prev = gap;
    }
  }
}

TEST(Retract, RequiresFeasibleBase) {
  EXPECT_THROW(Manifold::sphere(2).retract(Retraction::QR, col({2, 0}), col({0, 1})), Error);
  EXPECT_THROW(Manifold::sphere(2).retract(Retraction::QR, col({1, 0}), col({0, 1, 0})), Error);
}

TEST(Distance, Examples) {
  EXPECT_DOUBLE_EQ(Manifold::sphere(2).distance(col({2, 0})), 1.0);
  Rng rng(1);
  const Manifold st = Manifold::stiefel(6, 2);
  EXPECT_LE(st.distance(st.random_point(rng)), 1e-15);
  EXPECT_NEAR(Manifold::oblique(2, 2).distance(mat({{3, 0}, {0, 0.5}})), std::sqrt(4.25), 1e-15);
}

TEST(ManifoldSpec, RadiiAndNames) {
  EXPECT_EQ(Manifold::stiefel(5, 2).proximal_radius(), 1.0);
  EXPECT_EQ(Manifold::oblique(5, 2).gamma(), 0.5);
  EXPECT_EQ(Manifold::sphere(5).gamma(), 0.5);
  EXPECT_TRUE(std::isinf(Manifold::euclidean(5, 2).gamma()));
  EXPECT_EQ(Manifold::stiefel(200, 2).name(), "stiefel(200,2)");
  EXPECT_EQ(Manifold::sphere(10).name(), "sphere(10)");
  EXPECT_THROW(Manifold::stiefel(2, 3), Error);
  EXPECT_THROW(Manifold::oblique(0, 3), Error);
}

TEST(ManifoldSpec, MembershipUsesTolerance) {
  const Manifold s = Manifold::sphere(2);
  EXPECT_TRUE(s.contains(col({1.0 + 1e-12, 0})));
  EXPECT_FALSE(s.contains(col({1.0 + 1e-8, 0})));
  EXPECT_FALSE(s.contains(col({1.0, 0, 0})));
  EXPECT_FALSE(s.contains(col({std::nan(""), 1})));
}

TEST(ProximalSmoothness, ProjectionLipschitzInTube) {
  // ||P(y) - P(z)|| <= 2 ||y - z|| for dist(y), dist(z) <= gamma (beta = 1).
  Rng rng(21);
  for (const Manifold& m : {Manifold::stiefel(6, 2), Manifold::oblique(5, 3), Manifold::sphere(4)}) {
    int tested = 0;
    for (int k = 0; k < 2000; ++k) {
      const Matrix x = m.random_point(rng);
      const Matrix y = x + (0.6 * uniform01(rng)) * gaussian_matrix(m.rows(), m.cols(), rng).normalized();
      const Matrix z = y + 1e-3 * gaussian_matrix(m.rows(), m.cols(), rng);
      if (m.distance(y) > m.gamma() || m.distance(z) > m.gamma()) continue;
      ++tested;
      EXPECT_LE((m.project(y) - m.project(z)).norm(), 2.0 * (y - z).norm() * (1 + 1e-10)) << m.name();
    }
    EXPECT_GT(tested, 500);
  }
}

TEST(ProximalSmoothness, NormalInequality) {
  Rng rng(22);
  for (const Manifold& m : {Manifold::stiefel(6, 2), Manifold::oblique(5, 3), Manifold::sphere(4)}) {
    for (int k = 0; k < 1000; ++k) {
      const Matrix x = m.random_point(rng);
      const Matrix y = m.random_point(rng);
      const Matrix v = m.random_unit_normal(x, rng);
      EXPECT_LE(v.cwiseProduct(y - x).sum(), (y - x).squaredNorm() / (4.0 * m.gamma()) + 1e-12) << m.name();
    }
  }
}
