#pragma once

#include <sstream>
#include <string>

#include "mancon/types.hpp"

namespace mancon {

enum class ManifoldKind { Stiefel, Oblique, Sphere, Euclidean };

enum class Retraction { QR, Polar };

inline std::string to_string(ManifoldKind k) {
  switch (k) {
    case ManifoldKind::Stiefel: return "stiefel";
    case ManifoldKind::Oblique: return "oblique";
    case ManifoldKind::Sphere: return "sphere";
    case ManifoldKind::Euclidean: return "euclidean";
  }
  return "unknown";
}

inline std::string to_string(Retraction r) { return r == Retraction::QR ? "qr" : "polar"; }

/// A compact submanifold of R^{d x r} (or the whole space, as a degenerate
/// convex instance) together with its nearest-point projection, tangent and
/// normal projectors, retractions, and proximal-smoothness radius 2*gamma.
///
/// Sphere(d) is Oblique(d, 1). Values are immutable once built.
class Manifold {
 public:
  static constexpr double kDefaultFeasibilityTol = 1e-10;

  static Manifold stiefel(int d, int r, double tol = kDefaultFeasibilityTol) {
    if (r > d) throw Error(ErrorCode::InvalidArgument, "stiefel requires r <= d");
    return Manifold(ManifoldKind::Stiefel, d, r, 1.0, tol);
  }
  static Manifold oblique(int d, int r, double tol = kDefaultFeasibilityTol) {
    return Manifold(ManifoldKind::Oblique, d, r, 1.0, tol);
  }
  static Manifold sphere(int d, double tol = kDefaultFeasibilityTol) {
    return Manifold(ManifoldKind::Sphere, d, 1, 1.0, tol);
  }
  static Manifold euclidean(int d, int r, double tol = kDefaultFeasibilityTol) {
    return Manifold(ManifoldKind::Euclidean, d, r, kInf, tol);
  }

  ManifoldKind kind() const noexcept { return kind_; }
  int rows() const noexcept { return d_; }
  int cols() const noexcept { return r_; }
  /// Radius 2*gamma of proximal smoothness (+inf for the Euclidean case).
  double proximal_radius() const noexcept { return radius_; }
  double gamma() const noexcept { return radius_ / 2.0; }
  double feasibility_tol() const noexcept { return tol_; }
  bool is_euclidean() const noexcept { return kind_ == ManifoldKind::Euclidean; }

  std::string name() const {
    std::ostringstream os;
    os << to_string(kind_) << '(' << d_;
    if (kind_ != ManifoldKind::Sphere) os << ',' << r_;
    os << ')';
    return os.str();
  }

  /// Unit feasibility residual: ||x^T x - I|| for Stiefel, ||diag(x^T x) - 1||
  /// for Oblique/Sphere, zero for Euclidean.
  double feasibility_residual(const Matrix& x) const {
    check_shape(x, "feasibility_residual");
    switch (kind_) {
      case ManifoldKind::Stiefel:
        return (x.transpose() * x - Matrix::Identity(r_, r_)).norm();
      case ManifoldKind::Oblique:
      case ManifoldKind::Sphere:
        return (x.colwise().squaredNorm().array() - 1.0).matrix().norm();
      case ManifoldKind::Euclidean:
        return 0.0;
    }
    return 0.0;
  }

  bool contains(const Matrix& x) const {
    return x.rows() == d_ && x.cols() == r_ && all_finite(x) &&
           feasibility_residual(x) <= tol_;
  }

  /// Nearest-point projection. Stiefel: polar factor U V^T of the thin SVD;
  /// Oblique: column normalization; Euclidean: identity.
  Matrix project(const Matrix& y) const {
    check_shape(y, "project");
    return narrow(project_wide(widen(y)));
  }

  /// project() without the final rounding to double.
  WideMatrix project_wide(const WideMatrix& y) const {
    switch (kind_) {
      case ManifoldKind::Stiefel: return polar_factor(y);
      case ManifoldKind::Oblique:
      case ManifoldKind::Sphere: return normalize_columns(y);
      case ManifoldKind::Euclidean: return y;
    }
    return y;
  }

  Matrix tangent_project(const Matrix& x, const Matrix& v) const {
    require_member(x, "tangent_project");
    check_shape(v, "tangent_project");
    return tangent_project_unchecked(x, v);
  }

  Matrix normal_project(const Matrix& x, const Matrix& v) const {
    require_member(x, "normal_project");
    check_shape(v, "normal_project");
    return v - tangent_project_unchecked(x, v);
  }

  /// R_x(u) for u in T_x M. QR returns the Q factor of x + u with positive
  /// diag(R); Polar returns project(x + u). Both reduce to column
  /// normalization on Oblique and to x + u on Euclidean.
  Matrix retract(Retraction scheme, const Matrix& x, const Matrix& u) const {
    require_member(x, "retract");
    check_shape(u, "retract");
    return narrow(retract_wide(scheme, widen(x) + widen(u)));
  }

  double distance(const Matrix& y) const { return (y - project(y)).norm(); }

  /// Tangent projector at a point that is not required to be feasible; used
  /// when probing the projector's differential over conv(M).
  Matrix tangent_project_unchecked(const Matrix& x, const Matrix& v) const {
    switch (kind_) {
      case ManifoldKind::Stiefel: {
        const Matrix xtv = x.transpose() * v;
        return v - x * (0.5 * (xtv + xtv.transpose()));
      }
      case ManifoldKind::Oblique:
      case ManifoldKind::Sphere: {
        const Eigen::RowVectorXd c = x.cwiseProduct(v).colwise().sum();
        return v - x * c.asDiagonal();
      }
      case ManifoldKind::Euclidean: return v;
    }
    return v;
  }

  Matrix random_point(Rng& rng) const { return project(gaussian_matrix(d_, r_, rng)); }

  /// Uniformly oriented unit-norm tangent vector at x (zero when the tangent
  /// space is trivial).
  Matrix random_unit_tangent(const Matrix& x, Rng& rng) const {
    Matrix v = tangent_project(x, gaussian_matrix(d_, r_, rng));
    const double n = v.norm();
    if (n > 0.0) v /= n;
    return v;
  }

  Matrix random_unit_normal(const Matrix& x, Rng& rng) const {
    Matrix v = normal_project(x, gaussian_matrix(d_, r_, rng));
    const double n = v.norm();
    if (n > 0.0) v /= n;
    return v;
  }

 private:
  Manifold(ManifoldKind kind, int d, int r, double radius, double tol)
      : kind_(kind), d_(d), r_(r), radius_(radius), tol_(tol) {
    if (d < 1 || r < 1) throw Error(ErrorCode::InvalidArgument, "manifold dimensions must be positive");
    if (!(tol >= 0.0)) throw Error(ErrorCode::InvalidArgument, "feasibility_tol must be nonnegative");
  }

  void check_shape(const Matrix& y, const char* op) const {
    if (y.rows() != d_ || y.cols() != r_) {
      std::ostringstream os;
      os << op << ": expected " << d_ << 'x' << r_ << ", got " << y.rows() << 'x' << y.cols();
      throw Error(ErrorCode::DimensionMismatch, os.str());
    }
    if (!all_finite(y)) throw Error(ErrorCode::InvalidArgument, std::string(op) + ": non-finite entries");
  }

  void require_member(const Matrix& x, const char* op) const {
    check_shape(x, op);
    const double res = feasibility_residual(x);
    if (res > tol_) {
      std::ostringstream os;
      os << op << ": point off " << name() << " (residual " << res << ")";
      throw Error(ErrorCode::InfeasiblePoint, os.str());
    }
  }

  WideMatrix retract_wide(Retraction scheme, const WideMatrix& y) const {
    if (kind_ == ManifoldKind::Stiefel && scheme == Retraction::QR) return qr_factor(y);
    return project_wide(y);
  }

  /// U V^T from y = U S V^T. For well-conditioned thin inputs the factor is
  /// formed as y (y^T y)^{-1/2} through an r x r eigendecomposition; otherwise
  /// a thin Jacobi SVD is used.
  static WideMatrix polar_factor(const WideMatrix& y) {
    using W = long double;
    const Eigen::Index r = y.cols();
    if (r <= y.rows()) {
      const WideMatrix gram = y.transpose() * y;
      Eigen::SelfAdjointEigenSolver<WideMatrix> eig(gram);
      if (eig.info() == Eigen::Success) {
        const auto& lam = eig.eigenvalues();  // ascending
        if (lam(0) > W(1e-6) * lam(r - 1)) {
          const WideMatrix& v = eig.eigenvectors();
          const WideMatrix inv_sqrt = v * lam.cwiseSqrt().cwiseInverse().asDiagonal() * v.transpose();
          return y * inv_sqrt;
        }
      }
    }
    Eigen::JacobiSVD<WideMatrix> svd(y, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || !(s(s.size() - 1) > W(1e-13) * std::max(W(1), s(0)))) {
      throw Error(ErrorCode::RankDeficient, "polar factor of a rank-deficient matrix");
    }
    return svd.matrixU() * svd.matrixV().transpose();
  }

  /// Thin Q with positive diag(R), by modified Gram-Schmidt with one
  /// reorthogonalization pass.
  static WideMatrix qr_factor(const WideMatrix& y) {
    using W = long double;
    const Eigen::Index r = y.cols();
    const W scale = std::max(W(1), y.norm());
    WideMatrix q = y;
    for (Eigen::Index j = 0; j < r; ++j) {
      for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index k = 0; k < j; ++k) q.col(j) -= q.col(k).dot(q.col(j)) * q.col(k);
      }
      const W rjj = q.col(j).norm();
      if (!(rjj > W(1e-13) * scale)) throw Error(ErrorCode::RankDeficient, "QR of a rank-deficient matrix");
      q.col(j) /= rjj;
    }
    return q;
  }

  static WideMatrix normalize_columns(const WideMatrix& y) {
    WideMatrix out = y;
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
      const long double n = y.col(j).norm();
      if (!(n > 0.0L)) throw Error(ErrorCode::ZeroColumn, "cannot normalize a zero column");
      out.col(j) /= n;
    }
    return out;
  }

  ManifoldKind kind_;
  int d_;
  int r_;
  double radius_;
  double tol_;
};

}  // namespace mancon
