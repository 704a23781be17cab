#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "mancon/error.hpp"

namespace mancon {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Extended-precision work matrix. Steps, projections and means are evaluated
/// in it and rounded to double once, which keeps iterates agreeing to within
/// an ulp or two near consensus.
using WideMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

inline WideMatrix widen(const Matrix& x) { return x.cast<long double>(); }
inline Matrix narrow(const WideMatrix& x) { return x.cast<double>(); }

/// N blocks of identical shape; the stacked variable [x_1; ...; x_N] is never
/// materialized as one tall matrix.
using Blocks = std::vector<Matrix>;

/// All randomness flows through a 64-bit Mersenne Twister seeded explicitly.
/// Gaussian draws use std::normal_distribution, so streams are bit-stable
/// for a given standard library build.
using Rng = std::mt19937_64;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(rows, cols);
  // Column-major fill order is part of the reproducibility contract.
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) g(i, j) = normal(rng);
  }
  return g;
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

/// Log-uniform draw on [lo, hi].
inline double log_uniform(double lo, double hi, Rng& rng) {
  return std::exp(std::log(lo) + uniform01(rng) * (std::log(hi) - std::log(lo)));
}

inline bool all_finite(const Matrix& x) { return x.allFinite(); }

inline double squared_norm(const Blocks& x) {
  double s = 0.0;
  for (const auto& b : x) s += b.squaredNorm();
  return s;
}

inline double norm(const Blocks& x) { return std::sqrt(squared_norm(x)); }

inline double dot(const Blocks& a, const Blocks& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "stack sizes differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i].cwiseProduct(b[i]).sum();
  return s;
}

/// max_i ||x_i|| (the F,infinity norm of a stack).
inline double finf_norm(const Blocks& x) {
  double m = 0.0;
  for (const auto& b : x) m = std::max(m, b.norm());
  return m;
}

inline Blocks subtract(const Blocks& a, const Blocks& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "stack sizes differ");
  Blocks out;
  out.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out.push_back(a[i] - b[i]);
  return out;
}

/// x - [c; c; ...; c]
inline Blocks subtract_common(const Blocks& a, const Matrix& c) {
  Blocks out;
  out.reserve(a.size());
  for (const auto& b : a) out.push_back(b - c);
  return out;
}

inline Matrix block_sum(const Blocks& x) {
  if (x.empty()) throw Error(ErrorCode::InvalidArgument, "empty stack");
  Matrix s = Matrix::Zero(x.front().rows(), x.front().cols());
  for (const auto& b : x) s += b;
  return s;
}

}  // namespace mancon
