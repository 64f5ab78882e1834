#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "lsopt/common.hpp"

namespace lsopt {

enum class BallNorm { L0, L1, L2, Linf };

inline const char* ball_norm_name(BallNorm b) {
  switch (b) {
    case BallNorm::L0: return "l0";
    case BallNorm::L1: return "l1";
    case BallNorm::L2: return "l2";
    case BallNorm::Linf: return "linf";
  }
  return "?";
}

// Constraint set {z : ||z||_p <= radius}. For L0 the radius is an integer
// cardinality.
struct BallSpec {
  BallNorm norm = BallNorm::L2;
  double radius = 0.0;

  void validate() const {
    require_arg(radius >= 0.0, "BallSpec: radius must be nonnegative");
    if (norm == BallNorm::L0)
      require_arg(std::abs(radius - std::round(radius)) <= 1e-9,
                  "BallSpec: L0 radius must be an integer cardinality");
  }
};

inline double ball_norm_value(const Vector& z, BallNorm norm) {
  switch (norm) {
    case BallNorm::L0: {
      Index nnz = 0;
      for (Index i = 0; i < z.size(); ++i) nnz += (z[i] != 0.0);
      return static_cast<double>(nnz);
    }
    case BallNorm::L1: return z.lpNorm<1>();
    case BallNorm::L2: return z.norm();
    case BallNorm::Linf: return z.size() == 0 ? 0.0 : z.lpNorm<Eigen::Infinity>();
  }
  return 0.0;
}

// Soft thresholding: sign(y_i) max(|y_i| - alpha, 0).
inline Vector prox_l1(const Vector& y, double alpha) {
  require_arg(alpha > 0.0, "prox_l1: alpha must be positive");
  Vector out(y.size());
  for (Index i = 0; i < y.size(); ++i) {
    const double mag = std::abs(y[i]) - alpha;
    out[i] = mag > 0.0 ? (y[i] > 0.0 ? mag : -mag) : 0.0;
  }
  return out;
}

// Objective-side regularizer phi. L1Norm is weight * ||.||_1.
struct Regularizer {
  enum class Kind { Zero, L1Norm };
  Kind kind = Kind::L1Norm;
  double weight = 1.0;

  void validate() const {
    if (kind == Kind::L1Norm) require_arg(weight > 0.0, "Regularizer: weight must be positive");
  }

  double value(const Vector& v) const {
    return kind == Kind::Zero ? 0.0 : weight * v.lpNorm<1>();
  }

  // prox_{alpha * phi}(y)
  Vector prox(const Vector& y, double alpha) const {
    require_arg(alpha > 0.0, "Regularizer::prox: alpha must be positive");
    if (kind == Kind::Zero) return y;
    return prox_l1(y, alpha * weight);
  }

  static Regularizer l1(double weight = 1.0) { return {Kind::L1Norm, weight}; }
  static Regularizer zero() { return {Kind::Zero, 0.0}; }
};

namespace detail {

inline Vector project_l2(const Vector& z, double radius) {
  const double nrm = z.norm();
  if (nrm <= radius) return z;
  if (radius == 0.0) return Vector::Zero(z.size());
  return z * (radius / nrm);
}

inline Vector project_linf(const Vector& z, double radius) {
  return z.cwiseMax(-radius).cwiseMin(radius);
}

// Sort-and-threshold projection onto the l1 ball; O(n log n).
inline Vector project_l1(const Vector& z, double radius) {
  if (z.lpNorm<1>() <= radius) return z;
  if (radius == 0.0) return Vector::Zero(z.size());
  const Index n = z.size();
  std::vector<double> u(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) u[static_cast<std::size_t>(i)] = std::abs(z[i]);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cumsum = 0.0;
  double theta = 0.0;
  for (Index k = 0; k < n; ++k) {
    cumsum += u[static_cast<std::size_t>(k)];
    const double cand = (cumsum - radius) / static_cast<double>(k + 1);
    if (u[static_cast<std::size_t>(k)] > cand)
      theta = cand;
    else
      break;
  }
  Vector out(n);
  Index nnz = 0;
  for (Index i = 0; i < n; ++i) {
    const double mag = std::abs(z[i]) - theta;
    out[i] = mag > 0.0 ? (z[i] > 0.0 ? mag : -mag) : 0.0;
    nnz += (mag > 0.0);
  }
  // One corrective pass mops up accumulated rounding in theta so the output
  // never lands outside the ball.
  const double excess = out.lpNorm<1>() - radius;
  if (excess > 0.0 && nnz > 0) {
    const double bump = excess / static_cast<double>(nnz);
    for (Index i = 0; i < n; ++i) {
      if (out[i] == 0.0) continue;
      const double mag = std::abs(out[i]) - bump;
      out[i] = mag > 0.0 ? (out[i] > 0.0 ? mag : -mag) : 0.0;
    }
  }
  return out;
}

// Keep the tau largest-magnitude entries; ties break toward the lower index.
inline Vector project_l0(const Vector& z, Index tau) {
  const Index n = z.size();
  if (tau >= n) return z;
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&z](Index a, Index b) {
    const double ma = std::abs(z[a]), mb = std::abs(z[b]);
    if (ma != mb) return ma > mb;
    return a < b;
  });
  Vector out = Vector::Zero(n);
  for (Index k = 0; k < tau; ++k) out[order[static_cast<std::size_t>(k)]] = z[order[static_cast<std::size_t>(k)]];
  return out;
}

}  // namespace detail

// Euclidean projection onto {x : ||x||_p <= radius}.
inline Vector project_ball(const Vector& z, const BallSpec& ball) {
  ball.validate();
  switch (ball.norm) {
    case BallNorm::L2: return detail::project_l2(z, ball.radius);
    case BallNorm::Linf: return detail::project_linf(z, ball.radius);
    case BallNorm::L1: return detail::project_l1(z, ball.radius);
    case BallNorm::L0: {
      const auto tau = static_cast<Index>(std::llround(ball.radius));
      require_arg(tau <= z.size(), "project_ball: L0 cardinality " + std::to_string(tau) +
                                       " exceeds vector length " + std::to_string(z.size()));
      return detail::project_l0(z, tau);
    }
  }
  return z;
}

inline double ball_distance(const Vector& z, const BallSpec& ball) {
  return (z - project_ball(z, ball)).norm();
}

}  // namespace lsopt
