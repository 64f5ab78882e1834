#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "lsopt/common.hpp"
#include "lsopt/rng.hpp"

namespace lsopt {

enum class MapKind { Dense, Restriction, Identity, Orthonormal, Scaled, Composite, Custom };

// Matrix-free linear operator: a pair of closures plus enough structure for
// the solver fast paths (dense payload, restriction index set, orthonormality
// tag). Copies are cheap; payloads are shared.
class LinearMap {
 public:
  using Apply = std::function<Vector(const Vector&)>;

  LinearMap(std::string name, Index rows, Index cols, Apply apply, Apply adjoint,
            double frob_sq, bool frob_exact, MapKind kind, bool orthonormal)
      : name_(std::move(name)),
        rows_(rows),
        cols_(cols),
        apply_(std::move(apply)),
        adjoint_(std::move(adjoint)),
        frob_sq_(frob_sq),
        frob_exact_(frob_exact),
        kind_(kind),
        orthonormal_(orthonormal) {
    require_arg(rows >= 0 && cols >= 0, "LinearMap '" + name_ + "': negative dimensions");
  }

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  MapKind kind() const { return kind_; }
  const std::string& name() const { return name_; }

  // Structurally guaranteed adjoint(apply(x)) == x (tight frame / orthogonal).
  bool is_orthonormal() const { return orthonormal_; }

  double frobenius_norm_sq() const { return frob_sq_; }
  // False when frobenius_norm_sq is a stochastic upper estimate.
  bool frobenius_exact() const { return frob_exact_; }

  Vector apply(const Vector& x) const {
    require(x.size() == cols_, "linear map '" + name_ + "': apply expected input of length " +
                                   std::to_string(cols_) + ", got " + std::to_string(x.size()));
    Vector y = apply_(x);
    require(y.size() == rows_, "linear map '" + name_ + "': apply produced output of length " +
                                   std::to_string(y.size()) + ", expected " + std::to_string(rows_));
    return y;
  }

  Vector adjoint(const Vector& y) const {
    require(y.size() == rows_, "linear map '" + name_ + "': adjoint expected input of length " +
                                   std::to_string(rows_) + ", got " + std::to_string(y.size()));
    Vector x = adjoint_(y);
    require(x.size() == cols_, "linear map '" + name_ + "': adjoint produced output of length " +
                                   std::to_string(x.size()) + ", expected " + std::to_string(cols_));
    return x;
  }

  // Non-null for Dense kind.
  const Matrix* dense() const { return dense_.get(); }
  // Non-null for Restriction kind (sorted unique indices into [0, cols)).
  const std::vector<Index>* restriction() const { return restriction_.get(); }

  void set_dense_payload(std::shared_ptr<const Matrix> m) { dense_ = std::move(m); }
  void set_restriction_payload(std::shared_ptr<const std::vector<Index>> r) {
    restriction_ = std::move(r);
  }

 private:
  std::string name_;
  Index rows_, cols_;
  Apply apply_, adjoint_;
  double frob_sq_;
  bool frob_exact_;
  MapKind kind_;
  bool orthonormal_;
  std::shared_ptr<const Matrix> dense_;
  std::shared_ptr<const std::vector<Index>> restriction_;
};

inline LinearMap make_dense(Matrix A, std::string name = "") {
  auto M = std::make_shared<const Matrix>(std::move(A));
  if (name.empty())
    name = "dense(" + std::to_string(M->rows()) + "x" + std::to_string(M->cols()) + ")";
  double frob = M->squaredNorm();
  LinearMap map(
      name, M->rows(), M->cols(), [M](const Vector& x) -> Vector { return (*M) * x; },
      [M](const Vector& y) -> Vector { return M->transpose() * y; }, frob, true, MapKind::Dense,
      false);
  map.set_dense_payload(M);
  return map;
}

inline LinearMap make_identity(Index n) {
  return LinearMap(
      "identity(" + std::to_string(n) + ")", n, n, [](const Vector& x) { return x; },
      [](const Vector& y) { return y; }, static_cast<double>(n), true, MapKind::Identity, true);
}

// Selects the given entries of a length-n vector; the adjoint zero-pads.
inline LinearMap make_restriction(std::vector<Index> indices, Index n) {
  auto idx = std::make_shared<const std::vector<Index>>(std::move(indices));
  require_arg(std::is_sorted(idx->begin(), idx->end()) &&
                  std::adjacent_find(idx->begin(), idx->end()) == idx->end(),
              "restriction indices must be sorted and unique");
  for (Index i : *idx)
    require_arg(i >= 0 && i < n, "restriction index " + std::to_string(i) + " outside [0, " +
                                     std::to_string(n) + ")");
  const Index d = static_cast<Index>(idx->size());
  LinearMap map(
      "restriction(" + std::to_string(d) + " of " + std::to_string(n) + ")", d, n,
      [idx, d](const Vector& x) -> Vector {
        Vector y(d);
        for (Index i = 0; i < d; ++i) y[i] = x[(*idx)[static_cast<std::size_t>(i)]];
        return y;
      },
      [idx, n, d](const Vector& y) -> Vector {
        Vector x = Vector::Zero(n);
        for (Index i = 0; i < d; ++i) x[(*idx)[static_cast<std::size_t>(i)]] = y[i];
        return x;
      },
      static_cast<double>(d), true, MapKind::Restriction, false);
  map.set_restriction_payload(idx);
  return map;
}

namespace detail {

// Unitary type-II DCT matrix: row k is c_k cos(pi (2i+1) k / 2n).
inline Matrix dct_matrix(Index n) {
  Matrix T(n, n);
  const double c0 = std::sqrt(1.0 / static_cast<double>(n));
  const double ck = std::sqrt(2.0 / static_cast<double>(n));
  for (Index k = 0; k < n; ++k) {
    const double scale = (k == 0) ? c0 : ck;
    for (Index i = 0; i < n; ++i)
      T(k, i) = scale * std::cos(std::numbers::pi * (2.0 * static_cast<double>(i) + 1.0) *
                                 static_cast<double>(k) / (2.0 * static_cast<double>(n)));
  }
  return T;
}

using RowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

inline Vector flatten_row_major(const Matrix& X) {
  Vector v(X.size());
  Index p = 0;
  for (Index i = 0; i < X.rows(); ++i)
    for (Index j = 0; j < X.cols(); ++j) v[p++] = X(i, j);
  return v;
}

}  // namespace detail

// Orthonormal 1-D DCT-II (unitary scaling).
inline LinearMap make_dct(Index n) {
  auto T = std::make_shared<const Matrix>(detail::dct_matrix(n));
  return LinearMap(
      "dct(" + std::to_string(n) + ")", n, n,
      [T](const Vector& x) -> Vector { return (*T) * x; },
      [T](const Vector& y) -> Vector { return T->transpose() * y; }, static_cast<double>(n), true,
      MapKind::Orthonormal, true);
}

// Separable 2-D DCT-II over row-major images of shape rows x cols.
inline LinearMap make_dct2(Index rows, Index cols) {
  auto Tr = std::make_shared<const Matrix>(detail::dct_matrix(rows));
  auto Tc = std::make_shared<const Matrix>(detail::dct_matrix(cols));
  const Index n = rows * cols;
  return LinearMap(
      "dct2(" + std::to_string(rows) + "x" + std::to_string(cols) + ")", n, n,
      [Tr, Tc, rows, cols](const Vector& x) -> Vector {
        detail::RowMajorMap X(x.data(), rows, cols);
        Matrix Y = (*Tr) * X * Tc->transpose();
        return detail::flatten_row_major(Y);
      },
      [Tr, Tc, rows, cols](const Vector& y) -> Vector {
        detail::RowMajorMap Y(y.data(), rows, cols);
        Matrix X = Tr->transpose() * Y * (*Tc);
        return detail::flatten_row_major(X);
      },
      static_cast<double>(n), true, MapKind::Orthonormal, true);
}

// 20-probe stochastic estimate of ||A||_F^2 (E ||A v||^2 over standard normal
// v), inflated 2x so downstream step-size bounds stay safe.
inline double estimate_frobenius_sq(const LinearMap::Apply& apply, Index cols,
                                    std::uint64_t seed = 0x5eedf00d) {
  Rng rng(seed);
  const int probes = 20;
  double acc = 0.0;
  for (int t = 0; t < probes; ++t) {
    Vector v = rng.normal_vector(cols);
    acc += apply(v).squaredNorm();
  }
  return 2.0 * acc / probes;
}

inline LinearMap make_scaled(double s, LinearMap inner) {
  auto in = std::make_shared<const LinearMap>(std::move(inner));
  return LinearMap(
      "scaled(" + std::to_string(s) + ", " + in->name() + ")", in->rows(), in->cols(),
      [s, in](const Vector& x) -> Vector { return s * in->apply(x); },
      [s, in](const Vector& y) -> Vector { return s * in->adjoint(y); },
      s * s * in->frobenius_norm_sq(), in->frobenius_exact(), MapKind::Scaled,
      in->is_orthonormal() && std::abs(std::abs(s) - 1.0) == 0.0);
}

inline LinearMap make_composite(LinearMap outer, LinearMap inner) {
  require(outer.cols() == inner.rows(), "composite: outer.cols (" + std::to_string(outer.cols()) +
                                            ") must equal inner.rows (" +
                                            std::to_string(inner.rows()) + ")");
  auto out = std::make_shared<const LinearMap>(std::move(outer));
  auto in = std::make_shared<const LinearMap>(std::move(inner));
  LinearMap::Apply apply = [out, in](const Vector& x) -> Vector { return out->apply(in->apply(x)); };
  LinearMap::Apply adj = [out, in](const Vector& y) -> Vector {
    return in->adjoint(out->adjoint(y));
  };
  // A square orthonormal factor preserves the Frobenius norm of the other.
  double frob;
  bool exact;
  if (out->is_orthonormal() && out->rows() == out->cols()) {
    frob = in->frobenius_norm_sq();
    exact = in->frobenius_exact();
  } else if (in->is_orthonormal() && in->rows() == in->cols()) {
    frob = out->frobenius_norm_sq();
    exact = out->frobenius_exact();
  } else {
    frob = estimate_frobenius_sq(apply, in->cols());
    exact = false;
  }
  return LinearMap("composite(" + out->name() + " . " + in->name() + ")", out->rows(), in->cols(),
                   std::move(apply), std::move(adj), frob, exact, MapKind::Composite,
                   out->is_orthonormal() && in->is_orthonormal());
}

inline LinearMap make_custom(std::string name, Index rows, Index cols, LinearMap::Apply apply,
                             LinearMap::Apply adjoint, std::uint64_t frob_seed = 0x5eedf00d) {
  double frob = estimate_frobenius_sq(apply, cols, frob_seed);
  return LinearMap(std::move(name), rows, cols, std::move(apply), std::move(adjoint), frob, false,
                   MapKind::Custom, false);
}

// Max over randomized trials of |<Ax, y> - <x, A'y>| / (||Ax|| ||y|| + eps).
inline double adjoint_test(const LinearMap& map, int trials, std::uint64_t seed) {
  require_arg(trials >= 1, "adjoint_test: trials must be >= 1");
  Rng rng(seed);
  const double eps = std::numeric_limits<double>::epsilon();
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    Vector x = rng.normal_vector(map.cols());
    Vector y = rng.normal_vector(map.rows());
    Vector ax = map.apply(x);
    Vector aty = map.adjoint(y);
    double defect = std::abs(ax.dot(y) - x.dot(aty)) / (ax.norm() * y.norm() + eps);
    worst = std::max(worst, defect);
  }
  return worst;
}

}  // namespace lsopt
