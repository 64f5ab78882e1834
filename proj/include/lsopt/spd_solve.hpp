#pragma once

#include <functional>
#include <memory>
#include <optional>

#include <Eigen/Cholesky>

#include "lsopt/common.hpp"
#include "lsopt/linear_map.hpp"

namespace lsopt {

struct CgParams {
  int max_iters = 100;
  double rel_tol = 1e-10;
};

enum class SpdMethod { Cg, WoodburyDirect, DiagonalFast };

// Applies (eta2 I + eta1 A'A)^-1 through the d x d dual system
//   G = (1/eta1) I + (1/eta2) A A',
// whose Cholesky factor is computed once and reused across solves.
class WoodburySolver {
 public:
  WoodburySolver(Matrix A, double eta1, double eta2)
      : A_(std::move(A)), eta1_(eta1), eta2_(eta2) {
    require_arg(eta1 > 0 && eta2 > 0, "WoodburySolver: eta1, eta2 must be positive");
    require(A_.rows() <= A_.cols(), "WoodburySolver: expects a wide map (rows <= cols), got " +
                                        std::to_string(A_.rows()) + "x" +
                                        std::to_string(A_.cols()));
    Matrix G = (1.0 / eta2_) * (A_ * A_.transpose());
    G.diagonal().array() += 1.0 / eta1_;
    llt_.compute(G);
    if (llt_.info() != Eigen::Success)
      throw numerical_error("WoodburySolver: Cholesky factorization failed");
    ++factorization_count_;
  }

  // x = (1/eta2) rhs - (1/eta2^2) A' G^-1 A rhs
  Vector solve(const Vector& rhs) const {
    require(rhs.size() == A_.cols(),
            "WoodburySolver: rhs length " + std::to_string(rhs.size()) + ", expected " +
                std::to_string(A_.cols()));
    ++solve_count_;
    Vector t = llt_.solve(A_ * rhs);
    return rhs / eta2_ - A_.transpose() * t / (eta2_ * eta2_);
  }

  int factorization_count() const { return factorization_count_; }
  long solve_count() const { return solve_count_; }
  double eta1() const { return eta1_; }
  double eta2() const { return eta2_; }
  Index rows() const { return A_.rows(); }
  Index cols() const { return A_.cols(); }

 private:
  Matrix A_;
  double eta1_, eta2_;
  Eigen::LLT<Matrix> llt_;
  int factorization_count_ = 0;
  mutable long solve_count_ = 0;
};

struct SpdSolveConfig {
  SpdMethod method = SpdMethod::Cg;
  CgParams cg;
  bool warm_start = true;
  // Required when method == DiagonalFast: the (positive) diagonal of H.
  std::optional<Vector> diagonal;
  // Required when method == WoodburyDirect.
  std::shared_ptr<const WoodburySolver> woodbury;

  void validate() const {
    if (method == SpdMethod::Cg) {
      require_arg(cg.max_iters >= 1, "SpdSolveConfig: CG max_iters must be >= 1");
      require_arg(cg.rel_tol > 0 && cg.rel_tol < 1, "SpdSolveConfig: CG rel_tol must be in (0,1)");
    }
    if (method == SpdMethod::DiagonalFast)
      require_arg(diagonal.has_value(), "SpdSolveConfig: DiagonalFast requires a diagonal");
    if (method == SpdMethod::WoodburyDirect)
      require_arg(woodbury != nullptr, "SpdSolveConfig: WoodburyDirect requires a prepared solver");
  }

  static SpdSolveConfig cg_config(int max_iters, double rel_tol = 1e-10, bool warm = true) {
    SpdSolveConfig c;
    c.method = SpdMethod::Cg;
    c.cg = {max_iters, rel_tol};
    c.warm_start = warm;
    return c;
  }
};

struct SpdSolveResult {
  Vector x;
  int iterations = 0;
};

// Conjugate gradients (or a structured direct path) for H x = rhs with H
// symmetric positive definite. CG stops at max_iters or when the relative
// residual ||r|| / ||rhs|| drops below rel_tol.
inline SpdSolveResult solve_spd(const std::function<Vector(const Vector&)>& H_apply,
                                const Vector& rhs, const SpdSolveConfig& cfg,
                                const std::optional<Vector>& x0 = std::nullopt) {
  cfg.validate();
  require_arg(rhs.allFinite(), "solve_spd: rhs has non-finite entries");
  const Index n = rhs.size();

  if (rhs.isZero(0.0)) return {Vector::Zero(n), 0};

  if (cfg.method == SpdMethod::DiagonalFast) {
    const Vector& d = *cfg.diagonal;
    require(d.size() == n, "solve_spd: diagonal length " + std::to_string(d.size()) +
                               " does not match rhs length " + std::to_string(n));
    require_arg((d.array() > 0).all(), "solve_spd: diagonal must be positive");
    return {rhs.cwiseQuotient(d), 0};
  }
  if (cfg.method == SpdMethod::WoodburyDirect) {
    return {cfg.woodbury->solve(rhs), 0};
  }

  Vector x;
  Vector r;
  if (cfg.warm_start && x0.has_value()) {
    require(x0->size() == n, "solve_spd: warm start length mismatch");
    x = *x0;
    r = rhs - H_apply(x);
  } else {
    x = Vector::Zero(n);
    r = rhs;
  }
  const double stop = cfg.cg.rel_tol * rhs.norm();
  double rr = r.squaredNorm();
  Vector p = r;
  int iters = 0;
  while (iters < cfg.cg.max_iters && std::sqrt(rr) > stop) {
    Vector Hp = H_apply(p);
    require(Hp.size() == n, "solve_spd: H_apply changed vector length");
    const double pHp = p.dot(Hp);
    if (!std::isfinite(pHp) || pHp <= 0.0)
      throw numerical_error("solve_spd: CG breakdown (p'Hp = " + std::to_string(pHp) +
                            " at iteration " + std::to_string(iters) + ")");
    const double alpha = rr / pHp;
    x += alpha * p;
    r -= alpha * Hp;
    if (!r.allFinite() || !x.allFinite())
      throw numerical_error("solve_spd: non-finite values at CG iteration " +
                            std::to_string(iters));
    const double rr_new = r.squaredNorm();
    p = r + (rr_new / rr) * p;
    rr = rr_new;
    ++iters;
  }
  return {std::move(x), iters};
}

// One-shot (eta2 I + eta1 A'A)^-1 rhs for a dense wide map. Construct a
// WoodburySolver directly when the factor should be reused.
inline Vector woodbury_solve(const LinearMap& A, double eta1, double eta2, const Vector& rhs) {
  require_arg(A.dense() != nullptr, "woodbury_solve: map '" + A.name() + "' is not dense");
  WoodburySolver solver(*A.dense(), eta1, eta2);
  return solver.solve(rhs);
}

}  // namespace lsopt
