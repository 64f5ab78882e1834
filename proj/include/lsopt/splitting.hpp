#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "lsopt/common.hpp"
#include "lsopt/linear_map.hpp"
#include "lsopt/prox.hpp"
#include "lsopt/spd_solve.hpp"

// Splitting solvers for
//
//   min_x  phi(C(x))  s.t.  psi(A(x) - b) <= sigma
//
// via the relaxation
//
//   min_{x,w1,w2}  phi(w1) + 1/(2 eta1) ||C(x) - w1||^2
//                          + 1/(2 eta2) ||w2 - A(x) + b||^2
//   s.t.  psi(w2) <= sigma,
//
// with eta-continuation driving the relaxation tight.

namespace lsopt {

struct ProblemSpec {
  LinearMap A;  // observation operator, d x n
  LinearMap C;  // transform operator, c x n
  Vector b;     // observations, length d
  Regularizer phi;
  BallSpec ball;

  Index n() const { return A.cols(); }
  Index c() const { return C.rows(); }
  Index d() const { return A.rows(); }

  void validate() const {
    require(A.cols() == C.cols(), "ProblemSpec: A acts on length " + std::to_string(A.cols()) +
                                      " but C acts on length " + std::to_string(C.cols()));
    require(b.size() == A.rows(), "ProblemSpec: b has length " + std::to_string(b.size()) +
                                      ", expected " + std::to_string(A.rows()));
    phi.validate();
    ball.validate();
  }
};

struct SplitState {
  Vector x;   // length n
  Vector w1;  // length c
  Vector w2;  // length d, kept ball-feasible
  double eta1 = 1.0;
  double eta2 = 1.0;
};

struct ContinuationSchedule {
  double eta_init = 1.0;
  double shrink = 0.5;
  double eta_floor = 1e-6;
  int inner_iters = 100;
  bool warm_start = true;

  void validate() const {
    require_arg(eta_init > 0 && eta_floor > 0, "ContinuationSchedule: etas must be positive");
    require_arg(eta_floor < eta_init, "ContinuationSchedule: eta_floor must be below eta_init");
    require_arg(shrink > 0 && shrink < 1, "ContinuationSchedule: shrink must lie in (0,1)");
    require_arg(inner_iters >= 1, "ContinuationSchedule: inner_iters must be >= 1");
  }
};

struct TraceRow {
  int level = 0;
  int iter = 0;
  double eta = 0;
  double objective = 0;
  double stationarity = 0;
  double feasibility = 0;
  double seconds = 0;
};
using IterateTrace = std::vector<TraceRow>;

inline void write_trace_csv(std::ostream& os, const IterateTrace& trace) {
  os << "level,iter,eta,objective,stationarity,feasibility,seconds\n";
  char buf[160];
  for (const auto& r : trace) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g,%.17g,%.17g,%.6f\n", r.level, r.iter, r.eta,
                  r.objective, r.stationarity, r.feasibility, r.seconds);
    os << buf;
  }
}

inline void write_trace_csv(const std::string& path, const IterateTrace& trace) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_trace_csv: cannot open " + path);
  write_trace_csv(os, trace);
}

namespace detail {
inline void check_state(const ProblemSpec& spec, const SplitState& st, const char* where) {
  require(st.x.size() == spec.n(), std::string(where) + ": x has length " +
                                       std::to_string(st.x.size()) + ", expected " +
                                       std::to_string(spec.n()));
  require(st.w1.size() == spec.c(), std::string(where) + ": w1 has length " +
                                        std::to_string(st.w1.size()) + ", expected " +
                                        std::to_string(spec.c()));
  require(st.w2.size() == spec.d(), std::string(where) + ": w2 has length " +
                                        std::to_string(st.w2.size()) + ", expected " +
                                        std::to_string(spec.d()));
  require_arg(st.eta1 > 0 && st.eta2 > 0, std::string(where) + ": eta1, eta2 must be positive");
}
}  // namespace detail

// Full relaxed objective. Returns +inf when w2 sits measurably outside the
// ball (distance beyond 1e-9); every solver update keeps w2 feasible.
inline double objective(const ProblemSpec& spec, const SplitState& st) {
  detail::check_state(spec, st, "objective");
  if (ball_distance(st.w2, spec.ball) > 1e-9) return std::numeric_limits<double>::infinity();
  const Vector r1 = spec.C.apply(st.x) - st.w1;
  const Vector r2 = st.w2 - spec.A.apply(st.x) + spec.b;
  return spec.phi.value(st.w1) + r1.squaredNorm() / (2.0 * st.eta1) +
         r2.squaredNorm() / (2.0 * st.eta2);
}

// Frobenius-based bound on the squared spectral norm of the stacked system:
//   (1/eta1)(c + ||C||_F^2) + (1/eta2)(d + ||A||_F^2).
inline double rate_constant(const ProblemSpec& spec, double eta1, double eta2) {
  require_arg(eta1 > 0 && eta2 > 0, "rate_constant: eta1, eta2 must be positive");
  return (static_cast<double>(spec.c()) + spec.C.frobenius_norm_sq()) / eta1 +
         (static_cast<double>(spec.d()) + spec.A.frobenius_norm_sq()) / eta2;
}

// Prepared solver for the normal system
//   H = (1/eta1) C'C + (1/eta2) A'A,
// selecting CG, a cached Woodbury factorization (orthonormal C, dense wide A)
// or the closed-form diagonal (orthonormal C, restriction A).
class XSolver {
 public:
  XSolver(const ProblemSpec& spec, double eta1, double eta2, SpdSolveConfig cfg)
      : A_(spec.A), C_(spec.C), eta1_(eta1), eta2_(eta2), cfg_(std::move(cfg)) {
    require_arg(eta1 > 0 && eta2 > 0, "XSolver: eta1, eta2 must be positive");
    switch (cfg_.method) {
      case SpdMethod::WoodburyDirect: {
        require_arg(C_.is_orthonormal(),
                    "XSolver: Woodbury path needs an orthonormal transform (C'C = I), got '" +
                        C_.name() + "'");
        require_arg(A_.dense() != nullptr,
                    "XSolver: Woodbury path needs a dense observation map, got '" + A_.name() + "'");
        woodbury_ = std::make_shared<WoodburySolver>(*A_.dense(), eta1_, eta2_);
        break;
      }
      case SpdMethod::DiagonalFast: {
        require_arg(C_.is_orthonormal(),
                    "XSolver: diagonal path needs an orthonormal transform (C'C = I), got '" +
                        C_.name() + "'");
        require_arg(A_.restriction() != nullptr,
                    "XSolver: diagonal path needs a restriction observation map, got '" +
                        A_.name() + "'");
        Vector diag = Vector::Constant(A_.cols(), 1.0 / eta1_);
        for (Index i : *A_.restriction()) diag[i] += 1.0 / eta2_;
        diagonal_ = std::move(diag);
        break;
      }
      case SpdMethod::Cg: {
        SpdSolveConfig probe = cfg_;
        probe.validate();
        break;
      }
    }
  }

  // Best available exact path for the given structure.
  static XSolver exact(const ProblemSpec& spec, double eta1, double eta2) {
    SpdSolveConfig cfg;
    if (spec.C.is_orthonormal() && spec.A.restriction() != nullptr) {
      cfg.method = SpdMethod::DiagonalFast;
    } else if (spec.C.is_orthonormal() && spec.A.dense() != nullptr &&
               spec.A.rows() <= spec.A.cols()) {
      cfg.method = SpdMethod::WoodburyDirect;
    } else {
      cfg.method = SpdMethod::Cg;
      cfg.cg.max_iters = static_cast<int>(4 * spec.n());
      cfg.cg.rel_tol = 1e-14;
    }
    return XSolver(spec, eta1, eta2, cfg);
  }

  Vector apply_H(const Vector& v) const {
    return C_.adjoint(C_.apply(v)) / eta1_ + A_.adjoint(A_.apply(v)) / eta2_;
  }

  Vector solve(const Vector& rhs, const std::optional<Vector>& warm = std::nullopt,
               int* iterations = nullptr) const {
    Vector x;
    int iters = 0;
    switch (cfg_.method) {
      case SpdMethod::WoodburyDirect:
        // H = 1/(eta1 eta2) (eta2 I + eta1 A'A) when C'C = I.
        x = eta1_ * eta2_ * woodbury_->solve(rhs);
        break;
      case SpdMethod::DiagonalFast:
        x = rhs.cwiseQuotient(diagonal_);
        break;
      case SpdMethod::Cg: {
        auto res = solve_spd([this](const Vector& v) { return apply_H(v); }, rhs, cfg_,
                             cfg_.warm_start ? warm : std::nullopt);
        x = std::move(res.x);
        iters = res.iterations;
        break;
      }
    }
    if (iterations) *iterations = iters;
    return x;
  }

  double eta1() const { return eta1_; }
  double eta2() const { return eta2_; }
  SpdMethod method() const { return cfg_.method; }

 private:
  LinearMap A_, C_;
  double eta1_, eta2_;
  SpdSolveConfig cfg_;
  std::shared_ptr<WoodburySolver> woodbury_;
  Vector diagonal_;
};

namespace detail {
inline void check_finite_step(const SplitState& st, const char* alg) {
  if (!all_finite(st.x) || !all_finite(st.w1) || !all_finite(st.w2))
    throw numerical_error(std::string(alg) + ": non-finite iterate produced");
}

inline Vector x_update_rhs(const ProblemSpec& spec, const SplitState& st) {
  return spec.C.adjoint(st.w1) / st.eta1 + spec.A.adjoint(spec.b + st.w2) / st.eta2;
}
}  // namespace detail

// One prox-gradient sweep: gradient step on x, then relaxed prox/projection
// steps on w1, w2 using the fresh x.
inline SplitState step_alg1(const ProblemSpec& spec, const SplitState& st, double alpha) {
  detail::check_state(spec, st, "step_alg1");
  require_arg(alpha > 0, "step_alg1: alpha must be positive");
  SplitState out = st;
  const Vector g = spec.C.adjoint(spec.C.apply(st.x) - st.w1) / st.eta1 +
                   spec.A.adjoint(spec.A.apply(st.x) - st.w2 - spec.b) / st.eta2;
  out.x = st.x - alpha * g;
  const Vector y1 = st.w1 - (alpha / st.eta1) * (st.w1 - spec.C.apply(out.x));
  out.w1 = spec.phi.prox(y1, alpha);
  const Vector y2 = st.w2 - (alpha / st.eta2) * (st.w2 - (spec.A.apply(out.x) - spec.b));
  out.w2 = project_ball(y2, spec.ball);
  detail::check_finite_step(out, "step_alg1");
  return out;
}

// Value-function iteration: exact (or inexact CG) x-solve, then prox-gradient
// steps of size beta on the partially minimized objective.
inline SplitState step_alg2(const ProblemSpec& spec, const SplitState& st, double beta,
                            const XSolver& solver) {
  detail::check_state(spec, st, "step_alg2");
  require_arg(beta > 0, "step_alg2: beta must be positive");
  require_arg(beta <= std::min(st.eta1, st.eta2) * (1.0 + 1e-12),
              "step_alg2: beta must not exceed min(eta1, eta2)");
  SplitState out = st;
  out.x = solver.solve(detail::x_update_rhs(spec, st), st.x);
  const Vector y1 = st.w1 - (beta / st.eta1) * (st.w1 - spec.C.apply(out.x));
  out.w1 = spec.phi.prox(y1, beta);
  const Vector y2 = st.w2 - (beta / st.eta2) * (st.w2 - (spec.A.apply(out.x) - spec.b));
  out.w2 = project_ball(y2, spec.ball);
  detail::check_finite_step(out, "step_alg2");
  return out;
}

inline SplitState step_alg2(const ProblemSpec& spec, const SplitState& st, double beta,
                            const SpdSolveConfig& ls) {
  return step_alg2(spec, st, beta, XSolver(spec, st.eta1, st.eta2, ls));
}

// Block-coordinate descent: every block exactly minimizes its subproblem.
inline SplitState step_alg3(const ProblemSpec& spec, const SplitState& st, const XSolver& solver) {
  detail::check_state(spec, st, "step_alg3");
  SplitState out = st;
  out.x = solver.solve(detail::x_update_rhs(spec, st), st.x);
  out.w1 = spec.phi.prox(spec.C.apply(out.x), st.eta1);
  out.w2 = project_ball(spec.A.apply(out.x) - spec.b, spec.ball);
  detail::check_finite_step(out, "step_alg3");
  return out;
}

inline SplitState step_alg3(const ProblemSpec& spec, const SplitState& st) {
  return step_alg3(spec, st, XSolver::exact(spec, st.eta1, st.eta2));
}

// ||v_k|| with v_k = (kappa I - M'M)(z_k - z_{k+1}) for the stacked operator
// M of the relaxed least-squares system; kappa is the rate_constant bound.
inline double stationarity(const ProblemSpec& spec, const SplitState& prev,
                           const SplitState& next) {
  detail::check_state(spec, prev, "stationarity(prev)");
  detail::check_state(spec, next, "stationarity(next)");
  require_arg(prev.eta1 == next.eta1 && prev.eta2 == next.eta2,
              "stationarity: iterates must come from the same eta level");
  const double kappa = rate_constant(spec, prev.eta1, prev.eta2);
  const Vector dx = prev.x - next.x;
  const Vector dw1 = prev.w1 - next.w1;
  const Vector dw2 = prev.w2 - next.w2;
  const Vector u1 = (spec.C.apply(dx) - dw1) / prev.eta1;
  const Vector u2 = (spec.A.apply(dx) - dw2) / prev.eta2;
  const Vector top = kappa * dx - spec.C.adjoint(u1) - spec.A.adjoint(u2);
  const Vector mid = kappa * dw1 + u1;
  const Vector bot = kappa * dw2 + u2;
  return std::sqrt(top.squaredNorm() + mid.squaredNorm() + bot.squaredNorm());
}

// Quadratic part of the objective after minimizing out x:
//   Qtilde(w) = min_x 1/(2 eta1)||C(x)-w1||^2 + 1/(2 eta2)||w2 - A(x) + b||^2.
inline double partial_min_value(const ProblemSpec& spec, const Vector& w1, const Vector& w2,
                                const XSolver& solver) {
  SplitState probe{Vector::Zero(spec.n()), w1, w2, solver.eta1(), solver.eta2()};
  const Vector x = solver.solve(detail::x_update_rhs(spec, probe));
  const Vector r1 = spec.C.apply(x) - w1;
  const Vector r2 = w2 - spec.A.apply(x) + spec.b;
  return r1.squaredNorm() / (2.0 * solver.eta1()) + r2.squaredNorm() / (2.0 * solver.eta2());
}

// Gradient of Qtilde via the value-function derivative identity.
inline std::pair<Vector, Vector> partial_min_gradient(const ProblemSpec& spec, const Vector& w1,
                                                      const Vector& w2, const XSolver& solver) {
  SplitState probe{Vector::Zero(spec.n()), w1, w2, solver.eta1(), solver.eta2()};
  const Vector x = solver.solve(detail::x_update_rhs(spec, probe));
  Vector g1 = (w1 - spec.C.apply(x)) / solver.eta1();
  Vector g2 = (w2 - spec.A.apply(x) + spec.b) / solver.eta2();
  return {std::move(g1), std::move(g2)};
}

struct AlgorithmChoice {
  enum class Id { Alg1, Alg2, Alg3 };
  Id id = Id::Alg3;
  SpdSolveConfig ls;  // x-solve configuration for Alg2

  static AlgorithmChoice alg1() { return {Id::Alg1, {}}; }
  static AlgorithmChoice alg2(SpdSolveConfig ls) { return {Id::Alg2, std::move(ls)}; }
  static AlgorithmChoice alg3() { return {Id::Alg3, {}}; }

  std::string name() const {
    switch (id) {
      case Id::Alg1: return "alg1";
      case Id::Alg2: return "alg2";
      case Id::Alg3: return "alg3";
    }
    return "?";
  }
};

struct SolveResult {
  SplitState state;
  IterateTrace trace;
  double consistency_gap = 0;  // ||C(x) - w1|| at the final iterate
  double feasibility = 0;      // ball distance of A(x) - b at the final iterate
};

inline SplitState initial_state(const ProblemSpec& spec, const std::optional<Vector>& x0,
                                double eta) {
  SplitState st;
  if (x0.has_value()) {
    require(x0->size() == spec.n(), "solve: x0 has length " + std::to_string(x0->size()) +
                                        ", expected " + std::to_string(spec.n()));
    st.x = *x0;
  } else {
    st.x = spec.A.adjoint(spec.b);
    const double nrm = st.x.norm();
    if (nrm > 0) st.x /= nrm;
  }
  st.w1 = spec.C.apply(st.x);
  st.w2 = project_ball(spec.A.apply(st.x) - spec.b, spec.ball);
  st.eta1 = st.eta2 = eta;
  return st;
}

// Continuation driver: runs the chosen step at each eta level (eta1 = eta2),
// shrinking toward eta_floor and warm-starting from the previous solution.
// Within a level, iteration stops early once ||v_k|| <= 1e-8 (1 + p(z_level)).
// The seed parameter is reserved for randomized sub-estimates; the driver
// itself is deterministic.
inline SolveResult solve(const ProblemSpec& spec, const ContinuationSchedule& sched,
                         const AlgorithmChoice& algorithm, std::optional<Vector> x0 = std::nullopt,
                         std::uint64_t seed = 0) {
  (void)seed;
  spec.validate();
  sched.validate();
  const auto t_start = std::chrono::steady_clock::now();
  auto elapsed = [&t_start] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  };

  SolveResult result;
  SplitState st = initial_state(spec, x0, sched.eta_init);
  IterateTrace trace;

  int level = 0;
  double eta = sched.eta_init;
  while (eta >= sched.eta_floor * (1.0 - 1e-12)) {
    ++level;
    st.eta1 = st.eta2 = eta;
    std::optional<XSolver> solver;
    double alpha = 0;
    switch (algorithm.id) {
      case AlgorithmChoice::Id::Alg1:
        alpha = 1.0 / rate_constant(spec, eta, eta);
        break;
      case AlgorithmChoice::Id::Alg2:
        solver.emplace(spec, eta, eta, algorithm.ls);
        break;
      case AlgorithmChoice::Id::Alg3:
        solver.emplace(XSolver::exact(spec, eta, eta));
        break;
    }
    const double p0 = objective(spec, st);
    const double v_stop = 1e-8 * (1.0 + p0);
    for (int iter = 1; iter <= sched.inner_iters; ++iter) {
      SplitState prev = st;
      try {
        switch (algorithm.id) {
          case AlgorithmChoice::Id::Alg1: st = step_alg1(spec, st, alpha); break;
          case AlgorithmChoice::Id::Alg2: st = step_alg2(spec, st, eta, *solver); break;
          case AlgorithmChoice::Id::Alg3: st = step_alg3(spec, st, *solver); break;
        }
      } catch (const numerical_error& e) {
        throw numerical_error("solve: level " + std::to_string(level) + ", iteration " +
                              std::to_string(iter) + ": " + e.what());
      }
      const double vk = stationarity(spec, prev, st);
      trace.push_back({level, iter, eta, objective(spec, st), vk,
                       ball_distance(spec.A.apply(st.x) - spec.b, spec.ball), elapsed()});
      if (vk <= v_stop) break;
    }
    eta *= sched.shrink;
  }

  result.state = std::move(st);
  result.trace = std::move(trace);
  result.consistency_gap = (spec.C.apply(result.state.x) - result.state.w1).norm();
  result.feasibility = ball_distance(spec.A.apply(result.state.x) - spec.b, spec.ball);
  return result;
}

}  // namespace lsopt
