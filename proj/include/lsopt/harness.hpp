#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lsopt/common.hpp"
#include "lsopt/linear_map.hpp"
#include "lsopt/lowrank.hpp"
#include "lsopt/prox.hpp"
#include "lsopt/rng.hpp"
#include "lsopt/splitting.hpp"

// Experiment generation, SNR metrics, and the study drivers behind the CLI:
// spike-train denoising across residual balls, objective-decay comparison
// under inexact solves, and desk-scale low-rank interpolation/denoising.

namespace lsopt {

// ---- Metrics ----------------------------------------------------------------

// SNR(dB) = 20 log10(||truth|| / ||truth - estimate||), capped at 300 dB.
inline double snr_db(const Vector& truth, const Vector& estimate) {
  require(truth.size() == estimate.size(), "snr_db: shape mismatch");
  const double nt = truth.norm();
  require_arg(nt > 0, "snr_db: truth must be nonzero");
  const double ne = (truth - estimate).norm();
  if (ne == 0) return 300.0;
  return std::min(300.0, 20.0 * std::log10(nt / ne));
}

inline double snr_db(const Matrix& truth, const Matrix& estimate) {
  require(truth.rows() == estimate.rows() && truth.cols() == estimate.cols(),
          "snr_db: shape mismatch");
  const double nt = truth.norm();
  require_arg(nt > 0, "snr_db: truth must be nonzero");
  const double ne = (truth - estimate).norm();
  if (ne == 0) return 300.0;
  return std::min(300.0, 20.0 * std::log10(nt / ne));
}

// ---- Spike-train instances ----------------------------------------------------

struct SpikeTrainConfig {
  Index n = 512;  // signal length
  Index m = 120;  // observations
  double spike_frac = 0.04;
  double outlier_frac = 0.10;
  double outlier_magnitude = 0.0;  // <= 0 selects 10x the largest clean observation
  std::uint64_t seed = 1;

  void validate() const {
    require_arg(n > 0 && m > 0 && m < n, "SpikeTrainConfig: need 0 < m < n");
    require_arg(spike_frac > 0 && spike_frac < 1, "SpikeTrainConfig: spike_frac in (0,1)");
    require_arg(outlier_frac > 0 && outlier_frac < 1, "SpikeTrainConfig: outlier_frac in (0,1)");
  }
};

struct SpikeTrainInstance {
  LinearMap A;  // dense m x n Gaussian observation map
  Vector x_true;
  Vector b;  // corrupted observations
  std::vector<Index> outlier_support;
};

// x_true carries round(spike_frac n) entries of +-1; b = A x_true with
// round(outlier_frac m) entries shifted by +-outlier_magnitude.
inline SpikeTrainInstance gen_spike_train(const SpikeTrainConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  Matrix A = rng.normal_matrix(cfg.m, cfg.n);

  const auto n_spikes = static_cast<Index>(std::llround(cfg.spike_frac * static_cast<double>(cfg.n)));
  Vector x = Vector::Zero(cfg.n);
  for (Index i : rng.sample_indices(cfg.n, n_spikes)) x[i] = rng.sign();

  Vector b = A * x;
  const double mag =
      cfg.outlier_magnitude > 0 ? cfg.outlier_magnitude : 10.0 * b.cwiseAbs().maxCoeff();
  const auto n_out = static_cast<Index>(std::llround(cfg.outlier_frac * static_cast<double>(cfg.m)));
  std::vector<Index> support = rng.sample_indices(cfg.m, n_out);
  for (Index i : support) b[i] += rng.sign() * mag;

  return {make_dense(std::move(A)), std::move(x), std::move(b), std::move(support)};
}

// ---- Reports ------------------------------------------------------------------

struct ReportRow {
  std::string method;
  std::string ball;
  double snr_db = 0;
  double snr_w_db = 0;
  double seconds = 0;
  std::string status = "ok";
};

struct RunReport {
  std::vector<ReportRow> rows;
};

inline void write_report_csv(std::ostream& os, const RunReport& report) {
  os << "method,ball,snr_db,snr_w_db,seconds,status\n";
  char buf[256];
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%.6f,%.6f,%.6f,%s\n", r.method.c_str(), r.ball.c_str(),
                  r.snr_db, r.snr_w_db, r.seconds, r.status.c_str());
    os << buf;
  }
}

inline void write_report_csv(const std::string& path, const RunReport& report) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_report_csv: cannot open " + path);
  write_report_csv(os, report);
}

// ---- Sigma selection ------------------------------------------------------------

// Exact error-budget policy: sigma = scale * psi(noise); for the L0 ball the
// budget is the (scaled) outlier cardinality.
struct SigmaPolicy {
  double scale = 1.0;

  BallSpec ball_for(BallNorm norm, const Vector& noise) const {
    require_arg(scale >= 0, "SigmaPolicy: scale must be nonnegative");
    if (norm == BallNorm::L0)
      return {norm, std::round(scale * ball_norm_value(noise, BallNorm::L0))};
    return {norm, scale * ball_norm_value(noise, norm)};
  }
};

// ---- BPDN study ------------------------------------------------------------------

struct MethodSpec {
  AlgorithmChoice algorithm;
  BallNorm ball;

  std::string id() const { return algorithm.name() + "-" + ball_norm_name(ball); }
};

inline std::vector<MethodSpec> default_bpdn_methods() {
  return {{AlgorithmChoice::alg3(), BallNorm::L2},
          {AlgorithmChoice::alg3(), BallNorm::L1},
          {AlgorithmChoice::alg3(), BallNorm::Linf},
          {AlgorithmChoice::alg3(), BallNorm::L0}};
}

struct BpdnStudyResult {
  RunReport report;
  std::map<std::string, IterateTrace> traces;
  SpikeTrainInstance instance;
  std::map<std::string, Vector> solutions;
};

// Runs each (algorithm, ball) pair on one seeded spike-train instance with
// C = I and phi = ||.||_1. Failures are confined to their report row.
inline BpdnStudyResult run_bpdn_study(const SpikeTrainConfig& cfg,
                                      const std::vector<MethodSpec>& methods,
                                      SigmaPolicy sigma = {},
                                      const ContinuationSchedule& schedule = {}) {
  require_arg(!methods.empty(), "run_bpdn_study: methods must be nonempty");
  BpdnStudyResult out{{}, {}, gen_spike_train(cfg), {}};
  const SpikeTrainInstance& inst = out.instance;
  const Vector noise = inst.b - inst.A.apply(inst.x_true);

  for (const auto& method : methods) {
    ReportRow row;
    row.method = method.id();
    row.ball = ball_norm_name(method.ball);
    const auto t0 = std::chrono::steady_clock::now();
    try {
      ProblemSpec spec{inst.A, make_identity(cfg.n), inst.b, Regularizer::l1(),
                       sigma.ball_for(method.ball, noise)};
      SolveResult res = solve(spec, schedule, method.algorithm);
      row.snr_db = snr_db(inst.x_true, res.state.x);
      row.snr_w_db = snr_db(inst.x_true, res.state.w1);
      out.traces[row.method] = std::move(res.trace);
      out.solutions[row.method] = std::move(res.state.x);
    } catch (const std::exception& e) {
      row.status = std::string("error: ") + e.what();
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.report.rows.push_back(std::move(row));
  }
  return out;
}

// ---- Convergence study ---------------------------------------------------------

struct ConvergenceStudyResult {
  std::vector<std::string> variants;
  std::map<std::string, IterateTrace> traces;
  RunReport report;
};

// Objective decay at a fixed eta level: full prox-gradient, exact block
// descent, and value-function iterations with k-step warm-started CG solves.
// All variants start from the same initial point on the same instance.
inline ConvergenceStudyResult run_convergence_study(const std::vector<int>& cg_budgets, int iters,
                                                    const SpikeTrainConfig& cfg = {},
                                                    double eta = 1e-4) {
  require_arg(!cg_budgets.empty(), "run_convergence_study: budgets must be nonempty");
  require_arg(iters >= 1, "run_convergence_study: iters must be >= 1");
  ConvergenceStudyResult out;
  SpikeTrainInstance inst = gen_spike_train(cfg);
  const Vector noise = inst.b - inst.A.apply(inst.x_true);
  ProblemSpec spec{inst.A, make_identity(cfg.n), inst.b, Regularizer::l1(),
                   SigmaPolicy{}.ball_for(BallNorm::L1, noise)};
  spec.validate();
  const SplitState z0 = initial_state(spec, std::nullopt, eta);

  struct Variant {
    std::string name;
    AlgorithmChoice alg;
  };
  std::vector<Variant> variants;
  variants.push_back({"alg1", AlgorithmChoice::alg1()});
  for (int k : cg_budgets) {
    require_arg(k >= 1, "run_convergence_study: CG budgets must be >= 1");
    variants.push_back({"alg2-cg" + std::to_string(k),
                        AlgorithmChoice::alg2(SpdSolveConfig::cg_config(k, 1e-14))});
  }
  variants.push_back({"alg3", AlgorithmChoice::alg3()});

  for (const auto& variant : variants) {
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&t0] {
      return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };
    SplitState st = z0;
    IterateTrace trace;
    std::optional<XSolver> solver;
    double alpha = 0;
    switch (variant.alg.id) {
      case AlgorithmChoice::Id::Alg1: alpha = 1.0 / rate_constant(spec, eta, eta); break;
      case AlgorithmChoice::Id::Alg2: solver.emplace(spec, eta, eta, variant.alg.ls); break;
      case AlgorithmChoice::Id::Alg3: solver.emplace(XSolver::exact(spec, eta, eta)); break;
    }
    for (int it = 1; it <= iters; ++it) {
      SplitState prev = st;
      switch (variant.alg.id) {
        case AlgorithmChoice::Id::Alg1: st = step_alg1(spec, st, alpha); break;
        case AlgorithmChoice::Id::Alg2: st = step_alg2(spec, st, eta, *solver); break;
        case AlgorithmChoice::Id::Alg3: st = step_alg3(spec, st, *solver); break;
      }
      trace.push_back({1, it, eta, objective(spec, st), stationarity(spec, prev, st),
                       ball_distance(spec.A.apply(st.x) - spec.b, spec.ball), elapsed()});
    }
    ReportRow row;
    row.method = variant.name;
    row.ball = ball_norm_name(BallNorm::L1);
    row.snr_db = snr_db(inst.x_true, st.x);
    row.snr_w_db = snr_db(inst.x_true, st.w1);
    row.seconds = elapsed();
    out.report.rows.push_back(row);
    out.traces[variant.name] = std::move(trace);
    out.variants.push_back(variant.name);
  }
  return out;
}

// ---- Low-rank study -------------------------------------------------------------

struct LowRankExperimentConfig {
  enum class Mode { DenoiseOnly, InterpolateOnly, Both };

  Index n = 40, m = 40;
  Index true_rank = 3;
  Index k = 5;  // solver rank
  double missing_frac = 0.5;
  Index outlier_count = 16;
  double outlier_scale = 10.0;  // times the largest clean magnitude
  Mode mode = Mode::Both;
  std::uint64_t seed = 1;

  void validate() const {
    require_arg(n > 0 && m > 0, "LowRankExperimentConfig: dimensions must be positive");
    require_arg(true_rank >= 1 && true_rank <= k && k <= std::min(n, m),
                "LowRankExperimentConfig: need true_rank <= k <= min(n, m)");
    require_arg(missing_frac >= 0 && missing_frac < 1,
                "LowRankExperimentConfig: missing_frac in [0,1)");
    require_arg(outlier_count >= 0, "LowRankExperimentConfig: outlier_count >= 0");
  }
};

inline const char* lowrank_mode_name(LowRankExperimentConfig::Mode m) {
  switch (m) {
    case LowRankExperimentConfig::Mode::DenoiseOnly: return "denoise";
    case LowRankExperimentConfig::Mode::InterpolateOnly: return "interpolate";
    case LowRankExperimentConfig::Mode::Both: return "both";
  }
  return "?";
}

struct LowRankInstance {
  Matrix X_true;
  MaskedData data;
  std::vector<Index> outlier_positions;  // positions within data.observed
};

inline LowRankInstance gen_lowrank_instance(const LowRankExperimentConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  Matrix X = rng.normal_matrix(cfg.n, cfg.true_rank) *
             rng.normal_matrix(cfg.m, cfg.true_rank).transpose();

  const Index total = cfg.n * cfg.m;
  std::vector<bool> missing(static_cast<std::size_t>(total), false);
  if (cfg.mode != LowRankExperimentConfig::Mode::DenoiseOnly) {
    const auto n_missing = static_cast<Index>(std::llround(cfg.missing_frac * static_cast<double>(total)));
    for (Index p : rng.sample_indices(total, n_missing)) missing[static_cast<std::size_t>(p)] = true;
  }

  MaskedData data;
  for (Index i = 0; i < cfg.n; ++i)
    for (Index j = 0; j < cfg.m; ++j)
      if (!missing[static_cast<std::size_t>(i * cfg.m + j)]) data.observed.emplace_back(i, j);
  data.b = data.gather(X);

  std::vector<Index> positions;
  if (cfg.mode != LowRankExperimentConfig::Mode::InterpolateOnly && cfg.outlier_count > 0) {
    const double mag = cfg.outlier_scale * X.cwiseAbs().maxCoeff();
    positions = rng.sample_indices(data.count(), std::min(cfg.outlier_count, data.count()));
    for (Index p : positions) data.b[p] += rng.sign() * mag;
  }
  return {std::move(X), std::move(data), std::move(positions)};
}

struct LowRankStudyResult {
  RunReport report;
  std::map<std::string, IterateTrace> traces;
  LowRankInstance instance;
};

using LowRankStudyObserver = std::function<void(const std::string& method, int iter,
                                                const FactorTriple&)>;

// Runs the factorized solver once per ball on a shared synthetic instance and
// reports SNR of L R' (and of W) against the ground truth.
inline LowRankStudyResult run_lowrank_study(const LowRankExperimentConfig& cfg,
                                            const std::vector<BallNorm>& balls,
                                            SigmaPolicy sigma = {},
                                            const LowRankEtaSchedule& schedule = {},
                                            int max_iters = 150,
                                            const LowRankStudyObserver& observer = nullptr) {
  require_arg(!balls.empty(), "run_lowrank_study: balls must be nonempty");
  LowRankStudyResult out{{}, {}, gen_lowrank_instance(cfg)};
  const Vector noise = out.instance.data.b - out.instance.data.gather(out.instance.X_true);

  for (BallNorm norm : balls) {
    ReportRow row;
    row.method = std::string("alg4-") + ball_norm_name(norm);
    row.ball = ball_norm_name(norm);
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const BallSpec ball = sigma.ball_for(norm, noise);
      LowRankObserver hook;
      if (observer) {
        const std::string id = row.method;
        hook = [&observer, id](int iter, const FactorTriple& t) { observer(id, iter, t); };
      }
      LowRankResult res = solve_lowrank(out.instance.data, cfg.n, cfg.m, cfg.k, ball, schedule,
                                        max_iters, cfg.seed, hook);
      row.snr_db = snr_db(out.instance.X_true, Matrix(res.triple.L * res.triple.R.transpose()));
      row.snr_w_db = snr_db(out.instance.X_true, res.triple.W);
      out.traces[row.method] = std::move(res.trace);
    } catch (const std::exception& e) {
      row.status = std::string("error: ") + e.what();
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.report.rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace lsopt
