#pragma once

#include <algorithm>
#include <chrono>
#include <cstring>
#include <fstream>
#include <functional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>

#include "lsopt/common.hpp"
#include "lsopt/io.hpp"
#include "lsopt/prox.hpp"
#include "lsopt/rng.hpp"
#include "lsopt/splitting.hpp"

// Factorized low-rank completion under a residual ball constraint:
//
//   min_{L,R,W}  1/2 (||L||_F^2 + ||R||_F^2) + 1/(2 eta) ||W - L R'||_F^2
//   s.t.  || mask(W) - b ||_p <= sigma,
//
// solved by block-coordinate descent: shared-factor ridge solves for L and R,
// then a constrained projection update for W.

namespace lsopt {

struct MaskedData {
  std::vector<std::pair<Index, Index>> observed;  // fixed ordering, matches b
  Vector b;

  Index count() const { return static_cast<Index>(observed.size()); }

  void validate(Index n, Index m) const {
    require(static_cast<Index>(observed.size()) == b.size(),
            "MaskedData: " + std::to_string(observed.size()) + " indices but " +
                std::to_string(b.size()) + " values");
    std::set<std::pair<Index, Index>> seen;
    for (const auto& [i, j] : observed) {
      require_arg(i >= 0 && i < n && j >= 0 && j < m,
                  "MaskedData: index (" + std::to_string(i) + "," + std::to_string(j) +
                      ") outside " + std::to_string(n) + "x" + std::to_string(m));
      require_arg(seen.insert({i, j}).second, "MaskedData: duplicate index (" + std::to_string(i) +
                                                  "," + std::to_string(j) + ")");
    }
  }

  Vector gather(const Matrix& X) const {
    Vector v(count());
    for (Index t = 0; t < count(); ++t) {
      const auto& [i, j] = observed[static_cast<std::size_t>(t)];
      v[t] = X(i, j);
    }
    return v;
  }

  void scatter(const Vector& v, Matrix& X) const {
    require(v.size() == count(), "MaskedData::scatter: length mismatch");
    for (Index t = 0; t < count(); ++t) {
      const auto& [i, j] = observed[static_cast<std::size_t>(t)];
      X(i, j) = v[t];
    }
  }
};

struct FactorTriple {
  Matrix L;  // n x k
  Matrix R;  // m x k
  Matrix W;  // n x m
  Index rank = 0;
  double eta = 1e-3;

  Index n() const { return L.rows(); }
  Index m() const { return R.rows(); }

  void validate() const {
    require(L.cols() == rank && R.cols() == rank,
            "FactorTriple: factor widths must equal the rank");
    require(W.rows() == L.rows() && W.cols() == R.rows(),
            "FactorTriple: W must be " + std::to_string(L.rows()) + "x" +
                std::to_string(R.rows()));
    require_arg(eta > 0, "FactorTriple: eta must be positive");
  }
};

inline double lowrank_objective(const FactorTriple& t) {
  return 0.5 * (t.L.squaredNorm() + t.R.squaredNorm()) +
         (t.W - t.L * t.R.transpose()).squaredNorm() / (2.0 * t.eta);
}

// Ridge update for L: every row solves the shared k x k system
//   (eta I + R'R) l_i' = (W R)_i'.
inline Matrix update_L(const FactorTriple& t) {
  t.validate();
  Matrix G = t.R.transpose() * t.R;
  G.diagonal().array() += t.eta;
  Eigen::LLT<Matrix> llt(G);
  if (llt.info() != Eigen::Success)
    throw numerical_error("update_L: k x k factorization failed");
  return llt.solve((t.W * t.R).transpose()).transpose();
}

// Symmetric update for R, using the freshly updated L (Gauss-Seidel order).
inline Matrix update_R(const FactorTriple& t) {
  t.validate();
  Matrix G = t.L.transpose() * t.L;
  G.diagonal().array() += t.eta;
  Eigen::LLT<Matrix> llt(G);
  if (llt.info() != Eigen::Success)
    throw numerical_error("update_R: k x k factorization failed");
  return llt.solve((t.W.transpose() * t.L).transpose()).transpose();
}

// Constrained W update: unobserved entries copy L R'; the observed block is
// the closest point to mask(L R') with || . - b ||_p <= sigma, obtained by
// projecting the residual and adding b back.
inline Matrix update_W(const FactorTriple& t, const MaskedData& data, const BallSpec& ball) {
  t.validate();
  data.validate(t.n(), t.m());
  Matrix W = t.L * t.R.transpose();
  const Vector v = data.gather(W);
  const Vector r = project_ball(v - data.b, ball);
  data.scatter(data.b + r, W);
  return W;
}

struct LowRankEtaSchedule {
  double eta = 1e-3;
  bool continuation = false;  // when set, eta shrinks by `shrink` every `every` iterations
  double shrink = 0.5;
  int every = 25;
  double eta_floor = 1e-6;

  void validate() const {
    require_arg(eta > 0 && eta_floor > 0, "LowRankEtaSchedule: etas must be positive");
    require_arg(shrink > 0 && shrink < 1, "LowRankEtaSchedule: shrink must lie in (0,1)");
    require_arg(every >= 1, "LowRankEtaSchedule: every must be >= 1");
  }
};

struct LowRankResult {
  FactorTriple triple;
  IterateTrace trace;
  int iterations = 0;
  double nu = 0;  // ||L R' - W||_F^2 at exit
};

using LowRankObserver = std::function<void(int iter, const FactorTriple&)>;

// Block-coordinate descent on the factorized objective. Stops when
// nu = ||L R' - W||_F^2 falls below 1e-5 or after max_iters cycles.
inline LowRankResult solve_lowrank(const MaskedData& data, Index n, Index m, Index rank,
                                   const BallSpec& ball, const LowRankEtaSchedule& schedule,
                                   int max_iters, std::uint64_t seed,
                                   const LowRankObserver& observer = nullptr) {
  require_arg(rank >= 1 && rank <= std::min(n, m), "solve_lowrank: need 1 <= rank <= min(n, m)");
  require_arg(max_iters >= 1, "solve_lowrank: max_iters must be >= 1");
  schedule.validate();
  ball.validate();
  data.validate(n, m);

  const auto t_start = std::chrono::steady_clock::now();
  auto elapsed = [&t_start] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  };

  Rng rng(seed);
  FactorTriple t;
  t.rank = rank;
  t.eta = schedule.eta;
  const double scale =
      std::sqrt(data.b.norm() / std::sqrt(static_cast<double>(std::max<Index>(data.count(), 1)) *
                                          static_cast<double>(rank)));
  t.L = scale * rng.normal_matrix(n, rank);
  t.R = scale * rng.normal_matrix(m, rank);
  t.W = Matrix::Zero(n, m);
  t.W = update_W(t, data, ball);

  constexpr double kNuStop = 1e-5;
  IterateTrace trace;
  int iter = 0;
  double nu = (t.L * t.R.transpose() - t.W).squaredNorm();
  int level = 1;
  while (iter < max_iters && nu >= kNuStop) {
    ++iter;
    if (schedule.continuation && iter > 1 && (iter - 1) % schedule.every == 0 &&
        t.eta * schedule.shrink >= schedule.eta_floor) {
      t.eta *= schedule.shrink;
      ++level;
    }
    t.L = update_L(t);
    t.R = update_R(t);
    t.W = update_W(t, data, ball);
    const Matrix product = t.L * t.R.transpose();
    nu = (product - t.W).squaredNorm();
    trace.push_back({level, iter, t.eta, lowrank_objective(t), nu,
                     ball_distance(data.gather(product) - data.b, ball), elapsed()});
    if (observer) observer(iter, t);
    if (!all_finite(t.W)) throw numerical_error("solve_lowrank: non-finite iterate at " +
                                                std::to_string(iter));
  }

  return {std::move(t), std::move(trace), iter, nu};
}

// ---- MaskedData file formats -----------------------------------------------
//
// CSV: header "i,j,value" then one row per observed entry, plus a sidecar dims
// file holding "rows,cols" / "<n>,<m>" like the matrix CSV format. Binary:
// magic "LSMSK1", u64 n, m, nnz, the (i, j) index block, then the f64 values.

inline void save_masked_csv(const std::string& path, const std::string& dims_path,
                            const MaskedData& data, Index n, Index m) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_masked_csv: cannot open " + path);
  os << "i,j,value\n";
  for (Index t = 0; t < data.count(); ++t) {
    const auto& [i, j] = data.observed[static_cast<std::size_t>(t)];
    os << i << "," << j << "," << detail::format_full(data.b[t]) << "\n";
  }
  std::ofstream ds(dims_path);
  if (!ds) throw std::runtime_error("save_masked_csv: cannot open " + dims_path);
  ds << "rows,cols\n" << n << "," << m << "\n";
}

inline MaskedData load_masked_csv(const std::string& path, const std::string& dims_path,
                                  Index* n_out = nullptr, Index* m_out = nullptr) {
  std::ifstream ds(dims_path);
  if (!ds) throw std::runtime_error("load_masked_csv: cannot open " + dims_path);
  std::string line;
  std::getline(ds, line);
  if (line.find("rows") != std::string::npos) std::getline(ds, line);
  auto dims = detail::split_csv_line(line);
  if (dims.size() != 2) throw std::runtime_error("load_masked_csv: bad dims file " + dims_path);
  const auto n = static_cast<Index>(std::stoll(dims[0]));
  const auto m = static_cast<Index>(std::stoll(dims[1]));

  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_masked_csv: cannot open " + path);
  MaskedData data;
  std::vector<double> values;
  bool first = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (first && line.find("i,j") != std::string::npos) {
      first = false;
      continue;
    }
    first = false;
    auto fields = detail::split_csv_line(line);
    if (fields.size() != 3)
      throw std::runtime_error("load_masked_csv: bad row '" + line + "' in " + path);
    data.observed.emplace_back(static_cast<Index>(std::stoll(fields[0])),
                               static_cast<Index>(std::stoll(fields[1])));
    values.push_back(std::stod(fields[2]));
  }
  data.b = Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
  data.validate(n, m);
  if (n_out) *n_out = n;
  if (m_out) *m_out = m;
  return data;
}

inline void save_masked_binary(const std::string& path, const MaskedData& data, Index n, Index m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_masked_binary: cannot open " + path);
  const char magic[6] = {'L', 'S', 'M', 'S', 'K', '1'};
  os.write(magic, sizeof(magic));
  detail::write_u64(os, static_cast<std::uint64_t>(n));
  detail::write_u64(os, static_cast<std::uint64_t>(m));
  detail::write_u64(os, static_cast<std::uint64_t>(data.count()));
  for (const auto& [i, j] : data.observed) {
    detail::write_u64(os, static_cast<std::uint64_t>(i));
    detail::write_u64(os, static_cast<std::uint64_t>(j));
  }
  for (Index t = 0; t < data.count(); ++t) {
    const double v = data.b[t];
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  if (!os) throw std::runtime_error("save_masked_binary: write failed");
}

inline MaskedData load_masked_binary(const std::string& path, Index* n_out = nullptr,
                                     Index* m_out = nullptr) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_masked_binary: cannot open " + path);
  char magic[6];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, "LSMSK1", sizeof(magic)) != 0)
    throw std::runtime_error("load_masked_binary: bad magic (expected LSMSK1)");
  const auto n = static_cast<Index>(detail::read_u64(is));
  const auto m = static_cast<Index>(detail::read_u64(is));
  const auto nnz = static_cast<Index>(detail::read_u64(is));
  MaskedData data;
  data.observed.reserve(static_cast<std::size_t>(nnz));
  for (Index t = 0; t < nnz; ++t) {
    const auto i = static_cast<Index>(detail::read_u64(is));
    const auto j = static_cast<Index>(detail::read_u64(is));
    data.observed.emplace_back(i, j);
  }
  data.b.resize(nnz);
  for (Index t = 0; t < nnz; ++t) {
    double v;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    data.b[t] = v;
  }
  if (!is) throw std::runtime_error("load_masked_binary: truncated payload");
  data.validate(n, m);
  if (n_out) *n_out = n;
  if (m_out) *m_out = m;
  return data;
}

}  // namespace lsopt
