#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include <Eigen/SVD>

#include "lsopt/harness.hpp"
#include "lsopt/lowrank.hpp"
#include "lsopt/rng.hpp"
#include "oracles.hpp"

using namespace lsopt;

namespace {

MaskedData full_mask(const Matrix& X) {
  MaskedData data;
  for (Index i = 0; i < X.rows(); ++i)
    for (Index j = 0; j < X.cols(); ++j) data.observed.emplace_back(i, j);
  data.b = data.gather(X);
  return data;
}

double nuclear_norm(const Matrix& X) {
  return Eigen::JacobiSVD<Matrix>(X).singularValues().sum();
}

FactorTriple random_triple(Rng& rng, Index n, Index m, Index k, double eta) {
  FactorTriple t;
  t.rank = k;
  t.eta = eta;
  t.L = rng.normal_matrix(n, k);
  t.R = rng.normal_matrix(m, k);
  t.W = rng.normal_matrix(n, m);
  return t;
}

}  // namespace

TEST_CASE("update_L: zero data gives a zero factor") {
  Rng rng(3);
  FactorTriple t = random_triple(rng, 6, 5, 2, 0.7);
  t.W.setZero();
  CHECK(update_L(t).isZero(0.0));
}

TEST_CASE("update_L: scalar ridge") {
  FactorTriple t;
  t.rank = 1;
  t.eta = 1.0;
  t.L = Matrix::Zero(1, 1);
  t.R = Matrix::Ones(1, 1);
  t.W = Matrix::Constant(1, 1, 3.0);
  CHECK(update_L(t)(0, 0) == doctest::Approx(1.5).epsilon(1e-15));
}

TEST_CASE("update_L and update_R satisfy their normal equations") {
  Rng rng(7);
  FactorTriple t = random_triple(rng, 6, 4, 2, 0.3);
  Matrix L = update_L(t);
  {
    Matrix residual = L * (t.eta * Matrix::Identity(2, 2) + t.R.transpose() * t.R) - t.W * t.R;
    CHECK(residual.cwiseAbs().maxCoeff() <= 1e-10);
  }
  t.L = L;
  Matrix R = update_R(t);
  {
    Matrix residual =
        R * (t.eta * Matrix::Identity(2, 2) + t.L.transpose() * t.L) - t.W.transpose() * t.L;
    CHECK(residual.cwiseAbs().maxCoeff() <= 1e-10);
  }
  // The updated factors are exact block minimizers: perturbations only
  // increase the objective.
  MaskedData data = full_mask(t.W);
  const double base = lowrank_objective(t);
  Rng prng(11);
  for (int trial = 0; trial < 20; ++trial) {
    FactorTriple probe = t;
    probe.L += 1e-4 * prng.normal_matrix(6, 2);
    CHECK(lowrank_objective(probe) >= base - 1e-12);
  }
  (void)data;
}

TEST_CASE("update_W: feasible residuals copy the product on observed entries") {
  Rng rng(13);
  FactorTriple t = random_triple(rng, 5, 4, 2, 0.5);
  Matrix product = t.L * t.R.transpose();
  MaskedData data;
  for (Index i = 0; i < 5; ++i) data.observed.emplace_back(i, (i * 2) % 4);
  data.b = data.gather(product);
  data.b.array() += 0.01;  // small residual, well inside the ball
  Matrix W = update_W(t, data, {BallNorm::L2, 10.0});
  const Vector obs = data.gather(W);
  const Vector v = data.gather(product);
  CHECK((obs - v).cwiseAbs().maxCoeff() <= 1e-12);

  // Unobserved entries equal the product bit-exactly.
  Matrix mask_check = W - product;
  data.scatter(Vector::Zero(data.count()), mask_check);
  CHECK(mask_check.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("update_W: zero-radius ball interpolates the data exactly") {
  Rng rng(17);
  FactorTriple t = random_triple(rng, 5, 5, 2, 0.5);
  MaskedData data;
  for (Index i = 0; i < 5; ++i) data.observed.emplace_back(i, i);
  data.b = rng.normal_vector(5);
  Matrix W = update_W(t, data, {BallNorm::L2, 0.0});
  CHECK((data.gather(W) - data.b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("update_W: l1 ball agrees with the QP oracle") {
  Rng rng(19);
  FactorTriple t = random_triple(rng, 3, 3, 1, 0.5);
  MaskedData data;
  data.observed = {{0, 0}, {1, 2}, {2, 1}, {2, 2}};
  data.b = rng.normal_vector(4);
  const double radius = 0.7;
  Matrix W = update_W(t, data, {BallNorm::L1, radius});
  const Vector v = data.gather(Matrix(t.L * t.R.transpose()));
  const Vector expected = data.b + oracles::project_l1_qp(v - data.b, radius);
  CHECK((data.gather(W) - expected).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("solve_lowrank: exact recovery of a fully observed low-rank matrix") {
  Rng rng(23);
  Matrix X = (2.0 * rng.normal_matrix(20, 3)) * (2.0 * rng.normal_matrix(16, 3)).transpose();
  MaskedData data = full_mask(X);
  LowRankEtaSchedule sched;
  sched.eta = 1e-3;
  sched.continuation = true;
  sched.every = 25;
  sched.eta_floor = 1e-9;
  LowRankResult res = solve_lowrank(data, 20, 16, 3, {BallNorm::L2, 0.0}, sched, 400, 7);
  CHECK(snr_db(X, Matrix(res.triple.L * res.triple.R.transpose())) > 80.0);
}

TEST_CASE("solve_lowrank: interpolation through a 50% mask") {
  Rng rng(29);
  Matrix X = rng.normal_matrix(20, 2) * rng.normal_matrix(20, 2).transpose();
  Rng mask_rng(31);
  MaskedData data;
  for (Index i = 0; i < 20; ++i)
    for (Index j = 0; j < 20; ++j)
      if (mask_rng.uniform() < 0.5) data.observed.emplace_back(i, j);
  data.b = data.gather(X);
  LowRankResult res = solve_lowrank(data, 20, 20, 2, {BallNorm::L2, 0.0}, {}, 300, 7);
  CHECK(snr_db(X, Matrix(res.triple.L * res.triple.R.transpose())) > 40.0);
}

TEST_CASE("solve_lowrank: l0 ball absorbs sparse outliers, l2 ball does not") {
  Rng rng(37);
  Matrix X = rng.normal_matrix(20, 2) * rng.normal_matrix(20, 2).transpose();
  MaskedData clean = full_mask(X);

  MaskedData noisy = clean;
  Rng noise_rng(41);
  const double mag = 10.0 * X.cwiseAbs().maxCoeff();
  std::vector<Index> hits = noise_rng.sample_indices(noisy.count(), 4);
  for (Index p : hits) noisy.b[p] += noise_rng.sign() * mag;
  const Vector noise = noisy.b - clean.b;

  LowRankResult base = solve_lowrank(clean, 20, 20, 2, {BallNorm::L2, 0.0}, {}, 150, 7);
  LowRankResult l0 = solve_lowrank(noisy, 20, 20, 2, {BallNorm::L0, 4.0}, {}, 150, 7);
  LowRankResult l2 =
      solve_lowrank(noisy, 20, 20, 2, {BallNorm::L2, noise.norm()}, {}, 150, 7);

  const double snr_base = snr_db(X, Matrix(base.triple.L * base.triple.R.transpose()));
  const double snr_l0 = snr_db(X, Matrix(l0.triple.L * l0.triple.R.transpose()));
  const double snr_l2 = snr_db(X, Matrix(l2.triple.L * l2.triple.R.transpose()));
  CHECK(snr_l0 >= snr_base - 3.0);
  CHECK(snr_l2 <= snr_base - 10.0);
}

TEST_CASE("solve_lowrank: objective is non-increasing at fixed eta") {
  Rng rng(43);
  Matrix X = rng.normal_matrix(12, 2) * rng.normal_matrix(10, 2).transpose();
  MaskedData data = full_mask(X);
  Rng hit_rng(47);
  for (Index p : hit_rng.sample_indices(data.count(), 3)) data.b[p] += 15.0;
  LowRankResult res = solve_lowrank(data, 12, 10, 3, {BallNorm::L0, 3.0}, {}, 80, 7);
  for (std::size_t i = 1; i < res.trace.size(); ++i)
    CHECK(res.trace[i].objective <= res.trace[i - 1].objective + 1e-10);
}

TEST_CASE("solve_lowrank: factor regularizer dominates the nuclear norm at every iterate") {
  Rng rng(53);
  Matrix X = rng.normal_matrix(10, 2) * rng.normal_matrix(10, 2).transpose();
  MaskedData data = full_mask(X);
  int violations = 0;
  int calls = 0;
  auto observer = [&](int, const FactorTriple& t) {
    ++calls;
    const double bound = 0.5 * (t.L.squaredNorm() + t.R.squaredNorm());
    const double nuc = nuclear_norm(t.L * t.R.transpose());
    if (bound < nuc - 1e-8 * std::max(1.0, nuc)) ++violations;
  };
  solve_lowrank(data, 10, 10, 2, {BallNorm::L2, 0.1}, {}, 60, 7, observer);
  CHECK(calls > 0);
  CHECK(violations == 0);
}

TEST_CASE("solve_lowrank: the product rank never exceeds the factor rank") {
  Rng rng(59);
  Matrix X = rng.normal_matrix(12, 4) * rng.normal_matrix(12, 4).transpose();
  MaskedData data = full_mask(X);
  LowRankResult res = solve_lowrank(data, 12, 12, 2, {BallNorm::L2, 1.0}, {}, 40, 7);
  Eigen::JacobiSVD<Matrix> svd(res.triple.L * res.triple.R.transpose());
  const auto& sv = svd.singularValues();
  for (Index i = 2; i < sv.size(); ++i) CHECK(sv[i] <= 1e-10 * sv[0]);
}

TEST_CASE("solve_lowrank: argument validation") {
  MaskedData data;
  data.observed = {{0, 0}};
  data.b = Vector::Ones(1);
  CHECK_THROWS_AS(solve_lowrank(data, 4, 4, 5, {BallNorm::L2, 1.0}, {}, 10, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(solve_lowrank(data, 4, 4, 2, {BallNorm::L2, 1.0}, {}, 0, 1),
                  std::invalid_argument);
}

TEST_CASE("masked data validation") {
  MaskedData dup;
  dup.observed = {{0, 0}, {0, 0}};
  dup.b = Vector::Ones(2);
  CHECK_THROWS_AS(dup.validate(3, 3), std::invalid_argument);

  MaskedData outside;
  outside.observed = {{5, 0}};
  outside.b = Vector::Ones(1);
  CHECK_THROWS_AS(outside.validate(3, 3), std::invalid_argument);

  MaskedData mismatch;
  mismatch.observed = {{0, 0}};
  mismatch.b = Vector::Ones(2);
  CHECK_THROWS_AS(mismatch.validate(3, 3), dimension_error);
}

TEST_CASE("masked data file round trips") {
  Rng rng(61);
  MaskedData data;
  data.observed = {{0, 1}, {2, 0}, {3, 3}};
  data.b = rng.normal_vector(3);

  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path();
  const std::string csv = (dir / "lsopt_mask.csv").string();
  const std::string dims = (dir / "lsopt_mask.dims").string();
  const std::string bin = (dir / "lsopt_mask.bin").string();

  save_masked_csv(csv, dims, data, 4, 4);
  Index n = 0, m = 0;
  MaskedData from_csv = load_masked_csv(csv, dims, &n, &m);
  CHECK(n == 4);
  CHECK(m == 4);
  REQUIRE(from_csv.observed == data.observed);
  CHECK((from_csv.b - data.b).cwiseAbs().maxCoeff() == 0.0);

  save_masked_binary(bin, data, 4, 4);
  MaskedData from_bin = load_masked_binary(bin, &n, &m);
  REQUIRE(from_bin.observed == data.observed);
  CHECK((from_bin.b - data.b).cwiseAbs().maxCoeff() == 0.0);

  fs::remove(csv);
  fs::remove(dims);
  fs::remove(bin);
}
