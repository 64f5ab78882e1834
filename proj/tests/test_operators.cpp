#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <sstream>

#include <Eigen/Dense>

#include "lsopt/io.hpp"
#include "lsopt/linear_map.hpp"
#include "lsopt/rng.hpp"
#include "lsopt/spd_solve.hpp"
#include "oracles.hpp"

using namespace lsopt;

TEST_CASE("adjoint_test on exact kinds") {
  CHECK(adjoint_test(make_identity(5), 10, 42) == 0.0);
  CHECK(adjoint_test(make_restriction({0, 2}, 4), 10, 42) <= 1e-12);

  Rng rng(7);
  LinearMap dense = make_dense(rng.normal_matrix(3, 4));
  CHECK(adjoint_test(dense, 10, 42) <= 1e-10);

  // The defect agrees with an explicit transpose computation.
  Matrix M = oracles::materialize(dense);
  Matrix Mt = oracles::materialize_adjoint(dense);
  CHECK((Mt - M.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("adjoint_test rejects zero trials") {
  CHECK_THROWS_AS(adjoint_test(make_identity(3), 0, 1), std::invalid_argument);
}

TEST_CASE("adjoint consistency across all kinds, including nested composites") {
  Rng rng(11);
  std::vector<LinearMap> battery;
  battery.push_back(make_identity(7));
  battery.push_back(make_dense(rng.normal_matrix(5, 7)));
  battery.push_back(make_restriction({1, 3, 4}, 7));
  battery.push_back(make_dct(8));
  battery.push_back(make_dct2(3, 5));
  battery.push_back(make_scaled(-2.5, make_dense(rng.normal_matrix(4, 6))));
  battery.push_back(make_composite(make_dense(rng.normal_matrix(3, 8)), make_dct(8)));
  battery.push_back(make_composite(
      make_scaled(0.5, make_dense(rng.normal_matrix(2, 3))),
      make_composite(make_restriction({0, 2, 5}, 6), make_dct2(2, 3))));
  for (const auto& map : battery) {
    CAPTURE(map.name());
    CHECK(adjoint_test(map, 20, 99) <= 1e-10);
  }
}

TEST_CASE("orthonormal kinds are tight frames") {
  Rng rng(3);
  for (const LinearMap& Q : {make_dct(16), make_dct2(4, 6)}) {
    CHECK(Q.is_orthonormal());
    for (int t = 0; t < 10; ++t) {
      Vector x = rng.normal_vector(Q.cols());
      Vector qx = Q.apply(x);
      CHECK(std::abs(qx.norm() - x.norm()) <= 1e-10 * x.norm());
      CHECK((Q.adjoint(qx) - x).norm() <= 1e-10 * x.norm());
    }
  }
}

TEST_CASE("frobenius norms") {
  Rng rng(5);
  Matrix M = rng.normal_matrix(6, 4);
  CHECK(make_dense(M).frobenius_norm_sq() == M.squaredNorm());
  CHECK(make_dense(M).frobenius_exact());

  LinearMap R = make_restriction({0, 2, 3}, 9);
  CHECK(R.frobenius_norm_sq() == 3.0);

  CHECK(make_scaled(3.0, make_dense(M)).frobenius_norm_sq() ==
        doctest::Approx(9.0 * M.squaredNorm()));

  // Orthonormal square factors preserve the exact value.
  LinearMap comp_exact = make_composite(make_dct(6), make_dense(rng.normal_matrix(6, 3)));
  CHECK(comp_exact.frobenius_exact());

  // Generic composites carry a flagged stochastic upper estimate.
  Matrix B = rng.normal_matrix(5, 6);
  LinearMap comp = make_composite(make_dense(B), make_dense(M));
  CHECK_FALSE(comp.frobenius_exact());
  const double truth = (B * M).squaredNorm();
  CHECK(comp.frobenius_norm_sq() >= truth);
  CHECK(comp.frobenius_norm_sq() <= 10.0 * truth);
}

TEST_CASE("dimension mismatches are structural errors naming the map") {
  LinearMap dense = make_dense(Matrix::Ones(3, 4), "obsmap");
  CHECK_THROWS_WITH_AS(dense.apply(Vector::Ones(5)),
                       doctest::Contains("obsmap"), dimension_error);
  CHECK_THROWS_AS(dense.adjoint(Vector::Ones(4)), dimension_error);

  // A closure producing the wrong output length is caught and attributed.
  LinearMap broken = make_custom(
      "broken", 3, 4, [](const Vector&) { return Vector::Zero(2); },
      [](const Vector&) { return Vector::Zero(4); });
  CHECK_THROWS_WITH_AS(broken.apply(Vector::Ones(4)), doctest::Contains("broken"),
                       dimension_error);

  CHECK_THROWS_AS(make_restriction({3, 1}, 5), std::invalid_argument);
  CHECK_THROWS_AS(make_restriction({1, 1}, 5), std::invalid_argument);
  CHECK_THROWS_AS(make_restriction({0, 7}, 5), std::invalid_argument);
  CHECK_THROWS_AS(make_composite(make_identity(3), make_identity(4)), dimension_error);
}

TEST_CASE("binary matrix format round trips bit-exactly") {
  Rng rng(21);
  Matrix M = rng.normal_matrix(7, 3);
  std::stringstream ss;
  save_matrix_binary(ss, M);
  Matrix back = load_matrix_binary(ss);
  CHECK(back.rows() == 7);
  CHECK(back.cols() == 3);
  CHECK((back - M).cwiseAbs().maxCoeff() == 0.0);

  std::stringstream bad("NOTMAGIC");
  CHECK_THROWS_WITH(load_matrix_binary(bad), doctest::Contains("magic"));
}

TEST_CASE("csv matrix format round trips") {
  Rng rng(22);
  Matrix M = rng.normal_matrix(4, 5);
  std::stringstream ss;
  save_matrix_csv(ss, M);
  Matrix back = load_matrix_csv(ss);
  CHECK((back - M).cwiseAbs().maxCoeff() == 0.0);

  // Import also accepts a bare dimensions line.
  std::stringstream bare("2,2\n1,2\n3,4\n");
  Matrix small = load_matrix_csv(bare);
  CHECK(small(1, 0) == 3.0);
}

TEST_CASE("vector binary round trip") {
  Vector v = Vector::LinSpaced(9, -1.0, 1.0);
  const std::string path = (std::filesystem::temp_directory_path() / "lsopt_vec.bin").string();
  save_vector_binary(path, v);
  Vector back = load_vector_binary(path);
  CHECK((back - v).cwiseAbs().maxCoeff() == 0.0);
  std::filesystem::remove(path);
}

TEST_CASE("solve_spd: identity converges in one iteration") {
  Vector b = Vector::LinSpaced(6, 1.0, 2.0);
  auto res = solve_spd([](const Vector& v) { return v; }, b, SpdSolveConfig::cg_config(50));
  CHECK(res.iterations <= 1);
  CHECK((res.x - b).norm() <= 1e-14 * b.norm());
}

TEST_CASE("solve_spd: zero rhs returns immediately") {
  auto res = solve_spd([](const Vector& v) { return v; }, Vector::Zero(4),
                       SpdSolveConfig::cg_config(10));
  CHECK(res.iterations == 0);
  CHECK(res.x.isZero(0.0));
}

TEST_CASE("solve_spd: diagonal fast path is elementwise division") {
  // Diagonal arising from an orthonormal transform plus a restriction:
  // entries 1/eta1 on unobserved coordinates, 1/eta1 + 1/eta2 on observed.
  const double eta1 = 0.2, eta2 = 0.05;
  Vector diag = Vector::Constant(6, 1.0 / eta1);
  for (Index i : {1, 3, 4}) diag[i] += 1.0 / eta2;
  Rng rng(13);
  Vector rhs = rng.normal_vector(6);
  SpdSolveConfig cfg;
  cfg.method = SpdMethod::DiagonalFast;
  cfg.diagonal = diag;
  auto res = solve_spd(nullptr, rhs, cfg);
  for (Index i = 0; i < 6; ++i) CHECK(res.x[i] == rhs[i] / diag[i]);
}

TEST_CASE("solve_spd: random SPD matches a dense factorization") {
  Rng rng(31);
  Matrix G = rng.normal_matrix(20, 20);
  Matrix H = G * G.transpose() + 20.0 * Matrix::Identity(20, 20);
  Vector rhs = rng.normal_vector(20);
  auto res = solve_spd([&H](const Vector& v) -> Vector { return H * v; }, rhs,
                       SpdSolveConfig::cg_config(200, 1e-12));
  Vector direct = H.llt().solve(rhs);
  CHECK((res.x - direct).norm() <= 1e-8 * direct.norm());
}

TEST_CASE("solve_spd: n iterations at tight tolerance reproduce direct solves") {
  // n-step termination survives rounding when the spectrum is clustered; on
  // continuous spectra finite-precision CG needs a small multiple of n (second
  // loop). Both families stay within condition 1e4.
  Rng rng(37);
  const Index n = 20;
  for (int inst = 0; inst < 5; ++inst) {
    Eigen::HouseholderQR<Matrix> qr(rng.normal_matrix(n, n));
    Matrix Q = qr.householderQ();
    Vector evals(n);
    const double clusters[4] = {1.0, 10.0, 100.0, 1e4};
    for (Index i = 0; i < n; ++i) evals[i] = clusters[i % 4];
    Matrix H = Q * evals.asDiagonal() * Q.transpose();
    H = 0.5 * (H + H.transpose());
    Vector rhs = rng.normal_vector(n);
    auto res = solve_spd([&H](const Vector& v) -> Vector { return H * v; }, rhs,
                         SpdSolveConfig::cg_config(static_cast<int>(n), 1e-14));
    Vector direct = H.ldlt().solve(rhs);
    CHECK((res.x - direct).norm() <= 1e-8 * direct.norm());
  }
  for (int inst = 0; inst < 5; ++inst) {
    Eigen::HouseholderQR<Matrix> qr(rng.normal_matrix(n, n));
    Matrix Q = qr.householderQ();
    Vector evals(n);
    for (Index i = 0; i < n; ++i)
      evals[i] = std::pow(10.0, 4.0 * static_cast<double>(i) / static_cast<double>(n - 1));
    Matrix H = Q * evals.asDiagonal() * Q.transpose();
    H = 0.5 * (H + H.transpose());
    Vector rhs = rng.normal_vector(n);
    auto res = solve_spd([&H](const Vector& v) -> Vector { return H * v; }, rhs,
                         SpdSolveConfig::cg_config(static_cast<int>(2 * n), 1e-14));
    Vector direct = H.ldlt().solve(rhs);
    CHECK((res.x - direct).norm() <= 1e-8 * direct.norm());
  }
}

TEST_CASE("solve_spd: warm start at the solution takes no work") {
  Rng rng(41);
  Matrix G = rng.normal_matrix(8, 8);
  Matrix H = G * G.transpose() + 8.0 * Matrix::Identity(8, 8);
  Vector rhs = rng.normal_vector(8);
  Vector exact = H.llt().solve(rhs);
  auto res = solve_spd([&H](const Vector& v) -> Vector { return H * v; }, rhs,
                       SpdSolveConfig::cg_config(100, 1e-10), exact);
  CHECK(res.iterations == 0);
}

TEST_CASE("solve_spd: config validation") {
  CHECK_THROWS_AS(solve_spd(nullptr, Vector::Ones(2), SpdSolveConfig::cg_config(0)),
                  std::invalid_argument);
  CHECK_THROWS_AS(solve_spd(nullptr, Vector::Ones(2), SpdSolveConfig::cg_config(5, 2.0)),
                  std::invalid_argument);
  SpdSolveConfig no_diag;
  no_diag.method = SpdMethod::DiagonalFast;
  CHECK_THROWS_AS(solve_spd(nullptr, Vector::Ones(2), no_diag), std::invalid_argument);
}

TEST_CASE("solve_spd: indefinite apply raises a numerical error") {
  Vector rhs = Vector::Ones(3);
  CHECK_THROWS_AS(solve_spd([](const Vector& v) -> Vector { return -v; }, rhs,
                            SpdSolveConfig::cg_config(10)),
                  numerical_error);
}

TEST_CASE("woodbury: zero map reduces to scaling") {
  LinearMap A = make_dense(Matrix::Zero(3, 8));
  Vector rhs = Vector::LinSpaced(8, 0.5, 2.0);
  Vector x = woodbury_solve(A, 0.7, 0.3, rhs);
  CHECK((x - rhs / 0.3).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("woodbury: matches the dense direct solve") {
  Rng rng(51);
  Matrix A = rng.normal_matrix(5, 12);
  const double eta1 = 0.1, eta2 = 0.1;
  Vector rhs = rng.normal_vector(12);
  Vector x = woodbury_solve(make_dense(A), eta1, eta2, rhs);
  Matrix full = eta1 * (A.transpose() * A) + eta2 * Matrix::Identity(12, 12);
  Vector direct = full.ldlt().solve(rhs);
  CHECK((x - direct).norm() <= 1e-8 * direct.norm());
}

TEST_CASE("woodbury: factor is computed once and reused deterministically") {
  Rng rng(53);
  Matrix A = rng.normal_matrix(4, 9);
  WoodburySolver solver(A, 0.4, 0.2);
  Vector r1 = rng.normal_vector(9);
  Vector r2 = rng.normal_vector(9);
  Vector x1 = solver.solve(r1);
  Vector x2 = solver.solve(r2);
  CHECK(solver.factorization_count() == 1);
  CHECK(solver.solve_count() == 2);
  // Identical to fresh one-shot solves.
  CHECK((x1 - woodbury_solve(make_dense(A), 0.4, 0.2, r1)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((x2 - woodbury_solve(make_dense(A), 0.4, 0.2, r2)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("woodbury: random instances agree with dense solves at 1e-8") {
  Rng rng(57);
  for (int inst = 0; inst < 50; ++inst) {
    const Index d = 2 + rng.uniform_index(0, 14);
    const Index n = d + rng.uniform_index(0, 64 - d);
    Matrix A = rng.normal_matrix(d, n);
    const double eta1 = 0.05 + rng.uniform();
    const double eta2 = 0.05 + rng.uniform();
    Vector rhs = rng.normal_vector(n);
    Vector x = woodbury_solve(make_dense(A), eta1, eta2, rhs);
    Matrix full = eta1 * (A.transpose() * A) + eta2 * Matrix::Identity(n, n);
    Vector direct = full.ldlt().solve(rhs);
    CHECK((x - direct).norm() <= 1e-8 * (direct.norm() + 1.0));
  }
}

TEST_CASE("woodbury: rejects a tall dense map") {
  CHECK_THROWS_AS(WoodburySolver(Matrix::Ones(6, 3), 1.0, 1.0), dimension_error);
}
