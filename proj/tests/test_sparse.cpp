#include "tsplit/fem.hpp"
#include "tsplit/sparse.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <random>
#include <sstream>

using namespace tsplit;

namespace {

CsrMatrix from_dense(const Eigen::MatrixXd& d) {
  std::vector<Triplet> t;
  for (int i = 0; i < d.rows(); ++i)
    for (int j = 0; j < d.cols(); ++j)
      if (d(i, j) != 0.0) t.push_back({i, j, d(i, j)});
  return CsrMatrix::from_triplets(static_cast<int>(d.rows()), static_cast<int>(d.cols()), t);
}

Eigen::MatrixXd random_dense(int n, int m, std::uint64_t seed, double density = 0.6) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  std::uniform_real_distribution<double> keep(0.0, 1.0);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      if (keep(rng) < density) d(i, j) = val(rng);
  return d;
}

SolverConfig cg(double tol = 1e-12) { return {SolverMethod::conjugate_gradient, tol, std::nullopt}; }
SolverConfig direct(double tol = 1e-12) { return {SolverMethod::direct, tol, std::nullopt}; }

}  // namespace

TEST_CASE("csr storage: sorted unique columns, summed duplicates, monotone offsets") {
  const CsrMatrix a = CsrMatrix::from_triplets(3, 3, {{2, 1, 1.0}, {0, 2, 2.0}, {0, 0, 1.0}, {0, 2, 3.0}, {2, 0, 4.0}});
  CHECK(a.nonzeros() == 4);
  CHECK(a.coeff(0, 2) == 5.0);
  CHECK(a.coeff(1, 1) == 0.0);
  const auto off = a.row_offsets();
  const auto col = a.column_indices();
  for (int r = 0; r < a.rows(); ++r) {
    CHECK(off[r] <= off[r + 1]);
    for (int k = off[r] + 1; k < off[r + 1]; ++k) CHECK(col[k - 1] < col[k]);
  }
  CHECK_THROWS_AS(CsrMatrix::from_triplets(2, 2, {{2, 0, 1.0}}), std::out_of_range);
}

TEST_CASE("matvec: identity and zero") {
  const Vector x = Vector::LinSpaced(6, -1.0, 2.0);
  CHECK((matvec(CsrMatrix::identity(6), x) - x).norm() == 0.0);
  CHECK(matvec(CsrMatrix(4, 6), x).norm() == 0.0);
  CHECK(matvec(CsrMatrix(4, 6), x).size() == 4);
  CHECK_THROWS_AS(matvec(CsrMatrix::identity(5), x), std::invalid_argument);
}

TEST_CASE("matvec and transpose against a dense oracle") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Eigen::MatrixXd d = random_dense(5, 5, seed);
    const CsrMatrix a = from_dense(d);
    const Vector x = random_dense(5, 1, seed + 10, 1.0);
    CHECK((a * x - d * x).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK((a.transpose_multiply(x) - d.transpose() * x).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK((a.transpose().to_dense() - d.transpose()).cwiseAbs().maxCoeff() == 0.0);
  }
  const Eigen::MatrixXd rect = random_dense(4, 7, 9);
  const Vector y = random_dense(7, 1, 11, 1.0);
  CHECK((from_dense(rect) * y - rect * y).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("linear combination and submatrix") {
  const Eigen::MatrixXd a = random_dense(6, 6, 4);
  const Eigen::MatrixXd b = random_dense(6, 6, 5);
  const CsrMatrix c = linear_combination(2.0, from_dense(a), -0.5, from_dense(b));
  CHECK((c.to_dense() - (2.0 * a - 0.5 * b)).cwiseAbs().maxCoeff() <= 1e-15);
  const std::vector<int> rows = {4, 1};
  const std::vector<int> cols = {0, 5, 2};
  const Eigen::MatrixXd s = from_dense(a).submatrix(rows, cols).to_dense();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j) CHECK(s(i, j) == a(rows[i], cols[j]));
  CHECK_THROWS_AS(linear_combination(1.0, CsrMatrix(2, 2), 1.0, CsrMatrix(2, 3)), std::invalid_argument);
}

TEST_CASE("coordinate export") {
  const CsrMatrix a = CsrMatrix::from_triplets(2, 2, {{0, 1, 0.5}, {1, 0, -2.0}});
  std::ostringstream os;
  a.write_coordinate(os);
  CHECK(os.str() == "0 1 0.5\n1 0 -2\n");
}

TEST_CASE("solver config validation") {
  CHECK_THROWS_AS((SolverConfig{SolverMethod::direct, 0.0, std::nullopt}).validate(), std::invalid_argument);
  CHECK_THROWS_AS((SolverConfig{SolverMethod::direct, 1.0, std::nullopt}).validate(), std::invalid_argument);
  CHECK_THROWS_AS((SolverConfig{SolverMethod::direct, 1e-8, 0}).validate(), std::invalid_argument);
  CHECK(SolverConfig{}.tolerance == 1e-12);
  CHECK(SolverConfig{}.iteration_limit(7) == 70);
}

TEST_CASE("solve_spd: small exact cases") {
  for (const SolverConfig& cfg : {cg(), direct()}) {
    const Vector b = Vector::LinSpaced(5, 1.0, 5.0);
    CHECK((solve_spd(CsrMatrix::identity(5), b, cfg).x - b).norm() <= 1e-14);
    const CsrMatrix d = CsrMatrix::from_triplets(2, 2, {{0, 0, 2.0}, {1, 1, 4.0}});
    const Vector x = solve_spd(d, Vector{{2.0, 8.0}}, cfg).x;
    CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(x[1] == doctest::Approx(2.0).epsilon(1e-14));
  }
}

TEST_CASE("solve_spd: Dirichlet Laplacian against a dense factorization") {
  const Discretization disc(4, 4);
  const CsrMatrix L = restrict_to_gauge(disc.operators().laplace_pressure, disc.spaces());
  const Eigen::MatrixXd dense = L.to_dense();
  Vector b(L.rows());
  for (int i = 0; i < b.size(); ++i) b[i] = std::sin(1.0 + i);
  const Vector oracle = dense.llt().solve(b);
  for (const SolverConfig& cfg : {cg(), direct()}) {
    const SolveResult r = solve_spd(L, b, cfg);
    CHECK(r.residual <= 1e-12);
    CHECK((r.x - oracle).norm() <= 1e-10 * oracle.norm());
  }
}

TEST_CASE("solve_spd: residual contract on assembled operators") {
  const Discretization disc(6, 5);
  const OperatorSet& ops = disc.operators();
  for (const CsrMatrix* A : {&ops.mass_velocity, &ops.mass_pressure, &ops.h1_pressure}) {
    Vector b(A->rows());
    for (int i = 0; i < b.size(); ++i) b[i] = std::cos(0.3 * i);
    for (const SolverConfig& cfg : {cg(), direct()}) CHECK(solve_spd(*A, b, cfg).residual <= 1e-12);
  }
}

TEST_CASE("solve_spd: failure carries the achieved residual") {
  const Discretization disc(8, 8);
  const CsrMatrix L = restrict_to_gauge(disc.operators().laplace_pressure, disc.spaces());
  const Vector b = Vector::Ones(L.rows());
  SolverConfig cfg = cg();
  cfg.max_iterations = 2;
  try {
    (void)solve_spd(L, b, cfg);
    FAIL("expected SolverError");
  } catch (const SolverError& e) {
    CHECK(e.residual() > 1e-12);
    CHECK(e.iterations() <= 2);
  }
  // Indefinite matrices are rejected by the factorization.
  const CsrMatrix indefinite = CsrMatrix::from_triplets(2, 2, {{0, 0, 1.0}, {1, 1, -1.0}});
  CHECK_THROWS_AS(solve_spd(indefinite, Vector::Ones(2), direct()), SolverError);
}

TEST_CASE("solvers are deterministic") {
  const Discretization disc(6, 6);
  const CsrMatrix& A = disc.operators().h1_pressure;
  Vector b(A.rows());
  for (int i = 0; i < b.size(); ++i) b[i] = std::sin(0.7 * i);
  for (const SolverConfig& cfg : {cg(), direct()}) {
    const Vector x1 = solve_spd(A, b, cfg).x;
    const Vector x2 = solve_spd(A, b, cfg).x;
    CHECK((x1.array() == x2.array()).all());
  }
}

TEST_CASE("solve_general: small exact cases and a dense oracle") {
  for (const SolverConfig& cfg : {cg(), direct()}) {
    const Vector b{{3.0, 5.0}};
    CHECK((solve_general(CsrMatrix::identity(2), b, cfg).x - b).norm() <= 1e-14);
    const CsrMatrix swap = CsrMatrix::from_triplets(2, 2, {{0, 1, 1.0}, {1, 0, 1.0}});
    const Vector x = solve_general(swap, b, cfg).x;
    CHECK(x[0] == doctest::Approx(5.0));
    CHECK(x[1] == doctest::Approx(3.0));
  }
  Eigen::MatrixXd d = random_dense(8, 8, 21, 0.7);
  d += 6.0 * Eigen::MatrixXd::Identity(8, 8);
  const Vector b = random_dense(8, 1, 22, 1.0);
  const Vector oracle = d.fullPivLu().solve(b);
  for (const SolverConfig& cfg : {cg(), direct()}) {
    CHECK((solve_general(from_dense(d), b, cfg).x - oracle).norm() <= 1e-10 * oracle.norm());
  }
  const CsrMatrix singular = CsrMatrix::from_triplets(2, 2, {{0, 0, 1.0}, {0, 1, 1.0}, {1, 0, 1.0}, {1, 1, 1.0}});
  CHECK_THROWS_AS(solve_general(singular, Vector{{1.0, 2.0}}, direct()), SolverError);
}

TEST_CASE("smallest generalized eigenvalue: trivial pairs") {
  const Discretization disc(3, 3);
  const CsrMatrix& M = disc.operators().mass_pressure;
  CHECK(smallest_generalized_eigenvalue(M, M).value == doctest::Approx(1.0).epsilon(1e-10));
  const CsrMatrix A = CsrMatrix::from_triplets(2, 2, {{0, 0, 2.0}, {1, 1, 3.0}});
  CHECK(smallest_generalized_eigenvalue(A, CsrMatrix::identity(2)).value == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("smallest generalized eigenvalue: FEM pair against a dense oracle") {
  const Discretization disc(4, 4);
  const OperatorSet& ops = disc.operators();
  // Semidefinite A (Neumann Laplacian, constants in the kernel) and SPD B.
  const CsrMatrix A = linear_combination(1.0, ops.laplace_pressure, 0.25, ops.mass_pressure);
  const CsrMatrix& B = ops.mass_pressure;
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> oracle(A.to_dense(), B.to_dense());
  const EigenEstimate est = smallest_generalized_eigenvalue(A, B, 1e-12);
  CHECK(std::abs(est.value - oracle.eigenvalues()(0)) <= 1e-8 * std::abs(oracle.eigenvalues()(0)));
  const EigenEstimate semi = smallest_generalized_eigenvalue(ops.laplace_pressure, B, 1e-12);
  CHECK(std::abs(semi.value) <= 1e-8);
}

TEST_CASE("smallest generalized eigenvalue: non-convergence reports the best estimate") {
  const Discretization disc(6, 6);
  const OperatorSet& ops = disc.operators();
  const CsrMatrix A = linear_combination(1.0, ops.laplace_pressure, 1.0, ops.mass_pressure);
  try {
    (void)smallest_generalized_eigenvalue(A, ops.mass_pressure, 1e-14, 1);
    // One iteration may already satisfy the contract on some platforms.
  } catch (const EigenSolverError& e) {
    CHECK(e.best_estimate().value >= 1.0 - 1e-8);
    CHECK(e.best_estimate().iterations == 1);
  }
  CHECK_THROWS_AS(smallest_generalized_eigenvalue(A, CsrMatrix::identity(3)), std::invalid_argument);
}
