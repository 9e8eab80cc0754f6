#include <doctest.h>

#include <cmath>

#include "mslab/optimize.hpp"

using namespace mslab;

namespace {

constexpr double kFeasibility = 1e-9;

void check_feasible(const OptResult& res, double r) { CHECK(max_operator_norm(res.witness) <= r + kFeasibility); }

void check_monotone(const OptResult& res) {
  for (std::size_t k = 1; k < res.history.size(); ++k) CHECK(res.history[k] <= res.history[k - 1] + 1e-12);
}

// f(Y) = |Y - C|^2 with gradient 2(Y - C).
TupleObjective distance_to(const MatrixTuple& c) {
  return [c](const MatrixTuple& y, MatrixTuple* g) {
    const MatrixTuple diff = y - c;
    if (g) *g = 2.0 * diff;
    return hs_norm_sq(diff);
  };
}

// f(U) = |U X U* - Y|^2 with gradient 2(E U X* + E* U X), E = U X U* - Y.
UnitaryObjective orbit_distance(const Matrix& x, const Matrix& y) {
  return [x, y](const Matrix& u, Matrix* g) {
    const Matrix e = u * x * u.adjoint() - y;
    if (g) *g = 2.0 * (e * u * x.adjoint() + e.adjoint() * u * x);
    return e.squaredNorm() / static_cast<double>(x.rows());
  };
}

}  // namespace

TEST_CASE("projection onto operator-norm balls") {
  RngStream rng(1, 0);
  MatrixTuple small({0.1 * sample_ginibre(4, 1, rng)[0]});
  CHECK(hs_norm(project_opnorm_ball(small, 1.0) - small) < 1e-12);

  MatrixTuple two({Matrix(2.0 * Matrix::Identity(3, 3))});
  CHECK((project_opnorm_ball(two, 1.0)[0] - Matrix::Identity(3, 3)).norm() < 1e-12);

  Eigen::VectorXcd u = Eigen::VectorXcd::Random(5).normalized();
  Eigen::VectorXcd v = Eigen::VectorXcd::Random(5).normalized();
  MatrixTuple rank1({Matrix(2.0 * u * v.adjoint())});
  CHECK((project_opnorm_ball(rank1, 1.0)[0] - u * v.adjoint()).norm() < 1e-12);

  for (int t = 0; t < 20; ++t) {
    const auto a = 2.0 * sample_ginibre(5, 2, rng);
    const auto b = 2.0 * sample_ginibre(5, 2, rng);
    const auto pa = project_opnorm_ball(a, 1.0);
    const auto pb = project_opnorm_ball(b, 1.0);
    CHECK(max_operator_norm(pa) <= 1.0 + 1e-12);
    CHECK(hs_norm(project_opnorm_ball(pa, 1.0) - pa) < 1e-12);
    CHECK(hs_norm(pa - pb) <= hs_norm(a - b) + 1e-12);
  }
}

TEST_CASE("minimize over a ball: spec examples") {
  OptConfig cfg;
  cfg.seed = 42;
  const auto zero = minimize_over_ball(distance_to(MatrixTuple::zeros(4, 2)), 1.0, 4, 2, cfg);
  CHECK(zero.value < 1e-12);
  CHECK(hs_norm(zero.witness) < 1e-6);
  check_feasible(zero, 1.0);

  TupleObjective trace = [](const MatrixTuple& y, MatrixTuple* g) {
    if (g) *g = MatrixTuple({Matrix::Identity(y.n(), y.n())});
    return normalized_trace(y[0]).real();
  };
  const auto lin = minimize_over_ball(trace, 1.0, 5, 1, cfg);
  CHECK(lin.value == doctest::Approx(-1.0).epsilon(1e-8));
  CHECK((lin.witness[0] + Matrix::Identity(5, 5)).norm() < 1e-6);
  check_feasible(lin, 1.0);
  check_monotone(lin);

  RngStream rng(2, 0);
  const auto c = project_opnorm_ball(2.0 * sample_ginibre(6, 1, rng), 1.0);
  const auto proj = minimize_over_ball(distance_to(c), 1.0, 6, 1, cfg);
  CHECK(proj.value < 1e-12);
  CHECK(hs_norm(proj.witness - c) < 1e-6);
  check_feasible(proj, 1.0);
}

TEST_CASE("infeasible target is projected; descent is monotone; feasibility always") {
  RngStream rng(3, 0);
  OptConfig cfg;
  cfg.seed = 9;
  for (int t = 0; t < 10; ++t) {
    const auto c = 3.0 * sample_ginibre(5, 2, rng);
    const auto res = minimize_over_ball(distance_to(c), 0.7, 5, 2, cfg);
    check_feasible(res, 0.7);
    check_monotone(res);
    CHECK(res.value == doctest::Approx(hs_norm_sq(project_opnorm_ball(c, 0.7) - c)).epsilon(1e-6));
  }
}

TEST_CASE("determinism and serial/parallel agreement") {
  RngStream rng(4, 0);
  const auto c = 3.0 * sample_ginibre(4, 1, rng);
  // A non-convex objective so that starts disagree.
  TupleObjective f = [c](const MatrixTuple& y, MatrixTuple* g) {
    const Matrix m = y[0] * y[0] - c[0];
    if (g) {
      const Matrix gm = 2.0 * (m * y[0].adjoint() + y[0].adjoint() * m);
      *g = MatrixTuple({gm});
    }
    return m.squaredNorm() / 4.0;
  };
  OptConfig cfg;
  cfg.seed = 123;
  const auto a = minimize_over_ball(f, 1.0, 4, 1, cfg);
  const auto b = minimize_over_ball(f, 1.0, 4, 1, cfg);
  CHECK(a.value == b.value);
  CHECK(a.witness[0] == b.witness[0]);
  cfg.execution = Execution::Serial;
  const auto s = minimize_over_ball(f, 1.0, 4, 1, cfg);
  CHECK(s.value == a.value);
  CHECK(s.best_start == a.best_start);
}

TEST_CASE("supplied feasible start bounds the result") {
  RngStream rng(5, 0);
  const auto c = 2.0 * sample_ginibre(4, 1, rng);
  TupleObjective f = [c](const MatrixTuple& y, MatrixTuple* g) {
    const Matrix m = y[0] * y[0] * y[0] - c[0];
    if (g) {
      const Matrix ya = y[0].adjoint();
      *g = MatrixTuple({Matrix(2.0 * (m * ya * ya + ya * m * ya + ya * ya * m))});
    }
    return m.squaredNorm() / 4.0;
  };
  OptConfig cfg;
  cfg.starts = 2;
  cfg.max_iters = 5;
  for (int t = 0; t < 5; ++t) {
    const auto p = project_opnorm_ball(sample_ginibre(4, 1, rng), 1.0);
    const auto res = minimize_over_ball(f, 1.0, 4, 1, cfg, {p});
    CHECK(res.value <= f(p, nullptr) + 1e-9);
  }
}

TEST_CASE("failed starts are skipped") {
  int calls = 0;
  TupleObjective f = [&calls](const MatrixTuple& y, MatrixTuple* g) {
    if (g) *g = 2.0 * y;
    if (hs_norm_sq(y) == 0.0) return std::nan("");
    ++calls;
    return hs_norm_sq(y);
  };
  OptConfig cfg;
  cfg.starts = 3;
  cfg.execution = Execution::Serial;
  cfg.max_iters = 3;
  const auto res = minimize_over_ball(f, 1.0, 3, 1, cfg);
  CHECK(res.failed_starts >= 1);
  CHECK(std::isfinite(res.value));
}

TEST_CASE("config validation") {
  OptConfig cfg;
  cfg.starts = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.starts = 65;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.starts = 8;
  cfg.tol = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("minimize over unitaries: spec examples") {
  RngStream rng(6, 0);
  OptConfig cfg;
  cfg.seed = 5;
  cfg.max_iters = 2000;
  cfg.tol = 1e-10;

  const Matrix x = sample_gue(6, rng);
  const auto self = minimize_over_unitaries(orbit_distance(x, x), 6, cfg);
  CHECK(self.value < 1e-12);

  for (int n : {4, 8, 16}) {
    const Matrix z = sample_ginibre(n, 1, rng)[0];
    const Matrix v = sample_haar_unitary(n, rng);
    const auto res = minimize_over_unitaries(orbit_distance(z, v * z * v.adjoint()), n, cfg);
    INFO("n = " << n);
    CHECK(res.value < 1e-8);
    const Matrix u = res.witness[0];
    CHECK(operator_norm(u * u.adjoint() - Matrix::Identity(n, n)) < 1e-9);
    check_monotone(res);
  }

  Matrix a = Matrix::Zero(2, 2), b = Matrix::Zero(2, 2);
  a(1, 1) = 1.0;
  b(0, 0) = 1.0;
  const auto swap = minimize_over_unitaries(orbit_distance(a, b), 2, cfg);
  CHECK(swap.value < 1e-8);
}
