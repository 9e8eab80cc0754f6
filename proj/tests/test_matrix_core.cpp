#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mslab/matrix_core.hpp"
#include "mslab/ncpoly.hpp"

using namespace mslab;

namespace {

Matrix diag(std::initializer_list<double> v) {
  Eigen::VectorXcd d(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) d(k++) = x;
  return d.asDiagonal();
}

double semicircle_cdf(double x) {
  if (x <= -2.0) return 0.0;
  if (x >= 2.0) return 1.0;
  return 0.5 + (x * std::sqrt(4.0 - x * x) / 4.0 + std::asin(x / 2.0)) / std::numbers::pi;
}

}  // namespace

TEST_CASE("normalized trace") {
  CHECK(std::abs(normalized_trace(Matrix::Identity(5, 5)) - 1.0) < 1e-15);
  CHECK(std::abs(normalized_trace(Matrix::Zero(4, 4))) == 0.0);
  CHECK(std::abs(normalized_trace(diag({1, 2, 3})) - 2.0) < 1e-15);
}

TEST_CASE("hs inner product") {
  MatrixTuple i3({Matrix::Identity(3, 3)});
  CHECK(std::abs(hs_inner(i3, i3) - 1.0) < 1e-15);
  MatrixTuple a({diag({1, 0})}), b({diag({0, 1})});
  CHECK(std::abs(hs_inner(a, b)) < 1e-15);
  MatrixTuple h({Matrix::Identity(2, 2)}), k({Matrix(Complex(0, 1) * diag({1, -1}))});
  CHECK(std::abs(hs_inner(h, k)) < 1e-15);
  CHECK_THROWS(hs_inner(a, i3));

  RngStream rng(7, 0);
  for (int t = 0; t < 20; ++t) {
    const auto x = sample_ginibre(5, 2, rng);
    const auto y = sample_ginibre(5, 2, rng);
    const Complex xx = hs_inner(x, x);
    CHECK(std::abs(xx.imag()) < 1e-12);
    CHECK(xx.real() > 0.0);
    CHECK(std::abs(hs_inner(x, y) - std::conj(hs_inner(y, x))) < 1e-12);
    CHECK(std::abs(normalized_trace(x[0] * y[0]) - normalized_trace(y[0] * x[0])) < 1e-12);
    CHECK(operator_norm(x[0]) + 1e-10 >= std::sqrt(hs_norm_sq(x[0])));
  }
  CHECK(hs_norm_sq(MatrixTuple::zeros(3, 2)) == 0.0);
}

TEST_CASE("operator norm") {
  CHECK(operator_norm(Matrix::Identity(4, 4)) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(operator_norm(diag({3, -1})) == doctest::Approx(3.0).epsilon(1e-10));
  Matrix nil = Matrix::Zero(2, 2);
  nil(0, 1) = 2.0;
  CHECK(operator_norm(nil) == doctest::Approx(2.0).epsilon(1e-10));
  RngStream rng(3, 1);
  const auto z = sample_ginibre(9, 1, rng);
  Eigen::JacobiSVD<Matrix> svd(z[0]);
  CHECK(std::abs(operator_norm(z[0]) - svd.singularValues()(0)) < 1e-10 * svd.singularValues()(0));
}

TEST_CASE("tuple validation") {
  CHECK_THROWS_AS(MatrixTuple(std::vector<Matrix>{}), std::invalid_argument);
  CHECK_THROWS_AS(MatrixTuple({Matrix::Identity(2, 2), Matrix::Identity(3, 3)}), std::invalid_argument);
  CHECK_THROWS_AS(MatrixTuple({Matrix::Zero(2, 3)}), std::invalid_argument);
}

TEST_CASE("ginibre moments and determinism") {
  RngStream rng(11, 0);
  double m2 = 0.0, z2 = 0.0;
  for (int t = 0; t < 20; ++t) {
    const auto z = sample_ginibre(512, 1, rng);
    m2 += z[0].squaredNorm() / 512.0;
    z2 += std::abs(z[0].cwiseProduct(z[0].transpose()).sum() / 512.0);
  }
  CHECK(m2 / 20 >= 0.95);
  CHECK(m2 / 20 <= 1.05);
  CHECK(z2 / 20 < 0.05);

  RngStream r1(5, 9), r2(5, 9);
  CHECK(sample_ginibre(6, 2, r1)[1] == sample_ginibre(6, 2, r2)[1]);
}

TEST_CASE("gue moments and spectral law") {
  RngStream rng(13, 0);
  double m2 = 0.0, m4 = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Matrix x = sample_gue(512, rng);
    CHECK(x == x.adjoint());
    const Matrix x2 = x * x;
    m2 += normalized_trace(x2).real();
    m4 += x2.squaredNorm() / 512.0;
  }
  CHECK(m2 / 20 >= 0.95);
  CHECK(m2 / 20 <= 1.05);
  CHECK(m4 / 20 >= 1.85);
  CHECK(m4 / 20 <= 2.15);

  double ks_total = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    RngStream r(seed, 77);
    Eigen::VectorXd ev = spectrum(sample_gue(512, r));
    std::sort(ev.begin(), ev.end());
    double ks = 0.0;
    const double n = static_cast<double>(ev.size());
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
      const double f = semicircle_cdf(ev(i));
      ks = std::max({ks, std::abs(f - static_cast<double>(i) / n), std::abs(f - static_cast<double>(i + 1) / n)});
    }
    ks_total += ks;
  }
  CHECK(ks_total / 10 < 0.05);
}

TEST_CASE("haar unitary") {
  RngStream rng(17, 0);
  double tr_abs = 0.0;
  for (int t = 0; t < 50; ++t) {
    const Matrix u = sample_haar_unitary(256, rng);
    if (t == 0) CHECK(operator_norm(u * u.adjoint() - Matrix::Identity(256, 256)) < 1e-10);
    tr_abs += std::abs(normalized_trace(u));
  }
  CHECK(tr_abs / 50 < 0.05);
  RngStream a(1, 2), b(1, 2);
  CHECK(sample_haar_unitary(8, a) == sample_haar_unitary(8, b));
}

TEST_CASE("haar conjugation preserves word traces") {
  RngStream rng(19, 0);
  const auto x = sample_ginibre(6, 2, rng);
  const Matrix u = sample_haar_unitary(6, rng);
  MatrixTuple y({u * x[0] * u.adjoint(), u * x[1] * u.adjoint()});
  const auto words = enumerate_star_words(2, 6);
  const auto tx = word_traces(x, words);
  const auto ty = word_traces(y, words);
  double worst = 0.0;
  for (std::size_t i = 0; i < words.size(); ++i) worst = std::max(worst, std::abs(tx[i] - ty[i]));
  CHECK(worst < 1e-10);
}

TEST_CASE("unitary from hermitian") {
  CHECK((unitary_from_hermitian(Matrix::Zero(3, 3)) - Matrix::Identity(3, 3)).norm() < 1e-14);
  const Matrix u = unitary_from_hermitian(std::numbers::pi * diag({1, -1}));
  CHECK((u - Matrix(-1.0 * Matrix::Identity(2, 2))).norm() < 1e-12);
  RngStream rng(23, 0);
  for (int t = 0; t < 5; ++t) {
    const Matrix h = 3.0 * sample_gue(10, rng);
    const Matrix e = unitary_from_hermitian(h);
    CHECK(operator_norm(e * e.adjoint() - Matrix::Identity(10, 10)) < 1e-10);
  }
  Matrix bad = Matrix::Zero(2, 2);
  bad(0, 1) = 1.0;
  CHECK_THROWS_AS(unitary_from_hermitian(bad), std::invalid_argument);
  Matrix nearly = Matrix::Identity(2, 2);
  nearly(0, 1) = 1e-12;
  const auto sym = symmetrize(nearly);
  CHECK(sym.correction == doctest::Approx(5e-13).epsilon(1e-6));
  CHECK_NOTHROW(unitary_from_hermitian(nearly));
}

TEST_CASE("orthonormal coordinates") {
  RngStream rng(29, 0);
  for (Field field : {Field::Complex, Field::SelfAdjoint}) {
    const int n = 4;
    Matrix x = sample_ginibre(n, 1, rng)[0];
    if (field == Field::SelfAdjoint) x = project_to_field(x, field);
    const Eigen::VectorXd c = to_coordinates(x, field);
    CHECK(c.size() == real_dimension(n, field));
    CHECK(std::abs(c.squaredNorm() - hs_norm_sq(x)) < 1e-12);
    CHECK((from_coordinates(c, n, field) - x).norm() < 1e-12);
  }
  CHECK(real_dimension(3, Field::Complex) == 18);
  CHECK(real_dimension(3, Field::SelfAdjoint) == 9);
}
