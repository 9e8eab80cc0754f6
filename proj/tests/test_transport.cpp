#include <doctest.h>

#include <cmath>
#include <sstream>

#include "mslab/transport.hpp"

using namespace mslab;

namespace {

Matrix diag(std::initializer_list<double> v) {
  Eigen::VectorXd d(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) d(k++) = x;
  return d.cast<Complex>().asDiagonal();
}

Matrix conj_by(const Matrix& u, const Matrix& x) { return u * x * u.adjoint(); }

MatrixTuple conj_by(const Matrix& u, const MatrixTuple& x) {
  std::vector<Matrix> out;
  for (const auto& m : x) out.push_back(conj_by(u, m));
  return MatrixTuple(std::move(out));
}

// Sorted eigenvalue matching, written against the raw eigenvalue lists.
double sorted_spectrum_distance(const Matrix& x, const Matrix& y) {
  Eigen::VectorXd a = spectrum(x), b = spectrum(y);
  std::sort(a.data(), a.data() + a.size());
  std::sort(b.data(), b.data() + b.size());
  return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

}  // namespace

TEST_CASE("spectral measures") {
  const auto mu = SpectralMeasure::from_atoms({{1.0, 0.5}, {0.0, 0.5}});
  CHECK(mu.atoms[0].first == 0.0);
  CHECK_THROWS_AS(SpectralMeasure::from_atoms({{0.0, 0.5}, {1.0, 0.4}}), std::invalid_argument);
  CHECK_THROWS_AS(SpectralMeasure::from_atoms({{0.0, 1.5}, {1.0, -0.5}}), std::invalid_argument);
  CHECK(mu.moment(2) == doctest::Approx(0.5));

  std::stringstream ss;
  write_spectral_csv(ss, mu);
  const auto back = read_spectral_csv(ss);
  CHECK(back.atoms == mu.atoms);
  std::stringstream bad("location,weight\n0,abc\n");
  CHECK_THROWS_AS(read_spectral_csv(bad), std::invalid_argument);

  const auto q = mu.quantiles(4);
  CHECK(q == std::vector<double>{0.0, 0.0, 1.0, 1.0});
  RngStream rng(1, 0);
  const auto h = SpectralMeasure::of_matrix(sample_gue(17, rng));
  CHECK_NOTHROW(h.validate());
  CHECK(h.atoms.size() == 17);
}

TEST_CASE("wasserstein spectral examples") {
  const auto mu = SpectralMeasure::from_atoms({{0.0, 0.5}, {1.0, 0.5}});
  const auto nu = SpectralMeasure::from_atoms({{1.0, 0.5}, {2.0, 0.5}});
  CHECK(wasserstein_spectral(mu, mu) == 0.0);
  CHECK(wasserstein_spectral(mu, nu) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(wasserstein_spectral(SpectralMeasure::from_atoms({{-0.5, 1.0}}), SpectralMeasure::from_atoms({{2.0, 1.0}})) ==
        doctest::Approx(2.5));
  // Unequal atom counts: uniform on {0,1,2} versus delta at 1 gives sqrt(2/3).
  const auto three = SpectralMeasure::from_atoms({{0.0, 1.0 / 3}, {1.0, 1.0 / 3}, {2.0, 1.0 - 2.0 / 3}});
  CHECK(wasserstein_spectral(three, SpectralMeasure::from_atoms({{1.0, 1.0}})) ==
        doctest::Approx(std::sqrt(2.0 / 3.0)));
  SpectralMeasure unnormalized{{{0.0, 0.3}}};
  CHECK_THROWS_AS(wasserstein_spectral(unnormalized, mu), std::invalid_argument);
}

TEST_CASE("specht examples") {
  RngStream rng(3, 0);
  for (int n : {2, 3, 4}) {
    const auto x = sample_ginibre(n, 1, rng);
    const Matrix u = sample_haar_unitary(n, rng);
    const auto res = specht_equivalent(x, conj_by(u, x), n * n);
    CHECK(res.verdict == SpechtVerdict::Equivalent);
    CHECK(res.max_deviation < 1e-10 * std::pow(3.0, n * n));
  }
  const auto pair = sample_ginibre(2, 2, rng);
  const Matrix u2 = sample_haar_unitary(2, rng);
  CHECK(specht_equivalent(pair, conj_by(u2, pair), 4).verdict == SpechtVerdict::Equivalent);

  const auto r = specht_equivalent(MatrixTuple({diag({0, 1})}), MatrixTuple({diag({0, 0})}), 3);
  CHECK(r.verdict == SpechtVerdict::Distinct);
  CHECK(r.mismatch_len == 1);

  const MatrixTuple fx({diag({-1, 0, 1})});
  const double s = 1.0 / std::sqrt(3.0);
  const MatrixTuple fy({diag({s, s, -2 * s})});
  CHECK(specht_equivalent(fx, fy, 2).verdict == SpechtVerdict::Undetermined);
  const auto f3 = specht_equivalent(fx, fy, 3);
  CHECK(f3.verdict == SpechtVerdict::Distinct);
  CHECK(f3.mismatch_len == 3);

  // Large alphabets run out of word budget and stay undetermined.
  const auto wide = sample_ginibre(4, 3, rng);
  const auto capped = specht_equivalent(wide, wide, 16, 100'000);
  CHECK(capped.capped);
  CHECK(capped.verdict == SpechtVerdict::Undetermined);
}

TEST_CASE("psi distance") {
  RngStream rng(5, 0);
  OptConfig cfg;
  cfg.starts = 8;
  for (int n : {2, 4, 8, 16}) {
    const auto x = sample_ginibre(n, 2, rng);
    CHECK(psi_distance(x, x, cfg).distance < 1e-8);
    const Matrix v = sample_haar_unitary(n, rng);
    CHECK(psi_distance(x, conj_by(v, x), cfg).distance < 1e-6);
  }
  for (int trial = 0; trial < 5; ++trial) {
    const auto x = sample_ginibre(5, 2, rng);
    const auto y = sample_ginibre(5, 2, rng);
    const double p = psi_distance(x, y, cfg).distance;
    CHECK(p >= std::abs(hs_norm(x) - hs_norm(y)) - 1e-9);
    const Matrix u = sample_haar_unitary(5, rng);
    CHECK(psi_distance(conj_by(u, x), y, cfg).distance == doctest::Approx(p).epsilon(1e-4));
    CHECK(psi_distance(y, x, cfg).distance == doctest::Approx(p).epsilon(1e-4));
  }
  const Matrix a = sample_gue(6, rng), b = sample_gue(6, rng);
  CHECK(psi_distance(MatrixTuple({a}), MatrixTuple({b}), cfg).distance ==
        doctest::Approx(sorted_spectrum_distance(a, b)).epsilon(1e-4));
}

TEST_CASE("wasserstein matrix matches the spectral oracle") {
  CHECK(wasserstein_matrix(diag({0, 1}), diag({1, 2})) == doctest::Approx(1.0).epsilon(1e-10));
  RngStream rng(7, 0);
  OptConfig cfg;
  cfg.starts = 1;
  cfg.max_iters = 100;
  int pairs = 0;
  for (int n : {8, 32, 64}) {
    for (int k = 0; k < 34; ++k, ++pairs) {
      const Matrix x = sample_gue(n, rng);
      const Matrix y = 0.5 * sample_gue(n, rng) + 0.3 * Matrix::Identity(n, n);
      const double w = wasserstein_matrix(x, y, cfg);
      CHECK(std::abs(w - sorted_spectrum_distance(x, y)) < 1e-4);
      CHECK(std::abs(w - wasserstein_spectral(SpectralMeasure::of_matrix(x), SpectralMeasure::of_matrix(y))) < 1e-4);
    }
  }
  CHECK(pairs >= 100);
  RngStream g(8, 0);
  CHECK_THROWS_AS(wasserstein_matrix(sample_ginibre(3, 1, g)[0], diag({0, 0, 0})), std::invalid_argument);
}

TEST_CASE("matching word traces force a small orbit distance") {
  RngStream rng(9, 0);
  for (int n : {2, 3, 4}) {
    const auto x = sample_ginibre(n, 1, rng);
    const auto y = conj_by(sample_haar_unitary(n, rng), x);
    const auto s = specht_equivalent(x, y, 6);
    CHECK(s.verdict != SpechtVerdict::Distinct);
    CHECK(s.max_deviation < 1e-10);
    CHECK(psi_distance(x, y).distance < 1e-4);
  }
}
