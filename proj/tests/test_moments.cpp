#include <doctest.h>

#include <cmath>
#include <functional>
#include <map>

#include "mslab/formula.hpp"
#include "mslab/moments.hpp"

using namespace mslab;

namespace {

long catalan(int n) {
  std::vector<long> c(static_cast<std::size_t>(n) + 1, 0);
  c[0] = 1;
  for (int k = 1; k <= n; ++k) {
    for (int j = 0; j < k; ++j) c[static_cast<std::size_t>(k)] += c[static_cast<std::size_t>(j)] * c[static_cast<std::size_t>(k - 1 - j)];
  }
  return c[static_cast<std::size_t>(n)];
}

// Every set partition of {1..n} via restricted growth strings.
std::vector<std::vector<std::vector<int>>> all_set_partitions(int n) {
  std::vector<std::vector<std::vector<int>>> out;
  std::vector<int> rgs(static_cast<std::size_t>(n), 0);
  std::function<void(int, int)> rec = [&](int pos, int blocks) {
    if (pos == n) {
      std::vector<std::vector<int>> p(static_cast<std::size_t>(blocks));
      for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(rgs[static_cast<std::size_t>(i)])].push_back(i + 1);
      out.push_back(p);
      return;
    }
    for (int b = 0; b <= blocks; ++b) {
      rgs[static_cast<std::size_t>(pos)] = b;
      rec(pos + 1, std::max(blocks, b + 1));
    }
  };
  rec(0, 0);
  return out;
}

bool crossing(const std::vector<std::vector<int>>& p) {
  NonCrossingPartition ncp{0, p};
  for (const auto& b : p) for (int e : b) ncp.n = std::max(ncp.n, e);
  return !ncp.is_noncrossing();
}

// Independent oracle: m(w) = sum over NC partitions of prod of block cumulants.
Complex moment_from_partitions(const CumulantVector& cv, const std::vector<int>& codes) {
  const int n = static_cast<int>(codes.size());
  if (n == 0) return 1.0;
  Complex total = 0.0;
  for (const auto& p : enumerate_nc(n)) {
    Complex term = 1.0;
    for (const auto& block : p.blocks) {
      std::vector<int> sub;
      for (int e : block) sub.push_back(codes[static_cast<std::size_t>(e - 1)]);
      term *= cv[cv.index_of_codes(sub.data(), static_cast<int>(sub.size()))];
    }
    total += term;
  }
  return total;
}

// A valid (tracial, conjugate-symmetric) moment vector: a random small
// matrix tuple, optionally shifted.
MomentVector random_moments(RngStream& rng, int d, int max_len) {
  MatrixTuple x = sample_ginibre(3, d, rng);
  for (int j = 0; j < d; ++j) x[j] += Complex(rng.normal(), rng.normal()) * 0.3 * Matrix::Identity(3, 3);
  return matrix_moments(x, max_len);
}

MomentVector real_moments_of(std::vector<double> m) { return MomentVector::from_real_moments(m); }

double max_diff(const WordTable& a, const WordTable& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace

TEST_CASE("enumerate_nc counts and structure") {
  CHECK(enumerate_nc(1).size() == 1);
  CHECK(enumerate_nc(3).size() == 5);
  CHECK(enumerate_nc(4).size() == 14);
  for (int n = 1; n <= 10; ++n) CHECK(static_cast<long>(enumerate_nc(n).size()) == catalan(n));
  CHECK_THROWS_AS(enumerate_nc(0), std::invalid_argument);
  CHECK_THROWS_AS(enumerate_nc(13), std::invalid_argument);

  for (int n = 1; n <= 7; ++n) {
    const auto nc = enumerate_nc(n);
    for (const auto& p : nc) {
      CHECK(p.is_noncrossing());
      CHECK(p.covers_ground_set());
    }
    for (std::size_t i = 1; i < nc.size(); ++i) CHECK(nc[i - 1] < nc[i]);
    // Brute force: all set partitions minus the crossing ones.
    std::size_t brute = 0;
    for (const auto& p : all_set_partitions(n)) brute += crossing(p) ? 0 : 1;
    CHECK(brute == nc.size());
  }
  CHECK(all_set_partitions(4).size() == 15);
}

TEST_CASE("cumulant examples") {
  const auto semi = reference_law(ReferenceLaw::Semicircular, 8);
  const auto k = moments_to_cumulants(semi);
  for (std::size_t i = 1; i < k.size(); ++i) {
    const Complex expected = k.codes_at(i).size() == 2 ? 1.0 : 0.0;
    CHECK(std::abs(k[i] - expected) < 1e-12);
  }
  CHECK(semi.power_moment(2).real() == doctest::Approx(1));
  CHECK(semi.power_moment(4).real() == doctest::Approx(2));
  CHECK(semi.power_moment(6).real() == doctest::Approx(5));
  CHECK(std::abs(semi.power_moment(6) - Complex(static_cast<double>(enumerate_nc(6).size()) / 132.0 * 5.0)) < 1e-12);

  // Point mass at c: kappa_1 = c, higher cumulants vanish.
  const double c = 0.7;
  const auto point = moments_to_cumulants(real_moments_of({1, c, c * c, c * c * c, c * c * c * c}));
  CHECK(std::abs(point.at(parse_word("x1")) - c) < 1e-15);
  CHECK(std::abs(point.at(parse_word("x1 x1"))) < 1e-15);
  CHECK(std::abs(point.at(parse_word("x1 x1 x1 x1"))) < 1e-14);

  // Brute-force inversion at m <= 4 for a generic single-variable law.
  const std::vector<double> m = {1, 0.3, 1.2, 0.5, 2.9};
  const auto km = moments_to_cumulants(real_moments_of(m));
  const double k1 = m[1], k2 = m[2] - m[1] * m[1];
  const double k3 = m[3] - 3 * k2 * k1 - k1 * k1 * k1;
  const double k4 = m[4] - (4 * k3 * k1 + 2 * k2 * k2 + 6 * k2 * k1 * k1 + k1 * k1 * k1 * k1);
  CHECK(km.at(parse_word("x1 x1")).real() == doctest::Approx(k2).epsilon(1e-14));
  CHECK(km.at(parse_word("x1 x1 x1")).real() == doctest::Approx(k3).epsilon(1e-14));
  CHECK(km.at(parse_word("x1 x1 x1 x1")).real() == doctest::Approx(k4).epsilon(1e-14));

  const MomentVector unit(2, 4);
  const auto ku = moments_to_cumulants(unit);
  for (std::size_t i = 0; i < ku.size(); ++i) CHECK(ku[i] == Complex(0, 0));
}

TEST_CASE("cumulants to moments examples") {
  CumulantVector circ(1, 4);
  circ.at(parse_word("x1 x1*")) = 1.0;
  circ.at(parse_word("x1* x1")) = 1.0;
  const auto mv = cumulants_to_moments(circ);
  CHECK(std::abs(mv.at(parse_word("x1 x1*")) - 1.0) < 1e-15);
  CHECK(std::abs(mv.at(parse_word("x1 x1"))) < 1e-15);
  CHECK(std::abs(mv.at(parse_word("x1 x1* x1 x1*")) - 2.0) < 1e-15);
  CHECK(std::abs(mv.at(parse_word("x1 x1 x1* x1*")) - 1.0) < 1e-15);

  CumulantVector semi(1, 4);
  for (auto w : {"x1 x1", "x1 x1*", "x1* x1", "x1* x1*"}) semi.at(parse_word(w)) = 1.0;
  CHECK(std::abs(cumulants_to_moments(semi).power_moment(4) - 2.0) < 1e-15);

  const auto delta = cumulants_to_moments(CumulantVector(2, 3));
  CHECK(delta[0] == Complex(1, 0));
  for (std::size_t i = 1; i < delta.size(); ++i) CHECK(delta[i] == Complex(0, 0));
}

TEST_CASE("first-block recursion agrees with the explicit NC-partition sum") {
  RngStream rng(1, 0);
  CumulantVector cv(2, 6);
  for (std::size_t i = 1; i < cv.size(); ++i) cv[i] = Complex(rng.normal(), rng.normal()) * 0.5;
  const auto mv = cumulants_to_moments(cv);
  for (std::size_t i = 0; i < mv.size(); i += 7) {
    CHECK(std::abs(mv[i] - moment_from_partitions(cv, mv.codes_at(i))) < 1e-10 * std::max(1.0, std::abs(mv[i])));
  }
}

TEST_CASE("round trip on random moment vectors") {
  RngStream rng(2, 0);
  for (auto [d, len] : {std::pair{1, 8}, std::pair{2, 8}, std::pair{3, 8}}) {
    const auto mv = random_moments(rng, d, len);
    const auto back = cumulants_to_moments(moments_to_cumulants(mv));
    INFO("d=" << d << " len=" << len);
    CHECK(max_diff(back, mv) < 1e-12);
  }
  // Unstructured tables (not moment sequences of any law) still invert; the
  // cancellations are larger, so the check is relative.
  MomentVector raw(2, 8);
  for (std::size_t i = 1; i < raw.size(); ++i) raw[i] = Complex(2 * rng.uniform() - 1, 2 * rng.uniform() - 1);
  CHECK(max_diff(cumulants_to_moments(moments_to_cumulants(raw)), raw) < 1e-10);
}

TEST_CASE("free product moments") {
  const auto a = reference_law(ReferenceLaw::Semicircular, 6);
  const auto b = reference_law(ReferenceLaw::Semicircular, 6);
  const auto ab = free_product_moments(a, b, 6);
  CHECK(ab.d() == 2);
  CHECK(std::abs(ab.at(parse_word("x1 x2 x1 x2"))) < 1e-14);
  CHECK(std::abs(ab.at(parse_word("x1 x1 x2 x2")) - 1.0) < 1e-14);

  RngStream rng(3, 0);
  const auto ra = matrix_moments(sample_ginibre(5, 2, rng), 4);
  const auto zero = reference_law(ReferenceLaw::Circular, 4);  // overwritten below
  MomentVector pm0(1, 4);  // point mass at 0
  const auto joint = free_product_moments(ra, pm0, 4);
  for (std::size_t i = 0; i < joint.size(); ++i) {
    const auto codes = joint.codes_at(i);
    const bool has_b = std::any_of(codes.begin(), codes.end(), [](int c) { return c >= 4; });
    if (has_b) {
      CHECK(std::abs(joint[i]) < 1e-13);
    } else {
      CHECK(std::abs(joint[i] - ra[ra.index_of_codes(codes.data(), static_cast<int>(codes.size()))]) < 1e-12);
    }
  }
  (void)zero;
  CHECK_THROWS_AS(free_product_moments(a, reference_law(ReferenceLaw::Semicircular, 3), 4), std::invalid_argument);
}

TEST_CASE("free convolution") {
  const auto s = reference_law(ReferenceLaw::Semicircular, 6);
  const auto ss = free_convolve(s, s, 6);
  CHECK(ss.power_moment(2).real() == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(ss.power_moment(4).real() == doctest::Approx(8.0).epsilon(1e-14));

  const auto delta0 = real_moments_of({1, 0, 0, 0, 0, 0, 0});
  CHECK(max_diff(free_convolve(s, delta0, 6), s) < 1e-14);

  const double a = 0.4, b = -1.3;
  std::vector<double> da{1}, db{1}, dab{1};
  for (int k = 1; k <= 6; ++k) {
    da.push_back(std::pow(a, k));
    db.push_back(std::pow(b, k));
    dab.push_back(std::pow(a + b, k));
  }
  CHECK(max_diff(free_convolve(real_moments_of(da), real_moments_of(db), 6), real_moments_of(dab)) < 1e-12);

  // Commutativity / associativity on random compactly supported laws.
  RngStream rng(4, 0);
  auto random_law = [&]() {
    std::vector<double> atoms(5), m(7, 0.0);
    for (double& x : atoms) x = 2 * rng.uniform() - 1;
    for (int k = 0; k <= 6; ++k) {
      for (double x : atoms) m[static_cast<std::size_t>(k)] += std::pow(x, k) / 5.0;
    }
    return real_moments_of(m);
  };
  for (int t = 0; t < 10; ++t) {
    const auto p = random_law(), q = random_law(), r = random_law();
    CHECK(max_diff(free_convolve(p, q, 6), free_convolve(q, p, 6)) < 1e-12);
    CHECK(max_diff(free_convolve(free_convolve(p, q, 6), r, 6), free_convolve(p, free_convolve(q, r, 6), 6)) < 1e-12);
  }

  const auto circ = reference_law(ReferenceLaw::Circular, 4);
  CHECK_THROWS_AS(free_convolve(circ, circ, 4), std::invalid_argument);
}

TEST_CASE("reference laws") {
  const auto semi = reference_law(ReferenceLaw::Semicircular, 6);
  CHECK(std::abs(semi.power_moment(6) - 5.0) < 1e-14);
  const auto circ = reference_law(ReferenceLaw::Circular, 4);
  CHECK(std::abs(circ.at(parse_word("x1 x1"))) < 1e-15);
  CHECK(std::abs(circ.at(parse_word("x1 x1*")) - 1.0) < 1e-15);
  const auto fam = reference_law(ReferenceLaw::FreeCircularFamily, 4, 2);
  CHECK(std::abs(fam.at(parse_word("x1 x2*"))) < 1e-15);
  CHECK(std::abs(fam.at(parse_word("x1 x1* x2 x2*")) - 1.0) < 1e-15);
  CHECK(parse_reference_law("free_circular_family") == ReferenceLaw::FreeCircularFamily);
  CHECK_THROWS_AS(parse_reference_law("cauchy"), std::invalid_argument);
  for (const auto* mv : {&semi, &circ, &fam}) {
    CHECK(mv->conjugate_symmetry_defect() < 1e-14);
    CHECK(mv->traciality_defect() < 1e-14);
  }
}

TEST_CASE("matrix moments are tracial and conjugate symmetric") {
  RngStream rng(5, 0);
  const auto mv = matrix_moments(sample_ginibre(6, 2, rng), 5);
  CHECK(mv.conjugate_symmetry_defect() < 1e-12);
  CHECK(mv.traciality_defect() < 1e-12);
  CHECK(max_diff(mv, matrix_moments(sample_ginibre(6, 2, rng), 5)) > 1e-3);
}

TEST_CASE("haar-conjugated matrices approximate the free product") {
  RngStream rng(6, 0);
  const int n = 512;
  const Matrix a = sample_gue(n, rng);
  Eigen::VectorXcd dvals(n);
  for (int i = 0; i < n; ++i) dvals(i) = i < n / 2 ? 1.0 : -1.0;
  const Matrix u = sample_haar_unitary(n, rng);
  const Matrix b = u * Matrix(dvals.asDiagonal()) * u.adjoint();
  const auto joint = matrix_moments(MatrixTuple({a, b}), 4);
  const auto predicted = free_product_moments(matrix_moments(MatrixTuple({a}), 4), matrix_moments(MatrixTuple({b}), 4), 4);
  CHECK(max_diff(joint, predicted) < 0.05);
}

TEST_CASE("json round trip") {
  const auto fam = reference_law(ReferenceLaw::FreeCircularFamily, 3, 2);
  const auto j = to_json(fam);
  CHECK(j.at("values").contains("x1 x1* x2"));
  const auto back = moment_vector_from_json(nlohmann::json::parse(j.dump()));
  CHECK(max_diff(back, fam) == 0.0);
  CHECK(back.d() == 2);
}
