#include <doctest.h>

#include <cmath>
#include <fstream>

#include "mslab/freeness_sim.hpp"
#include "mslab/io.hpp"

using namespace mslab;

namespace {

nlohmann::json load(const std::string& name) {
  std::ifstream in(std::string(MSLAB_FIXTURE_DIR) + "/" + name);
  REQUIRE(in.good());
  return nlohmann::json::parse(in);
}

double binom(int n, int k) { return std::round(std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0))); }

Constraint con(const char* f, double target, double tol) { return {parse_formula(f), target, tol}; }

}  // namespace

TEST_CASE("semicircle quantiles and power traces") {
  CHECK(semicircle_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(semicircle_quantile(0.0) == doctest::Approx(-2.0));
  CHECK(semicircle_quantile(1.0) == doctest::Approx(2.0));
  const auto q = LawSpec::semicircle().quantiles(2000);
  double m2 = 0.0, m4 = 0.0;
  for (double v : q) {
    m2 += v * v;
    m4 += v * v * v * v;
  }
  CHECK(m2 / 2000 == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(m4 / 2000 == doctest::Approx(2.0).epsilon(1e-3));

  RngStream rng(1, 0);
  const Matrix h = sample_gue(9, rng);
  const auto pt = power_traces(h, 7);
  Matrix p = Matrix::Identity(9, 9);
  for (int k = 0; k <= 7; ++k) {
    CHECK(pt[static_cast<std::size_t>(k)] == doctest::Approx(normalized_trace(p).real()).epsilon(1e-12));
    p = p * h;
  }
}

TEST_CASE("law and tuple json") {
  const auto law = law_from_json(nlohmann::json::parse(R"js({"atoms": [[-1, 0.5], [1, 0.5]]})js"));
  CHECK(law.kind == LawSpec::Kind::Atoms);
  CHECK(law_from_json(to_json(law)).atoms.atoms == law.atoms.atoms);
  CHECK(law_from_json("semicircle").kind == LawSpec::Kind::Semicircle);
  CHECK_THROWS_AS(law_from_json("cauchy"), std::invalid_argument);

  RngStream rng(2, 0);
  const auto x = sample_ginibre(3, 2, rng);
  const auto back = tuple_from_json(to_json(x));
  CHECK(hs_norm(back - x) == 0.0);
  CHECK_THROWS_AS(tuple_from_json(nlohmann::json::parse(R"js({"matrices": [{"re": [[1, 2]]}]})js")),
                  std::invalid_argument);
}

TEST_CASE("asymptotic freeness") {
  FreenessConfig cfg;
  cfg.n_list = {64, 256};
  cfg.trials = 4;
  cfg.seed = 3;
  const auto semi = LawSpec::semicircle();
  const auto rows = asymptotic_freeness_experiment({semi}, {semi}, cfg);
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].mean_deviation < rows[0].mean_deviation);
  CHECK(rows[1].max_deviation < 0.05);
  for (const auto& r : rows) {
    CHECK(r.self_invariance < 1e-10);
    for (double d : r.per_trial) CHECK(d >= 0.0);
  }

  // Scalars are free from everything.
  const auto id = LawSpec::from_atoms({{1.0, 1.0}});
  const auto scalar = asymptotic_freeness_experiment({semi}, {id}, cfg);
  for (const auto& r : scalar) CHECK(r.max_deviation < 1e-10);

  auto serial = cfg;
  serial.execution = Execution::Serial;
  serial.n_list = {64};
  auto parallel = serial;
  parallel.execution = Execution::Parallel;
  CHECK(asymptotic_freeness_experiment({semi}, {semi}, serial)[0].per_trial ==
        asymptotic_freeness_experiment({semi}, {semi}, parallel)[0].per_trial);
}

TEST_CASE("free convolution experiments") {
  ConvolutionConfig cfg;
  cfg.n = 256;
  cfg.trials = 2;
  cfg.max_len = 6;
  const auto semi = LawSpec::semicircle();

  const auto zero = free_convolution_experiment(LawSpec::from_atoms({{0.0, 1.0}}), semi, cfg);
  for (const auto& r : zero) CHECK(r.deviation < 1e-10);

  // A + cI: binomial shift of the moments of A.
  const double c = 0.7;
  const auto shifted = free_convolution_experiment(semi, LawSpec::from_atoms({{c, 1.0}}), cfg);
  const auto q = semi.quantiles(cfg.n);
  std::vector<double> ma(7, 0.0);
  for (int k = 0; k <= 6; ++k) {
    for (double v : q) ma[static_cast<std::size_t>(k)] += std::pow(v, k) / cfg.n;
  }
  for (const auto& r : shifted) {
    double expected = 0.0;
    for (int j = 0; j <= r.k; ++j) expected += binom(r.k, j) * std::pow(c, j) * ma[static_cast<std::size_t>(r.k - j)];
    CHECK(std::abs(r.empirical - expected) < 1e-10);
  }

  cfg.n = 512;
  const auto ss = free_convolution_experiment(semi, semi, cfg);
  CHECK(std::abs(ss[1].empirical - 2.0) < 0.05);
  CHECK(std::abs(ss[3].empirical - 8.0) < 0.2);
  for (const auto& r : ss) CHECK(r.deviation < 0.05 * std::max(1.0, std::abs(r.oracle)));
  CHECK(ss[5].limit == doctest::Approx(40.0));  // 2^3 Catalan(3)

  const auto bern = LawSpec::from_atoms({{-1.0, 0.5}, {1.0, 0.5}});
  const auto bb = free_convolution_experiment(bern, bern, cfg);
  // Arcsine law on [-2, 2]: m_{2k} = binom(2k, k).
  for (const auto& r : bb) {
    const double arcsine = r.k % 2 ? 0.0 : binom(r.k, r.k / 2);
    CHECK(r.limit == doctest::Approx(arcsine).epsilon(1e-12));
    CHECK(r.deviation < 0.05);
  }
}

TEST_CASE("entropy additivity") {
  NeighborhoodSpec box = spec_from_json(load("semicircle_box.json"));
  SamplingConfig cfg;
  cfg.samples = 20'000;
  cfg.seed = 4;
  const auto exact = entropy_additivity_experiment(box, box, {}, {4}, cfg);
  REQUIRE(exact.size() == 1);
  CHECK(exact[0].first.hits > 0);
  CHECK(exact[0].ratio == 1.0);
  CHECK(exact[0].h_joint == exact[0].first.h + exact[0].second.h);
  CHECK(exact[0].deficit == 0.0);
  CHECK(exact[0].first.log_volume != exact[0].second.log_volume);

  const auto none = entropy_additivity_experiment(box, box, {con("tr.re(x1 x2)", 5.0, 0.1)}, {4}, cfg);
  CHECK(none[0].ratio == 0.0);
  CHECK(std::isinf(none[0].h_joint));

  const auto near = entropy_additivity_experiment(box, box, {con("tr.re(x1 x2)", 0.0, 0.1)}, {4}, cfg);
  CHECK(near[0].ratio > 0.0);
  CHECK(near[0].ratio < 1.0);
  CHECK(near[0].deficit == doctest::Approx(-std::log(near[0].ratio) / 16.0));
}

TEST_CASE("example 5.3 runner") {
  const auto fx = orbit_fixture_from_json(load("example_5_3.json"));
  Example53Config cfg;
  cfg.trials = 20;
  const auto rep = example_5_3_runner(fx, cfg);
  CHECK(rep.psi_fixture > 0.3);
  // Sorted-spectrum matching of the fixture: sqrt(((sqrt2 - 1)^2 * 2 + 2) / 4).
  CHECK(rep.psi_fixture == doctest::Approx(std::sqrt((2.0 * std::pow(std::sqrt(2.0) - 1.0, 2) + 2.0) / 4.0)).epsilon(1e-6));
  CHECK(rep.mean_same < 1e-6);
  CHECK(rep.mean_other - rep.mean_same > 0.2);
  CHECK(rep.matched_deviation < 0.05);
  CHECK(std::abs(rep.moments_x.power_moment(4) - rep.moments_y.power_moment(4)) > 0.5);

  OrbitFixture same{fx.x, fx.x, 4, -1.0};
  const auto rs = example_5_3_runner(same, cfg);
  CHECK(rs.mean_other < 1e-6);
  CHECK(std::abs(rs.mean_same - rs.mean_other) < 1e-6);

  OrbitFixture lying = fx;
  lying.matched_degree = 4;
  CHECK_THROWS_WITH_AS(example_5_3_runner(lying, cfg), doctest::Contains("moments differ"), FixtureError);
  OrbitFixture greedy = fx;
  greedy.gap = 2.0;
  CHECK_THROWS_AS(example_5_3_runner(greedy, cfg), FixtureError);
}
