#include <doctest.h>

#include <cmath>
#include <numbers>

#include "mslab/microstates.hpp"

using namespace mslab;

namespace {

Constraint con(const char* f, double target, double tol) { return {parse_formula(f), target, tol}; }

NeighborhoodSpec single(std::vector<Constraint> cs, double r = 4.0, Field field = Field::Complex) {
  NeighborhoodSpec s;
  s.d = 1;
  s.r = r;
  s.field = field;
  s.constraints = std::move(cs);
  s.validate();
  return s;
}

SamplingConfig sampling(std::int64_t samples, std::uint64_t seed = 1) {
  SamplingConfig cfg;
  cfg.samples = samples;
  cfg.seed = seed;
  return cfg;
}

bool subset(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] && !b[i]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("membership examples") {
  const auto centred = single({con("tr.re(x1)", 0.0, 0.1)});
  CHECK(is_microstate(MatrixTuple::zeros(5, 1), centred) == Membership::In);

  const auto domain = single({con("tr.re(x1)", 0.0, 10.0)}, 1.0);
  MatrixTuple big({Matrix(2.0 * Matrix::Identity(3, 3))});
  CHECK(is_microstate(big, domain) == Membership::Out);

  const auto m2 = single({con("tr.re(x1 x1)", 1.0, 0.05)}, 10.0, Field::SelfAdjoint);
  int inside = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RngStream rng(seed, 3);
    inside += is_microstate(MatrixTuple({sample_gue(512, rng)}), m2) == Membership::In;
  }
  CHECK(inside >= 18);

  CHECK_THROWS_AS(is_microstate(MatrixTuple::zeros(3, 2), centred), std::invalid_argument);
}

TEST_CASE("quantified constraints report boundary on exhausted budgets") {
  NeighborhoodSpec spec;
  spec.r = 4.0;
  spec.kind = SpecKind::Full;
  spec.constraints = {con("sup{y1 in D(1)} tr.re(y1 x1*)", 0.0, 5.0)};
  spec.validate();
  FormulaConfig tight;
  tight.opt.max_iters = 1;
  tight.opt.starts = 1;
  RngStream rng(2, 0);
  const auto x = sample_ginibre(4, 1, rng);
  CHECK(is_microstate(x, spec, tight) == Membership::Boundary);
  CHECK(is_microstate(x, spec) == Membership::In);
}

TEST_CASE("ball volume calibration") {
  const auto ball = single({con("sqrt(tr.re(x1 x1*))", 0.0, 1.0)});
  const auto est = estimate_volume(ball, 4, sampling(100'000));
  const double exact = log_ball_volume(32, 1.0) / 16.0 + 2.0 * std::log(4.0);
  CHECK(std::abs(est.h - exact) < 0.01);
  CHECK(std::abs(est.h - (1.0 + std::log(std::numbers::pi))) < 0.2);
  CHECK(est.hits > 0);
  CHECK(std::isfinite(est.ci));
  // Self-adjoint coordinates: the ball has n^2 real dimensions.
  const auto sa_ball = single({con("sqrt(tr.re(x1 x1))", 0.0, 1.0)}, 4.0, Field::SelfAdjoint);
  const auto sa = estimate_volume(sa_ball, 4, sampling(100'000));
  CHECK(std::abs(sa.h - (log_ball_volume(16, 1.0) / 16.0 + std::log(4.0))) < 0.01);
}

TEST_CASE("empty neighbourhood gives minus infinity") {
  const auto empty = single({con("tr.re(x1)", 5.0, 0.01)});
  const auto est = estimate_volume(empty, 4, sampling(2000));
  CHECK(est.hits == 0);
  CHECK(std::isinf(est.log_volume));
  CHECK(est.log_volume < 0);
  CHECK(std::isinf(est.h));

  const auto contradictory = single({con("tr.re(x1)", 0.0, 0.01), con("tr.re(x1)", 1.0, 0.01)});
  const auto ent = estimate_entropy(contradictory, {2, 3, 4}, sampling(2000));
  for (const auto& e : ent.per_n) CHECK(std::isinf(e.h));
  CHECK(!ent.trend.slope.has_value());
}

TEST_CASE("set monotonicity, union bound and radius stability on shared samples") {
  const auto tight = single({con("tr.re(x1 x1*)", 1.0, 0.1), con("tr.re(x1)", 0.0, 0.2)});
  const auto loose = single({con("tr.re(x1 x1*)", 1.0, 0.2), con("tr.re(x1)", 0.0, 0.2)});
  const auto looser = single({con("tr.re(x1 x1*)", 1.0, 0.4), con("tr.re(x1)", 0.0, 0.4)});
  const auto a = single({con("tr.re(x1)", 0.15, 0.05)});
  const auto b = single({con("tr.re(x1)", -0.15, 0.05)});
  const auto small_r = single({con("sqrt(tr.re(x1 x1*))", 0.0, 0.5)}, 1.5);
  const auto large_r = single({con("sqrt(tr.re(x1 x1*))", 0.0, 0.5)}, 3.0);
  const int n = 4;
  const auto shared = sample_specs({tight, loose, looser, a, b, small_r, large_r}, n, sampling(10'000));

  CHECK(subset(shared.masks[0], shared.masks[1]));
  CHECK(subset(shared.masks[1], shared.masks[2]));
  const auto e0 = estimate_from_mask(shared.log_weight, shared.masks[0], n, 1, Field::Complex);
  const auto e1 = estimate_from_mask(shared.log_weight, shared.masks[1], n, 1, Field::Complex);
  CHECK(e0.log_volume <= e1.log_volume);

  std::vector<std::uint8_t> both(shared.masks[3].size()), either(shared.masks[3].size());
  for (std::size_t i = 0; i < both.size(); ++i) {
    both[i] = shared.masks[3][i] & shared.masks[4][i];
    either[i] = shared.masks[3][i] | shared.masks[4][i];
  }
  CHECK(std::count(both.begin(), both.end(), 1) == 0);
  const auto ea = estimate_from_mask(shared.log_weight, shared.masks[3], n, 1, Field::Complex);
  const auto eb = estimate_from_mask(shared.log_weight, shared.masks[4], n, 1, Field::Complex);
  const auto eu = estimate_from_mask(shared.log_weight, either, n, 1, Field::Complex);
  CHECK(ea.hits > 0);
  CHECK(eb.hits > 0);
  CHECK(eu.h <= std::max(ea.h, eb.h) + std::log(2.0) / (n * n));

  CHECK(shared.masks[5] == shared.masks[6]);
}

TEST_CASE("quantifier-free and full declarations agree bitwise") {
  auto qf = single({con("tr.re(x1 x1*)", 1.0, 0.2), con("tr.im(x1 x1)", 0.0, 0.2)});
  auto full = qf;
  full.kind = SpecKind::Full;
  const auto cfg = sampling(5000, 11);
  const auto a = estimate_entropy(qf, {2, 3}, cfg);
  const auto b = estimate_entropy(full, {2, 3}, cfg);
  for (std::size_t k = 0; k < a.per_n.size(); ++k) {
    CHECK(a.per_n[k].h == b.per_n[k].h);
    CHECK(a.per_n[k].hits == b.per_n[k].hits);
  }
}

TEST_CASE("serial and parallel sampling agree bitwise; seeds matter") {
  const auto spec = single({con("tr.re(x1 x1*)", 1.0, 0.2)});
  auto cfg = sampling(4000, 5);
  const auto par = estimate_volume(spec, 3, cfg);
  cfg.execution = Execution::Serial;
  const auto ser = estimate_volume(spec, 3, cfg);
  CHECK(par.log_volume == ser.log_volume);
  CHECK(par.hits == ser.hits);
  cfg.seed = 6;
  CHECK(estimate_volume(spec, 3, cfg).log_volume != par.log_volume);
}

TEST_CASE("entropy trend fit") {
  std::vector<VolumeEstimate> pts;
  for (int n : {2, 4, 8}) {
    VolumeEstimate e;
    e.n = n;
    e.h = 1.5 - 3.0 / (n * n);
    pts.push_back(e);
  }
  const auto t = fit_trend(pts);
  CHECK(t.value_at_largest_n == doctest::Approx(1.5 - 3.0 / 64));
  CHECK(*t.intercept == doctest::Approx(1.5));
  CHECK(*t.slope == doctest::Approx(-3.0));

  const auto spec = single({con("tr.re(x1)", 0.0, 0.3)});
  CHECK_THROWS_AS(estimate_entropy(spec, {4, 3}, sampling(1000)), std::invalid_argument);
  CHECK_THROWS_AS(estimate_entropy(spec, {17}, sampling(1000)), std::invalid_argument);
  CHECK_THROWS_AS(estimate_volume(spec, 3, sampling(10)), std::invalid_argument);
}

TEST_CASE("covering bound") {
  double prev = -1e300;
  for (double eps : {1e-6, 1e-4, 1e-2, 0.1, 0.5, 0.9}) {
    const double v = covering_upper_bound(2, 1.0, eps, 3.0);
    CHECK(v > prev);
    prev = v;
  }
  CHECK(covering_upper_bound(1, 1.0, 1e-300, 2.0) < -600);
  CHECK_THROWS_AS(covering_upper_bound(1, 1.0, 1.0, 2.0), std::invalid_argument);

  // d = 1, r = 1, C = e, eps = 1e-3, term by term.
  const double direct = 1.0 + std::log(std::numbers::pi) + 1.0 + 2.0 * std::log(3.0) + std::log(1e-3);
  CHECK(covering_upper_bound(1, 1.0, 1e-3, std::numbers::e) == doctest::Approx(direct).epsilon(1e-14));

  // Stirling constant: (1/n^2) log((d n^2)!) - d log(n^2) -> d (log d - 1).
  for (int d : {1, 2, 3}) {
    const double n2 = 1e6;
    const double stirling = std::lgamma(d * n2 + 1.0) / n2 - d * std::log(n2);
    CHECK(stirling == doctest::Approx(d * (std::log(d) - 1.0)).epsilon(1e-4));
  }

  // Fixed-spectrum self-adjoint neighbourhood at n = 8 stays below the bound.
  const auto orbit = single({con("tr.re(x1)", 0.0, 0.1), con("tr.re(x1 x1)", 1.0, 0.1),
                             con("tr.re(x1 x1 x1)", 0.0, 0.1), con("tr.re(x1 x1 x1 x1)", 1.0, 0.1)},
                            1.5, Field::SelfAdjoint);
  const auto est = estimate_volume(orbit, 8, sampling(20'000));
  CHECK(est.h < covering_upper_bound(1, 1.5, 0.1, std::numbers::e));
}

TEST_CASE("existential membership") {
  RngStream rng(4, 0);
  const auto x = project_opnorm_ball(sample_ginibre(4, 1, rng), 1.0);

  NeighborhoodSpec degenerate = single({con("tr.re(x1 x1*)", hs_norm_sq(x), 0.01)}, 1.0);
  degenerate.kind = SpecKind::Existential;
  const auto r0 = existential_membership(x, degenerate);
  CHECK(r0.verdict == is_microstate(x, degenerate));
  CHECK(!r0.heuristic);

  NeighborhoodSpec near;
  near.d = 1;
  near.r = 1.0;
  near.kind = SpecKind::Existential;
  near.existential_vars = 1;
  near.constraints = {con("sqrt(tr.re(x2 x2* - x2 x1* - x1 x2* + x1 x1*))", 0.0, 0.01)};
  near.validate();
  const auto r1 = existential_membership(x, near);
  CHECK(r1.verdict == Membership::In);
  CHECK(hs_norm(r1.witness - x) < 0.01);
  CHECK(is_microstate(x, near) == Membership::In);

  NeighborhoodSpec unreachable = near;
  unreachable.constraints = {con("tr.re(x2* x2)", 1.0, 0.05), con("tr.re(x2)", 1.5, 0.1)};
  const auto r2 = existential_membership(x, unreachable);
  CHECK(r2.verdict == Membership::Out);
  CHECK(r2.heuristic);
}

TEST_CASE("spec json and validation") {
  const auto j = nlohmann::json::parse(R"js({"d": 2, "r": 3, "kind": "quantifier_free",
      "constraints": [{"formula": "tr.re(x1 x2*)", "target": 0, "tol": 0.1}]})js");
  const auto spec = spec_from_json(j);
  CHECK(spec.d == 2);
  const auto back = spec_from_json(to_json(spec));
  CHECK(formula_equal(*back.constraints[0].phi, *spec.constraints[0].phi));

  auto bad = j;
  bad["constraints"][0]["tol"] = 0.0;
  CHECK_THROWS_AS(spec_from_json(bad), SpecError);
  bad = j;
  bad["constraints"][0]["formula"] = "tr.re(x1 x3)";
  try {
    spec_from_json(bad);
    FAIL("expected SpecError");
  } catch (const SpecError& e) {
    CHECK(std::string(e.what()).find("x3") != std::string::npos);
  }
  bad = j;
  bad["constraints"][0]["formula"] = "tr.re(x1";
  CHECK_THROWS_WITH_AS(spec_from_json(bad), doctest::Contains("position"), SpecError);
  bad = j;
  bad["constraints"][0]["formula"] = "sup{y1 in D(1)} tr.re(y1 x1)";
  CHECK_THROWS_AS(spec_from_json(bad), SpecError);
  bad["kind"] = "full";
  CHECK_NOTHROW(spec_from_json(bad));
}

TEST_CASE("independent join ratio") {
  const auto box = single({con("tr.re(x1)", 0.0, 0.1), con("tr.re(x1 x1)", 1.0, 0.1)}, 4.0, Field::SelfAdjoint);
  McmcConfig cfg;
  cfg.n = 6;
  cfg.burn_in = 500;
  cfg.samples = 2000;
  cfg.seed = 2;

  const auto marginal = join_specs(box, box);
  const auto same = independent_join_ratio(box, box, marginal, cfg);
  CHECK(same.ratio == 1.0);
  CHECK(same.acceptance[0] > 0.05);

  const auto contradictory = join_specs(box, box, {con("tr.re(x1 x2)", 5.0, 0.1)});
  CHECK(independent_join_ratio(box, box, contradictory, cfg).ratio == 0.0);

  const auto empty = single({con("tr.re(x1)", 3.0, 0.01)}, 4.0, Field::SelfAdjoint);
  cfg.init_tries = 200;
  CHECK_THROWS_AS(independent_join_ratio(empty, box, join_specs(empty, box), cfg), ChainFailure);
}
