#include <doctest.h>

#include <cmath>

#include "jumpstop/error.hpp"
#include "jumpstop/problem_spec.hpp"
#include "jumpstop/validate.hpp"

using namespace jumpstop;

namespace {

const RegressionBasis kBasis = RegressionBasis::piecewise_linear(20);

JumpDiffusionModel gbm(double mu, double s) {
  JumpDiffusionModel m;
  m.drift = [mu](double x) { return mu * x; };
  m.diffusion = [s](double x) { return s * x; };
  m.jump_size = no_jump;
  m.lipschitz_C = std::max(std::abs(mu), s);
  return m;
}

ObstacleSpec put(double strike, double horizon) {
  const auto payoff = [strike](double x) { return std::max(strike - x, 0.0); };
  return {[payoff](double, double x) { return payoff(x); }, payoff, horizon, 1, 1.0, false};
}

ObstacleSpec constant(double h, double g, double horizon) {
  return {[h](double, double) { return h; }, [g](double) { return g; }, horizon, 0, 1.0, true};
}

ProblemSpec spec(const char* name) {
  return load_problem_spec(std::string(JUMPSTOP_SPEC_DIR) + "/" + name);
}

}  // namespace

TEST_CASE("estimate constants") {
  CHECK_THROWS_AS(EstimateConstants(0.0, 10.0, 1.0), ConfigError);
  CHECK_THROWS_AS(EstimateConstants(2.0, 100.0, 1.0), ConfigError);
  CHECK_THROWS_AS(EstimateConstants(1.0, 4.9, 1.0), ConfigError);
  CHECK_NOTHROW(EstimateConstants(1.0, 5.0, 1.0));
  const auto t = EstimateConstants::tightest(0.5);
  CHECK(t.eta() == doctest::Approx(4.0));
  CHECK(t.beta() == doctest::Approx(0.75 + 1.0));
  CHECK(t.growth_constant(1.0) == doctest::Approx(std::exp(0.75 + 1.0) * 4.0));
  CHECK(EstimateConstants::tightest(2.0).growth_constant(0.5) ==
        doctest::Approx(std::exp((12.0 + 4.0) * 0.5)));
}

TEST_CASE("cross-validation") {
  SUBCASE("constant problem") {
    const Problem p{gbm(0.05, 0.2), FullDriver{zero_driver()}, constant(1, 1, 1.0), 0.0, 1.0};
    const auto s = solve_problem(p, GridParams{0.0, 3.0, 61, 20});
    const auto rep = cross_validate(s, p, McParams{2000, 10, 1, kBasis, 3}, 5, 0.02, 1);
    CHECK(rep.pass);
    CHECK(rep.max_abs_gap < 1e-10);
    CHECK(rep.probe_points.size() == 5);
  }
  SUBCASE("american put") {
    const Problem p{gbm(0.06, 0.2), FullDriver{discount_driver(0.06)}, put(1.0, 0.5), 0.0, 1.0};
    const auto s = solve_problem(p, GridParams{});
    const auto rep = cross_validate(s, p, McParams{50000, 50, 2, kBasis, 3}, 3, 0.01, 2);
    CHECK(rep.pass);
    for (const auto& [t, x] : rep.probe_points) {
      CHECK(t >= 0.0);
      CHECK(t <= 0.4 + 1e-12);
      CHECK(std::abs(x - 1.0) <= 0.3 + 1e-12);
    }
  }
  SUBCASE("mismatched drivers are detected") {
    const ObstacleSpec claim = constant(0.0, 1.0, 1.0);
    const Problem discounted{gbm(0.06, 0.2), FullDriver{discount_driver(0.06)}, claim, 0.0, 1.0};
    const Problem flat{gbm(0.06, 0.2), FullDriver{zero_driver()}, claim, 0.0, 1.0};
    const auto s = solve_problem(discounted, GridParams{});
    const auto rep = cross_validate(s, flat, McParams{5000, 20, 3, kBasis, 3}, 3, 0.02, 3);
    CHECK_FALSE(rep.pass);
    CHECK(rep.max_abs_gap > 0.04);
  }
}

TEST_CASE("a-priori estimate") {
  const auto m = gbm(0.05, 0.2);
  const auto k = EstimateConstants::tightest(1.0);
  const McParams mc{5000, 20, 4, kBasis, 3};
  SUBCASE("identical data") {
    const auto r = apriori_gap_check(FullDriver{discount_driver(0.05)},
                                     FullDriver{discount_driver(0.05)}, put(1.0, 1.0),
                                     put(1.0, 1.0), m, 0.0, 1.0, k, mc);
    CHECK(r.y_gap == 0.0);
    CHECK(r.lhs == 0.0);
    CHECK(r.rhs == 0.0);
    CHECK(r.pass);
  }
  SUBCASE("shifted constant obstacle") {
    const auto r = apriori_gap_check(FullDriver{zero_driver()}, FullDriver{zero_driver()},
                                     constant(1.5, 1.5, 1.0), constant(1.0, 1.0, 1.0), m, 0.0,
                                     1.0, k, mc);
    CHECK(r.y_gap == doctest::Approx(0.5));
    CHECK(r.lhs == doctest::Approx(0.25));
    CHECK(r.rhs == doctest::Approx(std::exp(k.beta()) * 0.25));
    CHECK(r.pass);
  }
  SUBCASE("different drivers") {
    const auto r = apriori_gap_check(FullDriver{ambiguity_driver(0.05, 0.2)},
                                     FullDriver{discount_driver(0.1)}, put(1.1, 1.0),
                                     put(1.0, 1.0), m, 0.0, 1.0, k, mc);
    CHECK(r.lhs > 0.0);
    CHECK(r.pass);
  }
}

TEST_CASE("strict comparison closed forms") {
  const auto m = gbm(0.05, 0.2);
  const McParams mc{2000, 50, 5, kBasis, 30};
  const auto zero = [](double) { return 0.0; };
  const auto one = [](double) { return 1.0; };
  SUBCASE("zero driver") {
    const auto g = comparison_gap(FullDriver{zero_driver()}, 0.1, zero, m, 0.2, 1.0, 1.0, mc);
    CHECK(g.value == doctest::Approx(0.1 * 0.8).epsilon(1e-12));
    CHECK(std::abs(comparison_gap(FullDriver{zero_driver()}, 0.0, zero, m, 0.2, 1.0, 1.0, mc)
                       .value) < 1e-12);
  }
  SUBCASE("discounting driver") {
    const double rho = 0.2;
    const auto g = comparison_gap(FullDriver{discount_driver(rho)}, 0.1, one, m, 0.0, 1.0, 1.0, mc);
    CHECK(g.value == doctest::Approx(0.1 * (1.0 - std::exp(-rho)) / rho).epsilon(2e-3));
  }
  SUBCASE("gap doubles with eps") {
    const auto put_payoff = [](double x) { return std::max(1.0 - x, 0.0); };
    const auto r = strict_comparison_check(FullDriver{ambiguity_driver(0.05, 0.1)}, 0.1,
                                           put_payoff, m, 0.0, 1.0, 1.0, mc);
    CHECK(r.pass);
    CHECK(r.ratio == doctest::Approx(2.0).epsilon(0.05));
  }
}

TEST_CASE("growth and continuity") {
  SUBCASE("bounded problem") {
    const auto s = spec("bounded.spec");
    const std::pair<double, double> probes[] = {{0.0, -1.0}, {0.0, 0.0}, {0.5, 1.0}};
    const auto r = growth_and_continuity_check(s.problem, probes, s.mc, s.grid);
    CHECK(r.bounded_checked);
    CHECK(r.bounded_pass);
    CHECK(r.continuity_pass);
    CHECK(r.pass);
    for (const auto& p : r.probes) CHECK(p.u * p.u <= p.bound + 3.0 * p.rhs_se);
  }
  SUBCASE("constant problem has no oscillation") {
    const Problem p{gbm(0.05, 0.2), FullDriver{zero_driver()}, constant(1, 1, 1.0), 0.0, 1.0};
    const std::pair<double, double> probes[] = {{0.0, 0.5}, {0.5, 1.5}};
    const auto r = growth_and_continuity_check(p, probes, McParams{2000, 10, 6, kBasis, 3},
                                               GridParams{0.0, 3.0, 61, 20});
    for (double w : r.moduli) CHECK(w < 1e-10);
    CHECK(r.pass);
  }
  SUBCASE("put under geometric Brownian motion") {
    const Problem p{gbm(0.06, 0.2), FullDriver{discount_driver(0.06)}, put(1.0, 0.5), 0.0, 1.0};
    const std::pair<double, double> probes[] = {{0.0, 0.1}, {0.0, 1.0}, {0.0, 2.5}};
    const auto r = growth_and_continuity_check(p, probes, McParams{5000, 20, 7, kBasis, 3},
                                               GridParams{});
    CHECK_FALSE(r.bounded_checked);
    CHECK(r.pass);
  }
}

TEST_CASE("monotonicity of the risk measure") {
  const auto pairs = ordered_position_pairs(20, 8);
  REQUIRE(pairs.size() == 20);
  for (double x : {0.5, 1.0, 1.5})
    for (const auto& pr : pairs) CHECK(pr.lower(x) <= pr.upper(x));
  const auto rep = monotonicity_suite(FullDriver{ambiguity_driver(0.05, 0.2)}, gbm(0.05, 0.2),
                                      0.0, 1.0, 1.0, pairs, McParams{5000, 20, 8, kBasis, 3});
  CHECK(rep.pass);
  CHECK(rep.violations == 0);
  for (const auto& c : rep.cases)
    CHECK(c.risk_lower.value >= c.risk_upper.value - 3.0 * c.combined_se);
}
