#include <doctest.h>

#include <cmath>

#include "jumpstop/bsde.hpp"
#include "jumpstop/error.hpp"
#include "jumpstop/philox.hpp"
#include "oracles/crr.hpp"
#include "oracles/lsm.hpp"
#include "oracles/tree.hpp"

using namespace jumpstop;

namespace {

JumpDiffusionModel gbm(double mu, double s) {
  JumpDiffusionModel m;
  m.drift = [mu](double x) { return mu * x; };
  m.diffusion = [s](double x) { return s * x; };
  m.jump_size = no_jump;
  return m;
}

JumpDiffusionModel additive(double b, double s, LevyMeasure nu = {}) {
  JumpDiffusionModel m;
  m.drift = [b](double) { return b; };
  m.diffusion = [s](double) { return s; };
  m.jump_size = [](double, double e) { return e; };
  m.levy = std::move(nu);
  return m;
}

ObstacleSpec put(double strike, double horizon) {
  const auto payoff = [strike](double x) { return std::max(strike - x, 0.0); };
  return {[payoff](double, double x) { return payoff(x); }, payoff, horizon, 1, 1.0, false};
}

ObstacleSpec constant(double h, double g, double horizon) {
  return {[h](double, double) { return h; }, [g](double) { return g; }, horizon, 0, 1.0, true};
}

const RegressionBasis kBasis = RegressionBasis::piecewise_linear(20);

}  // namespace

TEST_CASE("zero driver with constant terminal") {
  const auto b = simulate(additive(0.1, 0.4), 0.0, 1.0, TimeGrid(0.0, 1.0, 10), 2000, 1);
  const std::vector<double> terminal(2000, 2.5);
  const auto sol = solve_bsde(FullDriver{zero_driver()}, additive(0.1, 0.4), b, terminal,
                              kBasis, 3);
  for (double v : sol.y.data()) CHECK(v == doctest::Approx(2.5).epsilon(1e-12));
  for (double v : sol.z.data()) CHECK(std::abs(v) < 1e-10);
  for (double v : sol.l.data()) CHECK(std::abs(v) < 1e-10);
  for (double v : sol.a_increments.data()) CHECK(v == 0.0);
}

TEST_CASE("discounting driver with unit terminal") {
  const double rho = 0.05, T = 1.0;
  const std::size_t n = 50;
  const auto m = gbm(0.05, 0.2);
  const auto b = simulate(m, 0.0, 1.0, TimeGrid(0.0, T, n), 2000, 2);
  const std::vector<double> terminal(2000, 1.0);
  const auto sol = solve_bsde(FullDriver{discount_driver(rho)}, m, b, terminal, kBasis, 20);
  const double dt = T / double(n);
  CHECK(std::abs(sol.value_at_origin - std::exp(-rho * T)) <=
        3.0 * sol.std_error + rho * rho * T * dt);
  CHECK(sol.value_at_origin == doctest::Approx(std::pow(1.0 + rho * dt, -double(n))).epsilon(1e-10));
}

TEST_CASE("martingale terminal") {
  const auto m = additive(0.0, 1.0);
  const std::size_t np = 50000;
  const auto b = simulate(m, 0.0, 0.3, TimeGrid(0.0, 1.0, 20), np, 3);
  const auto xT = b.states().column(20);
  const std::vector<double> terminal(xT.begin(), xT.end());
  const auto sol = solve_bsde(FullDriver{zero_driver()}, m, b, terminal, kBasis, 1);
  CHECK(std::abs(sol.value_at_origin - 0.3) <= 3.0 * sol.std_error);
  // Y = X, so Z = sigma = 1.
  double zbar = 0.0;
  for (double v : sol.z.data()) zbar += v;
  zbar /= double(sol.z.data().size());
  CHECK(zbar == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("jump component of a martingale terminal") {
  // Y = X with beta = e, so K(e) = e and l = int e gamma(e) nu(de) = 0.2 * 0.2.
  const auto nu = LevyMeasure::from_atoms({{0.2, 1.0}});
  const auto m = additive(0.0, 0.05, nu);
  const std::size_t np = 50000;
  const auto b = simulate(m, 0.0, 0.0, TimeGrid(0.0, 1.0, 10), np, 5);
  const auto xT = b.states().column(10);
  const std::vector<double> terminal(xT.begin(), xT.end());
  DriverSpec d = zero_driver();
  d.gamma = gamma_min1abs();
  const auto sol = solve_bsde(FullDriver{d}, m, b, terminal, kBasis, 1);
  double lbar = 0.0;
  for (double v : sol.l.data()) lbar += v;
  lbar /= double(sol.l.data().size());
  CHECK(lbar == doctest::Approx(0.04).epsilon(0.05));
}

TEST_CASE("reflection with immediate stopping") {
  const auto m = gbm(0.05, 0.2);
  const auto b = simulate(m, 0.0, 1.0, TimeGrid(0.0, 1.0, 20), 1000, 4);
  SUBCASE("zero driver") {
    const auto sol = solve_rbsde(FullDriver{zero_driver()}, m, b, constant(1, 1, 1.0), kBasis, 3);
    for (double v : sol.y.data()) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
    for (double v : sol.a_increments.data()) CHECK(std::abs(v) < 1e-12);
    for (auto s : sol.stop_times) CHECK(s == 0);
    CHECK(sol.value_at_origin == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("discounting driver") {
    const auto sol =
        solve_rbsde(FullDriver{discount_driver(0.1)}, m, b, constant(1, 1, 1.0), kBasis, 3);
    CHECK(sol.value_at_origin == doctest::Approx(1.0).epsilon(1e-12));
    for (auto s : sol.stop_times) CHECK(s == 0);
    double amax = 0.0;
    for (double v : sol.a_increments.data()) amax = std::max(amax, v);
    CHECK(amax > 0.0);
  }
}

TEST_CASE("american put against the binomial oracle") {
  const double rho = 0.06, T = 0.5;
  const auto m = gbm(rho, 0.2);
  const auto b = simulate(m, 0.0, 1.0, TimeGrid(0.0, T, 50), 100000, 6);
  const auto sol = solve_rbsde(FullDriver{discount_driver(rho)}, m, b, put(1.0, T), kBasis, 3);
  const double crr = oracle::crr_put(1.0, 1.0, rho, 0.2, T, 1000);
  CHECK(std::abs(sol.value_at_origin - crr) <= std::max(0.01, 3.0 * sol.std_error));
  check_rbsde_invariants(sol, b, put(1.0, T));
  const auto mr = minimal_risk(FullDriver{discount_driver(rho)}, m, 0.0, 1.0, put(1.0, T),
                               McParams{100000, 50, 6, kBasis, 3});
  CHECK(std::abs(mr.value + crr) <= std::max(0.01, 3.0 * mr.std_error));
}

TEST_CASE("zero driver agrees with Longstaff-Schwartz") {
  const double mu = 0.06, T = 0.5;
  const auto m = gbm(mu, 0.2);
  const auto b = simulate(m, 0.0, 1.0, TimeGrid(0.0, T, 50), 100000, 7);
  const auto sol = solve_rbsde(FullDriver{zero_driver()}, m, b, put(1.0, T), kBasis, 1);
  const auto lsm = oracle::lsm_put(1.0, 1.0, mu, 0.0, 0.2, T, 50, 100000, 7);
  CHECK(std::abs(sol.value_at_origin - lsm.value) <= 3.0 * lsm.std_error + 0.01);
  const double crr = oracle::crr_put(1.0, 1.0, mu, 0.0, 0.2, T, 1000);
  CHECK(std::abs(sol.value_at_origin - crr) <= 0.01);
}

TEST_CASE("never-binding obstacle reduces to a plain expectation") {
  const double T = 0.5;
  const auto m = gbm(0.06, 0.2);
  ObstacleSpec ob = put(1.0, T);
  ob.h = [](double, double) { return -1e6; };
  const McParams mc{50000, 25, 8, kBasis, 1};
  const auto mr = minimal_risk(FullDriver{zero_driver()}, m, 0.0, 1.0, ob, mc);
  const auto b = simulate(m, 0.0, 1.0, TimeGrid(0.0, T, 25), 50000, 99);
  double s = 0.0, s2 = 0.0;
  for (double x : b.states().column(25)) {
    const double g = std::max(1.0 - x, 0.0);
    s += g;
    s2 += g * g;
  }
  const double mean = s / 50000.0;
  const double se = std::sqrt((s2 / 50000.0 - mean * mean) / 50000.0);
  CHECK(std::abs(-mr.value - mean) <= 3.0 * std::hypot(se, mr.std_error));
}

TEST_CASE("reflection dominates the terminal-time value") {
  const double rho = 0.06, T = 0.5;
  const auto m = gbm(rho, 0.3);
  const auto b = simulate(m, 0.0, 1.0, TimeGrid(0.0, T, 25), 20000, 9);
  const FullDriver d{ambiguity_driver(rho, 0.1)};
  const auto r = solve_rbsde(d, m, b, put(1.1, T), kBasis, 3);
  std::vector<double> terminal;
  for (double x : b.states().column(25)) terminal.push_back(std::max(1.1 - x, 0.0));
  const auto e = solve_bsde(d, m, b, terminal, kBasis, 3);
  CHECK(r.value_at_origin >= e.value_at_origin - 3.0 * std::hypot(r.std_error, e.std_error));
  CHECK(r.value_at_origin > e.value_at_origin);
}

TEST_CASE("larger terminal payoffs give larger values") {
  const double T = 0.5;
  const auto m = gbm(0.03, 0.25);
  const auto b = simulate(m, 0.0, 1.0, TimeGrid(0.0, T, 20), 20000, 10);
  const FullDriver d{ambiguity_driver(0.03, 0.2)};
  ProbeStream rng(10);
  for (int i = 0; i < 20; ++i) {
    const double k = rng.uniform(0.8, 1.2);
    const double bump = rng.uniform(0.0, 0.2);
    const double slope = rng.uniform(-0.5, 0.5);
    ObstacleSpec lo = put(k, T);
    ObstacleSpec hi = lo;
    hi.g = [k, bump, slope](double x) {
      return std::max(k - x, 0.0) + bump + std::abs(slope * (x - 1.0));
    };
    const auto a = solve_rbsde(d, m, b, lo, kBasis, 3);
    const auto c = solve_rbsde(d, m, b, hi, kBasis, 3);
    CHECK(a.value_at_origin <= c.value_at_origin + 3.0 * std::hypot(a.std_error, c.std_error));
  }
}

TEST_CASE("exercising at the computed stopping times is at least as good as waiting") {
  const double rho = 0.06, T = 0.5;
  const auto m = gbm(rho, 0.2);
  const auto b = simulate(m, 0.0, 1.0, TimeGrid(0.0, T, 25), 20000, 11);
  const FullDriver d{discount_driver(rho)};
  const auto r = solve_rbsde(d, m, b, put(1.0, T), kBasis, 3);
  const auto at_tau = evaluate_stopping_rule(d, m, b, put(1.0, T), r.stop_times, kBasis, 3);
  const std::vector<std::size_t> never(b.n_paths(), b.n_steps());
  const auto at_T = evaluate_stopping_rule(d, m, b, put(1.0, T), never, kBasis, 3);
  CHECK(at_tau.value >= at_T.value - 3.0 * std::hypot(at_tau.std_error, at_T.std_error));
  CHECK(at_tau.value <= r.value_at_origin + 3.0 * std::hypot(at_tau.std_error, r.std_error));
  const auto summary = summarize(r);
  CHECK(summary.fraction_stopped_early > 0.0);
  CHECK(summary.mean_stopping_time <= T);
}

TEST_CASE("nonlinear expectation against a two-point tree") {
  const double rho = 0.05, kappa = 0.1, T = 1.0, mu = 0.05, s = 0.2;
  const auto m = gbm(mu, s);
  const auto id = [](double x) { return x; };
  const McParams mc{100000, 50, 12, kBasis, 3};
  const auto linear = f_expectation(FullDriver{discount_driver(rho)}, m, 0.0, 1.0, T, id, mc);
  const auto nonlinear =
      f_expectation(FullDriver{ambiguity_driver(rho, kappa)}, m, 0.0, 1.0, T, id, mc);
  const double tree = oracle::tree_expectation(
      1.0, mu, s, T, 2000, id,
      [rho, kappa](double y, double z) { return -rho * y + kappa * std::abs(z); });
  CHECK(nonlinear.value >= linear.value - 3.0 * std::hypot(linear.std_error, nonlinear.std_error));
  CHECK(std::abs(nonlinear.value - tree) <= 3.0 * nonlinear.std_error + 2e-3);
}

TEST_CASE("risk measure examples") {
  const auto m = gbm(0.0, 0.2);
  const McParams mc{2000, 10, 13, kBasis, 20};
  CHECK(risk_measure(FullDriver{zero_driver()}, m, 0.0, 1.0, 1.0, [](double) { return 5.0; }, mc)
            .value == doctest::Approx(-5.0).epsilon(1e-12));
  const auto r =
      risk_measure(FullDriver{discount_driver(0.05)}, m, 0.0, 1.0, 1.0, [](double) { return 1.0; }, mc);
  CHECK(r.value == doctest::Approx(-std::exp(-0.05)).epsilon(2e-4));
  const auto e = f_expectation(FullDriver{zero_driver()}, m, 0.0, 1.0, 1.0, [](double) { return 3.0; }, mc);
  CHECK(e.value == doctest::Approx(3.0).epsilon(1e-12));
  const auto mr = minimal_risk(FullDriver{zero_driver()}, m, 0.0, 1.0, constant(1, 1, 1.0), mc);
  CHECK(mr.value == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(mr.std_error < 1e-12);
}

TEST_CASE("terminal obstacle above the terminal payoff is rejected") {
  const auto m = gbm(0.0, 0.2);
  const auto b = simulate(m, 0.0, 1.0, TimeGrid(0.0, 1.0, 5), 100, 1);
  CHECK_THROWS_AS(
      solve_rbsde(FullDriver{zero_driver()}, m, b, constant(2.0, 1.0, 1.0), kBasis, 1),
      ConfigError);
  const double probes[] = {0.0, 1.0};
  CHECK_THROWS_AS(make_obstacle([](double, double) { return 2.0; }, [](double) { return 1.0; },
                                1.0, probes),
                  ConfigError);
}

TEST_CASE("rank deficiency names the step") {
  const auto nu = LevyMeasure::from_atoms({{0.3, 1.0}});
  const auto m = additive(0.0, 0.0, nu);
  const auto b = simulate(m, 0.0, 0.0, TimeGrid(0.0, 1.0, 2), 30, 14);
  const auto xT = b.states().column(2);
  const std::vector<double> terminal(xT.begin(), xT.end());
  try {
    solve_bsde(FullDriver{zero_driver()}, m, b, terminal, RegressionBasis::polynomial(5), 1);
    FAIL("expected a rank deficiency");
  } catch (const RankDeficiencyError& e) {
    CHECK(e.step() == 1);
  }
}

TEST_CASE("non-reducible drivers are refused") {
  const auto m = gbm(0.0, 0.2);
  const auto b = simulate(m, 0.0, 1.0, TimeGrid(0.0, 1.0, 5), 100, 1);
  FullDriver d{zero_driver(), KernelMode::general_l2nu,
               [](double, double, double, double, std::span<const double>, const LevyMeasure&) {
                 return 0.0;
               }};
  const std::vector<double> terminal(100, 1.0);
  CHECK_THROWS_AS(solve_bsde(d, m, b, terminal, kBasis, 1), ConfigError);
}

TEST_CASE("invariants hold on a jump problem") {
  const auto nu = LevyMeasure::from_atoms({{-0.1, 1.0}, {0.1, 1.0}});
  JumpDiffusionModel m = gbm(0.06, 0.2);
  m.jump_size = [](double x, double e) { return x * e; };
  m.levy = nu;
  const auto b = simulate(m, 0.0, 1.0, TimeGrid(0.0, 0.5, 25), 20000, 15);
  const FullDriver d{linear_driver(0.06, 0.1, 0.05, gamma_min1abs(), 1.0)};
  const auto sol = solve_rbsde(d, m, b, put(1.0, 0.5), kBasis, 3);
  check_rbsde_invariants(sol, b, put(1.0, 0.5));
  for (std::size_t p = 0; p < b.n_paths(); ++p) {
    CHECK(sol.y(p, 25) == std::max(1.0 - b.states()(p, 25), 0.0));
    for (std::size_t k = 0; k < 25; ++k) {
      const double xi = std::max(1.0 - b.states()(p, k), 0.0);
      REQUIRE(sol.y(p, k) >= xi);
      REQUIRE(sol.a_increments(p, k) >= 0.0);
      REQUIRE(sol.a_increments(p, k) * (sol.y(p, k) - xi) <= kTolSkorokhod);
    }
  }
}
