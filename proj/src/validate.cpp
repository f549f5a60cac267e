#include "jumpstop/validate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>

#include "jumpstop/error.hpp"
#include "jumpstop/paths.hpp"
#include "jumpstop/philox.hpp"

namespace jumpstop {

namespace {

double std_error_of(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const auto n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (n - 1.0) / n);
}

double mean_of(std::span<const double> v) {
  return v.empty() ? 0.0
                   : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double paired_std_error(const RbsdeSolution& a, const RbsdeSolution& b) {
  const std::size_t np = a.pathwise.size();
  std::vector<double> d(np);
  for (std::size_t p = 0; p < np; ++p) d[p] = a.pathwise[p] - b.pathwise[p];
  return std_error_of(d);
}

std::uint64_t probe_seed(std::uint64_t seed, std::size_t i) {
  return seed * 0x9E3779B97F4A7C15ULL + 0xD1B54A32D192ED03ULL * (i + 1);
}

std::size_t scaled_steps(std::size_t n_steps, double t, double t0, double horizon) {
  const double share = (horizon - t) / (horizon - t0);
  return std::max<std::size_t>(1, static_cast<std::size_t>(
                                      std::lround(static_cast<double>(n_steps) * share)));
}

FullDriver shifted(const FullDriver& d, double eps) {
  FullDriver out = d;
  auto f = d.base.f_bar;
  out.base.f_bar = [f, eps](double t, double x, double y, double z, double l) {
    return f(t, x, y, z, l) + eps;
  };
  if (d.functional) {
    auto g = d.functional;
    out.functional = [g, eps](double t, double x, double y, double z,
                              std::span<const double> k, const LevyMeasure& levy) {
      return g(t, x, y, z, k, levy) + eps;
    };
  }
  return out;
}

}  // namespace

ValueSurface solve_problem(const Problem& problem, const GridParams& grid) {
  const TimeGrid tg(problem.t0, problem.obstacle.horizon, grid.n_steps);
  const SpaceGrid sg(grid.x_min, grid.x_max, grid.n_nodes, grid.boundary);
  return solve_pidvi(problem.model, problem.driver, problem.obstacle, tg, sg,
                     grid.options);
}

// ---------------------------------------------------------------------------

EstimateConstants::EstimateConstants(double eta, double beta, double lip_C)
    : eta_(eta), beta_(beta), lip_C_(lip_C) {
  if (!(eta > 0.0) || !(beta > 0.0) || !(lip_C > 0.0))
    throw ConfigError("eta, beta and C must be positive");
  if (!(beta >= 3.0 / eta + 2.0 * lip_C))
    throw ConfigError("beta must be at least 3/eta + 2C");
  if (!(eta <= 1.0 / (lip_C * lip_C))) throw ConfigError("eta must be at most 1/C^2");
}

EstimateConstants EstimateConstants::tightest(double lip_C) {
  const double eta = 1.0 / (lip_C * lip_C);
  return EstimateConstants(eta, 3.0 / eta + 2.0 * lip_C, lip_C);
}

double EstimateConstants::growth_constant(double horizon) const {
  const double c = lip_C_;
  return std::exp((3.0 * c * c + 2.0 * c) * horizon) * std::max(1.0, 1.0 / (c * c));
}

// ---------------------------------------------------------------------------

std::vector<std::pair<double, double>> crossval_probes(const Problem& problem,
                                                       const SpaceGrid& sgrid,
                                                       std::size_t count,
                                                       std::uint64_t seed) {
  const double width = sgrid.x_max() - sgrid.x_min();
  double w = std::min(0.3 * std::abs(problem.x0), 0.25 * width);
  if (w == 0.0) w = 0.25 * width;
  const double lo = std::max(problem.x0 - w, sgrid.x_min() + 2.0 * sgrid.dx());
  const double hi = std::min(problem.x0 + w, sgrid.x_max() - 2.0 * sgrid.dx());
  const double t_hi = problem.t0 + 0.8 * (problem.obstacle.horizon - problem.t0);
  ProbeStream rng(seed, 11);
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i < count; ++i) {
    const double t = rng.uniform(problem.t0, t_hi);
    out.emplace_back(t, rng.uniform(lo, hi));
  }
  return out;
}

CrossValidationReport cross_validate(const ValueSurface& surface, const Problem& problem,
                                     const McParams& mc,
                                     std::span<const std::pair<double, double>> probes,
                                     double tolerance) {
  const auto& sg = surface.sgrid;
  const double horizon = problem.obstacle.horizon;
  CrossValidationReport rep;
  rep.tolerance_used = tolerance;
  rep.pass = true;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const auto [t, x] = probes[i];
    if (!(x > sg.x_min() && x < sg.x_max()) || !(t >= surface.tgrid.t0() && t < horizon)) {
      throw ConfigError("cross-validation probe (" + std::to_string(t) + ", " +
                        std::to_string(x) + ") is not interior to the grid");
    }
    const double u = surface.interpolate(t, x);
    const TimeGrid grid(t, horizon, scaled_steps(mc.n_steps, t, problem.t0, horizon));
    const PathBundle bundle =
        simulate(problem.model, t, x, grid, mc.n_paths, probe_seed(mc.seed, i));
    const RbsdeSolution sol = solve_rbsde(problem.driver, problem.model, bundle,
                                          problem.obstacle, mc.basis, mc.n_picard);
    const double gap = std::abs(u - sol.value_at_origin);
    rep.probe_points.emplace_back(t, x);
    rep.pide_values.push_back(u);
    rep.mc_values.push_back(sol.value_at_origin);
    rep.mc_stderrs.push_back(sol.std_error);
    rep.max_abs_gap = std::max(rep.max_abs_gap, gap);
    if (!(gap <= tolerance + 3.0 * sol.std_error)) rep.pass = false;
  }
  return rep;
}

CrossValidationReport cross_validate(const ValueSurface& surface, const Problem& problem,
                                     const McParams& mc, std::size_t probe_count,
                                     double tolerance, std::uint64_t seed) {
  const auto probes = crossval_probes(problem, surface.sgrid, probe_count, seed);
  return cross_validate(surface, problem, mc, probes, tolerance);
}

// ---------------------------------------------------------------------------

AprioriResult apriori_gap_check(const FullDriver& driver1, const FullDriver& driver2,
                                const ObstacleSpec& obstacle1,
                                const ObstacleSpec& obstacle2,
                                const JumpDiffusionModel& model, double t0, double x0,
                                const EstimateConstants& constants, const McParams& mc) {
  const double slack = 1e-12 * (1.0 + constants.lip_C());
  if (driver1.base.lipschitz_C > constants.lip_C() + slack ||
      driver2.base.lipschitz_C > constants.lip_C() + slack) {
    throw ConfigError("driver Lipschitz constant exceeds the estimate's C");
  }
  if (obstacle1.horizon != obstacle2.horizon)
    throw ConfigError("both obstacles must share the horizon");
  const double horizon = obstacle1.horizon;

  const TimeGrid grid(t0, horizon, mc.n_steps);
  const PathBundle bundle = simulate(model, t0, x0, grid, mc.n_paths, mc.seed);
  const auto s1 = solve_rbsde(driver1, model, bundle, obstacle1, mc.basis, mc.n_picard);
  const auto s2 = solve_rbsde(driver2, model, bundle, obstacle2, mc.basis, mc.n_picard);

  std::array<std::array<double, 3>, 64> yzl{};
  ProbeStream rng(mc.seed, 64);
  for (auto& p : yzl)
    for (double& c : p) c = rng.uniform(-10.0, 10.0);

  const std::size_t n = bundle.n_steps();
  const double dt = grid.dt();
  std::vector<double> pathwise(bundle.n_paths());
  for (std::size_t p = 0; p < bundle.n_paths(); ++p) {
    double sup_xi = 0.0, int_f = 0.0;
    for (std::size_t k = 0; k <= n; ++k) {
      const double t = grid.time(k);
      const double x = bundle.states()(p, k);
      const double xi = k < n ? obstacle1.h(t, x) - obstacle2.h(t, x)
                              : obstacle1.g(x) - obstacle2.g(x);
      sup_xi = std::max(sup_xi, xi * xi);
      if (k == n) break;
      double fbar = 0.0;
      for (const auto& q : yzl) {
        const double a = eval_scalar_driver(driver1.base, t, x, q[0], q[1], q[2]);
        const double b = eval_scalar_driver(driver2.base, t, x, q[0], q[1], q[2]);
        fbar = std::max(fbar, std::abs(a - b));
      }
      int_f += dt * fbar * fbar;
    }
    pathwise[p] = sup_xi + constants.eta() * int_f;
  }

  AprioriResult r;
  r.y_gap = s1.value_at_origin - s2.value_at_origin;
  const double se_y = paired_std_error(s1, s2);
  const double wl = std::exp(constants.beta() * t0);
  const double wr = std::exp(constants.beta() * horizon);
  r.lhs = wl * r.y_gap * r.y_gap;
  r.rhs = wr * mean_of(pathwise);
  const double se_l = wl * (2.0 * std::abs(r.y_gap) * se_y + se_y * se_y);
  const double se_r = wr * std_error_of(pathwise);
  r.std_error = std::hypot(se_l, se_r);
  r.pass = r.lhs <= r.rhs + 3.0 * r.std_error;
  return r;
}

PerturbedProblem perturbed_problem(const Problem& problem, std::uint64_t seed,
                                   std::size_t i) {
  ProbeStream rng(seed, 100 + i);
  const double c = rng.uniform(-0.1, 0.1);
  const double omega = rng.uniform(0.5, 3.0);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double delta = rng.uniform(-0.1, 0.1);
  PerturbedProblem out{problem.driver, problem.obstacle};
  out.driver.base.f_bar = [f = problem.driver.base.f_bar, c, omega, phase](
                              double t, double x, double y, double z, double l) {
    return f(t, x, y, z, l) + c * std::sin(omega * x + phase);
  };
  out.obstacle.h = [h = problem.obstacle.h, delta](double t, double x) { return h(t, x) + delta; };
  out.obstacle.g = [g = problem.obstacle.g, delta](double x) { return g(x) + delta; };
  return out;
}

Estimate comparison_gap(const FullDriver& driver2, double eps,
                        const std::function<double(double)>& position,
                        const JumpDiffusionModel& model, double t0, double x0,
                        double maturity, const McParams& mc) {
  const TimeGrid grid(t0, maturity, mc.n_steps);
  const PathBundle bundle = simulate(model, t0, x0, grid, mc.n_paths, mc.seed);
  const auto xT = bundle.states().column(mc.n_steps);
  std::vector<double> terminal(xT.size());
  for (std::size_t p = 0; p < xT.size(); ++p) terminal[p] = position(xT[p]);
  const auto s1 =
      solve_bsde(shifted(driver2, eps), model, bundle, terminal, mc.basis, mc.n_picard);
  const auto s2 = solve_bsde(driver2, model, bundle, terminal, mc.basis, mc.n_picard);
  return {s1.value_at_origin - s2.value_at_origin, paired_std_error(s1, s2)};
}

StrictComparisonResult strict_comparison_check(
    const FullDriver& driver2, double eps, const std::function<double(double)>& position,
    const JumpDiffusionModel& model, double t0, double x0, double maturity,
    const McParams& mc) {
  if (!(eps > 0.0)) throw ConfigError("epsilon must be positive");
  StrictComparisonResult r;
  r.gap = comparison_gap(driver2, eps, position, model, t0, x0, maturity, mc);
  r.half_gap = comparison_gap(driver2, eps / 2.0, position, model, t0, x0, maturity, mc);
  r.ratio = r.half_gap.value != 0.0 ? r.gap.value / r.half_gap.value : 0.0;
  r.pass = r.gap.value > 3.0 * r.gap.std_error &&
           r.half_gap.value > 3.0 * r.half_gap.std_error && r.ratio >= 1.6 &&
           r.ratio <= 2.4;
  return r;
}

// ---------------------------------------------------------------------------

GrowthReport growth_and_continuity_check(const Problem& problem,
                                         std::span<const std::pair<double, double>> probes,
                                         const McParams& mc, const GridParams& gridp) {
  const auto& ob = problem.obstacle;
  const auto& d = problem.driver.base;
  const double horizon = ob.horizon;
  const double k_ct = EstimateConstants::tightest(d.lipschitz_C).growth_constant(horizon);
  GrowthReport rep;
  bool growth_ok = true;

  for (std::size_t i = 0; i < probes.size(); ++i) {
    const auto [t, x] = probes[i];
    const TimeGrid grid(t, horizon, scaled_steps(mc.n_steps, t, problem.t0, horizon));
    const PathBundle bundle =
        simulate(problem.model, t, x, grid, mc.n_paths, probe_seed(mc.seed, i));
    const auto sol = solve_rbsde(problem.driver, problem.model, bundle, ob, mc.basis,
                                 mc.n_picard);
    std::vector<double> pathwise(bundle.n_paths());
    const std::size_t n = bundle.n_steps();
    for (std::size_t p = 0; p < bundle.n_paths(); ++p) {
      double sup_h = 0.0, int_f = 0.0;
      for (std::size_t k = 0; k <= n; ++k) {
        const double tk = grid.time(k);
        const double xk = bundle.states()(p, k);
        const double hb = k < n ? ob.h(tk, xk) : ob.g(xk);
        sup_h = std::max(sup_h, hb * hb);
        if (k < n) {
          const double f0 = eval_scalar_driver(d, tk, xk, 0.0, 0.0, 0.0);
          int_f += grid.dt() * f0 * f0;
        }
      }
      pathwise[p] = int_f + sup_h;
    }
    GrowthProbe g;
    g.t = t;
    g.x = x;
    g.u = sol.value_at_origin;
    g.u_se = sol.std_error;
    g.rhs = mean_of(pathwise);
    g.rhs_se = std_error_of(pathwise);
    g.bound = k_ct * g.rhs;
    const double noise = 2.0 * std::abs(g.u) * g.u_se + g.u_se * g.u_se + k_ct * g.rhs_se;
    g.pass = g.u * g.u <= g.bound + 3.0 * noise;
    growth_ok = growth_ok && g.pass;
    rep.probes.push_back(g);
  }

  const ValueSurface surface = solve_problem(problem, gridp);
  double sup_u = 0.0;
  for (double v : surface.values.data()) sup_u = std::max(sup_u, std::abs(v));
  rep.sup_abs_u = sup_u;

  // Empirical modulus of continuity on nested lattices over the probe box.
  rep.continuity_pass = true;
  if (!probes.empty()) {
    double t_lo = probes[0].first, t_hi = t_lo, x_lo = probes[0].second, x_hi = x_lo;
    for (const auto& [t, x] : probes) {
      t_lo = std::min(t_lo, t);
      t_hi = std::max(t_hi, t);
      x_lo = std::min(x_lo, x);
      x_hi = std::max(x_hi, x);
    }
    for (int m = 0; m < 4; ++m) {
      const std::size_t cells = std::size_t{4} << m;
      const double ht = (t_hi - t_lo) / static_cast<double>(cells);
      const double hx = (x_hi - x_lo) / static_cast<double>(cells);
      Matrix u(cells + 1, cells + 1);
      for (std::size_t a = 0; a <= cells; ++a)
        for (std::size_t b = 0; b <= cells; ++b)
          u(a, b) = surface.interpolate(t_lo + ht * static_cast<double>(a),
                                        x_lo + hx * static_cast<double>(b));
      double modulus = 0.0;
      for (std::size_t a = 0; a <= cells; ++a)
        for (std::size_t b = 0; b <= cells; ++b) {
          if (a < cells && ht > 0.0) modulus = std::max(modulus, std::abs(u(a + 1, b) - u(a, b)));
          if (b < cells && hx > 0.0) modulus = std::max(modulus, std::abs(u(a, b + 1) - u(a, b)));
        }
      rep.moduli.push_back(modulus);
    }
    for (std::size_t m = 1; m < rep.moduli.size(); ++m) {
      const double prev = rep.moduli[m - 1];
      if (prev <= 1e-12 * (1.0 + sup_u)) continue;
      if (rep.moduli[m] > 0.8 * prev) rep.continuity_pass = false;
    }
  }

  if (ob.bounded) {
    rep.bounded_checked = true;
    double sup_f0 = 0.0, sup_h = 0.0;
    const auto& tg = surface.tgrid;
    const auto& sg = surface.sgrid;
    for (std::size_t k = 0; k <= tg.n_steps(); ++k) {
      const double t = tg.time(k);
      for (std::size_t j = 0; j < sg.n_nodes(); ++j) {
        const double x = sg.node(j);
        sup_f0 = std::max(sup_f0, std::abs(eval_scalar_driver(d, t, x, 0.0, 0.0, 0.0)));
        sup_h = std::max(sup_h, std::abs(k < tg.n_steps() ? ob.h(t, x) : ob.g(x)));
      }
    }
    rep.bounded_limit =
        std::sqrt(k_ct * ((horizon - problem.t0) * sup_f0 * sup_f0 + sup_h * sup_h));
    rep.bounded_pass = sup_u <= rep.bounded_limit;
  }
  rep.pass = growth_ok && rep.continuity_pass && rep.bounded_pass;
  return rep;
}

// ---------------------------------------------------------------------------

std::vector<PositionPair> ordered_position_pairs(std::size_t n_cases, std::uint64_t seed) {
  ProbeStream rng(seed, 7);
  std::vector<PositionPair> out;
  for (std::size_t i = 0; i < n_cases; ++i) {
    const double kind = rng.uniform();
    const double strike = rng.uniform(0.8, 1.2);
    const double scale = rng.uniform(0.5, 1.5);
    const double a = rng.uniform(-0.5, 0.5);
    const double b = rng.uniform(-1.0, 1.0);
    const double slope = rng.uniform(-1.0, 1.0);
    const double centre = rng.uniform(0.8, 1.2);
    const double shift = rng.uniform(-0.2, 0.2);
    std::function<double(double)> lower;
    if (kind < 1.0 / 3.0) {
      lower = [=](double x) { return scale * std::max(strike - x, 0.0); };
    } else if (kind < 2.0 / 3.0) {
      lower = [=](double x) { return scale * std::max(x - strike, 0.0); };
    } else {
      lower = [=](double x) { return a + b * x; };
    }
    auto upper = [=](double x) {
      return lower(x) + std::abs(slope * (x - centre) + shift);
    };
    out.push_back({lower, upper});
  }
  return out;
}

MonotonicityReport monotonicity_suite(const FullDriver& driver,
                                      const JumpDiffusionModel& model, double t0,
                                      double x0, double maturity,
                                      std::span<const PositionPair> pairs,
                                      const McParams& mc) {
  const TimeGrid grid(t0, maturity, mc.n_steps);
  const PathBundle bundle = simulate(model, t0, x0, grid, mc.n_paths, mc.seed);
  const auto xT = bundle.states().column(mc.n_steps);
  MonotonicityReport rep;
  auto risk = [&](const std::function<double(double)>& pos) {
    std::vector<double> terminal(xT.size());
    for (std::size_t p = 0; p < xT.size(); ++p) terminal[p] = pos(xT[p]);
    const auto sol = solve_bsde(driver, model, bundle, terminal, mc.basis, mc.n_picard);
    return Estimate{-sol.value_at_origin, sol.std_error};
  };
  for (const auto& pair : pairs) {
    MonotonicityCase c;
    c.risk_lower = risk(pair.lower);
    c.risk_upper = risk(pair.upper);
    c.combined_se = std::hypot(c.risk_lower.std_error, c.risk_upper.std_error);
    c.pass = c.risk_lower.value >= c.risk_upper.value - 3.0 * c.combined_se;
    if (!c.pass) ++rep.violations;
    rep.cases.push_back(c);
  }
  rep.pass = rep.violations == 0;
  return rep;
}

}  // namespace jumpstop
