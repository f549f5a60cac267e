#include "jumpstop/bsde.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "jumpstop/error.hpp"
#include "jumpstop/parallel.hpp"
#include "jumpstop/philox.hpp"

namespace jumpstop {

namespace {

constexpr double kPicardTol = 1e-8;

double tol_stop(double y) { return 1e-8 * (1.0 + std::abs(y)); }

double sample_std_error(std::span<const double> v) {
  const auto n = static_cast<double>(v.size());
  if (v.size() < 2) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

void require_scalar(const FullDriver& driver) {
  if (!driver.is_scalar_reducible()) {
    throw ConfigError(
        "the regression engine only supports drivers that see k through "
        "<gamma, k>_nu");
  }
}

// Compensated jump functional sum_j gamma(x, e_j) - dt * int gamma(x, e) nu(de)
// for one path-step.
double compensated_gamma(const DriverSpec& d, const LevyMeasure& levy, double x,
                         double dt, std::span<const JumpEvent> jumps) {
  double m = 0.0;
  for (const auto& j : jumps) m += j.count * d.gamma(x, j.mark);
  return m - dt * integrate_nu(levy, [&](double e) { return d.gamma(x, e); });
}

// Regression estimates of E_k[y_{k+1}], z_k and l_k on a set of rows.
struct StepEstimates {
  std::vector<double> ey, z, l;
};

StepEstimates estimate_step(const DriverSpec& d, const JumpDiffusionModel& model,
                            const PathBundle& bundle, const Matrix& y,
                            std::span<const std::size_t> rows, std::size_t k,
                            const RegressionBasis& basis) {
  const double dt = bundle.grid().dt();
  const std::size_t m = rows.size();
  std::vector<double> xs(m), next(m);
  for (std::size_t i = 0; i < m; ++i) {
    xs[i] = bundle.states()(rows[i], k);
    next[i] = y(rows[i], k + 1);
  }
  const ConditionalExpectation ce(basis, xs, k);
  StepEstimates est;
  est.ey = ce.project(next);

  // Martingale increments are regressed against the centred response.
  std::vector<double> resp(m);
  for (std::size_t i = 0; i < m; ++i)
    resp[i] = (next[i] - est.ey[i]) * bundle.brownian_increments()(rows[i], k);
  est.z = ce.project(resp);
  for (auto& v : est.z) v /= dt;

  const bool jumps = model.levy.total_intensity() > 0.0;
  if (jumps) {
    for (std::size_t i = 0; i < m; ++i) {
      resp[i] = (next[i] - est.ey[i]) *
                compensated_gamma(d, model.levy, xs[i], dt, bundle.jumps(rows[i], k));
    }
    est.l = ce.project(resp);
    for (auto& v : est.l) v /= dt;
  } else {
    est.l.assign(m, 0.0);
  }
  return est;
}

// Picard iteration for y = ey + dt f(t, x, y, z, l). Returns the largest
// relative change of the final pass.
double picard(const DriverSpec& d, double t, double dt, std::span<const double> xs,
              const StepEstimates& est, int n_picard, std::span<double> y_out) {
  const std::size_t m = y_out.size();
  for (std::size_t i = 0; i < m; ++i) y_out[i] = est.ey[i];
  std::vector<double> last_change(m, 0.0);
  for (int it = 0; it < n_picard; ++it) {
    parallel_for(m, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        const double next =
            est.ey[i] + dt * eval_scalar_driver(d, t, xs[i], y_out[i], est.z[i], est.l[i]);
        last_change[i] = std::abs(next - y_out[i]) / (1.0 + std::abs(next));
        y_out[i] = next;
      }
    });
  }
  return *std::max_element(last_change.begin(), last_change.end());
}

void warn_picard(RbsdeSolution& sol, std::size_t k, double change) {
  if (change > kPicardTol) {
    std::ostringstream os;
    os << "Picard iteration not converged at step " << k
       << " (relative change " << change << ")";
    sol.warnings.push_back(os.str());
  }
}

RbsdeSolution backward(const FullDriver& driver, const JumpDiffusionModel& model,
                       const PathBundle& bundle, std::span<const double> terminal,
                       const RegressionBasis& basis, int n_picard,
                       const ObstacleSpec* obstacle) {
  require_scalar(driver);
  if (terminal.size() != bundle.n_paths())
    throw ConfigError("terminal values must have one entry per path");
  if (n_picard < 1) throw ConfigError("n_picard must be >= 1");

  const std::size_t n = bundle.n_steps();
  const std::size_t np = bundle.n_paths();
  const double dt = bundle.grid().dt();
  const DriverSpec& d = driver.base;

  RbsdeSolution sol;
  sol.grid = bundle.grid();
  sol.y = Matrix(np, n + 1);
  sol.z = Matrix(np, n);
  sol.l = Matrix(np, n);
  sol.a_increments = Matrix(np, n);
  for (std::size_t p = 0; p < np; ++p) sol.y(p, n) = terminal[p];

  std::vector<std::size_t> all_rows(np);
  std::iota(all_rows.begin(), all_rows.end(), std::size_t{0});
  std::vector<double> xs(np), ytilde(np), residual(np, 0.0);

  for (std::size_t kk = n; kk-- > 0;) {
    const double t = sol.grid.time(kk);
    for (std::size_t p = 0; p < np; ++p) xs[p] = bundle.states()(p, kk);
    const StepEstimates est = estimate_step(d, model, bundle, sol.y, all_rows, kk, basis);
    for (std::size_t p = 0; p < np; ++p) residual[p] += sol.y(p, kk + 1) - est.ey[p];
    warn_picard(sol, kk, picard(d, t, dt, xs, est, n_picard, ytilde));

    parallel_for(np, [&](std::size_t b, std::size_t e) {
      for (std::size_t p = b; p < e; ++p) {
        sol.z(p, kk) = est.z[p];
        sol.l(p, kk) = est.l[p];
        double yk = ytilde[p];
        if (obstacle) {
          const double h = obstacle->h(t, xs[p]);
          if (h > yk) {
            sol.a_increments(p, kk) = h - yk;
            yk = h;
          }
        }
        sol.y(p, kk) = yk;
      }
    });
  }

  const auto y0 = sol.y.column(0);
  sol.value_at_origin = mean_of(y0);
  sol.pathwise.resize(np);
  for (std::size_t p = 0; p < np; ++p) sol.pathwise[p] = y0[p] + residual[p];
  sol.std_error = sample_std_error(sol.pathwise);

  sol.stop_times.assign(np, n);
  if (obstacle) {
    for (std::size_t p = 0; p < np; ++p) {
      for (std::size_t k = 0; k <= n; ++k) {
        const double yk = sol.y(p, k);
        const double xi = k < n ? obstacle->h(sol.grid.time(k), bundle.states()(p, k))
                                : obstacle->g(bundle.states()(p, k));
        if (yk <= xi + tol_stop(yk)) {
          sol.stop_times[p] = k;
          break;
        }
      }
    }
  }
  return sol;
}

}  // namespace

void ObstacleSpec::check_terminal_order(std::span<const double> states) const {
  for (double x : states) {
    const double hT = h(horizon, x);
    const double gT = g(x);
    if (hT > gT) {
      std::ostringstream os;
      os << "obstacle violates h(T, x) <= g(x) at x=" << x << " (h=" << hT
         << ", g=" << gT << ")";
      throw ConfigError(os.str());
    }
  }
}

bool ObstacleSpec::satisfies_growth(double x_lo, double x_hi, int n_probes,
                                    std::uint64_t seed) const {
  ProbeStream rng(seed, 0x6f6273ULL);
  for (int i = 0; i < n_probes; ++i) {
    const double t = rng.uniform(0.0, horizon);
    const double x = rng.uniform(x_lo, x_hi);
    const double bound = growth_C * (1.0 + std::pow(std::abs(x), growth_p));
    if (std::abs(h(t, x)) > bound + 1e-9) return false;
  }
  return true;
}

ObstacleSpec make_obstacle(std::function<double(double, double)> h,
                           std::function<double(double)> g, double horizon,
                           std::span<const double> probe_states, int growth_p,
                           double growth_C, bool bounded) {
  ObstacleSpec ob{std::move(h), std::move(g), horizon, growth_p, growth_C, bounded};
  ob.check_terminal_order(probe_states);
  return ob;
}

RbsdeSolution solve_bsde(const FullDriver& driver, const JumpDiffusionModel& model,
                         const PathBundle& bundle, std::span<const double> terminal,
                         const RegressionBasis& basis, int n_picard) {
  return backward(driver, model, bundle, terminal, basis, n_picard, nullptr);
}

RbsdeSolution solve_rbsde(const FullDriver& driver, const JumpDiffusionModel& model,
                          const PathBundle& bundle, const ObstacleSpec& obstacle,
                          const RegressionBasis& basis, int n_picard) {
  const std::size_t n = bundle.n_steps();
  const auto xT = bundle.states().column(n);
  obstacle.check_terminal_order(xT);
  std::vector<double> terminal(xT.size());
  for (std::size_t p = 0; p < xT.size(); ++p) terminal[p] = obstacle.g(xT[p]);
  RbsdeSolution sol = backward(driver, model, bundle, terminal, basis, n_picard, &obstacle);
  check_rbsde_invariants(sol, bundle, obstacle);
  return sol;
}

void check_rbsde_invariants(const RbsdeSolution& sol, const PathBundle& bundle,
                            const ObstacleSpec& obstacle) {
  const std::size_t n = bundle.n_steps();
  for (std::size_t p = 0; p < bundle.n_paths(); ++p) {
    const double xT = bundle.states()(p, n);
    if (sol.y(p, n) != obstacle.g(xT)) {
      throw InvariantViolation("terminal value differs from g(X_T) on path " +
                               std::to_string(p));
    }
    for (std::size_t k = 0; k < n; ++k) {
      const double xi = obstacle.h(sol.grid.time(k), bundle.states()(p, k));
      const double y = sol.y(p, k);
      const double a = sol.a_increments(p, k);
      if (y < xi - kTolReflect) {
        throw InvariantViolation("Y below the obstacle at path " + std::to_string(p) +
                                 ", step " + std::to_string(k));
      }
      if (a < 0.0) {
        throw InvariantViolation("negative reflection increment at path " +
                                 std::to_string(p) + ", step " + std::to_string(k));
      }
      if (a * (y - xi) > kTolSkorokhod) {
        throw InvariantViolation("Skorokhod condition violated at path " +
                                 std::to_string(p) + ", step " + std::to_string(k));
      }
    }
  }
}

Estimate f_expectation(const FullDriver& driver, const JumpDiffusionModel& model,
                       double t, double x, double maturity,
                       const std::function<double(double)>& position,
                       const McParams& mc) {
  const TimeGrid grid(t, maturity, mc.n_steps);
  const PathBundle bundle = simulate(model, t, x, grid, mc.n_paths, mc.seed);
  const auto xT = bundle.states().column(mc.n_steps);
  std::vector<double> terminal(xT.size());
  for (std::size_t p = 0; p < xT.size(); ++p) terminal[p] = position(xT[p]);
  const auto sol = solve_bsde(driver, model, bundle, terminal, mc.basis, mc.n_picard);
  return {sol.value_at_origin, sol.std_error};
}

Estimate risk_measure(const FullDriver& driver, const JumpDiffusionModel& model,
                      double t, double x, double maturity,
                      const std::function<double(double)>& position,
                      const McParams& mc) {
  const Estimate e = f_expectation(driver, model, t, x, maturity, position, mc);
  return {-e.value, e.std_error};
}

Estimate minimal_risk(const FullDriver& driver, const JumpDiffusionModel& model,
                      double t, double x, const ObstacleSpec& obstacle,
                      const McParams& mc) {
  const TimeGrid grid(t, obstacle.horizon, mc.n_steps);
  const PathBundle bundle = simulate(model, t, x, grid, mc.n_paths, mc.seed);
  const auto sol = solve_rbsde(driver, model, bundle, obstacle, mc.basis, mc.n_picard);
  return {-sol.value_at_origin, sol.std_error};
}

Estimate evaluate_stopping_rule(const FullDriver& driver,
                                const JumpDiffusionModel& model,
                                const PathBundle& bundle, const ObstacleSpec& obstacle,
                                std::span<const std::size_t> stop_times,
                                const RegressionBasis& basis, int n_picard) {
  require_scalar(driver);
  const std::size_t n = bundle.n_steps();
  const std::size_t np = bundle.n_paths();
  if (stop_times.size() != np) throw ConfigError("one stopping index per path required");
  const double dt = bundle.grid().dt();
  const auto& grid = bundle.grid();

  // Y is frozen at the payoff from the stopping step on.
  Matrix y(np, n + 1);
  for (std::size_t p = 0; p < np; ++p) {
    const std::size_t s = std::min(stop_times[p], n);
    const double x = bundle.states()(p, s);
    const double xi = s < n ? obstacle.h(grid.time(s), x) : obstacle.g(x);
    for (std::size_t k = s; k <= n; ++k) y(p, k) = xi;
  }

  std::vector<double> residual(np, 0.0);
  for (std::size_t kk = n; kk-- > 0;) {
    std::vector<std::size_t> rows;
    for (std::size_t p = 0; p < np; ++p)
      if (stop_times[p] > kk) rows.push_back(p);
    if (rows.empty()) continue;
    const StepEstimates est =
        estimate_step(driver.base, model, bundle, y, rows, kk, basis);
    std::vector<double> xs(rows.size()), yk(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) xs[i] = bundle.states()(rows[i], kk);
    picard(driver.base, grid.time(kk), dt, xs, est, n_picard, yk);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      residual[rows[i]] += y(rows[i], kk + 1) - est.ey[i];
      y(rows[i], kk) = yk[i];
    }
  }
  const auto y0 = y.column(0);
  for (std::size_t p = 0; p < np; ++p) residual[p] += y0[p];
  return {mean_of(y0), sample_std_error(residual)};
}

RbsdeSummary summarize(const RbsdeSolution& sol) {
  RbsdeSummary s;
  s.value = sol.value_at_origin;
  s.std_error = sol.std_error;
  const std::size_t n = sol.grid.n_steps();
  double total_time = 0.0;
  std::size_t early = 0;
  for (auto k : sol.stop_times) {
    total_time += sol.grid.time(k) - sol.grid.t0();
    if (k < n) ++early;
  }
  if (!sol.stop_times.empty()) {
    s.mean_stopping_time = total_time / static_cast<double>(sol.stop_times.size());
    s.fraction_stopped_early =
        static_cast<double>(early) / static_cast<double>(sol.stop_times.size());
  }
  return s;
}

}  // namespace jumpstop
