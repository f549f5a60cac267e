#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "jumpstop/driver.hpp"
#include "jumpstop/matrix.hpp"
#include "jumpstop/model.hpp"
#include "jumpstop/paths.hpp"
#include "jumpstop/regression.hpp"

namespace jumpstop {

/// Running payoff h(t, x) and terminal payoff g(x) of the stopping problem.
struct ObstacleSpec {
  std::function<double(double, double)> h;
  std::function<double(double)> g;
  double horizon = 1.0;
  int growth_p = 0;
  double growth_C = 1.0;
  bool bounded = false;

  /// h(t, x) before the horizon, g(x) at it.
  double hbar(double t, double x) const { return t < horizon ? h(t, x) : g(x); }

  /// Throws ConfigError if h(T, x) > g(x) at any of the given states.
  void check_terminal_order(std::span<const double> states) const;

  /// Probes |h(t, x)| <= growth_C (1 + |x|^p) on a seeded sample of the box.
  bool satisfies_growth(double x_lo, double x_hi, int n_probes,
                        std::uint64_t seed) const;
};

/// Builds an obstacle and rejects it if h(T, .) > g on the probe states.
ObstacleSpec make_obstacle(std::function<double(double, double)> h,
                           std::function<double(double)> g, double horizon,
                           std::span<const double> probe_states, int growth_p = 0,
                           double growth_C = 1.0, bool bounded = false);

/// Monte Carlo discretization parameters.
struct McParams {
  std::size_t n_paths = 100000;
  std::size_t n_steps = 50;
  std::uint64_t seed = 1;
  RegressionBasis basis = RegressionBasis::piecewise_linear(20);
  int n_picard = 3;
};

/// Reflection and stopping tolerances.
inline constexpr double kTolReflect = 1e-12;
inline constexpr double kTolSkorokhod = 1e-12;

/// Discrete solution (Y, Z, L, A) of a (reflected) backward equation on a
/// path bundle. L is the scalar jump component <K, gamma>_nu.
struct RbsdeSolution {
  TimeGrid grid{0.0, 1.0, 1};
  Matrix y;             // n_paths x (n_steps + 1)
  Matrix z;             // n_paths x n_steps
  Matrix l;             // n_paths x n_steps
  Matrix a_increments;  // n_paths x n_steps, >= 0
  double value_at_origin = 0.0;
  double std_error = 0.0;
  /// Y at t0 plus the summed one-step residuals y_{k+1} - E_k[y_{k+1}] per path.
  std::vector<double> pathwise;
  /// First step at which Y meets the obstacle; n_steps if it never does before T.
  std::vector<std::size_t> stop_times;
  std::vector<std::string> warnings;
};

/// Plain BSDE: y_k = E_k[y_{k+1}] + dt f(t_k, X_k, y_k, z_k, l_k).
RbsdeSolution solve_bsde(const FullDriver& driver, const JumpDiffusionModel& model,
                         const PathBundle& bundle, std::span<const double> terminal,
                         const RegressionBasis& basis, int n_picard);

/// Reflected BSDE with obstacle hbar(t_k, X_k); reflection is applied after the
/// driver increment: y_k = max(ytilde_k, h(t_k, X_k)).
RbsdeSolution solve_rbsde(const FullDriver& driver, const JumpDiffusionModel& model,
                          const PathBundle& bundle, const ObstacleSpec& obstacle,
                          const RegressionBasis& basis, int n_picard);

/// Throws InvariantViolation if the reflection, monotonicity of A, discrete
/// Skorokhod or terminal conditions fail.
void check_rbsde_invariants(const RbsdeSolution& sol, const PathBundle& bundle,
                            const ObstacleSpec& obstacle);

/// A Monte Carlo estimate.
struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// f-conditional expectation at (t, x) of position(X_maturity).
Estimate f_expectation(const FullDriver& driver, const JumpDiffusionModel& model,
                       double t, double x, double maturity,
                       const std::function<double(double)>& position,
                       const McParams& mc);

/// Dynamic risk measure: minus the f-conditional expectation.
Estimate risk_measure(const FullDriver& driver, const JumpDiffusionModel& model,
                      double t, double x, double maturity,
                      const std::function<double(double)>& position,
                      const McParams& mc);

/// Minimal risk over stopping times, i.e. -u(t, x).
Estimate minimal_risk(const FullDriver& driver, const JumpDiffusionModel& model,
                      double t, double x, const ObstacleSpec& obstacle,
                      const McParams& mc);

/// Value of stopping at the given per-path step indices, obtained by solving
/// the backward equation with terminal time tau on the same paths.
Estimate evaluate_stopping_rule(const FullDriver& driver,
                                const JumpDiffusionModel& model,
                                const PathBundle& bundle, const ObstacleSpec& obstacle,
                                std::span<const std::size_t> stop_times,
                                const RegressionBasis& basis, int n_picard);

/// Summary record of a solve.
struct RbsdeSummary {
  double value = 0.0;
  double std_error = 0.0;
  double mean_stopping_time = 0.0;
  double fraction_stopped_early = 0.0;
};

RbsdeSummary summarize(const RbsdeSolution& sol);

}  // namespace jumpstop
