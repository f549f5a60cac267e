#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "jumpstop/bsde.hpp"
#include "jumpstop/driver.hpp"
#include "jumpstop/model.hpp"
#include "jumpstop/pide.hpp"

namespace jumpstop {

/// Everything that defines one stopping problem, independent of numerics.
struct Problem {
  JumpDiffusionModel model;
  FullDriver driver;
  ObstacleSpec obstacle;
  double t0 = 0.0;
  double x0 = 1.0;
};

/// Space-time grid settings of the deterministic engine.
struct GridParams {
  double x_min = 0.0;
  double x_max = 3.0;
  std::size_t n_nodes = 400;
  std::size_t n_steps = 200;
  BoundaryMode boundary = BoundaryMode::linear_extrapolation;
  PidviOptions options{};
};

ValueSurface solve_problem(const Problem& problem, const GridParams& grid);

/// Weights of the a-priori estimate for differences of reflected solutions.
class EstimateConstants {
 public:
  /// Throws ConfigError unless beta >= 3/eta + 2C and eta <= 1/C^2.
  EstimateConstants(double eta, double beta, double lip_C);
  /// eta = 1/C^2 and the smallest admissible beta.
  static EstimateConstants tightest(double lip_C);

  double eta() const noexcept { return eta_; }
  double beta() const noexcept { return beta_; }
  double lip_C() const noexcept { return lip_C_; }
  /// e^{(3C^2 + 2C) T} max(1, 1/C^2).
  double growth_constant(double horizon) const;

 private:
  double eta_;
  double beta_;
  double lip_C_;
};

struct CrossValidationReport {
  std::vector<std::pair<double, double>> probe_points;  // (t, x)
  std::vector<double> pide_values;
  std::vector<double> mc_values;
  std::vector<double> mc_stderrs;
  double max_abs_gap = 0.0;
  double tolerance_used = 0.0;
  bool pass = false;
};

/// Seeded probes in [t0, t0 + 0.8 (T - t0)] x [x0 - w, x0 + w], where w is
/// 0.3 |x0| capped at a quarter of the grid width.
std::vector<std::pair<double, double>> crossval_probes(const Problem& problem,
                                                       const SpaceGrid& sgrid,
                                                       std::size_t count,
                                                       std::uint64_t seed);

/// Compares the surface with regression Monte Carlo restarted at each probe.
/// MC time steps shrink in proportion to the remaining horizon.
CrossValidationReport cross_validate(const ValueSurface& surface, const Problem& problem,
                                     const McParams& mc,
                                     std::span<const std::pair<double, double>> probes,
                                     double tolerance);

CrossValidationReport cross_validate(const ValueSurface& surface, const Problem& problem,
                                     const McParams& mc, std::size_t probe_count,
                                     double tolerance, std::uint64_t seed);

struct AprioriResult {
  double y_gap = 0.0;  // Y^1 - Y^2 at t0
  double lhs = 0.0;
  double rhs = 0.0;
  double std_error = 0.0;  // of lhs - rhs
  bool pass = false;
};

/// e^{beta t0} (Y^1 - Y^2)^2 <= e^{beta T} (E sup (xi^1 - xi^2)^2 + eta E int fbar^2)
/// on common paths. fbar at each path-step is the largest |f^1 - f^2| over
/// 64 seeded (y, z, l) probes in [-10, 10]^3.
AprioriResult apriori_gap_check(const FullDriver& driver1, const FullDriver& driver2,
                                const ObstacleSpec& obstacle1,
                                const ObstacleSpec& obstacle2,
                                const JumpDiffusionModel& model, double t0, double x0,
                                const EstimateConstants& constants, const McParams& mc);

struct PerturbedProblem {
  FullDriver driver;
  ObstacleSpec obstacle;
};

/// Case i of a seeded family: fbar + c sin(omega x + phase) with |c| <= 0.1,
/// and h, g shifted by the same delta with |delta| <= 0.1.
PerturbedProblem perturbed_problem(const Problem& problem, std::uint64_t seed, std::size_t i);

/// Y^1 - Y^2 at t0 for the plain backward equation with f^1 = f^2 + eps and
/// common terminal position(X_T).
Estimate comparison_gap(const FullDriver& driver2, double eps,
                        const std::function<double(double)>& position,
                        const JumpDiffusionModel& model, double t0, double x0,
                        double maturity, const McParams& mc);

struct StrictComparisonResult {
  Estimate gap;       // at eps
  Estimate half_gap;  // at eps / 2
  double ratio = 0.0;
  bool pass = false;
};

/// Passes if both gaps exceed 3 std errors and gap / half_gap lies in [1.6, 2.4].
StrictComparisonResult strict_comparison_check(
    const FullDriver& driver2, double eps, const std::function<double(double)>& position,
    const JumpDiffusionModel& model, double t0, double x0, double maturity,
    const McParams& mc);

struct GrowthProbe {
  double t = 0.0;
  double x = 0.0;
  double u = 0.0;
  double u_se = 0.0;
  double rhs = 0.0;  // E(int f(s, X, 0, 0, 0)^2 ds + sup hbar^2)
  double rhs_se = 0.0;
  double bound = 0.0;  // K_{C,T} rhs
  bool pass = false;
};

struct GrowthReport {
  std::vector<GrowthProbe> probes;
  std::vector<double> moduli;  // one per refinement level
  bool continuity_pass = false;
  bool bounded_checked = false;
  double sup_abs_u = 0.0;
  double bounded_limit = 0.0;
  bool bounded_pass = true;
  bool pass = false;
};

/// (a) u^2 <= K_{C,T} rhs at each probe by Monte Carlo; (b) the largest jump
/// of the surface between neighbouring points of a lattice over the probe box
/// shrinks by 0.8 or more per halving of the lattice spacing, over 3 halvings;
/// (c) for bounded obstacles, sup |u| <= sqrt(K_{C,T} (T sup f0^2 + sup hbar^2)).
GrowthReport growth_and_continuity_check(const Problem& problem,
                                         std::span<const std::pair<double, double>> probes,
                                         const McParams& mc, const GridParams& grid);

/// A position zeta(X_T) and a second one that dominates it pathwise.
struct PositionPair {
  std::function<double(double)> lower;
  std::function<double(double)> upper;
};

/// zeta_1 random put/call/affine payoff, zeta_2 = zeta_1 + |eta(X_T)| with eta
/// a random Lipschitz function.
std::vector<PositionPair> ordered_position_pairs(std::size_t n_cases, std::uint64_t seed);

struct MonotonicityCase {
  Estimate risk_lower;  // rho(zeta_1)
  Estimate risk_upper;  // rho(zeta_2)
  double combined_se = 0.0;
  bool pass = false;
};

struct MonotonicityReport {
  std::vector<MonotonicityCase> cases;
  std::size_t violations = 0;
  bool pass = false;
};

/// rho(zeta_1) >= rho(zeta_2) - 3 sqrt(se_1^2 + se_2^2) for every pair.
MonotonicityReport monotonicity_suite(const FullDriver& driver,
                                      const JumpDiffusionModel& model, double t0,
                                      double x0, double maturity,
                                      std::span<const PositionPair> pairs,
                                      const McParams& mc);

}  // namespace jumpstop
