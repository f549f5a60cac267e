#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "jumpstop/bsde.hpp"
#include "jumpstop/driver.hpp"
#include "jumpstop/matrix.hpp"
#include "jumpstop/model.hpp"
#include "jumpstop/paths.hpp"

namespace jumpstop {

/// How the truncated domain treats its two boundary nodes and jump targets
/// beyond [x_min, x_max].
enum class BoundaryMode {
  /// Boundary nodes and overshooting jump targets take the obstacle value.
  dirichlet_obstacle,
  /// Boundary nodes and overshooting jump targets extend the solution linearly.
  linear_extrapolation,
};

class SpaceGrid {
 public:
  SpaceGrid(double x_min, double x_max, std::size_t n_nodes,
            BoundaryMode mode = BoundaryMode::linear_extrapolation);

  double x_min() const noexcept { return x_min_; }
  double x_max() const noexcept { return x_max_; }
  std::size_t n_nodes() const noexcept { return n_nodes_; }
  double dx() const noexcept { return dx_; }
  BoundaryMode boundary_mode() const noexcept { return mode_; }
  /// Exactly x_min at j = 0 and x_max at j = n_nodes - 1.
  double node(std::size_t j) const noexcept;
  std::vector<double> nodes() const;

 private:
  double x_min_;
  double x_max_;
  std::size_t n_nodes_;
  double dx_;
  BoundaryMode mode_;
};

/// Grid function u(t_k, x_j).
struct ValueSurface {
  TimeGrid tgrid;
  SpaceGrid sgrid;
  Matrix values;  // (n_steps + 1) x n_nodes

  /// Bilinear interpolation; throws ConfigError outside the grid.
  double interpolate(double t, double x) const;
};

struct StencilEntry {
  std::size_t index;
  double weight;
};

/// Contribution evaluated off-grid through the obstacle.
struct ExteriorEntry {
  double target;
  double weight;
};

struct NodeStencil {
  std::vector<StencilEntry> interior;
  std::vector<ExteriorEntry> exterior;

  bool empty() const noexcept { return interior.empty() && exterior.empty(); }
};

/// Value of the solution at an off-grid point (used in Dirichlet mode).
using ExteriorValue = std::function<double(double x)>;

/// Discrete generator pieces on a space grid.
///
/// K is split into its jump part (`k_stencil`: sum_q w_q phi(x + beta_q)
/// minus lambda phi(x)) and the compensator drift c(x) = int beta nu(de),
/// so that K phi = k_stencil(phi) - c phi'. B is the scalar-weighted
/// difference sum_q w_q gamma_q (phi(x + beta_q) - phi(x)).
struct OperatorBundle {
  SpaceGrid grid;
  std::vector<double> drift;      // b(x_j)
  std::vector<double> diffusion;  // sigma(x_j)
  // Tridiagonal A at interior nodes; rows 0 and n-1 are zero.
  std::vector<double> a_lower, a_diag, a_upper;
  std::vector<NodeStencil> k_stencil;
  std::vector<NodeStencil> b_stencil;
  std::vector<double> compensator_drift;
  double total_intensity = 0.0;

  std::vector<double> apply_a(std::span<const double> u) const;
  /// Full K including the compensator term (centred first difference).
  std::vector<double> apply_k(std::span<const double> u,
                              const ExteriorValue& exterior = {}) const;
  /// Jump part only.
  std::vector<double> apply_k_jump(std::span<const double> u,
                                   const ExteriorValue& exterior = {}) const;
  std::vector<double> apply_b(std::span<const double> u,
                              const ExteriorValue& exterior = {}) const;
};

/// Generator coefficients (lower, diag, upper) of b d/dx + diff2 d2/dx2 at the
/// interior nodes. Centred first differences are used where they keep the
/// off-diagonals nonnegative, upwind differences elsewhere.
void generator_rows(const SpaceGrid& grid, std::span<const double> drift,
                    std::span<const double> half_sigma_sq, std::vector<double>& lower,
                    std::vector<double>& diag, std::vector<double>& upper);

/// Assembles A, K and B. In Dirichlet mode an overshooting jump needs the
/// obstacle; passing none then raises ConfigError.
OperatorBundle assemble_operators(const JumpDiffusionModel& model,
                                  const DriverSpec& driver, const SpaceGrid& sgrid,
                                  const ObstacleSpec* obstacle = nullptr);

enum class ObstacleScheme { projection, penalization };

struct PidviOptions {
  ObstacleScheme scheme = ObstacleScheme::projection;
  double pen_param = 1e4;
  int n_picard = 3;
};

/// Backward IMEX stepping for
///   min(u - h, -u_t - (A + K) u - f(t, x, u, sigma u_x, B u)) = 0, u(T) = g.
/// Diffusion and drift are implicit; jumps, B and f are explicit. The
/// terminal row equals g(x_j) bit-exactly.
ValueSurface solve_pidvi(const JumpDiffusionModel& model, const FullDriver& driver,
                         const ObstacleSpec& obstacle, const TimeGrid& tgrid,
                         const SpaceGrid& sgrid, const PidviOptions& options = {});

/// Largest dt the explicit part accepts: 1 / (lambda + C).
double max_stable_dt(const JumpDiffusionModel& model, const DriverSpec& driver);

/// Throws InvariantViolation unless u(T, .) = g exactly and u >= h off the
/// terminal row (up to 1/pen_param relative slack under penalization).
void check_surface_invariants(const ValueSurface& surface, const ObstacleSpec& obstacle,
                              const PidviOptions& options);

struct ResidualOptions {
  /// Nodes with |u - h| < band_rel (1 + |u|) are left out of the sup-norm.
  double band_rel = 1e-3;
  /// Nodes left out next to each spatial boundary.
  std::size_t margin = 2;
  /// Layers with t > T - terminal_fraction (T - t0) are left out; the
  /// terminal kink of g makes u_tt blow up there.
  double terminal_fraction = 0.1;
};

struct ResidualField {
  Matrix residual;  // NaN where not evaluated
  Matrix counted;   // 1 where the node enters the sup-norm
  double sup_norm = 0.0;
  std::size_t n_counted = 0;
};

/// Pointwise min-form residual with all derivatives taken by centred
/// differences on the surface itself.
ResidualField viscosity_residual(const ValueSurface& surface,
                                 const JumpDiffusionModel& model,
                                 const FullDriver& driver, const ObstacleSpec& obstacle,
                                 const ResidualOptions& options = {});

struct RegionInterval {
  std::size_t j_lo;
  std::size_t j_hi;
  double x_lo;
  double x_hi;
};

struct StoppingSlice {
  double t;
  std::vector<RegionInterval> intervals;
};

/// Per time layer, maximal runs of nodes with u - hbar <= band_tol.
std::vector<StoppingSlice> extract_stopping_region(const ValueSurface& surface,
                                                   const ObstacleSpec& obstacle,
                                                   double band_tol);

}  // namespace jumpstop
