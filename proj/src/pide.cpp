#include "jumpstop/pide.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "jumpstop/error.hpp"
#include "jumpstop/parallel.hpp"

namespace jumpstop {

// ---------------------------------------------------------------------------
// Grids

SpaceGrid::SpaceGrid(double x_min, double x_max, std::size_t n_nodes, BoundaryMode mode)
    : x_min_(x_min), x_max_(x_max), n_nodes_(n_nodes), mode_(mode) {
  if (!(x_min < x_max)) throw ConfigError("space grid needs x_min < x_max");
  if (n_nodes < 3) throw ConfigError("space grid needs at least 3 nodes");
  dx_ = (x_max - x_min) / static_cast<double>(n_nodes - 1);
}

double SpaceGrid::node(std::size_t j) const noexcept {
  if (j + 1 >= n_nodes_) return x_max_;
  return x_min_ + static_cast<double>(j) * dx_;
}

std::vector<double> SpaceGrid::nodes() const {
  std::vector<double> out(n_nodes_);
  for (std::size_t j = 0; j < n_nodes_; ++j) out[j] = node(j);
  return out;
}

double ValueSurface::interpolate(double t, double x) const {
  const double eps = 1e-12;
  if (t < tgrid.t0() - eps || t > tgrid.horizon() + eps || x < sgrid.x_min() - eps ||
      x > sgrid.x_max() + eps) {
    std::ostringstream os;
    os << "probe (" << t << ", " << x << ") lies outside the grid";
    throw ConfigError(os.str());
  }
  const double tp = std::clamp((t - tgrid.t0()) / tgrid.dt(), 0.0,
                               static_cast<double>(tgrid.n_steps()));
  const double xp = std::clamp((x - sgrid.x_min()) / sgrid.dx(), 0.0,
                               static_cast<double>(sgrid.n_nodes() - 1));
  const auto k = std::min(static_cast<std::size_t>(tp), tgrid.n_steps() - 1);
  const auto j = std::min(static_cast<std::size_t>(xp), sgrid.n_nodes() - 2);
  const double a = tp - static_cast<double>(k);
  const double b = xp - static_cast<double>(j);
  return (1 - a) * ((1 - b) * values(k, j) + b * values(k, j + 1)) +
         a * ((1 - b) * values(k + 1, j) + b * values(k + 1, j + 1));
}

// ---------------------------------------------------------------------------
// Operators

namespace {

// Linear interpolation (or extrapolation) weights of the target y.
struct Bracket {
  bool inside;
  std::size_t i;
  double s;
};

Bracket bracket(const SpaceGrid& g, double y) {
  const double pos = (y - g.x_min()) / g.dx();
  const auto last = static_cast<double>(g.n_nodes() - 1);
  const bool inside = pos >= 0.0 && pos <= last;
  std::size_t i;
  if (pos < 0.0) {
    i = 0;
  } else if (pos >= last - 1.0) {
    i = g.n_nodes() - 2;
  } else {
    i = static_cast<std::size_t>(pos);
  }
  return {inside, i, pos - static_cast<double>(i)};
}

double apply_stencil(const NodeStencil& st, std::span<const double> u,
                     const ExteriorValue& exterior) {
  double v = 0.0;
  for (const auto& e : st.interior) v += e.weight * u[e.index];
  if (!st.exterior.empty()) {
    if (!exterior) throw ConfigError("stencil reaches outside the grid but no exterior value given");
    for (const auto& e : st.exterior) v += e.weight * exterior(e.target);
  }
  return v;
}

double centred_slope(std::span<const double> u, std::size_t j, double dx) {
  const std::size_t n = u.size();
  if (j == 0) return (u[1] - u[0]) / dx;
  if (j + 1 == n) return (u[n - 1] - u[n - 2]) / dx;
  return (u[j + 1] - u[j - 1]) / (2.0 * dx);
}

}  // namespace

void generator_rows(const SpaceGrid& grid, std::span<const double> drift,
                    std::span<const double> half_sigma_sq, std::vector<double>& lower,
                    std::vector<double>& diag, std::vector<double>& upper) {
  const std::size_t n = grid.n_nodes();
  const double dx = grid.dx();
  lower.assign(n, 0.0);
  diag.assign(n, 0.0);
  upper.assign(n, 0.0);
  for (std::size_t j = 1; j + 1 < n; ++j) {
    const double d = half_sigma_sq[j] / (dx * dx);
    const double b = drift[j];
    double lo, up;
    if (std::abs(b) * dx <= 2.0 * half_sigma_sq[j]) {
      lo = d - b / (2.0 * dx);
      up = d + b / (2.0 * dx);
    } else if (b > 0.0) {
      lo = d;
      up = d + b / dx;
    } else {
      lo = d - b / dx;
      up = d;
    }
    lower[j] = lo;
    upper[j] = up;
    diag[j] = -(lo + up);
  }
}

OperatorBundle assemble_operators(const JumpDiffusionModel& model,
                                  const DriverSpec& driver, const SpaceGrid& sgrid,
                                  const ObstacleSpec* obstacle) {
  const std::size_t n = sgrid.n_nodes();
  OperatorBundle ops{sgrid, {}, {}, {}, {}, {}, {}, {}, {}, 0.0};
  ops.drift.resize(n);
  ops.diffusion.resize(n);
  std::vector<double> half_var(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double x = sgrid.node(j);
    ops.drift[j] = model.drift(x);
    ops.diffusion[j] = model.diffusion(x);
    half_var[j] = 0.5 * ops.diffusion[j] * ops.diffusion[j];
  }
  generator_rows(sgrid, ops.drift, half_var, ops.a_lower, ops.a_diag, ops.a_upper);

  ops.total_intensity = model.levy.total_intensity();
  ops.k_stencil.assign(n, {});
  ops.b_stencil.assign(n, {});
  ops.compensator_drift.assign(n, 0.0);
  const bool dirichlet = sgrid.boundary_mode() == BoundaryMode::dirichlet_obstacle;

  for (std::size_t j = 0; j < n; ++j) {
    const double x = sgrid.node(j);
    auto& ks = ops.k_stencil[j];
    auto& bs = ops.b_stencil[j];
    double k_diag = 0.0, b_diag = 0.0, comp = 0.0;
    for (const auto& q : model.levy.nodes()) {
      const double beta = model.jump_size(x, q.mark);
      if (beta == 0.0 || q.weight == 0.0) continue;
      comp += q.weight * beta;
      const double gw = q.weight * driver.gamma(x, q.mark);
      const Bracket br = bracket(sgrid, x + beta);
      k_diag += q.weight;
      b_diag += gw;
      if (!br.inside && dirichlet) {
        if (!obstacle) {
          throw ConfigError("jump from x=" + std::to_string(x) +
                            " leaves the grid and no obstacle is defined there");
        }
        ks.exterior.push_back({x + beta, q.weight});
        if (gw != 0.0) bs.exterior.push_back({x + beta, gw});
        continue;
      }
      ks.interior.push_back({br.i, q.weight * (1.0 - br.s)});
      ks.interior.push_back({br.i + 1, q.weight * br.s});
      if (gw != 0.0) {
        bs.interior.push_back({br.i, gw * (1.0 - br.s)});
        bs.interior.push_back({br.i + 1, gw * br.s});
      }
    }
    if (k_diag != 0.0) ks.interior.push_back({j, -k_diag});
    if (b_diag != 0.0) bs.interior.push_back({j, -b_diag});
    ops.compensator_drift[j] = comp;
  }
  return ops;
}

std::vector<double> OperatorBundle::apply_a(std::span<const double> u) const {
  std::vector<double> out(u.size(), 0.0);
  for (std::size_t j = 1; j + 1 < u.size(); ++j) {
    out[j] = a_lower[j] * u[j - 1] + a_diag[j] * u[j] + a_upper[j] * u[j + 1];
  }
  return out;
}

std::vector<double> OperatorBundle::apply_k_jump(std::span<const double> u,
                                                 const ExteriorValue& exterior) const {
  std::vector<double> out(u.size(), 0.0);
  for (std::size_t j = 0; j < u.size(); ++j) {
    if (!k_stencil[j].empty()) out[j] = apply_stencil(k_stencil[j], u, exterior);
  }
  return out;
}

std::vector<double> OperatorBundle::apply_k(std::span<const double> u,
                                            const ExteriorValue& exterior) const {
  auto out = apply_k_jump(u, exterior);
  for (std::size_t j = 0; j < u.size(); ++j) {
    if (compensator_drift[j] != 0.0)
      out[j] -= compensator_drift[j] * centred_slope(u, j, grid.dx());
  }
  return out;
}

std::vector<double> OperatorBundle::apply_b(std::span<const double> u,
                                            const ExteriorValue& exterior) const {
  std::vector<double> out(u.size(), 0.0);
  for (std::size_t j = 0; j < u.size(); ++j) {
    if (!b_stencil[j].empty()) out[j] = apply_stencil(b_stencil[j], u, exterior);
  }
  return out;
}

double max_stable_dt(const JumpDiffusionModel& model, const DriverSpec& driver) {
  const double rate = model.levy.total_intensity() + driver.lipschitz_C;
  return rate > 0.0 ? 1.0 / rate : std::numeric_limits<double>::infinity();
}

// ---------------------------------------------------------------------------
// Solver

namespace {

// Thomas algorithm on rows [first, last]; lower[first] and upper[last] are ignored.
void solve_tridiagonal(std::size_t first, std::size_t last, std::span<const double> lower,
                       std::span<const double> diag, std::span<const double> upper,
                       std::span<const double> rhs, std::span<double> out) {
  const std::size_t m = last - first + 1;
  std::vector<double> c(m), d(m);
  double denom = diag[first];
  if (denom == 0.0 || !std::isfinite(denom))
    throw SingularOperatorError("zero pivot in tridiagonal solve");
  c[0] = upper[first] / denom;
  d[0] = rhs[first] / denom;
  for (std::size_t i = 1; i < m; ++i) {
    const std::size_t r = first + i;
    denom = diag[r] - lower[r] * c[i - 1];
    if (denom == 0.0 || !std::isfinite(denom))
      throw SingularOperatorError("zero pivot in tridiagonal solve");
    c[i] = upper[r] / denom;
    d[i] = (rhs[r] - lower[r] * d[i - 1]) / denom;
  }
  out[last] = d[m - 1];
  for (std::size_t i = m - 1; i-- > 0;) {
    out[first + i] = d[i] - c[i] * out[first + i + 1];
  }
}

struct ImplicitSystem {
  std::vector<double> lower, diag, upper;
};

}  // namespace

ValueSurface solve_pidvi(const JumpDiffusionModel& model, const FullDriver& driver,
                         const ObstacleSpec& obstacle, const TimeGrid& tgrid,
                         const SpaceGrid& sgrid, const PidviOptions& options) {
  if (!driver.is_scalar_reducible()) {
    throw ConfigError("the grid solver only supports drivers that see k through <gamma, k>_nu");
  }
  if (options.n_picard < 1) throw ConfigError("n_picard must be >= 1");
  if (options.scheme == ObstacleScheme::penalization && !(options.pen_param > 0.0))
    throw ConfigError("pen_param must be positive");

  const double dt = tgrid.dt();
  const double dt_max = max_stable_dt(model, driver.base);
  if (!(dt < dt_max)) throw CflError(dt, dt_max);

  const OperatorBundle ops = assemble_operators(model, driver.base, sgrid, &obstacle);
  const std::size_t n = sgrid.n_nodes();
  const std::size_t n_steps = tgrid.n_steps();
  const std::vector<double> x = sgrid.nodes();
  const bool dirichlet = sgrid.boundary_mode() == BoundaryMode::dirichlet_obstacle;
  const bool eliminate = !dirichlet && n >= 5;
  const DriverSpec& d = driver.base;

  // Implicit part: I - dt * A(b - c) on interior rows.
  std::vector<double> eff_drift(n), half_var(n);
  for (std::size_t j = 0; j < n; ++j) {
    eff_drift[j] = ops.drift[j] - ops.compensator_drift[j];
    half_var[j] = 0.5 * ops.diffusion[j] * ops.diffusion[j];
  }
  ImplicitSystem sys;
  generator_rows(sgrid, eff_drift, half_var, sys.lower, sys.diag, sys.upper);
  for (std::size_t j = 1; j + 1 < n; ++j) {
    sys.lower[j] = -dt * sys.lower[j];
    sys.upper[j] = -dt * sys.upper[j];
    sys.diag[j] = 1.0 - dt * sys.diag[j];
  }
  if (eliminate) {
    // u_0 = 2 u_1 - u_2 and u_{n-1} = 2 u_{n-2} - u_{n-3}.
    sys.diag[1] += 2.0 * sys.lower[1];
    sys.upper[1] -= sys.lower[1];
    sys.diag[n - 2] += 2.0 * sys.upper[n - 2];
    sys.lower[n - 2] -= sys.upper[n - 2];
  }

  ValueSurface surface{tgrid, sgrid, Matrix(n_steps + 1, n)};
  for (std::size_t j = 0; j < n; ++j) surface.values(n_steps, j) = obstacle.g(x[j]);

  std::vector<double> u_next(n), u_iter(n), u_new(n), rhs(n), base(n), hk(n);
  std::vector<double> diag_pen(n), rhs_pen(n);
  std::vector<char> active(n, 0);

  for (std::size_t k = n_steps; k-- > 0;) {
    const double t = tgrid.time(k);
    const double t_next = tgrid.time(k + 1);
    const bool next_terminal = k + 1 == n_steps;
    for (std::size_t j = 0; j < n; ++j) {
      u_next[j] = surface.values(k + 1, j);
      hk[j] = obstacle.h(t, x[j]);
    }
    const ExteriorValue ext_next = [&](double y) {
      return next_terminal ? obstacle.g(y) : obstacle.h(t_next, y);
    };
    const ExteriorValue ext_now = [&](double y) { return obstacle.h(t, y); };

    const auto kj = ops.apply_k_jump(u_next, ext_next);
    for (std::size_t j = 0; j < n; ++j) base[j] = u_next[j] + dt * kj[j];

    u_iter = u_next;
    for (int it = 0; it < options.n_picard; ++it) {
      const auto bu = ops.apply_b(u_iter, ext_now);
      parallel_for(n, [&](std::size_t b, std::size_t e) {
        for (std::size_t j = b; j < e; ++j) {
          const double z = ops.diffusion[j] * centred_slope(u_iter, j, sgrid.dx());
          rhs[j] = base[j] + dt * eval_scalar_driver(d, t, x[j], u_iter[j], z, bu[j]);
        }
      });

      // Boundary values.
      if (dirichlet) {
        u_new[0] = hk[0];
        u_new[n - 1] = hk[n - 1];
      } else if (!eliminate) {
        u_new[0] = u_next[0];
        u_new[n - 1] = u_next[n - 1];
      }

      const bool penalize = options.scheme == ObstacleScheme::penalization;
      if (penalize) {
        for (std::size_t j = 0; j < n; ++j) active[j] = u_iter[j] < hk[j];
      }
      for (int pass = 0; pass < 100; ++pass) {
        for (std::size_t j = 0; j < n; ++j) {
          const double pen = penalize && active[j] ? dt * options.pen_param : 0.0;
          diag_pen[j] = sys.diag[j] + pen;
          rhs_pen[j] = rhs[j] + pen * hk[j];
        }
        if (!eliminate) {
          rhs_pen[1] -= sys.lower[1] * u_new[0];
          rhs_pen[n - 2] -= sys.upper[n - 2] * u_new[n - 1];
        }
        solve_tridiagonal(1, n - 2, sys.lower, diag_pen, sys.upper, rhs_pen, u_new);
        if (eliminate) {
          u_new[0] = 2.0 * u_new[1] - u_new[2];
          u_new[n - 1] = 2.0 * u_new[n - 2] - u_new[n - 3];
        }
        if (!penalize) break;
        bool changed = false;
        for (std::size_t j = 1; j + 1 < n; ++j) {
          const char now = u_new[j] < hk[j];
          if (now != active[j]) {
            active[j] = now;
            changed = true;
          }
        }
        if (!changed) break;
      }
      if (penalize) {
        u_iter = u_new;
      } else {
        for (std::size_t j = 0; j < n; ++j) u_iter[j] = std::max(u_new[j], hk[j]);
      }
    }

    for (std::size_t j = 0; j < n; ++j) {
      const bool edge = j == 0 || j + 1 == n;
      const bool project = options.scheme == ObstacleScheme::projection || edge;
      surface.values(k, j) = project ? std::max(u_iter[j], hk[j]) : u_iter[j];
    }
  }

  check_surface_invariants(surface, obstacle, options);
  return surface;
}

void check_surface_invariants(const ValueSurface& surface, const ObstacleSpec& obstacle,
                              const PidviOptions& options) {
  const std::size_t n_steps = surface.tgrid.n_steps();
  const std::size_t n = surface.sgrid.n_nodes();
  for (std::size_t j = 0; j < n; ++j) {
    if (surface.values(n_steps, j) != obstacle.g(surface.sgrid.node(j))) {
      throw InvariantViolation("terminal row differs from g at node " + std::to_string(j));
    }
  }
  for (std::size_t k = 0; k < n_steps; ++k) {
    const double t = surface.tgrid.time(k);
    for (std::size_t j = 0; j < n; ++j) {
      const double h = obstacle.h(t, surface.sgrid.node(j));
      const double slack = options.scheme == ObstacleScheme::projection
                               ? 1e-12
                               : (1.0 + std::abs(h)) / options.pen_param;
      if (surface.values(k, j) < h - slack) {
        throw InvariantViolation("value below obstacle at step " + std::to_string(k) +
                                 ", node " + std::to_string(j));
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Diagnostics

ResidualField viscosity_residual(const ValueSurface& surface,
                                 const JumpDiffusionModel& model,
                                 const FullDriver& driver, const ObstacleSpec& obstacle,
                                 const ResidualOptions& options) {
  const auto& sg = surface.sgrid;
  const auto& tg = surface.tgrid;
  const std::size_t n = sg.n_nodes();
  const std::size_t n_steps = tg.n_steps();
  const double dx = sg.dx();
  const double dt = tg.dt();
  const OperatorBundle ops = assemble_operators(model, driver.base, sg, &obstacle);
  const double nan = std::numeric_limits<double>::quiet_NaN();

  ResidualField field{Matrix(n_steps + 1, n, nan), Matrix(n_steps + 1, n, 0.0)};
  const double t_cut = tg.horizon() - options.terminal_fraction * (tg.horizon() - tg.t0());
  for (std::size_t k = 1; k + 1 < n_steps; ++k) {
    const double t = tg.time(k);
    if (t > t_cut + 1e-12 * tg.horizon()) break;
    const auto row = surface.values.row(k);
    const ExteriorValue ext = [&](double y) { return obstacle.h(t, y); };
    const auto ku = ops.apply_k_jump(row, ext);
    const auto bu = ops.apply_b(row, ext);
    for (std::size_t j = std::max<std::size_t>(options.margin, 1);
         j + std::max<std::size_t>(options.margin, 1) < n; ++j) {
      const double x = sg.node(j);
      const double u = row[j];
      const double ut = (surface.values(k + 1, j) - surface.values(k - 1, j)) / (2.0 * dt);
      const double ux = (row[j + 1] - row[j - 1]) / (2.0 * dx);
      const double uxx = (row[j + 1] - 2.0 * u + row[j - 1]) / (dx * dx);
      const double sigma = ops.diffusion[j];
      const double au = 0.5 * sigma * sigma * uxx + ops.drift[j] * ux;
      const double kfull = ku[j] - ops.compensator_drift[j] * ux;
      const double f = eval_scalar_driver(driver.base, t, x, u, sigma * ux, bu[j]);
      const double h = obstacle.h(t, x);
      const double r = std::min(u - h, -ut - au - kfull - f);
      field.residual(k, j) = r;
      if (std::abs(u - h) >= options.band_rel * (1.0 + std::abs(u))) {
        field.counted(k, j) = 1.0;
        field.sup_norm = std::max(field.sup_norm, std::abs(r));
        ++field.n_counted;
      }
    }
  }
  return field;
}

std::vector<StoppingSlice> extract_stopping_region(const ValueSurface& surface,
                                                   const ObstacleSpec& obstacle,
                                                   double band_tol) {
  if (!(band_tol > 0.0)) throw ConfigError("band_tol must be positive");
  const auto& sg = surface.sgrid;
  const std::size_t n_steps = surface.tgrid.n_steps();
  std::vector<StoppingSlice> out;
  out.reserve(n_steps + 1);
  for (std::size_t k = 0; k <= n_steps; ++k) {
    const double t = surface.tgrid.time(k);
    StoppingSlice slice{t, {}};
    bool open = false;
    std::size_t start = 0;
    for (std::size_t j = 0; j <= sg.n_nodes(); ++j) {
      bool in = false;
      if (j < sg.n_nodes()) {
        const double x = sg.node(j);
        const double hb = k < n_steps ? obstacle.h(t, x) : obstacle.g(x);
        in = surface.values(k, j) - hb <= band_tol;
      }
      if (in && !open) {
        open = true;
        start = j;
      } else if (!in && open) {
        open = false;
        slice.intervals.push_back({start, j - 1, sg.node(start), sg.node(j - 1)});
      }
    }
    out.push_back(std::move(slice));
  }
  return out;
}

}  // namespace jumpstop
