#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "jumpstop/model.hpp"
#include "jumpstop/violation.hpp"

namespace jumpstop {

/// Scalar-jump generator fbar(t, x, y, z, l).
using ScalarDriverFn =
    std::function<double(double t, double x, double y, double z, double l)>;

/// Jump-comparison weight gamma(x, e).
using GammaFn = std::function<double(double x, double e)>;

/// A BSDE generator in scalar-jump form together with its weight gamma.
///
/// The generator seen by the BSDE is
///   f(t, x, y, z, k) = fbar(t, x, y, z, <gamma(x, .), k>_nu).
struct DriverSpec {
  ScalarDriverFn f_bar;
  GammaFn gamma;
  double lipschitz_C = 1.0;
  double monotone_r = 0.0;
  int growth_p = 0;
};

enum class KernelMode { scalar_h2, general_l2nu };

/// Generator acting on a mark-function k given by its values on the
/// quadrature nodes of nu.
using L2nuDriverFn = std::function<double(double t, double x, double y, double z,
                                          std::span<const double> k_at_nodes,
                                          const LevyMeasure& levy)>;

/// A driver in either evaluation mode.
///
/// In general mode with no `functional` set, k is reduced through the inner
/// product with gamma, which makes both modes agree exactly.
struct FullDriver {
  DriverSpec base;
  KernelMode kernel_mode = KernelMode::scalar_h2;
  L2nuDriverFn functional;

  /// True when the driver only sees k through <gamma, k>_nu.
  bool is_scalar_reducible() const noexcept {
    return kernel_mode == KernelMode::scalar_h2 || !functional;
  }
};

/// Evaluates the driver on a mark-function k.
double eval_driver(const FullDriver& d, const LevyMeasure& levy, double t,
                   double x, double y, double z, const MarkFunction& k);

/// Evaluates fbar directly from the scalar jump component l.
double eval_scalar_driver(const DriverSpec& d, double t, double x, double y,
                          double z, double l);

/// Window for driver probes: states in [x_lo, x_hi], times in [0, T],
/// marks in [-mark_max, mark_max] \ {0}, and (y, z, l) in [-10, 10]^3.
struct DriverProbeBox {
  double x_lo = -5.0;
  double x_hi = 5.0;
  double horizon = 1.0;
  double mark_max = 1.0;
};

/// Probes the generator and gamma bounds. An empty result means no probe
/// violated any bound by more than 1e-9.
std::vector<Violation> validate_driver(const DriverSpec& d, int n_probes,
                                       std::uint64_t seed,
                                       DriverProbeBox box = {});

/// True when none of the violations concerns the existence-level bounds.
bool satisfies_existence_bounds(std::span<const Violation> violations);

// Presets. All of them have the form fbar = -rho*y + kappa*|z| + a*l + c(x).

GammaFn gamma_zero();
/// gamma(x, e) = scale * min(1, |e|).
GammaFn gamma_min1abs(double scale = 1.0);
GammaFn gamma_constant(double c);

DriverSpec zero_driver();
DriverSpec discount_driver(double rho);
DriverSpec ambiguity_driver(double rho, double kappa);
DriverSpec jump_sensitive_driver(double rho, double a, GammaFn gamma);
/// -rho*y + kappa*|z| + a*l + offset(x).
DriverSpec linear_driver(double rho, double kappa, double a, GammaFn gamma,
                         double gamma_bound,
                         std::function<double(double)> offset = {});

}  // namespace jumpstop
