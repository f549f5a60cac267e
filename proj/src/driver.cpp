#include "jumpstop/driver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "jumpstop/error.hpp"
#include "jumpstop/philox.hpp"

namespace jumpstop {

namespace {

constexpr double kProbeTol = 1e-9;
constexpr double kBox = 10.0;

bool exceeds(double measured, double bound) {
  return measured > bound + kProbeTol * (1.0 + std::abs(bound));
}

std::string describe(double t, double x, double y, double z, double l) {
  std::ostringstream os;
  os.precision(6);
  os << "t=" << t << " x=" << x << " y=" << y << " z=" << z << " l=" << l;
  return os.str();
}

std::string describe_gamma(double x, double x2, double e) {
  std::ostringstream os;
  os.precision(6);
  os << "x=" << x << " x'=" << x2 << " e=" << e;
  return os.str();
}

}  // namespace

double eval_scalar_driver(const DriverSpec& d, double t, double x, double y,
                          double z, double l) {
  const double v = d.f_bar(t, x, y, z, l);
  if (!std::isfinite(v)) {
    throw NumericError("non-finite driver value at " + describe(t, x, y, z, l));
  }
  return v;
}

double eval_driver(const FullDriver& d, const LevyMeasure& levy, double t,
                   double x, double y, double z, const MarkFunction& k) {
  if (d.kernel_mode == KernelMode::general_l2nu && d.functional) {
    std::vector<double> k_nodes;
    k_nodes.reserve(levy.nodes().size());
    for (const auto& n : levy.nodes()) k_nodes.push_back(k(n.mark));
    const double v = d.functional(t, x, y, z, k_nodes, levy);
    if (!std::isfinite(v)) {
      throw NumericError("non-finite driver value at " + describe(t, x, y, z, 0.0));
    }
    return v;
  }
  const double l =
      integrate_nu(levy, [&](double e) { return k(e) * d.base.gamma(x, e); });
  return eval_scalar_driver(d.base, t, x, y, z, l);
}

std::vector<Violation> validate_driver(const DriverSpec& d, int n_probes,
                                       std::uint64_t seed, DriverProbeBox box) {
  std::vector<Violation> out;
  ProbeStream rng(seed, 0x647276ULL);
  const double C = d.lipschitz_C;
  const double r = d.monotone_r;
  using enum AssumptionLevel;

  for (int i = 0; i < n_probes; ++i) {
    const double t = rng.uniform(0.0, box.horizon);
    const double x = rng.uniform(box.x_lo, box.x_hi);
    const double x2 = rng.uniform(box.x_lo, box.x_hi);
    const double y1 = rng.uniform(-kBox, kBox), y2 = rng.uniform(-kBox, kBox);
    const double z1 = rng.uniform(-kBox, kBox), z2 = rng.uniform(-kBox, kBox);
    const double l1 = rng.uniform(-kBox, kBox), l2 = rng.uniform(-kBox, kBox);
    const double e = rng.uniform(-box.mark_max, box.mark_max);

    const double f11 = d.f_bar(t, x, y1, z1, l1);

    // Lipschitz in (y, z, l).
    const double f22 = d.f_bar(t, x, y2, z2, l2);
    const double lip_bound =
        C * (std::abs(y1 - y2) + std::abs(z1 - z2) + std::abs(l1 - l2));
    if (exceeds(std::abs(f11 - f22), lip_bound)) {
      out.push_back({"yzl_lipschitz", describe(t, x, y1, z1, l1),
                     std::abs(f11 - f22), lip_bound, existence});
    }

    // Nondecreasing in l.
    {
      const double lo = std::min(l1, l2), hi = std::max(l1, l2);
      const double f_lo = d.f_bar(t, x, y1, z1, lo);
      const double f_hi = d.f_bar(t, x, y1, z1, hi);
      if (exceeds(f_lo - f_hi, 0.0)) {
        out.push_back({"l_monotone", describe(t, x, y1, z1, lo), f_lo - f_hi, 0.0,
                       existence});
      }
    }

    // fbar(v) - fbar(u) >= r (u - v) for u >= v.
    {
      const double u = std::max(y1, y2), v = std::min(y1, y2);
      const double gap = d.f_bar(t, x, v, z1, l1) - d.f_bar(t, x, u, z1, l1);
      if (exceeds(r * (u - v), gap)) {
        out.push_back({"y_monotone", describe(t, x, u, z1, l1), gap, r * (u - v),
                       comparison});
      }
    }

    // Continuity in x: the increment must shrink with the step.
    {
      const double big = std::abs(d.f_bar(t, x + 1e-3, y1, z1, l1) - f11);
      const double small = std::abs(d.f_bar(t, x + 1e-7, y1, z1, l1) - f11);
      if (small > kProbeTol && small >= 0.5 * big) {
        out.push_back({"x_continuity", describe(t, x, y1, z1, l1), small, big,
                       existence});
      }
    }

    if (!std::isfinite(f11)) {
      out.push_back({"finite_value", describe(t, x, y1, z1, l1), f11, 0.0, existence});
    }

    if (e == 0.0) continue;
    const double g = d.gamma(x, e);
    const double cap = std::min(1.0, std::abs(e));
    if (exceeds(-g, 1.0)) {
      out.push_back({"gamma_lower_bound", describe_gamma(x, x2, e), g, -1.0,
                     existence});
    }
    if (exceeds(-g, 0.0)) {
      out.push_back({"gamma_nonnegative", describe_gamma(x, x2, e), g, 0.0,
                     comparison});
    }
    if (exceeds(g, C * cap)) {
      out.push_back({"gamma_upper_bound", describe_gamma(x, x2, e), g, C * cap,
                     existence});
    }
    const double dg = std::abs(g - d.gamma(x2, e));
    const double dx = std::abs(x - x2);
    if (exceeds(dg, C * dx * cap)) {
      out.push_back({"gamma_x_lipschitz", describe_gamma(x, x2, e), dg, C * dx * cap,
                     existence});
    } else if (exceeds(dg, C * dx * std::min(1.0, e * e))) {
      out.push_back({"gamma_x_lipschitz_sq", describe_gamma(x, x2, e), dg,
                     C * dx * std::min(1.0, e * e), comparison});
    }
  }
  return out;
}

bool satisfies_existence_bounds(std::span<const Violation> violations) {
  return std::none_of(violations.begin(), violations.end(), [](const Violation& v) {
    return v.level == AssumptionLevel::existence;
  });
}

GammaFn gamma_zero() {
  return [](double, double) { return 0.0; };
}

GammaFn gamma_min1abs(double scale) {
  return [scale](double, double e) { return scale * std::min(1.0, std::abs(e)); };
}

GammaFn gamma_constant(double c) {
  return [c](double, double) { return c; };
}

DriverSpec linear_driver(double rho, double kappa, double a, GammaFn gamma,
                         double gamma_bound, std::function<double(double)> offset) {
  if (kappa < 0.0) throw ConfigError("ambiguity coefficient kappa must be >= 0");
  if (a < 0.0) throw ConfigError("jump sensitivity a must be >= 0");
  DriverSpec d;
  if (offset) {
    d.f_bar = [rho, kappa, a, offset = std::move(offset)](double, double x, double y,
                                                          double z, double l) {
      return -rho * y + kappa * std::abs(z) + a * l + offset(x);
    };
  } else {
    d.f_bar = [rho, kappa, a](double, double, double y, double z, double l) {
      return -rho * y + kappa * std::abs(z) + a * l;
    };
  }
  d.gamma = std::move(gamma);
  const double C = std::max({std::abs(rho), kappa, a, gamma_bound});
  d.lipschitz_C = C > 0.0 ? C : 1.0;
  d.monotone_r = std::max(0.0, rho);
  d.growth_p = 0;
  return d;
}

DriverSpec zero_driver() { return linear_driver(0.0, 0.0, 0.0, gamma_zero(), 0.0); }

DriverSpec discount_driver(double rho) {
  return linear_driver(rho, 0.0, 0.0, gamma_zero(), 0.0);
}

DriverSpec ambiguity_driver(double rho, double kappa) {
  return linear_driver(rho, kappa, 0.0, gamma_zero(), 0.0);
}

DriverSpec jump_sensitive_driver(double rho, double a, GammaFn gamma) {
  return linear_driver(rho, 0.0, a, std::move(gamma), 1.0);
}

}  // namespace jumpstop
