#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "jumpstop/violation.hpp"

namespace jumpstop {

using MarkFunction = std::function<double(double)>;

/// One point of the discretized Levy measure.
struct QuadNode {
  double mark;
  double weight;
};

/// Closed interval of jump marks; must not contain 0.
struct MarkInterval {
  double lo;
  double hi;
};

/// Finite Levy measure represented by its quadrature nodes.
///
/// Every integral against nu in the library goes through `nodes()`, so
/// atoms are represented exactly and densities by the midpoint rule.
class LevyMeasure {
 public:
  /// The zero measure (no jumps).
  LevyMeasure() = default;

  static LevyMeasure from_atoms(std::vector<QuadNode> atoms);
  static LevyMeasure from_density(const MarkFunction& density,
                                  std::span<const MarkInterval> support,
                                  int n_quad);

  double total_intensity() const noexcept { return total_intensity_; }
  std::span<const QuadNode> nodes() const noexcept { return nodes_; }
  bool empty() const noexcept { return nodes_.empty(); }

  /// Largest |mark| among the nodes; 0 for the zero measure.
  double max_abs_mark() const noexcept;

 private:
  explicit LevyMeasure(std::vector<QuadNode> nodes);

  std::vector<QuadNode> nodes_;
  double total_intensity_ = 0.0;
};

/// Midpoint quadrature of a density on a single interval.
LevyMeasure build_quadrature(const MarkFunction& density, MarkInterval support,
                             int n_quad);

/// Sum of weight * integrand(mark) over the quadrature nodes.
double integrate_nu(const LevyMeasure& levy, const MarkFunction& integrand);

/// One-dimensional jump-diffusion
///   dX = b(X) dt + sigma(X) dW + int beta(X-, e) Ntilde(dt, de).
struct JumpDiffusionModel {
  std::function<double(double)> drift;
  std::function<double(double)> diffusion;
  std::function<double(double, double)> jump_size;
  LevyMeasure levy;
  double lipschitz_C = 1.0;
  double horizon = 1.0;

  /// int beta(x, e) nu(de), the drift removed by compensating the jumps.
  double compensator(double x) const;
};

/// State window from which coefficient probes are drawn.
struct StateBox {
  double lo = -5.0;
  double hi = 5.0;
};

/// Probes the Lipschitz and jump-size bounds of the coefficients.
/// Returns every probe that violated a bound by more than 1e-9.
std::vector<Violation> validate_coefficients(const JumpDiffusionModel& model,
                                             int n_probes, std::uint64_t seed,
                                             StateBox box = {});

/// Zero jump-size function.
double no_jump(double x, double e);

}  // namespace jumpstop
