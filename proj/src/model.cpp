#include "jumpstop/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "jumpstop/error.hpp"
#include "jumpstop/philox.hpp"

namespace jumpstop {

namespace {

constexpr double kProbeTol = 1e-9;

void check_node(const QuadNode& node) {
  if (!std::isfinite(node.mark) || !std::isfinite(node.weight)) {
    throw InvalidMeasureError("non-finite Levy node");
  }
  if (node.mark == 0.0) {
    throw InvalidMeasureError("Levy node at mark 0");
  }
  if (node.weight < 0.0) {
    throw InvalidMeasureError("negative Levy weight at mark " +
                              std::to_string(node.mark));
  }
}

std::string probe_detail(double x, double x2, double e) {
  std::ostringstream os;
  os.precision(6);
  os << "x=" << x << " x'=" << x2 << " e=" << e;
  return os.str();
}

}  // namespace

LevyMeasure::LevyMeasure(std::vector<QuadNode> nodes) : nodes_(std::move(nodes)) {
  for (const auto& n : nodes_) check_node(n);
  total_intensity_ = 0.0;
  for (const auto& n : nodes_) total_intensity_ += n.weight;
}

LevyMeasure LevyMeasure::from_atoms(std::vector<QuadNode> atoms) {
  for (const auto& a : atoms) {
    check_node(a);
    if (a.weight <= 0.0) {
      throw InvalidMeasureError("atom mass must be positive");
    }
  }
  return LevyMeasure(std::move(atoms));
}

LevyMeasure LevyMeasure::from_density(const MarkFunction& density,
                                      std::span<const MarkInterval> support,
                                      int n_quad) {
  if (n_quad < 1) throw InvalidMeasureError("n_quad must be >= 1");
  std::vector<QuadNode> nodes;
  nodes.reserve(support.size() * static_cast<std::size_t>(n_quad));
  for (const auto& iv : support) {
    if (!(iv.lo < iv.hi) || !std::isfinite(iv.lo) || !std::isfinite(iv.hi)) {
      throw InvalidMeasureError("empty or non-finite mark interval");
    }
    if (iv.lo <= 0.0 && iv.hi >= 0.0) {
      throw InvalidMeasureError("mark interval contains 0");
    }
    const double width = (iv.hi - iv.lo) / n_quad;
    for (int i = 0; i < n_quad; ++i) {
      const double mark = iv.lo + (i + 0.5) * width;
      const double d = density(mark);
      if (!std::isfinite(d) || d < 0.0) {
        throw InvalidMeasureError("density is negative or non-finite at mark " +
                                  std::to_string(mark));
      }
      nodes.push_back({mark, d * width});
    }
  }
  return LevyMeasure(std::move(nodes));
}

double LevyMeasure::max_abs_mark() const noexcept {
  double m = 0.0;
  for (const auto& n : nodes_) m = std::max(m, std::abs(n.mark));
  return m;
}

LevyMeasure build_quadrature(const MarkFunction& density, MarkInterval support,
                             int n_quad) {
  return LevyMeasure::from_density(density, std::span(&support, 1), n_quad);
}

double integrate_nu(const LevyMeasure& levy, const MarkFunction& integrand) {
  double sum = 0.0;
  for (const auto& node : levy.nodes()) {
    const double v = integrand(node.mark);
    if (!std::isfinite(v)) {
      throw NumericError("non-finite integrand at mark " +
                         std::to_string(node.mark));
    }
    sum += node.weight * v;
  }
  return sum;
}

double JumpDiffusionModel::compensator(double x) const {
  if (levy.empty()) return 0.0;
  return integrate_nu(levy, [&](double e) { return jump_size(x, e); });
}

double no_jump(double, double) { return 0.0; }

std::vector<Violation> validate_coefficients(const JumpDiffusionModel& model,
                                             int n_probes, std::uint64_t seed,
                                             StateBox box) {
  std::vector<Violation> out;
  ProbeStream rng(seed, 0x6d6f64656cULL);
  const double C = model.lipschitz_C;
  const auto nodes = model.levy.nodes();
  const auto exceeds = [](double measured, double bound) {
    return measured > bound + kProbeTol * (1.0 + std::abs(bound));
  };

  for (int i = 0; i < n_probes; ++i) {
    const double x = rng.uniform(box.lo, box.hi);
    const double x2 = rng.uniform(box.lo, box.hi);
    const double dx = std::abs(x - x2);

    const double db = std::abs(model.drift(x) - model.drift(x2));
    if (exceeds(db, C * dx)) {
      out.push_back({"drift_lipschitz", probe_detail(x, x2, 0.0), db, C * dx});
    }
    const double ds = std::abs(model.diffusion(x) - model.diffusion(x2));
    if (exceeds(ds, C * dx)) {
      out.push_back({"diffusion_lipschitz", probe_detail(x, x2, 0.0), ds, C * dx});
    }

    if (nodes.empty()) continue;
    const auto idx = std::min<std::size_t>(
        nodes.size() - 1,
        static_cast<std::size_t>(rng.uniform() * static_cast<double>(nodes.size())));
    const double e = nodes[idx].mark;
    const double cap = std::min(1.0, std::abs(e));

    const double beta = std::abs(model.jump_size(x, e));
    if (exceeds(beta, C * cap)) {
      out.push_back({"jump_size_bound", probe_detail(x, x2, e), beta, C * cap});
    }
    const double dbeta = std::abs(model.jump_size(x, e) - model.jump_size(x2, e));
    if (exceeds(dbeta, C * dx * cap)) {
      out.push_back({"jump_size_lipschitz", probe_detail(x, x2, e), dbeta,
                     C * dx * cap});
    }
  }
  return out;
}

}  // namespace jumpstop
