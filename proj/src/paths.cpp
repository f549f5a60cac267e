#include "jumpstop/paths.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

#include "jumpstop/error.hpp"
#include "jumpstop/parallel.hpp"
#include "jumpstop/philox.hpp"

namespace jumpstop {

TimeGrid::TimeGrid(double t0, double horizon, std::size_t n_steps)
    : t0_(t0), horizon_(horizon), n_steps_(n_steps) {
  if (n_steps == 0) throw ConfigError("time grid needs at least one step");
  if (!(horizon > t0)) throw ConfigError("time grid needs T > t0");
  dt_ = (horizon - t0) / static_cast<double>(n_steps);
}

double TimeGrid::time(std::size_t k) const noexcept {
  if (k >= n_steps_) return horizon_;
  return t0_ + static_cast<double>(k) * dt_;
}

std::vector<double> TimeGrid::points() const {
  std::vector<double> pts(n_steps_ + 1);
  for (std::size_t k = 0; k <= n_steps_; ++k) pts[k] = time(k);
  return pts;
}

PathBundle::PathBundle(TimeGrid grid, std::size_t n_paths, double x0,
                       std::uint64_t seed)
    : grid_(grid),
      n_paths_(n_paths),
      x0_(x0),
      seed_(seed),
      states_(n_paths, grid.n_steps() + 1),
      dw_(n_paths, grid.n_steps()),
      jump_offsets_(n_paths * grid.n_steps() + 1, 0) {}

std::span<const JumpEvent> PathBundle::jumps(std::size_t p,
                                             std::size_t k) const noexcept {
  const std::size_t slot = p * grid_.n_steps() + k;
  return {events_.data() + jump_offsets_[slot],
          jump_offsets_[slot + 1] - jump_offsets_[slot]};
}

std::size_t PathBundle::total_jump_count() const noexcept {
  std::size_t n = 0;
  for (const auto& e : events_) n += static_cast<std::size_t>(e.count);
  return n;
}

double euler_step(const JumpDiffusionModel& model, double x, double dt, double dw,
                  std::span<const JumpEvent> jumps) {
  double next = x + model.drift(x) * dt + model.diffusion(x) * dw;
  for (const auto& j : jumps) next += j.count * model.jump_size(x, j.mark);
  next -= dt * model.compensator(x);
  if (!std::isfinite(next)) throw EulerStepError(x, dt);
  return next;
}

namespace {

// Poisson(mean) by inversion of the CDF.
int poisson_count(double u, double mean) {
  if (mean <= 0.0) return 0;
  double p = std::exp(-mean);
  double cdf = p;
  int n = 0;
  while (u >= cdf && n < 100000) {
    ++n;
    p *= mean / n;
    cdf += p;
    if (p == 0.0 && cdf < u) break;
  }
  return n;
}

struct MarkSampler {
  std::vector<double> cumulative;
  std::vector<double> marks;

  explicit MarkSampler(const LevyMeasure& levy) {
    double acc = 0.0;
    for (const auto& n : levy.nodes()) {
      acc += n.weight;
      cumulative.push_back(acc);
      marks.push_back(n.mark);
    }
  }

  double sample(double u) const {
    const double target = u * cumulative.back();
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
    auto idx = static_cast<std::size_t>(it - cumulative.begin());
    return marks[std::min(idx, marks.size() - 1)];
  }
};

// Realized jumps of one (path, step), aggregated by mark in sorted order.
void draw_jumps(const CounterRng& rng, const MarkSampler& sampler, double mean,
                std::size_t p, std::uint32_t k, std::vector<JumpEvent>& out) {
  out.clear();
  const int count = poisson_count(rng.uniform(p, k, Channel::poisson, 0), mean);
  if (count == 0) return;
  std::vector<double> marks(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    marks[static_cast<std::size_t>(i)] =
        sampler.sample(rng.uniform(p, k, Channel::mark, static_cast<std::uint32_t>(i)));
  }
  std::sort(marks.begin(), marks.end());
  for (double m : marks) {
    if (!out.empty() && out.back().mark == m) {
      ++out.back().count;
    } else {
      out.push_back({m, 1});
    }
  }
}

}  // namespace

PathBundle simulate(const JumpDiffusionModel& model, double t0, double x0,
                    const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed) {
  if (grid.t0() != t0) throw ConfigError("time grid must start at t0");
  if (n_paths == 0) throw ConfigError("n_paths must be positive");

  PathBundle bundle(grid, n_paths, x0, seed);
  const std::size_t n = grid.n_steps();
  const double dt = grid.dt();
  const double sqrt_dt = std::sqrt(dt);
  const CounterRng rng(seed);
  const bool has_jumps = model.levy.total_intensity() > 0.0;
  const double mean_jumps = model.levy.total_intensity() * dt;

  std::vector<std::size_t> event_counts(n_paths * n, 0);
  std::unique_ptr<MarkSampler> sampler;
  if (has_jumps) {
    sampler = std::make_unique<MarkSampler>(model.levy);
    parallel_for(n_paths, [&](std::size_t begin, std::size_t end) {
      std::vector<JumpEvent> scratch;
      for (std::size_t p = begin; p < end; ++p) {
        for (std::size_t k = 0; k < n; ++k) {
          draw_jumps(rng, *sampler, mean_jumps, p, static_cast<std::uint32_t>(k),
                     scratch);
          event_counts[p * n + k] = scratch.size();
        }
      }
    });
  }
  for (std::size_t s = 0; s < n_paths * n; ++s) {
    bundle.jump_offsets_[s + 1] = bundle.jump_offsets_[s] + event_counts[s];
  }
  bundle.events_.resize(bundle.jump_offsets_.back());

  parallel_for(n_paths, [&](std::size_t begin, std::size_t end) {
    std::vector<JumpEvent> scratch;
    for (std::size_t p = begin; p < end; ++p) {
      double x = x0;
      bundle.states_(p, 0) = x;
      for (std::size_t k = 0; k < n; ++k) {
        const double dw = sqrt_dt * rng.normal(p, static_cast<std::uint32_t>(k));
        bundle.dw_(p, k) = dw;
        std::span<const JumpEvent> jumps;
        if (has_jumps) {
          draw_jumps(rng, *sampler, mean_jumps, p, static_cast<std::uint32_t>(k),
                     scratch);
          const std::size_t off = bundle.jump_offsets_[p * n + k];
          std::copy(scratch.begin(), scratch.end(), bundle.events_.begin() + off);
          jumps = bundle.jumps(p, k);
        }
        x = euler_step(model, x, dt, dw, jumps);
        bundle.states_(p, k + 1) = x;
      }
    }
  });
  return bundle;
}

void write_paths_csv(const PathBundle& bundle, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open " + path + " for writing");
  os << "path,step,time,state\n";
  char buf[64];
  for (std::size_t p = 0; p < bundle.n_paths(); ++p) {
    for (std::size_t k = 0; k <= bundle.n_steps(); ++k) {
      os << p << ',' << k << ',';
      std::snprintf(buf, sizeof buf, "%.17g", bundle.grid().time(k));
      os << buf << ',';
      std::snprintf(buf, sizeof buf, "%.17g", bundle.states()(p, k));
      os << buf << '\n';
    }
  }
}

}  // namespace jumpstop
