#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "jumpstop/matrix.hpp"
#include "jumpstop/model.hpp"

namespace jumpstop {

/// Uniform time grid t0 < t1 < ... < t_n = T.
class TimeGrid {
 public:
  TimeGrid(double t0, double horizon, std::size_t n_steps);

  double t0() const noexcept { return t0_; }
  double horizon() const noexcept { return horizon_; }
  std::size_t n_steps() const noexcept { return n_steps_; }
  double dt() const noexcept { return dt_; }
  /// t_k; exactly t0 at k = 0 and exactly T at k = n_steps.
  double time(std::size_t k) const noexcept;
  std::vector<double> points() const;

 private:
  double t0_;
  double horizon_;
  std::size_t n_steps_;
  double dt_;
};

/// `count` jumps with the same mark during one step.
struct JumpEvent {
  double mark;
  int count;
};

/// Simulated Euler trajectories with the randomness that produced them.
class PathBundle {
 public:
  PathBundle(TimeGrid grid, std::size_t n_paths, double x0, std::uint64_t seed);

  const TimeGrid& grid() const noexcept { return grid_; }
  std::size_t n_paths() const noexcept { return n_paths_; }
  std::size_t n_steps() const noexcept { return grid_.n_steps(); }
  double x0() const noexcept { return x0_; }
  std::uint64_t seed() const noexcept { return seed_; }

  /// states(p, k) = X at t_k on path p.
  const Matrix& states() const noexcept { return states_; }
  /// brownian_increments(p, k) = W(t_{k+1}) - W(t_k).
  const Matrix& brownian_increments() const noexcept { return dw_; }
  /// Realized jumps on path p during step k.
  std::span<const JumpEvent> jumps(std::size_t p, std::size_t k) const noexcept;
  std::size_t total_jump_count() const noexcept;

 private:
  friend PathBundle simulate(const JumpDiffusionModel&, double, double,
                             const TimeGrid&, std::size_t, std::uint64_t);

  TimeGrid grid_;
  std::size_t n_paths_;
  double x0_;
  std::uint64_t seed_;
  Matrix states_;
  Matrix dw_;
  std::vector<std::size_t> jump_offsets_;  // n_paths * n_steps + 1
  std::vector<JumpEvent> events_;
};

/// One explicit Euler step with exact compensator drift:
///   x + b(x) dt + sigma(x) dW + sum count * beta(x, mark) - dt * int beta(x, e) nu(de).
double euler_step(const JumpDiffusionModel& model, double x, double dt, double dw,
                  std::span<const JumpEvent> jumps);

/// Simulates n_paths Euler trajectories from (t0, x0). Every draw is keyed
/// by (seed, path, step, channel), so the output does not depend on the
/// number of worker threads.
PathBundle simulate(const JumpDiffusionModel& model, double t0, double x0,
                    const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed);

/// Writes (path, step, time, state) rows for debugging.
void write_paths_csv(const PathBundle& bundle, const std::string& path);

}  // namespace jumpstop
