#pragma once

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
//
// Every random number in the library is a pure function of
// (seed, counter); there is no hidden state, so draws can be produced in
// any order and on any thread with identical results.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace jumpstop {

class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr int kRounds = 10;

  static constexpr Counter generate(Counter ctr, Key key) noexcept {
    for (int r = 0; r < kRounds; ++r) {
      if (r > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      ctr = round(ctr, key);
    }
    return ctr;
  }

  static constexpr Key key_from_seed(std::uint64_t seed) noexcept {
    return {static_cast<std::uint32_t>(seed),
            static_cast<std::uint32_t>(seed >> 32)};
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static constexpr Counter round(const Counter& c, const Key& k) noexcept {
    const std::uint64_t p0 = std::uint64_t{kMul0} * c[0];
    const std::uint64_t p1 = std::uint64_t{kMul1} * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

/// Maps two 32-bit words to a double in [0, 1) with 53 random bits.
constexpr double to_unit_interval(std::uint32_t a, std::uint32_t b) noexcept {
  return (static_cast<double>(a >> 5) * 67108864.0 +
          static_cast<double>(b >> 6)) *
         (1.0 / 9007199254740992.0);
}

/// Draw channels used by the path simulator.
enum class Channel : std::uint32_t {
  gaussian = 1,
  poisson = 2,
  mark = 3,
  probe = 4,
};

/// Stateless draws addressed by (seed, path, step, channel, index).
class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t seed) noexcept
      : key_(Philox4x32::key_from_seed(seed)) {}

  /// Two independent uniforms in [0, 1).
  std::array<double, 2> uniform_pair(std::uint64_t path, std::uint32_t step,
                                     Channel channel,
                                     std::uint32_t index) const noexcept {
    const Philox4x32::Counter ctr{
        static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32),
        step, (static_cast<std::uint32_t>(channel) << 28) | (index & 0x0FFFFFFFu)};
    const auto out = Philox4x32::generate(ctr, key_);
    return {to_unit_interval(out[0], out[1]), to_unit_interval(out[2], out[3])};
  }

  double uniform(std::uint64_t path, std::uint32_t step, Channel channel,
                 std::uint32_t index) const noexcept {
    return uniform_pair(path, step, channel, index)[0];
  }

  /// Standard normal by Box-Muller on one counter block.
  double normal(std::uint64_t path, std::uint32_t step,
                std::uint32_t index = 0) const noexcept {
    const auto u = uniform_pair(path, step, Channel::gaussian, index);
    const double radius = std::sqrt(-2.0 * std::log(1.0 - u[0]));
    return radius * std::cos(2.0 * std::numbers::pi * u[1]);
  }

 private:
  Philox4x32::Key key_;
};

/// Sequential uniform stream for probe generation in the validators.
class ProbeStream {
 public:
  explicit ProbeStream(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : rng_(seed), stream_(stream) {}

  double uniform() noexcept {
    return rng_.uniform(stream_, next_++, Channel::probe, 0);
  }
  double uniform(double lo, double hi) noexcept {
    return lo + (hi - lo) * uniform();
  }

 private:
  CounterRng rng_;
  std::uint64_t stream_;
  std::uint32_t next_ = 0;
};

}  // namespace jumpstop
