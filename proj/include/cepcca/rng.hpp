#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace cepcca {

/// Deterministic random stream: mt19937_64 seeded from (master seed, stream id)
/// with Box-Muller normals, so draws do not depend on the standard library's
/// distribution implementations. Stream id = replicate index gives independent,
/// order-free per-replicate streams.
class RngStream {
 public:
  explicit RngStream(std::uint64_t master_seed, std::uint64_t stream_id = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                      static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(stream_id),
                      static_cast<std::uint32_t>(stream_id >> 32)};
    engine_.seed(seq);
  }

  /// Uniform on (0, 1].
  double uniform_pos() { return ((engine_() >> 11) + 1) * 0x1.0p-53; }

  /// Uniform on [0, 1).
  double uniform() { return (engine_() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; generates in pairs.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform_pos()));
    const double theta = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace cepcca
