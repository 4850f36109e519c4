#pragma once

#include <cstdint>
#include <random>

namespace towerfleet::sim {

/// Named stream ids: one generator per consumer keeps draws independent of scheduling.
namespace stream {
inline constexpr std::uint64_t kSensing = 100;  // + vehicle id
inline constexpr std::uint64_t kWorker = 200;   // + worker index
inline constexpr std::uint64_t kBus = 300;      // + topic stream id
}  // namespace stream

/**
 * @brief mt19937_64 with platform-independent uniform and normal draws.
 *
 * The standard distributions are implementation-defined, so this class does its own
 * conversions (53-bit uniforms, Box-Muller normals) to keep logs identical across toolchains.
 */
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream);

  /// Uniform in [0, 1).
  double uniform();
  /// Standard normal.
  double normal();

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace towerfleet::sim
