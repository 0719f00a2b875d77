#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "lowrank/linalg.hpp"

namespace lowrank {

/// Default seed used by every entry point when none is given.
inline constexpr std::uint64_t kDefaultSeed = 20070101;

/// Portable random stream: mt19937_64 for bits, uniform doubles from the top
/// 53 bits, normals by Box-Muller. Unlike the std distributions the output
/// is identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform();

  /// Uniform integer on [0, bound).
  std::uint64_t below(std::uint64_t bound);

  double normal();

  Matrix gaussian(Index rows, Index cols, double scale = 1.0);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Mixes a base seed with structured coordinates (trial index, grid cell,
/// ...) into an independent child seed via splitmix64.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> coords);

}  // namespace lowrank
