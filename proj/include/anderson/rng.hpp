#pragma once

#include <cstdint>
#include <random>

namespace anderson {

/// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Seed for substream `stream` of a base seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

/// Portable Gaussian source: mt19937_64 (bit-exact by the standard) and
/// Box-Muller on 53-bit uniforms.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed);
  double next();
  double uniform();

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace anderson
