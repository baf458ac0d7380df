#pragma once

#include <functional>
#include <span>

#include "anderson/spectral_grid.hpp"

namespace anderson {

/// Matrix-free symmetric operator K on grid vectors, with optional trial-space
/// projector and preconditioner. All callbacks must be safe to call concurrently.
struct OperatorContract {
  Lattice lattice;
  /// out = K in. K must be symmetric in the Euclidean inner product on the trial space.
  std::function<void(std::span<const double> in, std::span<double> out)> apply;
  /// Orthogonal projector onto the trial space, in place. Empty means the whole space.
  std::function<void(std::span<double> v)> project;
  /// out ~ (K + shift B)^-1 in, symmetric positive definite for shift > 0. Empty means identity.
  std::function<void(double shift, std::span<const double> in, std::span<double> out)> precondition;
};

}  // namespace anderson
