#pragma once

#include <cstdint>

#include "anderson/regularization.hpp"
#include "anderson/spectral_grid.hpp"

namespace anderson {

/// Seeded white-noise realization. xi0 is the zero-frequency coefficient.
struct NoiseSample {
  Lattice lattice;
  std::uint64_t seed;
  SpectralField xi;
  double xi0;
};

/// Coefficient variance E|xi_k|^2 = (2pi)^-d, which makes <xi, phi> isometric
/// onto L^2([0,2pi)^d) for trigonometric polynomials on the lattice.
double white_noise_variance(int dimension) noexcept;

NoiseSample sample_white_noise(const Lattice& lattice, std::uint64_t seed);

/// Radial Fourier profile rho_hat with rho_hat(0) = 1.
struct Mollifier {
  MollifierKind kind = MollifierKind::gaussian;

  static Mollifier gaussian() { return {MollifierKind::gaussian}; }
  static Mollifier sharp_cutoff() { return {MollifierKind::sharp_cutoff}; }

  double profile(double z) const noexcept;
  /// rho_hat(eps k) as a function of |k|^2.
  double at(double eps, int norm_sq) const noexcept;
};

SpectralField mollify(const NoiseSample& noise, double eps, const Mollifier& m);

/// X = Delta^-1 (xi - mean xi).
SpectralField solve_x(const SpectralField& xi_eps);

/// Y with Delta Y = -(W - mean W), W the Wick square of grad X. 3D only.
SpectralField solve_y(const GridField& wick_sq_x);

}  // namespace anderson
