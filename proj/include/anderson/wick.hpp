#pragma once

#include <cstdint>
#include <optional>

#include "anderson/noise_fields.hpp"
#include "anderson/spectral_grid.hpp"

namespace anderson {

enum class CyMethod { monte_carlo, exact_double_sum };

struct CyOptions {
  CyMethod method = CyMethod::monte_carlo;
  std::size_t samples = 200;
  std::uint64_t seed = 0x5eedc0ffee;
  ProductMode product = ProductMode::pointwise;
};

struct CyEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

struct RenormConstants {
  double c_x = 0.0;
  double c_y = 0.0;
  double c_y_std_error = 0.0;
  double eps = 0.0;
  MollifierKind kind = MollifierKind::gaussian;
};

/// sigma^2 sum over nonzero, non-Nyquist k of rho_hat(eps k)^2 / |k|^2.
double expected_grad_sq_x(const Lattice& lattice, double eps, const Mollifier& m);

/// E mean |grad Y|^2. The exact double sum is limited to N <= 16.
CyEstimate expected_grad_sq_y(const Lattice& lattice, double eps, const Mollifier& m,
                              const CyOptions& options = {});

RenormConstants renorm_constants(const Lattice& lattice, double eps, const Mollifier& m,
                                 const CyOptions& options = {});

/// |grad f|^2 on the collocation grid.
GridField grad_square(const SpectralField& f, ProductMode mode = ProductMode::pointwise);

GridField wick_grad_square_x(const SpectralField& x_eps, const RenormConstants& c,
                             ProductMode mode = ProductMode::pointwise);
GridField wick_grad_square_y(const SpectralField& y_eps, const RenormConstants& c,
                             ProductMode mode = ProductMode::pointwise);
GridField cross_grad_xy(const SpectralField& x_eps, const SpectralField& y_eps,
                        ProductMode mode = ProductMode::pointwise);

struct EnhancedNoise {
  int dimension;
  double eps;
  MollifierKind kind;
  ProductMode product;
  RenormConstants constants;
  SpectralField xi_eps;
  SpectralField x;
  GridField wick_grad_x_sq;
  std::optional<SpectralField> y;
  std::optional<GridField> wick_grad_y_sq;
  std::optional<GridField> cross_xy;

  const Lattice& lattice() const noexcept { return xi_eps.lattice; }
  int component_count() const noexcept;
};

struct AssembleOptions {
  ProductMode product = ProductMode::pointwise;
  /// Precomputed constants for the same lattice, eps and mollifier.
  std::optional<RenormConstants> constants;
  CyOptions cy;
};

EnhancedNoise assemble_enhanced_noise(const NoiseSample& noise, double eps, const Mollifier& m,
                                      const AssembleOptions& options = {});

/// Holder exponents of the enhanced-noise components for a given kappa.
std::vector<double> enhanced_exponents(int dimension, double kappa);

/// max over components of the Holder norm of the difference.
double enhanced_distance(const EnhancedNoise& a, const EnhancedNoise& b, double kappa);

}  // namespace anderson
