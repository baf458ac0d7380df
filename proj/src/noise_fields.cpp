#include "anderson/noise_fields.hpp"

#include <cmath>
#include <numbers>

#include "anderson/error.hpp"
#include "anderson/rng.hpp"

namespace anderson {

double white_noise_variance(int dimension) noexcept {
  return std::pow(2.0 * std::numbers::pi, -dimension);
}

NoiseSample sample_white_noise(const Lattice& lattice, std::uint64_t seed) {
  const double sigma = std::sqrt(white_noise_variance(lattice.dimension()));
  SpectralField xi(lattice);
  GaussianStream g(seed);
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    if (lattice.is_nyquist(i)) continue;
    std::size_t j = lattice.negated(i);
    if (j == i) {
      xi.coeffs[i] = sigma * g.next();
    } else if (i < j) {
      double a = g.next();
      double b = g.next();
      std::complex<double> z(sigma * a / std::numbers::sqrt2, sigma * b / std::numbers::sqrt2);
      xi.coeffs[i] = z;
      xi.coeffs[j] = std::conj(z);
    }
  }
  xi.hermitian = true;
  double xi0 = xi.coeffs[0].real();
  return NoiseSample{lattice, seed, std::move(xi), xi0};
}

double Mollifier::profile(double z) const noexcept {
  if (kind == MollifierKind::gaussian) return std::exp(-0.5 * z * z);
  return z <= 1.0 + 1e-12 ? 1.0 : 0.0;
}

double Mollifier::at(double eps, int norm_sq) const noexcept {
  return profile(eps * std::sqrt(static_cast<double>(norm_sq)));
}

SpectralField mollify(const NoiseSample& noise, double eps, const Mollifier& m) {
  require(eps > 0.0, ErrorCode::invalid_argument, "mollify: eps must be positive");
  SpectralField out = apply_radial_multiplier(noise.xi, [&](int k2) { return m.at(eps, k2); });
  out.regularization = Regularization{eps, m.kind};
  return out;
}

SpectralField solve_x(const SpectralField& xi_eps) {
  require(xi_eps.hermitian, ErrorCode::not_hermitian, "solve_x: input is not hermitian");
  return inverse_laplacian_zero_mean(xi_eps);
}

SpectralField solve_y(const GridField& wick_sq_x) {
  require(wick_sq_x.lattice.dimension() == 3, ErrorCode::dimension_mismatch,
          "solve_y: Y is only defined in three dimensions");
  SpectralField w = forward_transform(wick_sq_x);
  return apply_radial_multiplier(w, [](int k2) { return k2 == 0 ? 0.0 : 1.0 / k2; });
}

}  // namespace anderson
