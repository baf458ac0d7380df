#include "anderson/wick.hpp"

#include <algorithm>
#include <cmath>

#include "anderson/besov.hpp"
#include "anderson/error.hpp"
#include "anderson/rng.hpp"

namespace anderson {

namespace {

void check_tag(const SpectralField& f, const RenormConstants& c, const char* what) {
  if (!f.regularization) return;
  require(f.regularization->kind == c.kind &&
              std::abs(f.regularization->eps - c.eps) <= 1e-15 * std::max(1.0, c.eps),
          ErrorCode::invalid_argument,
          std::string(what) + ": field and constants were built at different eps or mollifier");
}

GridField sum_of_products(const std::vector<SpectralField>& a, const std::vector<SpectralField>& b,
                          ProductMode mode) {
  const Lattice& l = a[0].lattice;
  GridField out(l);
  if (mode == ProductMode::pointwise) {
    for (std::size_t j = 0; j < a.size(); ++j) {
      GridField ga = inverse_transform(a[j]);
      GridField gb = &a == &b ? ga : inverse_transform(b[j]);
      for (std::size_t i = 0; i < l.size(); ++i) out.values[i] += ga.values[i] * gb.values[i];
    }
    return out;
  }
  SpectralField acc(l);
  for (std::size_t j = 0; j < a.size(); ++j) {
    SpectralField p = product(a[j], b[j], mode);
    for (std::size_t i = 0; i < l.size(); ++i) acc.coeffs[i] += p.coeffs[i];
  }
  return inverse_transform(acc);
}

double exact_cy(const Lattice& l, double eps, const Mollifier& m, ProductMode mode) {
  require(l.points() <= 16, ErrorCode::invalid_argument,
          "expected_grad_sq_y: exact double sum requires N <= 16");
  const double sigma2 = white_noise_variance(l.dimension());
  const std::size_t n = l.size();
  std::vector<double> s(n, 0.0);
  std::vector<Frequency> k(n);
  for (std::size_t i = 0; i < n; ++i) {
    k[i] = l.frequency(i);
    int k2 = l.norm_sq(i);
    if (k2 == 0 || l.is_nyquist(i)) continue;
    double r = m.at(eps, k2);
    s[i] = sigma2 * r * r / (static_cast<double>(k2) * k2);
  }
  const int d = l.dimension();
  const int half = l.points() / 2;
  std::vector<double> ew(n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    if (s[a] == 0.0) continue;
    for (std::size_t b = 0; b < n; ++b) {
      if (s[b] == 0.0) continue;
      Frequency diff{0, 0, 0};
      double dot = 0.0;
      bool in_range = true;
      for (int j = 0; j < d; ++j) {
        diff[j] = k[a][j] - k[b][j];
        dot += static_cast<double>(k[a][j]) * k[b][j];
        if (diff[j] < -half || diff[j] >= half) in_range = false;
      }
      if (mode == ProductMode::padded && !in_range) continue;
      ew[l.index_of(diff)] += 2.0 * dot * dot * s[a] * s[b];
    }
  }
  double c = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    int k2 = l.norm_sq(i);
    if (k2 == 0 || l.is_nyquist(i)) continue;
    c += ew[i] / k2;
  }
  return c;
}

}  // namespace

double expected_grad_sq_x(const Lattice& lattice, double eps, const Mollifier& m) {
  require(eps > 0.0, ErrorCode::invalid_argument, "expected_grad_sq_x: eps must be positive");
  const double sigma2 = white_noise_variance(lattice.dimension());
  // Group by |k|^2; each shell contributes multiplicity * rho^2 / |k|^2.
  std::vector<long long> shells;
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    if (lattice.is_nyquist(i)) continue;
    auto k2 = static_cast<std::size_t>(lattice.norm_sq(i));
    if (shells.size() <= k2) shells.resize(k2 + 1, 0);
    ++shells[k2];
  }
  double c = 0.0;
  for (std::size_t k2 = 1; k2 < shells.size(); ++k2) {
    if (shells[k2] == 0) continue;
    double r = m.at(eps, static_cast<int>(k2));
    c += static_cast<double>(shells[k2]) * r * r / static_cast<double>(k2);
  }
  return sigma2 * c;
}

CyEstimate expected_grad_sq_y(const Lattice& lattice, double eps, const Mollifier& m,
                              const CyOptions& options) {
  require(lattice.dimension() == 3, ErrorCode::dimension_mismatch,
          "expected_grad_sq_y: Y is only defined in three dimensions");
  require(eps > 0.0, ErrorCode::invalid_argument, "expected_grad_sq_y: eps must be positive");
  if (options.method == CyMethod::exact_double_sum)
    return CyEstimate{exact_cy(lattice, eps, m, options.product), 0.0, 0};

  require(options.samples >= 2, ErrorCode::invalid_argument,
          "expected_grad_sq_y: Monte Carlo needs at least 2 samples");
  RenormConstants c{expected_grad_sq_x(lattice, eps, m), 0.0, 0.0, eps, m.kind};
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t s = 0; s < options.samples; ++s) {
    NoiseSample noise = sample_white_noise(lattice, derive_seed(options.seed, s));
    SpectralField x = solve_x(mollify(noise, eps, m));
    SpectralField y = solve_y(wick_grad_square_x(x, c, options.product));
    double v = grad_square(y, options.product).mean();
    sum += v;
    sum_sq += v * v;
  }
  const double n = static_cast<double>(options.samples);
  const double mean = sum / n;
  const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
  return CyEstimate{mean, std::sqrt(var / n), options.samples};
}

RenormConstants renorm_constants(const Lattice& lattice, double eps, const Mollifier& m,
                                 const CyOptions& options) {
  RenormConstants c{expected_grad_sq_x(lattice, eps, m), 0.0, 0.0, eps, m.kind};
  if (lattice.dimension() == 3) {
    CyEstimate y = expected_grad_sq_y(lattice, eps, m, options);
    c.c_y = y.value;
    c.c_y_std_error = y.std_error;
  }
  return c;
}

GridField grad_square(const SpectralField& f, ProductMode mode) {
  auto g = gradient(f);
  return sum_of_products(g, g, mode);
}

GridField wick_grad_square_x(const SpectralField& x_eps, const RenormConstants& c, ProductMode mode) {
  check_tag(x_eps, c, "wick_grad_square_x");
  GridField w = grad_square(x_eps, mode);
  for (double& v : w.values) v -= c.c_x;
  return w;
}

GridField wick_grad_square_y(const SpectralField& y_eps, const RenormConstants& c, ProductMode mode) {
  require(y_eps.lattice.dimension() == 3, ErrorCode::dimension_mismatch,
          "wick_grad_square_y: three dimensions only");
  check_tag(y_eps, c, "wick_grad_square_y");
  GridField w = grad_square(y_eps, mode);
  for (double& v : w.values) v -= c.c_y;
  return w;
}

GridField cross_grad_xy(const SpectralField& x_eps, const SpectralField& y_eps, ProductMode mode) {
  require(x_eps.lattice.dimension() == 3, ErrorCode::dimension_mismatch,
          "cross_grad_xy: three dimensions only");
  require(x_eps.lattice == y_eps.lattice, ErrorCode::lattice_mismatch, "cross_grad_xy: lattice mismatch");
  if (x_eps.regularization && y_eps.regularization)
    require(*x_eps.regularization == *y_eps.regularization, ErrorCode::invalid_argument,
            "cross_grad_xy: X and Y were built at different eps");
  return sum_of_products(gradient(x_eps), gradient(y_eps), mode);
}

int EnhancedNoise::component_count() const noexcept {
  return 2 + (wick_grad_y_sq ? 1 : 0) + (cross_xy ? 1 : 0);
}

EnhancedNoise assemble_enhanced_noise(const NoiseSample& noise, double eps, const Mollifier& m,
                                      const AssembleOptions& options) {
  const Lattice& l = noise.lattice;
  RenormConstants c;
  if (options.constants) {
    c = *options.constants;
    require(c.kind == m.kind && std::abs(c.eps - eps) <= 1e-15 * std::max(1.0, eps),
            ErrorCode::invalid_argument, "assemble_enhanced_noise: constants built for another eps");
  } else {
    CyOptions cy = options.cy;
    cy.product = options.product;
    c = renorm_constants(l, eps, m, cy);
  }
  SpectralField xi_eps = mollify(noise, eps, m);
  SpectralField x = solve_x(xi_eps);
  GridField wx = wick_grad_square_x(x, c, options.product);
  EnhancedNoise e{l.dimension(), eps, m.kind, options.product, c, std::move(xi_eps), std::move(x),
                  std::move(wx), std::nullopt, std::nullopt, std::nullopt};
  if (l.dimension() == 3) {
    SpectralField y = solve_y(e.wick_grad_x_sq);
    y.regularization = Regularization{eps, m.kind};
    e.wick_grad_y_sq = wick_grad_square_y(y, c, options.product);
    e.cross_xy = cross_grad_xy(e.x, y, options.product);
    e.y = std::move(y);
  }
  return e;
}

std::vector<double> enhanced_exponents(int dimension, double kappa) {
  if (dimension == 2) return {-1.0 - kappa, -2.0 * kappa};
  return {-1.5 - kappa, -1.0 - 2.0 * kappa, -4.0 * kappa, -0.5 - 3.0 * kappa};
}

double enhanced_distance(const EnhancedNoise& a, const EnhancedNoise& b, double kappa) {
  require(a.lattice() == b.lattice() && a.dimension == b.dimension, ErrorCode::lattice_mismatch,
          "enhanced_distance: lattice mismatch");
  const Lattice& l = a.lattice();
  auto exps = enhanced_exponents(a.dimension, kappa);

  SpectralField dxi(l);
  for (std::size_t i = 0; i < l.size(); ++i) dxi.coeffs[i] = a.xi_eps.coeffs[i] - b.xi_eps.coeffs[i];
  double dist = holder_norm(dxi, exps[0]);

  auto grid_diff = [&](const GridField& u, const GridField& v, double alpha) {
    GridField d(l);
    for (std::size_t i = 0; i < l.size(); ++i) d.values[i] = u.values[i] - v.values[i];
    return holder_norm(forward_transform(d), alpha);
  };
  dist = std::max(dist, grid_diff(a.wick_grad_x_sq, b.wick_grad_x_sq, exps[1]));
  if (a.dimension == 3) {
    require(a.wick_grad_y_sq && b.wick_grad_y_sq && a.cross_xy && b.cross_xy,
            ErrorCode::invalid_argument, "enhanced_distance: missing 3D components");
    dist = std::max(dist, grid_diff(*a.wick_grad_y_sq, *b.wick_grad_y_sq, exps[2]));
    dist = std::max(dist, grid_diff(*a.cross_xy, *b.cross_xy, exps[3]));
  }
  return dist;
}

}  // namespace anderson
