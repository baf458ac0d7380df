#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <vector>

#include "anderson/noise_fields.hpp"
#include "anderson/rng.hpp"
#include "anderson/spectral_grid.hpp"

namespace test_support {

using anderson::GridField;
using anderson::Lattice;
using anderson::SpectralField;

inline constexpr double pi = std::numbers::pi;

// coeffs(k) = N^-d sum_j u(x_j) e^{-i k x_j}, evaluated term by term.
inline SpectralField naive_forward(const GridField& u) {
  const Lattice& l = u.lattice;
  SpectralField f(l);
  for (std::size_t i = 0; i < l.size(); ++i) {
    const auto k = l.frequency(i);
    std::complex<double> s = 0.0;
    for (std::size_t j = 0; j < l.size(); ++j) {
      const auto x = l.point(j);
      double phase = 0.0;
      for (int a = 0; a < l.dimension(); ++a) phase += k[a] * x[a];
      s += u.values[j] * std::polar(1.0, -phase);
    }
    f.coeffs[i] = s / static_cast<double>(l.size());
  }
  return f;
}

// Random real field with every non-Nyquist mode populated.
inline SpectralField random_hermitian(const Lattice& l, std::uint64_t seed, double decay = 0.0) {
  SpectralField f(l);
  anderson::GaussianStream g(seed);
  for (std::size_t i = 0; i < l.size(); ++i) {
    if (l.is_nyquist(i)) continue;
    const std::size_t j = l.negated(i);
    const double env = std::exp(-decay * l.norm_sq(i));
    if (i == j) {
      f.coeffs[i] = env * g.next();
    } else if (i < j) {
      std::complex<double> z(g.next(), g.next());
      f.coeffs[i] = env * z;
      f.coeffs[j] = env * std::conj(z);
    }
  }
  f.hermitian = true;
  return f;
}

// Real field with modes only in |k|_inf <= band.
inline SpectralField band_limited(const Lattice& l, int band, std::uint64_t seed) {
  SpectralField f = random_hermitian(l, seed);
  for (std::size_t i = 0; i < l.size(); ++i) {
    const auto k = l.frequency(i);
    for (int a = 0; a < l.dimension(); ++a)
      if (std::abs(k[a]) > band) f.coeffs[i] = 0.0;
  }
  return f;
}

inline double max_abs_diff(const GridField& a, const GridField& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) m = std::max(m, std::abs(a.values[i] - b.values[i]));
  return m;
}

inline double max_abs(const GridField& a) {
  double m = 0.0;
  for (double v : a.values) m = std::max(m, std::abs(v));
  return m;
}

inline double max_coeff_diff(const SpectralField& a, const SpectralField& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.coeffs.size(); ++i) m = std::max(m, std::abs(a.coeffs[i] - b.coeffs[i]));
  return m;
}

struct Moments {
  double mean = 0.0;
  double std_error = 0.0;
};

inline Moments moments(const std::vector<double>& v) {
  Moments m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m.mean) * (x - m.mean);
  m.std_error = std::sqrt(s / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  return m;
}

// Least-squares slope of y against x.
inline double slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace test_support
