#include "anderson/besov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "anderson/error.hpp"

namespace anderson {

int block_index(int norm_sq) noexcept {
  if (norm_sq == 0) return 0;
  int n = 1;
  long long bound = 4;  // 4^n
  while (norm_sq >= bound) {
    ++n;
    bound *= 4;
  }
  return n;
}

GridField lp_block(const SpectralField& u, int n) {
  require(n >= 0 && n <= u.lattice.max_block(), ErrorCode::invalid_argument,
          "lp_block: block index out of range");
  SpectralField b(u.lattice);
  for (std::size_t i = 0; i < u.lattice.size(); ++i)
    if (!u.lattice.is_nyquist(i) && block_index(u.lattice.norm_sq(i)) == n) b.coeffs[i] = u.coeffs[i];
  b.hermitian = u.hermitian;
  return inverse_transform(b);
}

double lq_norm(const GridField& u, double q) {
  require(q >= 1.0, ErrorCode::invalid_argument, "lq_norm: q must be >= 1");
  if (std::isinf(q)) {
    double m = 0.0;
    for (double v : u.values) m = std::max(m, std::abs(v));
    return m;
  }
  double s = 0.0;
  for (double v : u.values) s += std::pow(std::abs(v), q);
  return std::pow(s * u.lattice.cell_volume(), 1.0 / q);
}

std::vector<double> block_norms(const SpectralField& u, double q) {
  const int nmax = u.lattice.max_block();
  std::vector<double> out(static_cast<std::size_t>(nmax + 1), 0.0);
  if (q == 2.0) {
    for (std::size_t i = 0; i < u.lattice.size(); ++i) {
      if (u.lattice.is_nyquist(i)) continue;
      int n = block_index(u.lattice.norm_sq(i));
      if (n <= nmax) out[static_cast<std::size_t>(n)] += std::norm(u.coeffs[i]);
    }
    for (double& v : out) v = std::sqrt(v * u.lattice.volume());
    return out;
  }
  for (int n = 0; n <= nmax; ++n) out[static_cast<std::size_t>(n)] = lq_norm(lp_block(u, n), q);
  return out;
}

double besov_norm(const SpectralField& u, const BesovParams& params) {
  require(params.p >= 1.0 && params.q >= 1.0, ErrorCode::invalid_argument,
          "besov_norm: p and q must be >= 1");
  std::vector<double> b = block_norms(u, params.q);
  if (std::isinf(params.p)) {
    double m = 0.0;
    for (std::size_t n = 0; n < b.size(); ++n)
      if (b[n] > 0.0) m = std::max(m, std::exp2(params.alpha * static_cast<double>(n)) * b[n]);
    return m;
  }
  double s = 0.0;
  for (std::size_t n = 0; n < b.size(); ++n)
    if (b[n] > 0.0) s += std::exp2(params.alpha * params.p * static_cast<double>(n)) * std::pow(b[n], params.p);
  return std::pow(s, 1.0 / params.p);
}

double holder_norm(const SpectralField& u, double alpha) {
  const double inf = std::numeric_limits<double>::infinity();
  return besov_norm(u, BesovParams{alpha, inf, inf});
}

ExponentEstimate fit_block_slope(std::span<const double> mean_block_norms, int dimension, double p,
                                 int n_lo, int n_hi) {
  require(n_lo >= 0 && n_hi < static_cast<int>(mean_block_norms.size()) && n_lo <= n_hi,
          ErrorCode::invalid_argument, "regularity_exponent: block range out of bounds");
  std::vector<double> xs, ys;
  for (int n = n_lo; n <= n_hi; ++n) {
    double v = mean_block_norms[static_cast<std::size_t>(n)];
    if (v > 0.0 && std::isfinite(v)) {
      xs.push_back(n);
      ys.push_back(std::log2(v));
    }
  }
  require(xs.size() >= 3, ErrorCode::invalid_argument,
          "regularity_exponent: fewer than 3 usable blocks");
  const double m = static_cast<double>(xs.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  ExponentEstimate e;
  e.slope = sxy / sxx;
  e.intercept = my - e.slope * mx;
  e.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  e.alpha_hat = -e.slope;
  e.embedded = std::isinf(p) ? e.alpha_hat : e.alpha_hat - dimension / p;
  e.n_lo = n_lo;
  e.n_hi = n_hi;
  e.mean_block_norms.assign(mean_block_norms.begin(), mean_block_norms.end());
  return e;
}

ExponentEstimate regularity_exponent(std::span<const SpectralField> samples, double p, int n_lo,
                                     int n_hi) {
  require(!samples.empty(), ErrorCode::invalid_argument, "regularity_exponent: no samples");
  const Lattice& l = samples[0].lattice;
  require(n_hi <= l.max_block() - 1, ErrorCode::invalid_argument,
          "regularity_exponent: n_hi must be <= log2(N/2) - 1");
  std::vector<double> mean(static_cast<std::size_t>(l.max_block() + 1), 0.0);
  for (const auto& s : samples) {
    require(s.lattice == l, ErrorCode::lattice_mismatch, "regularity_exponent: lattice mismatch");
    auto b = block_norms(s, p);
    for (std::size_t n = 0; n < mean.size(); ++n) mean[n] += b[n];
  }
  for (double& v : mean) v /= static_cast<double>(samples.size());
  return fit_block_slope(mean, l.dimension(), p, n_lo, n_hi);
}

ExponentEstimate regularity_exponent(std::span<const SpectralField> samples, double p) {
  require(!samples.empty(), ErrorCode::invalid_argument, "regularity_exponent: no samples");
  return regularity_exponent(samples, p, 1, samples[0].lattice.max_block() - 2);
}

}  // namespace anderson
