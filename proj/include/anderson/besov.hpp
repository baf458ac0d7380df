#pragma once

#include <span>
#include <vector>

#include "anderson/spectral_grid.hpp"

namespace anderson {

/// ||u||_{B^alpha_{p,q}} = (sum_n 2^{alpha p n} ||Delta_n u||_{L^q}^p)^{1/p}.
/// p indexes the sum over blocks, q the spatial norm; infinity means sup.
struct BesovParams {
  double alpha = 0.0;
  double p = 2.0;
  double q = 2.0;
};

/// Sharp dyadic annulus of |k|^2: 0 for k = 0, n for 2^{n-1} <= |k| < 2^n.
int block_index(int norm_sq) noexcept;

GridField lp_block(const SpectralField& u, int n);

/// L^q norm on the torus; q = infinity gives the max norm.
double lq_norm(const GridField& u, double q);

/// ||Delta_n u||_{L^q} for n = 0..max_block.
std::vector<double> block_norms(const SpectralField& u, double q);

double besov_norm(const SpectralField& u, const BesovParams& params);
double holder_norm(const SpectralField& u, double alpha);

struct ExponentEstimate {
  double alpha_hat = 0.0;  // -slope of log2(mean block norm) vs n
  double embedded = 0.0;   // alpha_hat - d/p
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  int n_lo = 0;
  int n_hi = 0;
  std::vector<double> mean_block_norms;
};

/// Fit over blocks [n_lo, n_hi]; requires n_hi <= max_block - 1.
ExponentEstimate regularity_exponent(std::span<const SpectralField> samples, double p, int n_lo,
                                     int n_hi);
/// Default range [1, max_block - 2].
ExponentEstimate regularity_exponent(std::span<const SpectralField> samples, double p);

/// Same fit from precomputed mean block norms (indexed by n).
ExponentEstimate fit_block_slope(std::span<const double> mean_block_norms, int dimension, double p,
                                 int n_lo, int n_hi);

}  // namespace anderson
