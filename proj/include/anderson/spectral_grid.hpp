#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "anderson/aligned.hpp"
#include "anderson/regularization.hpp"

namespace anderson {

/// Integer frequency; components beyond the lattice dimension are zero.
using Frequency = std::array<int, 3>;
/// Collocation point; components beyond the lattice dimension are zero.
using Point = std::array<double, 3>;

/// Uniform periodic lattice on [0, 2pi)^d with N points per axis.
///
/// Storage is row-major over the axes. A flat index i has per-axis indices
/// i_j in [0, N), with frequency k_j = i_j for i_j < N/2 and i_j - N otherwise,
/// so the frequency set is {-N/2, ..., N/2 - 1}^d. Copies share their tables.
class Lattice {
 public:
  Lattice(int dimension, int points);

  int dimension() const noexcept { return d_; }
  int points() const noexcept { return n_; }
  std::size_t size() const noexcept { return size_; }
  double spacing() const noexcept;
  double cell_volume() const noexcept;
  double volume() const noexcept;
  /// Largest Littlewood-Paley block index, log2(N/2).
  int max_block() const noexcept;

  Frequency frequency(std::size_t index) const noexcept;
  Point point(std::size_t index) const noexcept;
  int norm_sq(std::size_t index) const noexcept { return (*norm_sq_)[index]; }
  bool is_nyquist(std::size_t index) const noexcept { return (*nyquist_)[index] != 0; }
  /// Index of k (taken modulo N on each axis).
  std::size_t index_of(const Frequency& k) const noexcept;
  std::size_t negated(std::size_t index) const noexcept;

  const std::vector<int>& norm_sq_table() const noexcept { return *norm_sq_; }
  const std::vector<unsigned char>& nyquist_table() const noexcept { return *nyquist_; }

  bool operator==(const Lattice& other) const noexcept { return d_ == other.d_ && n_ == other.n_; }

 private:
  int d_;
  int n_;
  std::size_t size_;
  std::shared_ptr<const std::vector<int>> norm_sq_;
  std::shared_ptr<const std::vector<unsigned char>> nyquist_;
};

/// Real collocation values at x_j = 2pi j / N.
struct GridField {
  Lattice lattice;
  RealVector values;

  explicit GridField(const Lattice& l) : lattice(l), values(l.size(), 0.0) {}
  GridField(const Lattice& l, RealVector v);

  static GridField from_function(const Lattice& l, const std::function<double(const Point&)>& f);
  static GridField constant(const Lattice& l, double c);

  double mean() const noexcept;
  double integral() const noexcept;
  double l2_norm() const noexcept;
  double max() const noexcept;
  double min() const noexcept;
};

/// Fourier coefficients indexed like the lattice.
struct SpectralField {
  Lattice lattice;
  ComplexVector coeffs;
  bool hermitian = true;
  std::optional<Regularization> regularization;

  explicit SpectralField(const Lattice& l) : lattice(l), coeffs(l.size(), 0.0) {}
  SpectralField(const Lattice& l, ComplexVector c, bool is_hermitian);

  std::complex<double>& at(const Frequency& k) { return coeffs[lattice.index_of(k)]; }
  const std::complex<double>& at(const Frequency& k) const { return coeffs[lattice.index_of(k)]; }
  /// Zero-frequency coefficient, i.e. the spatial mean.
  std::complex<double> mean() const { return coeffs[0]; }
};

enum class ProductMode { pointwise, padded };

const char* to_string(ProductMode mode) noexcept;

using Multiplier = std::function<std::complex<double>(const Frequency&)>;
using RadialMultiplier = std::function<double(int norm_sq)>;

SpectralField forward_transform(const GridField& u);
GridField inverse_transform(const SpectralField& f);

SpectralField apply_multiplier(const SpectralField& f, const Multiplier& m);
/// Fast path for real multipliers depending only on |k|^2.
SpectralField apply_radial_multiplier(const SpectralField& f, const RadialMultiplier& m);

std::vector<SpectralField> gradient(const SpectralField& f);
SpectralField divergence(std::span<const SpectralField> components);
SpectralField laplacian(const SpectralField& f);
SpectralField inverse_laplacian_zero_mean(const SpectralField& f);

void zero_nyquist(SpectralField& f) noexcept;
/// Orthogonal projection of grid values onto trigonometric polynomials without Nyquist rows.
GridField project_nyquist_free(const GridField& u);

/// Product of two fields. Pointwise mode multiplies collocation values on the
/// N-grid. Padded mode uses the 3/2 rule and truncates back to the lattice.
SpectralField product(const SpectralField& a, const SpectralField& b, ProductMode mode);
GridField product(const GridField& a, const GridField& b, ProductMode mode);

/// Copies the coefficients shared by both lattices; the rest are zero.
SpectralField resample(const SpectralField& f, const Lattice& target);

double inner_product(const GridField& a, const GridField& b);
double parseval_norm_sq(const SpectralField& f) noexcept;
double hermitian_defect(const SpectralField& f) noexcept;
/// max |Im| of the unsymmetrized inverse transform.
double imaginary_residue(const SpectralField& f);

}  // namespace anderson
