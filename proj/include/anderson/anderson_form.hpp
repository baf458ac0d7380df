#pragma once

#include <cstdint>

#include "anderson/operator.hpp"
#include "anderson/spectral_grid.hpp"
#include "anderson/wick.hpp"

namespace anderson {

/// Anderson form in transformed coordinates u = e^Z v (Z = X in 2D, X + Y in 3D):
///
///   a(v1, v2) = int w grad v1 . grad v2 - int V v1 v2 + shift int w v1 v2
///
/// with w = e^{2Z}. Trial functions live on the Nyquist-free subspace; every
/// operation projects its inputs onto it.
struct FormOperator {
  int dimension;
  GridField weight;
  GridField potential;
  double zero_mode_shift;
  GridField transform_field;
  ProductMode product;

  const Lattice& lattice() const noexcept { return weight.lattice; }
};

FormOperator assemble_form(const EnhancedNoise& xi);
/// Form of the noiseless operator: w = 1, V = 0, shift = 0.
FormOperator zero_noise_form(const Lattice& lattice);

double form_value(const FormOperator& op, const GridField& v1, const GridField& v2);
/// A v with <A v1, v2>_{L^2} = form_value(v1, v2).
GridField form_apply(const FormOperator& op, const GridField& v);
/// Diagonal mass w h^d.
GridField mass_weights(const FormOperator& op);

/// Generalized problem (h^d A, w h^d) restricted to the Nyquist-free subspace.
OperatorContract form_contract(const FormOperator& op);

/// a_eps(u1, u2) = int grad u1 . grad u2 + int u1 u2 (xi_eps + shift), where
/// shift = c_X (+ c_Y in 3D) when renormalized and 0 otherwise.
struct RegularizedForm {
  GridField xi_eps;
  RenormConstants c;
  bool renormalized = true;
  ProductMode product = ProductMode::pointwise;

  double shift() const noexcept { return renormalized ? c.c_x + c.c_y : 0.0; }
};

RegularizedForm regularized_form(const EnhancedNoise& xi, bool renormalized = true);
double regularized_form_value(const RegularizedForm& rf, const GridField& u1, const GridField& u2);

/// Direct operator -Delta + xi_eps + shift on the Nyquist-free subspace.
struct DirectOperator {
  GridField potential;

  const Lattice& lattice() const noexcept { return potential.lattice; }
};

DirectOperator direct_operator(const RegularizedForm& rf);
GridField direct_apply(const DirectOperator& op, const GridField& u);
/// Standard problem (h^d H, h^d I).
OperatorContract direct_contract(const DirectOperator& op);

/// sqrt(||v||^2 + ||grad v||^2) of the Nyquist-free part of v.
double h1_norm(const GridField& v);

/// Random trigonometric polynomial with Gaussian coefficients of envelope
/// |k|^-s (1 at k = 0), normalized to unit H^1 norm.
GridField random_probe(const Lattice& lattice, double s, std::uint64_t seed);

struct CoercivityResult {
  double c_prime = 0.0;
  double delta = 0.5;
  std::size_t probes = 0;
};

/// Smallest C' >= 0 with a(u,u) + C'||u||^2 >= delta ||grad(e^-Z u)||^2 over
/// random probes, envelopes cycling through s = 0.6, 1.0, 2.0.
CoercivityResult coercivity_probe(const FormOperator& op, std::size_t n_probes, std::uint64_t seed,
                                  double delta = 0.5);

}  // namespace anderson
