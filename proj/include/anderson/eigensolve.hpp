#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "anderson/operator.hpp"
#include "anderson/spectral_grid.hpp"

namespace anderson {

struct EigenOptions {
  std::size_t count = 1;
  double tol = 1e-8;
  std::size_t max_iter = 500;
  std::uint64_t seed = 0;
  /// Extra block columns beyond count; 0 selects max(2, count / 2).
  std::size_t guard = 0;
  double precondition_shift = 1.0;
};

struct Spectrum {
  std::vector<double> eigenvalues;
  std::vector<GridField> eigenvectors;
  /// ||P(K v - lambda B v)|| / ||B v||
  std::vector<double> residuals;
  std::size_t iterations = 0;
  bool converged = false;
  double tol = 0.0;
};

/// Lowest eigenpairs of K v = lambda B v by block LOBPCG in the B inner product.
/// mass holds the diagonal of B; nullopt means B = I. Throws when K fails a
/// randomized symmetry check or B is not positive.
Spectrum lowest_eigenpairs(const OperatorContract& op, const std::optional<GridField>& mass,
                           const EigenOptions& options);

/// lambda_2 - lambda_1.
double spectral_gap(const Spectrum& s);

struct PositivityReport {
  double min = 0.0;
  double max = 0.0;
  bool sign_definite = false;
  bool residual_ok = false;
};

/// Reconstructs u = e^Z v_index, fixes the sign so that mean(u) > 0, and reports whether min(u) > 0.
PositivityReport ground_state_positivity(const Spectrum& s, const GridField& transform_field,
                                         std::size_t index = 0);

struct HeatOptions {
  double cg_tol = 1e-13;
  std::size_t cg_max_iter = 2000;
};

struct HeatResult {
  GridField v;
  std::size_t cg_iterations = 0;
  double max_relative_residual = 0.0;
  bool converged = false;
};

/// `steps` implicit Euler steps of B v' = -K v over time t, each solved by
/// preconditioned CG on the trial space.
HeatResult heat_apply(const OperatorContract& op, const std::optional<GridField>& mass,
                      const GridField& f, double t, std::size_t steps, const HeatOptions& options = {});

/// Same in physical variables: v0 = P(e^-Z f), returns u = e^Z v(t) in the field v.
HeatResult heat_apply_physical(const OperatorContract& op, const GridField& mass,
                               const GridField& transform_field, const GridField& f, double t,
                               std::size_t steps, const HeatOptions& options = {});

}  // namespace anderson
