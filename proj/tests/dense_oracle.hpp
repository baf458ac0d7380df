#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <optional>
#include <vector>

#include "anderson/operator.hpp"
#include "anderson/spectral_grid.hpp"

namespace test_support {

// Sorted |k|^2 over non-Nyquist lattice modes, first m.
inline std::vector<double> laplacian_eigenvalues(const anderson::Lattice& l, std::size_t m) {
  std::vector<double> v;
  for (std::size_t i = 0; i < l.size(); ++i)
    if (!l.is_nyquist(i)) v.push_back(l.norm_sq(i));
  std::sort(v.begin(), v.end());
  v.resize(std::min(m, v.size()));
  return v;
}

struct DenseProblem {
  Eigen::MatrixXd k;        // Q^T K Q
  Eigen::MatrixXd b;        // Q^T B Q
  double asymmetry = 0.0;   // ||k - k^T|| / ||k||
  Eigen::VectorXd eigenvalues;
};

// Assembles K column by column from the matrix-free operator, restricts to the
// range of the projector and solves the dense generalized problem.
inline DenseProblem dense_problem(const anderson::OperatorContract& op, const std::optional<anderson::GridField>& mass) {
  const auto n = static_cast<Eigen::Index>(op.lattice.size());
  Eigen::MatrixXd k(n, n), p(n, n);
  std::vector<double> e(static_cast<std::size_t>(n)), out(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) {
    std::fill(e.begin(), e.end(), 0.0);
    e[static_cast<std::size_t>(j)] = 1.0;
    op.apply(e, out);
    for (Eigen::Index i = 0; i < n; ++i) k(i, j) = out[static_cast<std::size_t>(i)];
    if (op.project) op.project(e);
    for (Eigen::Index i = 0; i < n; ++i) p(i, j) = e[static_cast<std::size_t>(i)];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ps(0.5 * (p + p.transpose()));
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < n; ++i)
    if (ps.eigenvalues()(i) > 0.5) keep.push_back(i);
  Eigen::MatrixXd q(n, static_cast<Eigen::Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) q.col(static_cast<Eigen::Index>(c)) = ps.eigenvectors().col(keep[c]);

  Eigen::VectorXd bd = Eigen::VectorXd::Ones(n);
  if (mass)
    for (Eigen::Index i = 0; i < n; ++i) bd(i) = mass->values[static_cast<std::size_t>(i)];

  DenseProblem d;
  d.k = q.transpose() * k * q;
  d.b = q.transpose() * bd.asDiagonal() * q;
  d.asymmetry = (d.k - d.k.transpose()).norm() / d.k.norm();
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> gs(0.5 * (d.k + d.k.transpose()),
                                                                0.5 * (d.b + d.b.transpose()));
  d.eigenvalues = gs.eigenvalues();
  return d;
}

}  // namespace test_support
