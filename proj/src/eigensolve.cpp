#include "anderson/eigensolve.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

#include "anderson/error.hpp"
#include "anderson/rng.hpp"

namespace anderson {

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

std::span<double> col(Mat& m, Eigen::Index j) {
  return {m.data() + j * m.rows(), static_cast<std::size_t>(m.rows())};
}

std::span<const double> col(const Mat& m, Eigen::Index j) {
  return {m.data() + j * m.rows(), static_cast<std::size_t>(m.rows())};
}

Mat apply_block(const OperatorContract& op, const Mat& x) {
  Mat out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) op.apply(col(x, j), col(out, j));
  return out;
}

void project_block(const OperatorContract& op, Mat& x) {
  if (!op.project) return;
  for (Eigen::Index j = 0; j < x.cols(); ++j) op.project(col(x, j));
}

Mat weighted(const Vec& b, const Mat& x) { return b.asDiagonal() * x; }

// B-orthonormalize S against the B-orthonormal Q (SVQB, two passes, dropping
// numerically dependent directions). AS follows the same linear maps.
void borth(Mat& s, Mat* as, const Mat* q, const Mat* aq, const Vec& b) {
  for (int pass = 0; pass < 2 && s.cols() > 0; ++pass) {
    if (q != nullptr && q->cols() > 0) {
      Mat c = q->transpose() * weighted(b, s);
      s.noalias() -= *q * c;
      if (as != nullptr) as->noalias() -= *aq * c;
    }
    Mat g = s.transpose() * weighted(b, s);
    g = 0.5 * (g + g.transpose());
    Vec dg = g.diagonal().cwiseAbs().cwiseSqrt();
    for (Eigen::Index i = 0; i < dg.size(); ++i)
      if (dg(i) == 0.0) dg(i) = 1.0;
    Vec inv = dg.cwiseInverse();
    Mat g2 = inv.asDiagonal() * g * inv.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Mat> es(g2);
    const Vec& ev = es.eigenvalues();
    const double top = ev.maxCoeff();
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
      if (ev(i) > 1e-12 * top) keep.push_back(i);
    Mat t(s.cols(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j)
      t.col(static_cast<Eigen::Index>(j)) = es.eigenvectors().col(keep[j]) / std::sqrt(ev(keep[j]));
    t = inv.asDiagonal() * t;
    s = s * t;
    if (as != nullptr) *as = *as * t;
  }
}

Mat hcat(std::initializer_list<const Mat*> parts) {
  Eigen::Index rows = 0, cols = 0;
  for (const Mat* p : parts) {
    if (p->cols() == 0) continue;
    rows = p->rows();
    cols += p->cols();
  }
  Mat out(rows, cols);
  Eigen::Index at = 0;
  for (const Mat* p : parts) {
    if (p->cols() == 0) continue;
    out.middleCols(at, p->cols()) = *p;
    at += p->cols();
  }
  return out;
}

void check_symmetry(const OperatorContract& op, std::size_t n, std::uint64_t seed) {
  GaussianStream g(derive_seed(seed, 0x5717));
  Mat xy(static_cast<Eigen::Index>(n), 2);
  for (int trial = 0; trial < 5; ++trial) {
    for (Eigen::Index i = 0; i < xy.size(); ++i) xy.data()[i] = g.next();
    project_block(op, xy);
    Mat a = apply_block(op, xy);
    const double xay = xy.col(0).dot(a.col(1));
    const double yax = xy.col(1).dot(a.col(0));
    const double scale = std::max(a.col(1).norm() * xy.col(0).norm(), a.col(0).norm() * xy.col(1).norm());
    require(std::abs(xay - yax) <= 1e-10 * std::max(scale, std::numeric_limits<double>::min()),
            ErrorCode::asymmetric_operator, "lowest_eigenpairs: operator failed the symmetry check");
  }
}

struct Residuals {
  Mat r;
  Vec norms;
};

Residuals residuals(const OperatorContract& op, const Mat& x, const Mat& ax, const Vec& lam, const Vec& b) {
  Mat bx = weighted(b, x);
  Residuals out{ax - bx * lam.asDiagonal(), Vec(x.cols())};
  project_block(op, out.r);
  for (Eigen::Index j = 0; j < x.cols(); ++j) out.norms(j) = out.r.col(j).norm() / bx.col(j).norm();
  return out;
}

}  // namespace

Spectrum lowest_eigenpairs(const OperatorContract& op, const std::optional<GridField>& mass,
                           const EigenOptions& options) {
  const std::size_t n = op.lattice.size();
  require(options.count >= 1, ErrorCode::invalid_argument, "lowest_eigenpairs: count must be >= 1");
  require(options.tol > 0.0, ErrorCode::invalid_argument, "lowest_eigenpairs: tol must be positive");
  Vec b = Vec::Ones(static_cast<Eigen::Index>(n));
  if (mass) {
    require(mass->lattice == op.lattice, ErrorCode::lattice_mismatch, "lowest_eigenpairs: mass lattice mismatch");
    for (std::size_t i = 0; i < n; ++i) {
      require(mass->values[i] > 0.0, ErrorCode::invalid_argument, "lowest_eigenpairs: mass must be positive");
      b(static_cast<Eigen::Index>(i)) = mass->values[i];
    }
  }
  check_symmetry(op, n, options.seed);

  const std::size_t m = options.count;
  const std::size_t guard = options.guard > 0 ? options.guard : std::max<std::size_t>(2, m / 2);
  const auto k = static_cast<Eigen::Index>(std::min(m + guard, n));
  const auto mi = static_cast<Eigen::Index>(m);

  GaussianStream g(options.seed);
  Mat x(static_cast<Eigen::Index>(n), k);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g.next();
  project_block(op, x);
  borth(x, nullptr, nullptr, nullptr, b);
  require(x.cols() == k, ErrorCode::invalid_argument, "lowest_eigenpairs: starting block is rank deficient");
  Mat ax = apply_block(op, x);

  auto rayleigh_ritz = [&](const Mat& s, const Mat& as, Mat& c, Vec& lam) {
    Mat h = s.transpose() * as;
    h = 0.5 * (h + h.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(h);
    c = es.eigenvectors().leftCols(k);
    lam = es.eigenvalues().head(k);
  };

  Mat c;
  Vec lam;
  rayleigh_ritz(x, ax, c, lam);
  x = x * c;
  ax = ax * c;

  Mat p, ap;
  Spectrum out;
  out.tol = options.tol;
  std::size_t it = 0;
  std::size_t last_refresh = 0;
  Residuals res;
  for (;; ++it) {
    res = residuals(op, x, ax, lam, b);
    bool done = (res.norms.head(mi).array() < options.tol).all();
    if (done && last_refresh != it) {
      ax = apply_block(op, x);
      last_refresh = it;
      res = residuals(op, x, ax, lam, b);
      done = (res.norms.head(mi).array() < options.tol).all();
    }
    if (done) {
      out.converged = true;
      break;
    }
    if (it >= options.max_iter) break;

    std::vector<Eigen::Index> active;
    for (Eigen::Index j = 0; j < k; ++j)
      if (res.norms(j) > 0.1 * options.tol) active.push_back(j);
    Mat w(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(active.size()));
    for (std::size_t j = 0; j < active.size(); ++j) {
      auto jj = static_cast<Eigen::Index>(j);
      if (op.precondition)
        op.precondition(options.precondition_shift, col(res.r, active[j]), col(w, jj));
      else
        w.col(jj) = res.r.col(active[j]);
    }
    project_block(op, w);
    borth(w, nullptr, &x, nullptr, b);
    Mat aw = apply_block(op, w);

    if (p.cols() > 0) {
      Mat q = hcat({&x, &w});
      Mat aq = hcat({&ax, &aw});
      borth(p, &ap, &q, &aq, b);
    }
    Mat s = hcat({&x, &w, &p});
    Mat as = hcat({&ax, &aw, &ap});
    rayleigh_ritz(s, as, c, lam);
    x = s * c;
    ax = as * c;
    Mat cp = c;
    cp.topRows(k).setZero();
    p = s * cp;
    ap = as * cp;

    if ((it + 1) % 20 == 0) {
      ax = apply_block(op, x);
      ap = apply_block(op, p);
      last_refresh = it + 1;
    }
  }

  out.iterations = it;
  for (Eigen::Index j = 0; j < mi; ++j) {
    out.eigenvalues.push_back(lam(j));
    out.residuals.push_back(res.norms(j));
    GridField v(op.lattice);
    std::copy(x.col(j).data(), x.col(j).data() + n, v.values.begin());
    out.eigenvectors.push_back(std::move(v));
  }
  return out;
}

double spectral_gap(const Spectrum& s) {
  require(s.eigenvalues.size() >= 2, ErrorCode::invalid_argument, "spectral_gap: need at least two eigenvalues");
  return s.eigenvalues[1] - s.eigenvalues[0];
}

PositivityReport ground_state_positivity(const Spectrum& s, const GridField& transform_field, std::size_t index) {
  require(index < s.eigenvectors.size(), ErrorCode::invalid_argument, "ground_state_positivity: index out of range");
  const GridField& v = s.eigenvectors[index];
  require(v.lattice == transform_field.lattice, ErrorCode::lattice_mismatch,
          "ground_state_positivity: lattice mismatch");
  GridField u(v.lattice);
  for (std::size_t i = 0; i < u.values.size(); ++i) u.values[i] = std::exp(transform_field.values[i]) * v.values[i];
  if (u.mean() < 0.0)
    for (double& x : u.values) x = -x;
  PositivityReport r;
  r.min = u.min();
  r.max = u.max();
  r.sign_definite = r.min > 0.0;
  r.residual_ok = s.residuals[index] <= s.tol;
  return r;
}

HeatResult heat_apply(const OperatorContract& op, const std::optional<GridField>& mass, const GridField& f,
                      double t, std::size_t steps, const HeatOptions& options) {
  require(t > 0.0, ErrorCode::invalid_argument, "heat_apply: t must be positive");
  require(steps >= 1, ErrorCode::invalid_argument, "heat_apply: steps must be >= 1");
  require(f.lattice == op.lattice, ErrorCode::lattice_mismatch, "heat_apply: lattice mismatch");
  const std::size_t n = op.lattice.size();
  const double tau = t / static_cast<double>(steps);
  RealVector b(n, 1.0);
  if (mass) b = mass->values;

  auto project = [&](RealVector& v) {
    if (op.project) op.project(v);
  };
  RealVector tmp(n);
  auto apply_m = [&](const RealVector& x, RealVector& out) {
    op.apply(x, tmp);
    for (std::size_t i = 0; i < n; ++i) out[i] = b[i] * x[i];
    project(out);
    for (std::size_t i = 0; i < n; ++i) out[i] += tau * tmp[i];
  };
  auto precondition = [&](const RealVector& r, RealVector& z) {
    if (op.precondition) {
      op.precondition(1.0 / tau, r, z);
      for (double& x : z) x /= tau;
    } else {
      z = r;
    }
  };
  auto dot = [&](const RealVector& a, const RealVector& c) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * c[i];
    return s;
  };

  HeatResult result{GridField(f.lattice, f.values), 0, 0.0, true};
  RealVector& v = result.v.values;
  project(v);
  RealVector rhs(n), x(n), r(n), z(n), p(n), ap(n);
  for (std::size_t step = 0; step < steps; ++step) {
    for (std::size_t i = 0; i < n; ++i) rhs[i] = b[i] * v[i];
    project(rhs);
    const double rhs_norm = std::sqrt(dot(rhs, rhs));
    x = v;
    apply_m(x, ap);
    for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - ap[i];
    precondition(r, z);
    p = z;
    double rz = dot(r, z);
    double rel = std::sqrt(dot(r, r)) / rhs_norm;
    std::size_t iter = 0;
    while (rel > options.cg_tol && iter < options.cg_max_iter) {
      apply_m(p, ap);
      const double alpha = rz / dot(p, ap);
      for (std::size_t i = 0; i < n; ++i) {
        x[i] += alpha * p[i];
        r[i] -= alpha * ap[i];
      }
      ++iter;
      rel = std::sqrt(dot(r, r)) / rhs_norm;
      if (rel <= options.cg_tol) break;
      precondition(r, z);
      const double rz_next = dot(r, z);
      for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + (rz_next / rz) * p[i];
      rz = rz_next;
    }
    result.cg_iterations += iter;
    result.max_relative_residual = std::max(result.max_relative_residual, rel);
    if (rel > options.cg_tol) result.converged = false;
    v = x;
  }
  return result;
}

HeatResult heat_apply_physical(const OperatorContract& op, const GridField& mass, const GridField& transform_field,
                               const GridField& f, double t, std::size_t steps, const HeatOptions& options) {
  require(transform_field.lattice == f.lattice, ErrorCode::lattice_mismatch, "heat_apply_physical: lattice mismatch");
  GridField v0(f.lattice);
  for (std::size_t i = 0; i < v0.values.size(); ++i)
    v0.values[i] = std::exp(-transform_field.values[i]) * f.values[i];
  HeatResult r = heat_apply(op, mass, v0, t, steps, options);
  for (std::size_t i = 0; i < r.v.values.size(); ++i) r.v.values[i] *= std::exp(transform_field.values[i]);
  return r;
}

}  // namespace anderson
