#include "anderson/anderson_form.hpp"

#include <array>
#include <cmath>
#include <memory>

#include "anderson/error.hpp"
#include "anderson/rng.hpp"
#include "fft_backend.hpp"

namespace anderson {

namespace {

using detail::RealFft;
using cplx = std::complex<double>;

ComplexVector& cbuf(std::size_t slot, std::size_t n) {
  thread_local std::array<ComplexVector, 4> pool;
  if (pool[slot].size() < n) pool[slot].resize(n);
  return pool[slot];
}

RealVector& rbuf(std::size_t slot, std::size_t n) {
  thread_local std::array<RealVector, 4> pool;
  if (pool[slot].size() < n) pool[slot].resize(n);
  return pool[slot];
}

void require_lattice(const Lattice& a, const Lattice& b, const char* what) {
  require(a == b, ErrorCode::lattice_mismatch, std::string(what) + ": lattice mismatch");
}

std::shared_ptr<const RealFft> fft_of(const Lattice& l) { return RealFft::get(l.dimension(), l.points()); }

void project_raw(const RealFft& fft, const double* in, double* out) {
  auto& h = cbuf(3, fft.half_size());
  fft.forward(in, h.data());
  fft.zero_nyquist(h.data());
  fft.inverse(h.data(), out);
}

// out = P[-div(w grad Pv) + q Pv], pointwise products.
void apply_weighted(const RealFft& fft, const double* w, const double* q, const double* in, double* out) {
  const std::size_t hs = fft.half_size();
  const std::size_t n = fft.real_size();
  auto& vh = cbuf(0, hs);
  auto& acc = cbuf(1, hs);
  auto& gh = cbuf(2, hs);
  auto& g = rbuf(0, n);
  auto& pv = rbuf(1, n);
  fft.forward(in, vh.data());
  fft.zero_nyquist(vh.data());
  std::fill(acc.begin(), acc.begin() + static_cast<std::ptrdiff_t>(hs), cplx(0.0));
  for (int j = 0; j < fft.dimension(); ++j) {
    const auto& kj = fft.k(j);
    for (std::size_t h = 0; h < hs; ++h) gh[h] = cplx(0.0, kj[h]) * vh[h];
    fft.inverse(gh.data(), g.data());
    if (w != nullptr)
      for (std::size_t i = 0; i < n; ++i) g[i] *= w[i];
    fft.forward(g.data(), gh.data());
    for (std::size_t h = 0; h < hs; ++h) acc[h] -= cplx(0.0, kj[h]) * gh[h];
  }
  fft.inverse(vh.data(), pv.data());
  for (std::size_t i = 0; i < n; ++i) g[i] = q[i] * pv[i];
  fft.forward(g.data(), gh.data());
  for (std::size_t h = 0; h < hs; ++h) acc[h] += gh[h];
  fft.zero_nyquist(acc.data());
  fft.inverse(acc.data(), out);
}

// out = P[-Delta Pu + q Pu].
void apply_direct(const RealFft& fft, const double* q, const double* in, double* out) {
  const std::size_t hs = fft.half_size();
  const std::size_t n = fft.real_size();
  auto& vh = cbuf(0, hs);
  auto& gh = cbuf(2, hs);
  auto& g = rbuf(0, n);
  fft.forward(in, vh.data());
  fft.zero_nyquist(vh.data());
  fft.inverse(vh.data(), g.data());
  for (std::size_t i = 0; i < n; ++i) g[i] *= q[i];
  fft.forward(g.data(), gh.data());
  const auto& k2 = fft.norm_sq();
  for (std::size_t h = 0; h < hs; ++h) gh[h] += k2[h] * vh[h];
  fft.zero_nyquist(gh.data());
  fft.inverse(gh.data(), out);
}

// out = P E (|k|^2 + kappa)^-1 E in / hd, E = diag(e) (identity when e is null).
void precondition_raw(const RealFft& fft, const double* e, double kappa, double hd, const double* in,
                      double* out) {
  const std::size_t hs = fft.half_size();
  const std::size_t n = fft.real_size();
  auto& t = rbuf(2, n);
  auto& th = cbuf(0, hs);
  for (std::size_t i = 0; i < n; ++i) t[i] = e != nullptr ? e[i] * in[i] : in[i];
  fft.forward(t.data(), th.data());
  const auto& k2 = fft.norm_sq();
  const auto& nyq = fft.nyquist();
  for (std::size_t h = 0; h < hs; ++h) th[h] = nyq[h] ? cplx(0.0) : th[h] / ((k2[h] + kappa) * hd);
  fft.inverse(th.data(), t.data());
  if (e == nullptr) {
    std::copy(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(n), out);
    return;
  }
  for (std::size_t i = 0; i < n; ++i) t[i] *= e[i];
  project_raw(fft, t.data(), out);
}

GridField zero_order(const FormOperator& op) {
  GridField q(op.lattice());
  for (std::size_t i = 0; i < q.values.size(); ++i)
    q.values[i] = op.zero_mode_shift * op.weight.values[i] - op.potential.values[i];
  return q;
}

SpectralField projected_spectrum(const GridField& v) {
  SpectralField f = forward_transform(v);
  zero_nyquist(f);
  return f;
}

double parseval_dot(const SpectralField& a, const SpectralField& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.coeffs.size(); ++i) s += (a.coeffs[i] * std::conj(b.coeffs[i])).real();
  return s * a.lattice.volume();
}

}  // namespace

FormOperator assemble_form(const EnhancedNoise& xi) {
  const Lattice& l = xi.lattice();
  GridField z = inverse_transform(xi.x);
  if (xi.dimension == 3) {
    require(xi.y && xi.wick_grad_y_sq && xi.cross_xy, ErrorCode::invalid_argument,
            "assemble_form: three-dimensional enhanced noise is missing components");
    GridField y = inverse_transform(*xi.y);
    for (std::size_t i = 0; i < l.size(); ++i) z.values[i] += y.values[i];
  }
  GridField w(l);
  for (std::size_t i = 0; i < l.size(); ++i) w.values[i] = std::exp(2.0 * z.values[i]);

  GridField v(l);
  double shift = xi.xi_eps.coeffs[0].real();
  if (xi.dimension == 2) {
    for (std::size_t i = 0; i < l.size(); ++i) v.values[i] = xi.wick_grad_x_sq.values[i] * w.values[i];
  } else {
    for (std::size_t i = 0; i < l.size(); ++i)
      v.values[i] = (xi.wick_grad_y_sq->values[i] + 2.0 * xi.cross_xy->values[i]) * w.values[i];
    shift -= xi.wick_grad_x_sq.mean();
  }
  return FormOperator{xi.dimension, std::move(w), std::move(v), shift, std::move(z), xi.product};
}

FormOperator zero_noise_form(const Lattice& lattice) {
  return FormOperator{lattice.dimension(), GridField::constant(lattice, 1.0), GridField(lattice), 0.0,
                      GridField(lattice), ProductMode::pointwise};
}

double form_value(const FormOperator& op, const GridField& v1, const GridField& v2) {
  require_lattice(v1.lattice, op.lattice(), "form_value");
  require_lattice(v2.lattice, op.lattice(), "form_value");
  const Lattice& l = op.lattice();
  SpectralField a = projected_spectrum(v1);
  SpectralField b = projected_spectrum(v2);
  auto ga = gradient(a);
  auto gb = gradient(b);
  GridField q = zero_order(op);

  if (op.product == ProductMode::pointwise) {
    GridField pa = inverse_transform(a);
    GridField pb = inverse_transform(b);
    double s = 0.0;
    for (int j = 0; j < l.dimension(); ++j) {
      GridField x = inverse_transform(ga[static_cast<std::size_t>(j)]);
      GridField y = inverse_transform(gb[static_cast<std::size_t>(j)]);
      for (std::size_t i = 0; i < l.size(); ++i) s += op.weight.values[i] * x.values[i] * y.values[i];
    }
    for (std::size_t i = 0; i < l.size(); ++i) s += q.values[i] * pa.values[i] * pb.values[i];
    return s * l.cell_volume();
  }

  SpectralField w = forward_transform(op.weight);
  SpectralField qs = forward_transform(q);
  double s = 0.0;
  for (int j = 0; j < l.dimension(); ++j) {
    auto jj = static_cast<std::size_t>(j);
    s += parseval_dot(product(w, ga[jj], op.product), gb[jj]);
  }
  s += parseval_dot(product(qs, a, op.product), b);
  return s;
}

GridField form_apply(const FormOperator& op, const GridField& v) {
  require_lattice(v.lattice, op.lattice(), "form_apply");
  const Lattice& l = op.lattice();
  GridField q = zero_order(op);
  if (op.product == ProductMode::pointwise) {
    GridField out(l);
    apply_weighted(*fft_of(l), op.weight.values.data(), q.values.data(), v.values.data(), out.values.data());
    return out;
  }
  SpectralField a = projected_spectrum(v);
  SpectralField w = forward_transform(op.weight);
  auto ga = gradient(a);
  std::vector<SpectralField> flux;
  for (auto& g : ga) flux.push_back(product(w, g, op.product));
  SpectralField div = divergence(flux);
  SpectralField zq = product(forward_transform(q), a, op.product);
  SpectralField out(l);
  for (std::size_t i = 0; i < l.size(); ++i) out.coeffs[i] = -div.coeffs[i] + zq.coeffs[i];
  zero_nyquist(out);
  return inverse_transform(out);
}

GridField mass_weights(const FormOperator& op) {
  GridField m = op.weight;
  const double hd = op.lattice().cell_volume();
  for (double& x : m.values) x *= hd;
  return m;
}

OperatorContract form_contract(const FormOperator& op) {
  struct Data {
    std::shared_ptr<const RealFft> fft;
    RealVector w, q, e;
    double hd;
  };
  auto data = std::make_shared<Data>();
  const Lattice& l = op.lattice();
  data->fft = fft_of(l);
  data->w = op.weight.values;
  data->q = zero_order(op).values;
  data->e.resize(l.size());
  for (std::size_t i = 0; i < l.size(); ++i) data->e[i] = std::exp(-op.transform_field.values[i]);
  data->hd = l.cell_volume();

  OperatorContract c{l, {}, {}, {}};
  if (op.product == ProductMode::pointwise) {
    c.apply = [data](std::span<const double> in, std::span<double> out) {
      apply_weighted(*data->fft, data->w.data(), data->q.data(), in.data(), out.data());
      for (double& x : out) x *= data->hd;
    };
  } else {
    FormOperator copy = op;
    c.apply = [copy, data](std::span<const double> in, std::span<double> out) {
      GridField v(copy.lattice(), RealVector(in.begin(), in.end()));
      GridField r = form_apply(copy, v);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = r.values[i] * data->hd;
    };
  }
  c.project = [data](std::span<double> v) { project_raw(*data->fft, v.data(), v.data()); };
  c.precondition = [data](double shift, std::span<const double> in, std::span<double> out) {
    precondition_raw(*data->fft, data->e.data(), shift, data->hd, in.data(), out.data());
  };
  return c;
}

RegularizedForm regularized_form(const EnhancedNoise& xi, bool renormalized) {
  return RegularizedForm{inverse_transform(xi.xi_eps), xi.constants, renormalized, xi.product};
}

double regularized_form_value(const RegularizedForm& rf, const GridField& u1, const GridField& u2) {
  require_lattice(u1.lattice, rf.xi_eps.lattice, "regularized_form_value");
  require_lattice(u2.lattice, rf.xi_eps.lattice, "regularized_form_value");
  const Lattice& l = u1.lattice;
  SpectralField a = forward_transform(u1);
  SpectralField b = forward_transform(u2);
  double kinetic = 0.0;
  for (std::size_t i = 0; i < l.size(); ++i)
    if (!l.is_nyquist(i)) kinetic += l.norm_sq(i) * (a.coeffs[i] * std::conj(b.coeffs[i])).real();
  kinetic *= l.volume();

  const double shift = rf.shift();
  if (rf.product == ProductMode::pointwise) {
    double s = 0.0;
    for (std::size_t i = 0; i < l.size(); ++i)
      s += u1.values[i] * u2.values[i] * (rf.xi_eps.values[i] + shift);
    return kinetic + s * l.cell_volume();
  }
  GridField q = rf.xi_eps;
  for (double& x : q.values) x += shift;
  zero_nyquist(a);
  zero_nyquist(b);
  return kinetic + parseval_dot(product(a, b, rf.product), forward_transform(q));
}

DirectOperator direct_operator(const RegularizedForm& rf) {
  GridField q = rf.xi_eps;
  const double shift = rf.shift();
  for (double& x : q.values) x += shift;
  return DirectOperator{std::move(q)};
}

GridField direct_apply(const DirectOperator& op, const GridField& u) {
  require_lattice(u.lattice, op.lattice(), "direct_apply");
  GridField out(u.lattice);
  apply_direct(*fft_of(u.lattice), op.potential.values.data(), u.values.data(), out.values.data());
  return out;
}

OperatorContract direct_contract(const DirectOperator& op) {
  struct Data {
    std::shared_ptr<const RealFft> fft;
    RealVector q;
    double hd;
    double mean_q;
  };
  auto data = std::make_shared<Data>();
  const Lattice& l = op.lattice();
  data->fft = fft_of(l);
  data->q = op.potential.values;
  data->hd = l.cell_volume();
  data->mean_q = op.potential.mean();

  OperatorContract c{l, {}, {}, {}};
  c.apply = [data](std::span<const double> in, std::span<double> out) {
    apply_direct(*data->fft, data->q.data(), in.data(), out.data());
    for (double& x : out) x *= data->hd;
  };
  c.project = [data](std::span<double> v) { project_raw(*data->fft, v.data(), v.data()); };
  c.precondition = [data](double shift, std::span<const double> in, std::span<double> out) {
    double kappa = std::max(shift + data->mean_q, 0.5 * shift);
    precondition_raw(*data->fft, nullptr, kappa, data->hd, in.data(), out.data());
  };
  return c;
}

double h1_norm(const GridField& v) {
  SpectralField f = forward_transform(v);
  const Lattice& l = v.lattice;
  double s = 0.0;
  for (std::size_t i = 0; i < l.size(); ++i)
    if (!l.is_nyquist(i)) s += (1.0 + l.norm_sq(i)) * std::norm(f.coeffs[i]);
  return std::sqrt(s * l.volume());
}

GridField random_probe(const Lattice& lattice, double s, std::uint64_t seed) {
  SpectralField f(lattice);
  GaussianStream g(seed);
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    if (lattice.is_nyquist(i)) continue;
    std::size_t j = lattice.negated(i);
    int k2 = lattice.norm_sq(i);
    double env = k2 == 0 ? 1.0 : std::pow(static_cast<double>(k2), -0.5 * s);
    if (j == i) {
      f.coeffs[i] = env * g.next();
    } else if (i < j) {
      cplx z(g.next(), g.next());
      f.coeffs[i] = env * z;
      f.coeffs[j] = env * std::conj(z);
    }
  }
  GridField v = inverse_transform(f);
  const double norm = h1_norm(v);
  for (double& x : v.values) x /= norm;
  return v;
}

CoercivityResult coercivity_probe(const FormOperator& op, std::size_t n_probes, std::uint64_t seed,
                                  double delta) {
  require(n_probes >= 10, ErrorCode::invalid_argument, "coercivity_probe: need at least 10 probes");
  static constexpr double envelopes[] = {0.6, 1.0, 2.0};
  const Lattice& l = op.lattice();
  CoercivityResult r{0.0, delta, n_probes};
  for (std::size_t p = 0; p < n_probes; ++p) {
    GridField v = random_probe(l, envelopes[p % 3], derive_seed(seed, p));
    const double a = form_value(op, v, v);
    double mass = 0.0;
    for (std::size_t i = 0; i < l.size(); ++i) mass += op.weight.values[i] * v.values[i] * v.values[i];
    mass *= l.cell_volume();
    const double h1 = h1_norm(v);
    const double grad_sq = h1 * h1 - v.l2_norm() * v.l2_norm();
    r.c_prime = std::max(r.c_prime, (delta * grad_sq - a) / mass);
  }
  return r;
}

}  // namespace anderson
