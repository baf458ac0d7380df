#include "anderson/spectral_grid.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <utility>

#include "anderson/error.hpp"
#include "fft_backend.hpp"

namespace anderson {

namespace {

struct LatticeTables {
  std::shared_ptr<const std::vector<int>> norm_sq;
  std::shared_ptr<const std::vector<unsigned char>> nyquist;
};

LatticeTables tables_for(int d, int n) {
  static std::mutex m;
  static std::map<std::pair<int, int>, LatticeTables> cache;
  std::lock_guard<std::mutex> lock(m);
  auto key = std::make_pair(d, n);
  if (auto it = cache.find(key); it != cache.end()) return it->second;

  std::size_t size = 1;
  for (int j = 0; j < d; ++j) size *= static_cast<std::size_t>(n);
  auto k2 = std::make_shared<std::vector<int>>(size);
  auto nyq = std::make_shared<std::vector<unsigned char>>(size);
  for (std::size_t i = 0; i < size; ++i) {
    std::size_t rest = i;
    int s = 0;
    bool ny = false;
    for (int j = 0; j < d; ++j) {
      int idx = static_cast<int>(rest % static_cast<std::size_t>(n));
      rest /= static_cast<std::size_t>(n);
      int k = idx < n / 2 ? idx : idx - n;
      s += k * k;
      ny = ny || idx == n / 2;
    }
    (*k2)[i] = s;
    (*nyq)[i] = ny ? 1 : 0;
  }
  LatticeTables t{k2, nyq};
  cache.emplace(key, t);
  return t;
}

void require_same(const Lattice& a, const Lattice& b, const char* what) {
  require(a == b, ErrorCode::lattice_mismatch, std::string(what) + ": lattice mismatch");
}

std::shared_ptr<const detail::RealFft> fft_of(const Lattice& l) {
  return detail::RealFft::get(l.dimension(), l.points());
}

// Full spectrum -> half spectrum (no symmetrization).
ComplexVector to_half(const SpectralField& f, const detail::RealFft& fft) {
  ComplexVector half(fft.half_size());
  const auto& full = fft.full_index();
  for (std::size_t h = 0; h < half.size(); ++h) half[h] = f.coeffs[full[h]];
  return half;
}

SpectralField from_half(const Lattice& l, const ComplexVector& half, const detail::RealFft& fft) {
  SpectralField out(l);
  const auto& full = fft.full_index();
  for (std::size_t h = 0; h < half.size(); ++h) {
    std::size_t i = full[h];
    out.coeffs[i] = half[h];
    out.coeffs[l.negated(i)] = std::conj(half[h]);
  }
  // Self-paired entries keep the half value (conj of a real value is itself).
  for (std::size_t h = 0; h < half.size(); ++h) {
    std::size_t i = full[h];
    if (l.negated(i) == i) out.coeffs[i] = half[h];
  }
  out.hermitian = true;
  return out;
}

bool inside(const Frequency& k, int d, int n) {
  for (int j = 0; j < d; ++j)
    if (k[j] <= -n / 2 || k[j] >= n / 2) return false;
  return true;
}

}  // namespace

const char* to_string(MollifierKind kind) noexcept {
  return kind == MollifierKind::gaussian ? "gaussian" : "sharp";
}

const char* to_string(ProductMode mode) noexcept {
  return mode == ProductMode::pointwise ? "pointwise" : "padded";
}

Lattice::Lattice(int dimension, int points) : d_(dimension), n_(points), size_(1) {
  require(dimension == 2 || dimension == 3, ErrorCode::invalid_argument,
          "lattice dimension must be 2 or 3");
  require(points >= 8 && (points & (points - 1)) == 0, ErrorCode::invalid_argument,
          "grid points per axis must be a power of two >= 8");
  for (int j = 0; j < d_; ++j) size_ *= static_cast<std::size_t>(n_);
  auto t = tables_for(d_, n_);
  norm_sq_ = t.norm_sq;
  nyquist_ = t.nyquist;
}

double Lattice::spacing() const noexcept { return 2.0 * std::numbers::pi / n_; }

double Lattice::cell_volume() const noexcept { return std::pow(spacing(), d_); }

double Lattice::volume() const noexcept { return std::pow(2.0 * std::numbers::pi, d_); }

int Lattice::max_block() const noexcept {
  int b = 0;
  while ((2 << b) < n_) ++b;
  return b;  // 2^b = N/2
}

Frequency Lattice::frequency(std::size_t index) const noexcept {
  Frequency k{0, 0, 0};
  for (int j = d_ - 1; j >= 0; --j) {
    int idx = static_cast<int>(index % static_cast<std::size_t>(n_));
    index /= static_cast<std::size_t>(n_);
    k[j] = idx < n_ / 2 ? idx : idx - n_;
  }
  return k;
}

Point Lattice::point(std::size_t index) const noexcept {
  Point x{0.0, 0.0, 0.0};
  const double h = spacing();
  for (int j = d_ - 1; j >= 0; --j) {
    x[j] = h * static_cast<double>(index % static_cast<std::size_t>(n_));
    index /= static_cast<std::size_t>(n_);
  }
  return x;
}

std::size_t Lattice::index_of(const Frequency& k) const noexcept {
  std::size_t index = 0;
  for (int j = 0; j < d_; ++j) {
    int idx = ((k[j] % n_) + n_) % n_;
    index = index * static_cast<std::size_t>(n_) + static_cast<std::size_t>(idx);
  }
  return index;
}

std::size_t Lattice::negated(std::size_t index) const noexcept {
  std::size_t out = 0;
  std::size_t stride = 1;
  for (int j = d_ - 1; j >= 0; --j) {
    std::size_t idx = index % static_cast<std::size_t>(n_);
    index /= static_cast<std::size_t>(n_);
    out += ((static_cast<std::size_t>(n_) - idx) % static_cast<std::size_t>(n_)) * stride;
    stride *= static_cast<std::size_t>(n_);
  }
  return out;
}

GridField::GridField(const Lattice& l, RealVector v) : lattice(l), values(std::move(v)) {
  require(values.size() == lattice.size(), ErrorCode::invalid_argument,
          "grid field size does not match lattice");
}

GridField GridField::from_function(const Lattice& l, const std::function<double(const Point&)>& f) {
  GridField u(l);
  for (std::size_t i = 0; i < l.size(); ++i) u.values[i] = f(l.point(i));
  return u;
}

GridField GridField::constant(const Lattice& l, double c) {
  GridField u(l);
  std::fill(u.values.begin(), u.values.end(), c);
  return u;
}

double GridField::mean() const noexcept {
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

double GridField::integral() const noexcept { return mean() * lattice.volume(); }

double GridField::l2_norm() const noexcept {
  double s = 0.0;
  for (double v : values) s += v * v;
  return std::sqrt(s * lattice.cell_volume());
}

double GridField::max() const noexcept { return *std::max_element(values.begin(), values.end()); }

double GridField::min() const noexcept { return *std::min_element(values.begin(), values.end()); }

SpectralField::SpectralField(const Lattice& l, ComplexVector c, bool is_hermitian)
    : lattice(l), coeffs(std::move(c)), hermitian(is_hermitian) {
  require(coeffs.size() == lattice.size(), ErrorCode::invalid_argument,
          "spectral field size does not match lattice");
}

SpectralField forward_transform(const GridField& u) {
  auto fft = fft_of(u.lattice);
  ComplexVector half(fft->half_size());
  fft->forward(u.values.data(), half.data());
  return from_half(u.lattice, half, *fft);
}

GridField inverse_transform(const SpectralField& f) {
  require(f.hermitian, ErrorCode::not_hermitian, "inverse_transform: input is not hermitian");
  auto fft = fft_of(f.lattice);
  ComplexVector half = to_half(f, *fft);
  GridField u(f.lattice);
  fft->inverse(half.data(), u.values.data());
  return u;
}

SpectralField apply_multiplier(const SpectralField& f, const Multiplier& m) {
  const Lattice& l = f.lattice;
  std::vector<std::complex<double>> mv(l.size());
  for (std::size_t i = 0; i < l.size(); ++i) mv[i] = l.is_nyquist(i) ? 0.0 : m(l.frequency(i));

  bool symmetric = true;
  for (std::size_t i = 0; i < l.size() && symmetric; ++i) {
    if (l.is_nyquist(i)) continue;
    std::complex<double> a = mv[i];
    std::complex<double> b = std::conj(mv[l.negated(i)]);
    symmetric = std::abs(a - b) <= 1e-14 * std::max(1.0, std::abs(a));
  }

  SpectralField out(l);
  for (std::size_t i = 0; i < l.size(); ++i) out.coeffs[i] = mv[i] * f.coeffs[i];
  out.hermitian = f.hermitian && symmetric;
  out.regularization = f.regularization;
  return out;
}

SpectralField apply_radial_multiplier(const SpectralField& f, const RadialMultiplier& m) {
  const Lattice& l = f.lattice;
  std::map<int, double> memo;
  SpectralField out(l);
  for (std::size_t i = 0; i < l.size(); ++i) {
    if (l.is_nyquist(i)) continue;
    int k2 = l.norm_sq(i);
    auto it = memo.find(k2);
    if (it == memo.end()) it = memo.emplace(k2, m(k2)).first;
    out.coeffs[i] = it->second * f.coeffs[i];
  }
  out.hermitian = f.hermitian;
  out.regularization = f.regularization;
  return out;
}

std::vector<SpectralField> gradient(const SpectralField& f) {
  const Lattice& l = f.lattice;
  std::vector<SpectralField> g;
  g.reserve(static_cast<std::size_t>(l.dimension()));
  for (int j = 0; j < l.dimension(); ++j) {
    SpectralField c(l);
    for (std::size_t i = 0; i < l.size(); ++i) {
      if (l.is_nyquist(i)) continue;
      c.coeffs[i] = std::complex<double>(0.0, l.frequency(i)[j]) * f.coeffs[i];
    }
    c.hermitian = f.hermitian;
    c.regularization = f.regularization;
    g.push_back(std::move(c));
  }
  return g;
}

SpectralField divergence(std::span<const SpectralField> components) {
  require(!components.empty(), ErrorCode::invalid_argument, "divergence: no components");
  const Lattice& l = components[0].lattice;
  require(static_cast<int>(components.size()) == l.dimension(), ErrorCode::dimension_mismatch,
          "divergence: component count must equal dimension");
  SpectralField out(l);
  bool herm = true;
  for (int j = 0; j < l.dimension(); ++j) {
    const SpectralField& c = components[static_cast<std::size_t>(j)];
    require_same(c.lattice, l, "divergence");
    herm = herm && c.hermitian;
    for (std::size_t i = 0; i < l.size(); ++i) {
      if (l.is_nyquist(i)) continue;
      out.coeffs[i] += std::complex<double>(0.0, l.frequency(i)[j]) * c.coeffs[i];
    }
  }
  out.hermitian = herm;
  return out;
}

SpectralField laplacian(const SpectralField& f) {
  return apply_radial_multiplier(f, [](int k2) { return -static_cast<double>(k2); });
}

SpectralField inverse_laplacian_zero_mean(const SpectralField& f) {
  return apply_radial_multiplier(f, [](int k2) { return k2 == 0 ? 0.0 : -1.0 / k2; });
}

void zero_nyquist(SpectralField& f) noexcept {
  for (std::size_t i = 0; i < f.lattice.size(); ++i)
    if (f.lattice.is_nyquist(i)) f.coeffs[i] = 0.0;
}

GridField project_nyquist_free(const GridField& u) {
  auto fft = fft_of(u.lattice);
  ComplexVector half(fft->half_size());
  fft->forward(u.values.data(), half.data());
  fft->zero_nyquist(half.data());
  GridField out(u.lattice);
  fft->inverse(half.data(), out.values.data());
  return out;
}

SpectralField product(const SpectralField& a, const SpectralField& b, ProductMode mode) {
  require_same(a.lattice, b.lattice, "product");
  require(a.hermitian && b.hermitian, ErrorCode::not_hermitian, "product: inputs must be hermitian");
  const Lattice& l = a.lattice;
  if (mode == ProductMode::pointwise) {
    GridField ua = inverse_transform(a);
    GridField ub = inverse_transform(b);
    for (std::size_t i = 0; i < l.size(); ++i) ua.values[i] *= ub.values[i];
    return forward_transform(ua);
  }

  const int n = l.points();
  const int d = l.dimension();
  auto pad = detail::RealFft::get(d, 3 * n / 2);
  ComplexVector ha(pad->half_size()), hb(pad->half_size());
  std::vector<std::size_t> target(pad->half_size(), l.size());
  for (std::size_t h = 0; h < pad->half_size(); ++h) {
    Frequency k{pad->k_int(0)[h], d > 1 ? pad->k_int(1)[h] : 0, d > 2 ? pad->k_int(2)[h] : 0};
    if (!inside(k, d, n)) continue;
    std::size_t i = l.index_of(k);
    target[h] = i;
    ha[h] = a.coeffs[i];
    hb[h] = b.coeffs[i];
  }
  RealVector va(pad->real_size()), vb(pad->real_size());
  pad->inverse(ha.data(), va.data());
  pad->inverse(hb.data(), vb.data());
  for (std::size_t i = 0; i < va.size(); ++i) va[i] *= vb[i];
  pad->forward(va.data(), ha.data());

  SpectralField out(l);
  for (std::size_t h = 0; h < pad->half_size(); ++h) {
    std::size_t i = target[h];
    if (i == l.size()) continue;
    out.coeffs[i] = ha[h];
    out.coeffs[l.negated(i)] = std::conj(ha[h]);
  }
  out.hermitian = true;
  return out;
}

GridField product(const GridField& a, const GridField& b, ProductMode mode) {
  require_same(a.lattice, b.lattice, "product");
  if (mode == ProductMode::pointwise) {
    GridField out(a.lattice);
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = a.values[i] * b.values[i];
    return out;
  }
  return inverse_transform(product(forward_transform(a), forward_transform(b), mode));
}

SpectralField resample(const SpectralField& f, const Lattice& target) {
  require(f.lattice.dimension() == target.dimension(), ErrorCode::dimension_mismatch,
          "resample: dimension mismatch");
  const int n = std::min(f.lattice.points(), target.points());
  const int d = target.dimension();
  SpectralField out(target);
  for (std::size_t i = 0; i < f.lattice.size(); ++i) {
    Frequency k = f.lattice.frequency(i);
    if (!inside(k, d, n)) continue;
    out.coeffs[target.index_of(k)] = f.coeffs[i];
  }
  out.hermitian = f.hermitian;
  out.regularization = f.regularization;
  return out;
}

double inner_product(const GridField& a, const GridField& b) {
  require_same(a.lattice, b.lattice, "inner_product");
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) s += a.values[i] * b.values[i];
  return s * a.lattice.cell_volume();
}

double parseval_norm_sq(const SpectralField& f) noexcept {
  double s = 0.0;
  for (const auto& c : f.coeffs) s += std::norm(c);
  return s * f.lattice.volume();
}

double hermitian_defect(const SpectralField& f) noexcept {
  double worst = 0.0;
  for (std::size_t i = 0; i < f.lattice.size(); ++i) {
    if (f.lattice.is_nyquist(i)) continue;
    worst = std::max(worst, std::abs(f.coeffs[i] - std::conj(f.coeffs[f.lattice.negated(i)])));
  }
  return worst;
}

double imaginary_residue(const SpectralField& f) {
  const Lattice& l = f.lattice;
  int dims[3] = {l.points(), l.points(), l.points()};
  ComplexVector in(f.coeffs.begin(), f.coeffs.end());
  ComplexVector out(l.size());
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(detail::planner_mutex());
    plan = fftw_plan_dft(l.dimension(), dims, reinterpret_cast<fftw_complex*>(in.data()),
                         reinterpret_cast<fftw_complex*>(out.data()), FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(detail::planner_mutex());
    fftw_destroy_plan(plan);
  }
  double worst = 0.0;
  for (const auto& z : out) worst = std::max(worst, std::abs(z.imag()));
  return worst;
}

}  // namespace anderson
