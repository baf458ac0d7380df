#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstring>

#include "anderson/besov.hpp"
#include "anderson/error.hpp"
#include "anderson/noise_fields.hpp"
#include "support.hpp"

using namespace anderson;
using namespace test_support;

namespace {

GridField cos_axis(const Lattice& l, int axis) {
  return GridField::from_function(l, [=](const Point& x) { return std::cos(x[axis]); });
}

// <xi, phi> for a trigonometric polynomial phi, as an L2 pairing of the realized field.
double pairing(const NoiseSample& s, const GridField& phi) { return inner_product(inverse_transform(s.xi), phi); }

}  // namespace

TEST_CASE("variance normalization") {
  CHECK(white_noise_variance(2) == doctest::Approx(1.0 / (4 * pi * pi)));
  CHECK(white_noise_variance(3) == doctest::Approx(1.0 / (8 * pi * pi * pi)));
}

TEST_CASE("same lattice and seed give bit-identical samples") {
  Lattice l(2, 32);
  auto a = sample_white_noise(l, 17);
  auto b = sample_white_noise(l, 17);
  auto c = sample_white_noise(l, 18);
  CHECK(a.seed == 17);
  CHECK(std::memcmp(a.xi.coeffs.data(), b.xi.coeffs.data(), a.xi.coeffs.size() * sizeof(a.xi.coeffs[0])) == 0);
  CHECK(max_coeff_diff(a.xi, c.xi) > 0.0);
}

TEST_CASE("samples are hermitian with real zero mode and no nyquist content") {
  for (int d : {2, 3}) {
    Lattice l(d, 16);
    auto s = sample_white_noise(l, 3);
    CHECK(s.xi.hermitian);
    CHECK(s.xi.coeffs[0].imag() == 0.0);
    CHECK(s.xi0 == s.xi.coeffs[0].real());
    for (std::size_t i = 0; i < l.size(); ++i) {
      if (l.is_nyquist(i)) {
        CHECK(s.xi.coeffs[i] == std::complex<double>(0.0));
      } else {
        CHECK(s.xi.coeffs[l.negated(i)] == std::conj(s.xi.coeffs[i]));
      }
    }
    CHECK(hermitian_defect(s.xi) == 0.0);
  }
}

TEST_CASE("coefficient second moments") {
  // E xi_k conj(xi_k') = sigma^2 delta(k - k') on a few fixed modes.
  Lattice l(2, 16);
  const std::size_t m = 4000;
  const Frequency k1{1, 0, 0}, k2{2, 3, 0}, k3{0, 0, 0};
  std::vector<double> a, b, c, cross;
  for (std::size_t s = 0; s < m; ++s) {
    auto x = sample_white_noise(l, s);
    a.push_back(std::norm(x.xi.at(k1)));
    b.push_back(std::norm(x.xi.at(k2)));
    c.push_back(std::norm(x.xi.at(k3)));
    cross.push_back((x.xi.at(k1) * std::conj(x.xi.at(k2))).real());
  }
  const double s2 = white_noise_variance(2);
  for (const auto* v : {&a, &b, &c}) {
    auto mo = moments(*v);
    CHECK(std::abs(mo.mean - s2) <= 5 * mo.std_error);
  }
  auto mc = moments(cross);
  CHECK(std::abs(mc.mean) <= 5 * mc.std_error);
}

TEST_CASE("isometry against the L2 norm by Monte Carlo") {
  Lattice l(2, 16);
  const auto phi = cos_axis(l, 0);
  const auto psi = cos_axis(l, 1);
  const auto chi = GridField::from_function(l, [](const Point& x) { return 1.0 + std::sin(x[0] + 2 * x[1]); });
  std::vector<double> pp, ps, cc, z4;
  for (std::size_t s = 0; s < 10000; ++s) {
    auto x = sample_white_noise(l, 1000 + s);
    const double a = pairing(x, phi), b = pairing(x, psi), c = pairing(x, chi);
    pp.push_back(a * a);
    ps.push_back(a * b);
    cc.push_back(c * c);
    z4.push_back(a * a * a * a);
  }
  const double norm_phi = 2 * pi * pi;  // ||cos x1||^2 on [0,2pi)^2
  const double norm_chi = 4 * pi * pi + 2 * pi * pi;
  auto m1 = moments(pp), m2 = moments(ps), m3 = moments(cc), m4 = moments(z4);
  CHECK(std::abs(m1.mean - norm_phi) <= 5 * m1.std_error);
  CHECK(std::abs(m2.mean) <= 5 * m2.std_error);
  CHECK(std::abs(m3.mean - norm_chi) <= 5 * m3.std_error);
  // Gaussian hypercontractivity equality case: E Z^4 / (E Z^2)^2 = 3.
  const double kurt = m4.mean / (m1.mean * m1.mean);
  CHECK(kurt == doctest::Approx(3.0).epsilon(0.1));
}

TEST_CASE("block energies of white noise match lattice counts") {
  // E ||Delta_n xi||^2 = (2 pi)^d sigma^2 #annulus(n) = #annulus(n).
  Lattice l(2, 64);
  std::vector<double> count(l.max_block() + 1, 0.0);
  for (std::size_t i = 0; i < l.size(); ++i)
    if (!l.is_nyquist(i) && block_index(l.norm_sq(i)) <= l.max_block()) count[block_index(l.norm_sq(i))] += 1.0;
  std::vector<std::vector<double>> samples(count.size());
  for (std::size_t s = 0; s < 200; ++s) {
    auto b = block_norms(sample_white_noise(l, s).xi, 2.0);
    for (std::size_t n = 0; n < b.size(); ++n) samples[n].push_back(b[n] * b[n]);
  }
  for (std::size_t n = 0; n < count.size(); ++n) {
    auto mo = moments(samples[n]);
    CHECK(std::abs(mo.mean - count[n]) <= 5 * mo.std_error + 1e-12);
  }
}

TEST_CASE("mollifier profiles") {
  auto g = Mollifier::gaussian();
  auto s = Mollifier::sharp_cutoff();
  CHECK(g.profile(0.0) == 1.0);
  CHECK(g.profile(1.0) == doctest::Approx(std::exp(-0.5)));
  CHECK(s.profile(1.0) == 1.0);
  CHECK(s.profile(1.01) == 0.0);
  CHECK(g.at(1e-9, 100) == doctest::Approx(1.0));
}

TEST_CASE("mollify in the small eps limit recovers the noise") {
  Lattice l(2, 64);
  auto s = sample_white_noise(l, 5);
  auto f = mollify(s, 1e-8, Mollifier::gaussian());
  double err = 0.0;
  for (std::size_t i = 0; i < l.size(); ++i)
    if (l.norm_sq(i) <= 16 * 16) err = std::max(err, std::abs(f.coeffs[i] - s.xi.coeffs[i]));
  CHECK(err < 1e-6);
  REQUIRE(f.regularization.has_value());
  CHECK(f.regularization->eps == 1e-8);
}

TEST_CASE("sharp cutoff at eps = 2/N") {
  Lattice l(2, 32);
  auto s = sample_white_noise(l, 6);
  auto f = mollify(s, 2.0 / 32, Mollifier::sharp_cutoff());
  for (std::size_t i = 0; i < l.size(); ++i) {
    const double k = std::sqrt(static_cast<double>(l.norm_sq(i)));
    if (k > 16.0) CHECK(f.coeffs[i] == std::complex<double>(0.0));
    else CHECK(f.coeffs[i] == s.xi.coeffs[i]);
  }
}

TEST_CASE("mollified L2 norm is nonincreasing in eps") {
  Lattice l(2, 64);
  auto s = sample_white_noise(l, 7);
  double prev = 0.0;
  for (double eps = 1.0 / 64; eps <= 1.0; eps *= 2) {
    const double n = parseval_norm_sq(mollify(s, eps, Mollifier::gaussian()));
    if (prev > 0.0) CHECK(n <= prev);
    prev = n;
  }
  CHECK_THROWS_AS(mollify(s, 0.0, Mollifier::gaussian()), Error);
  CHECK_THROWS_AS(mollify(s, -1.0, Mollifier::gaussian()), Error);
}

TEST_CASE("solve_x examples") {
  Lattice l(2, 32);
  auto x = solve_x(forward_transform(cos_axis(l, 0)));
  auto expect = cos_axis(l, 0);
  for (auto& v : expect.values) v = -v;
  CHECK(max_abs_diff(inverse_transform(x), expect) < 1e-14);

  auto xi = mollify(sample_white_noise(l, 9), 0.25, Mollifier::gaussian());
  auto X = solve_x(xi);
  CHECK(std::abs(X.coeffs[0]) == 0.0);
  auto lap = laplacian(X);
  auto rhs = xi;
  rhs.coeffs[0] = 0.0;
  CHECK(max_coeff_diff(lap, rhs) < 1e-10);
  CHECK(X.hermitian);
  CHECK(X.regularization == xi.regularization);
}

TEST_CASE("solve_y examples") {
  Lattice l(3, 16);
  auto zero = solve_y(GridField::constant(l, 2.0));
  for (auto c : zero.coeffs) CHECK(std::abs(c) == 0.0);

  // Delta Y = -(W - mean W): a cos(x3) source gives Y = +cos(x3).
  auto y = solve_y(cos_axis(l, 2));
  CHECK(max_abs_diff(inverse_transform(y), cos_axis(l, 2)) < 1e-14);

  auto w = inverse_transform(random_hermitian(l, 10));
  auto Y = solve_y(w);
  auto lap = laplacian(Y);
  auto rhs = forward_transform(w);
  rhs.coeffs[0] = 0.0;
  for (auto& c : rhs.coeffs) c = -c;
  CHECK(max_coeff_diff(lap, rhs) < 1e-10);

  CHECK_THROWS_AS(solve_y(GridField(Lattice(2, 16))), Error);
}
