#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstring>
#include <map>

#include "anderson/besov.hpp"
#include "anderson/error.hpp"
#include "anderson/rng.hpp"
#include "anderson/wick.hpp"
#include "support.hpp"

using namespace anderson;
using namespace test_support;

namespace {

double sigma2(int d) { return std::pow(2 * pi, -d); }

bool in_lattice(const Frequency& k, int d, int n) {
  for (int j = 0; j < d; ++j)
    if (k[j] <= -n / 2 || k[j] >= n / 2) return false;
  return true;
}

std::vector<Frequency> modes(const Lattice& l) {
  std::vector<Frequency> out;
  for (std::size_t i = 0; i < l.size(); ++i)
    if (!l.is_nyquist(i) && l.norm_sq(i) != 0) out.push_back(l.frequency(i));
  return out;
}

int dot(const Frequency& a, const Frequency& b, int d) {
  int s = 0;
  for (int j = 0; j < d; ++j) s += a[j] * b[j];
  return s;
}

// E|W_k|^2 for the dealiased W = |grad X|^2 - c_X, by pair counting:
// W_k = -sum_{a+b=k} (a.b) X_a X_b, and Wick's theorem gives 2 sum (a.b)^2 s_a s_b for k != 0,
// with s_a = E|X_a|^2 = sigma^2 rho(eps a)^2 / |a|^4.
std::map<std::vector<int>, double> wick_second_moments(const Lattice& l, double eps, const Mollifier& m) {
  const int d = l.dimension(), n = l.points();
  auto ks = modes(l);
  std::map<std::vector<int>, double> out;
  for (const auto& a : ks) {
    const int a2 = dot(a, a, d);
    const double sa = sigma2(d) * std::pow(m.at(eps, a2), 2) / (double(a2) * a2);
    for (const auto& b : ks) {
      const int b2 = dot(b, b, d);
      const double sb = sigma2(d) * std::pow(m.at(eps, b2), 2) / (double(b2) * b2);
      Frequency k{a[0] + b[0], a[1] + b[1], a[2] + b[2]};
      if (!in_lattice(k, d, n) || dot(k, k, d) == 0) continue;
      const double ab = dot(a, b, d);
      out[{k[0], k[1], k[2]}] += 2.0 * ab * ab * sa * sb;
    }
  }
  return out;
}

double padded_cy_oracle(const Lattice& l, double eps, const Mollifier& m) {
  double c = 0.0;
  for (const auto& [k, v] : wick_second_moments(l, eps, m)) c += v / (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]);
  return c;
}

SpectralField tagged(SpectralField f, double eps, MollifierKind kind) {
  f.regularization = Regularization{eps, kind};
  return f;
}

double mean_distance(int d, int n, double eps, std::size_t seeds, double kappa, std::size_t cy_samples) {
  Lattice l(d, n);
  auto m = Mollifier::gaussian();
  AssembleOptions coarse, fine;
  coarse.cy.samples = fine.cy.samples = cy_samples;
  coarse.constants = renorm_constants(l, eps, m, coarse.cy);
  fine.constants = renorm_constants(l, eps / 2, m, fine.cy);
  double s = 0.0;
  for (std::size_t i = 0; i < seeds; ++i) {
    auto noise = sample_white_noise(l, 700 + i);
    s += enhanced_distance(assemble_enhanced_noise(noise, eps, m, coarse),
                           assemble_enhanced_noise(noise, eps / 2, m, fine), kappa);
  }
  return s / static_cast<double>(seeds);
}

}  // namespace

TEST_CASE("c_X examples") {
  // Sharp cutoff at eps = 1/2 keeps |k| <= 2: 4 modes at |k|^2 = 1, 2 and 4 each.
  Lattice l(2, 32);
  CHECK(expected_grad_sq_x(l, 0.5, Mollifier::sharp_cutoff()) == doctest::Approx(7.0 * sigma2(2)).epsilon(1e-14));

  Lattice l3(3, 16);
  // |k| <= 1 in 3D: six unit vectors.
  CHECK(expected_grad_sq_x(l3, 1.0, Mollifier::sharp_cutoff()) == doctest::Approx(6.0 * sigma2(3)).epsilon(1e-14));

  // Direct sum over every mode.
  auto g = Mollifier::gaussian();
  double direct = 0.0;
  for (const auto& k : modes(l)) {
    const int k2 = dot(k, k, 2);
    direct += sigma2(2) * std::pow(g.at(0.1, k2), 2) / k2;
  }
  CHECK(expected_grad_sq_x(l, 0.1, g) == doctest::Approx(direct).epsilon(1e-12));
  CHECK_THROWS_AS(expected_grad_sq_x(l, 0.0, g), Error);
}

TEST_CASE("c_X matches the Monte Carlo mean of |grad X|^2") {
  Lattice l(2, 128);
  auto m = Mollifier::gaussian();
  const double eps = 1.0 / 8;
  std::vector<double> v;
  for (std::size_t s = 0; s < 200; ++s) v.push_back(grad_square(solve_x(mollify(sample_white_noise(l, s), eps, m))).mean());
  auto mo = moments(v);
  CHECK(std::abs(mo.mean - expected_grad_sq_x(l, eps, m)) <= 3 * mo.std_error);
}

TEST_CASE("c_X is nonnegative and nondecreasing as eps shrinks") {
  for (int d : {2, 3}) {
    Lattice l(d, d == 2 ? 256 : 32);
    for (auto m : {Mollifier::gaussian(), Mollifier::sharp_cutoff()}) {
      double prev = 0.0;
      for (double eps = 1.0; eps >= 1.0 / 64; eps /= 2) {
        const double c = expected_grad_sq_x(l, eps, m);
        CHECK(c >= 0.0);
        CHECK(c >= prev);
        prev = c;
      }
    }
  }
}

TEST_CASE("wick square of a deterministic stand-in") {
  Lattice l(2, 32);
  auto x = forward_transform(GridField::from_function(l, [](const Point& p) { return std::cos(p[0]); }));
  RenormConstants zero;
  auto w = wick_grad_square_x(x, zero);
  auto expect = GridField::from_function(l, [](const Point& p) { return std::sin(p[0]) * std::sin(p[0]); });
  CHECK(max_abs_diff(w, expect) < 1e-14);
  RenormConstants half{0.5, 0.0, 0.0, 0.0, MollifierKind::gaussian};
  auto w2 = wick_grad_square_x(x, half, ProductMode::padded);
  for (auto& v : expect.values) v -= 0.5;
  CHECK(max_abs_diff(w2, expect) < 1e-14);
}

TEST_CASE("wick square is centered") {
  Lattice l(2, 64);
  auto m = Mollifier::gaussian();
  const double eps = 1.0 / 8;
  auto c = renorm_constants(l, eps, m);
  std::vector<double> v;
  for (std::size_t s = 0; s < 500; ++s)
    v.push_back(wick_grad_square_x(solve_x(mollify(sample_white_noise(l, s), eps, m)), c).mean());
  auto mo = moments(v);
  CHECK(std::abs(mo.mean) <= 3 * mo.std_error);
}

TEST_CASE("wick square regularity stays above -0.2 in 2D") {
  Lattice l(2, 512);
  auto m = Mollifier::gaussian();
  for (double eps : {1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64}) {
    auto c = renorm_constants(l, eps, m);
    std::vector<SpectralField> ws;
    for (std::size_t s = 0; s < 5; ++s)
      ws.push_back(forward_transform(
          wick_grad_square_x(solve_x(mollify(sample_white_noise(l, s), eps, m)), c, ProductMode::padded)));
    auto est = regularity_exponent(ws, 2.0, 3, 7);
    CAPTURE(eps);
    CHECK(est.alpha_hat >= -0.2);
  }
}

TEST_CASE("c_Y exact double sum matches Monte Carlo") {
  Lattice l(3, 8);
  auto m = Mollifier::gaussian();
  for (auto mode : {ProductMode::pointwise, ProductMode::padded}) {
    CyOptions exact{CyMethod::exact_double_sum, 0, 0, mode};
    CyOptions mc{CyMethod::monte_carlo, 2000, 99, mode};
    const double e = expected_grad_sq_y(l, 0.25, m, exact).value;
    auto est = expected_grad_sq_y(l, 0.25, m, mc);
    CAPTURE(e);
    CAPTURE(est.value);
    CHECK(est.samples == 2000);
    CHECK(std::abs(est.value - e) <= 3 * est.std_error);
  }
}

TEST_CASE("padded c_Y equals the pair-counting formula") {
  auto m = Mollifier::gaussian();
  for (int n : {8, 16}) {
    Lattice l(3, n);
    for (double eps : {0.5, 0.25}) {
      CyOptions exact{CyMethod::exact_double_sum, 0, 0, ProductMode::padded};
      CHECK(expected_grad_sq_y(l, eps, m, exact).value == doctest::Approx(padded_cy_oracle(l, eps, m)).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(expected_grad_sq_y(Lattice(3, 32), 0.25, m, {CyMethod::exact_double_sum}), Error);
  CHECK_THROWS_AS(expected_grad_sq_y(Lattice(2, 16), 0.25, m), Error);
}

TEST_CASE("block energies of the wick square match pair counting") {
  // E||Delta_n W||^2 = (2 pi)^d sum_{k in A_n} E|W_k|^2.
  Lattice l(2, 16);
  auto m = Mollifier::gaussian();
  const double eps = 0.25;
  auto moments_k = wick_second_moments(l, eps, m);
  std::vector<double> expect(l.max_block() + 1, 0.0);
  for (const auto& [k, v] : moments_k) {
    const int b = block_index(k[0] * k[0] + k[1] * k[1]);
    if (b <= l.max_block()) expect[b] += 4 * pi * pi * v;
  }
  auto c = renorm_constants(l, eps, m);
  std::vector<std::vector<double>> got(expect.size());
  for (std::size_t s = 0; s < 4000; ++s) {
    auto w = forward_transform(
        wick_grad_square_x(solve_x(mollify(sample_white_noise(l, s), eps, m)), c, ProductMode::padded));
    auto b = block_norms(w, 2.0);
    for (std::size_t n = 1; n < b.size(); ++n) got[n].push_back(b[n] * b[n]);
  }
  for (std::size_t n = 1; n < expect.size(); ++n) {
    auto mo = moments(got[n]);
    CAPTURE(n);
    CHECK(std::abs(mo.mean - expect[n]) <= 4 * mo.std_error);
  }
}

TEST_CASE("c_Y grows logarithmically") {
  Lattice l(3, 64);
  auto m = Mollifier::gaussian();
  std::vector<double> x, y;
  for (double eps : {1.0 / 2, 1.0 / 4, 1.0 / 8}) {
    CyOptions o{CyMethod::monte_carlo, 40, 5, ProductMode::padded};
    auto est = expected_grad_sq_y(l, eps, m, o);
    CHECK(est.value >= 0.0);
    x.push_back(std::log(1.0 / eps));
    y.push_back(est.value);
  }
  const double b = slope(x, y);
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i] / x.size(), my += y[i] / y.size();
  double ss_res = 0, ss_tot = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double fit = my + b * (x[i] - mx);
    ss_res += (y[i] - fit) * (y[i] - fit);
    ss_tot += (y[i] - my) * (y[i] - my);
  }
  CHECK(b > 0.0);
  CHECK(1.0 - ss_res / ss_tot > 0.95);
}

TEST_CASE("cross term of deterministic stand-ins") {
  Lattice l(3, 16);
  auto cosx = forward_transform(GridField::from_function(l, [](const Point& p) { return std::cos(p[0]); }));
  auto cosy = forward_transform(GridField::from_function(l, [](const Point& p) { return std::cos(p[1]); }));
  auto expect = GridField::from_function(l, [](const Point& p) { return std::sin(p[0]) * std::sin(p[0]); });
  CHECK(max_abs_diff(cross_grad_xy(cosx, cosx), expect) < 1e-14);
  CHECK(max_abs(cross_grad_xy(cosx, cosy, ProductMode::padded)) < 1e-14);
  CHECK_THROWS_AS(cross_grad_xy(forward_transform(GridField(Lattice(2, 16))), forward_transform(GridField(Lattice(2, 16)))), Error);
  CHECK_THROWS_AS(cross_grad_xy(tagged(cosx, 0.5, MollifierKind::gaussian), tagged(cosx, 0.25, MollifierKind::gaussian)),
                  Error);
}

TEST_CASE("wick square rejects constants from another eps") {
  Lattice l(2, 32);
  auto m = Mollifier::gaussian();
  auto x = solve_x(mollify(sample_white_noise(l, 1), 0.25, m));
  CHECK_THROWS_AS(wick_grad_square_x(x, renorm_constants(l, 0.125, m)), Error);
  AssembleOptions o;
  o.constants = renorm_constants(l, 0.125, m);
  CHECK_THROWS_AS(assemble_enhanced_noise(sample_white_noise(l, 1), 0.25, m, o), Error);
}

TEST_CASE("enhanced noise assembly") {
  auto m = Mollifier::gaussian();
  Lattice l2(2, 32);
  auto e2 = assemble_enhanced_noise(sample_white_noise(l2, 4), 0.25, m);
  CHECK(e2.component_count() == 2);
  CHECK(!e2.y);
  CHECK(e2.constants.c_y == 0.0);

  Lattice l3(3, 16);
  AssembleOptions o;
  o.cy.samples = 20;
  auto a = assemble_enhanced_noise(sample_white_noise(l3, 4), 0.5, m, o);
  auto b = assemble_enhanced_noise(sample_white_noise(l3, 4), 0.5, m, o);
  CHECK(a.component_count() == 4);
  REQUIRE(a.y);
  CHECK(a.y->hermitian);
  CHECK(hermitian_defect(*a.y) < 1e-14);
  CHECK(a.constants.c_y > 0.0);
  // Y solves Delta Y = -(W - mean W).
  auto rhs = forward_transform(a.wick_grad_x_sq);
  rhs.coeffs[0] = 0.0;
  zero_nyquist(rhs);
  for (auto& c : rhs.coeffs) c = -c;
  CHECK(max_coeff_diff(laplacian(*a.y), rhs) < 1e-10);
  CHECK(std::memcmp(a.wick_grad_y_sq->values.data(), b.wick_grad_y_sq->values.data(),
                    a.wick_grad_y_sq->values.size() * sizeof(double)) == 0);
  CHECK(std::memcmp(a.cross_xy->values.data(), b.cross_xy->values.data(), a.cross_xy->values.size() * sizeof(double)) == 0);
  for (double v : a.wick_grad_x_sq.values) CHECK(std::isfinite(v));
}

TEST_CASE("enhanced distance is a metric on samples") {
  auto m = Mollifier::gaussian();
  Lattice l(2, 64);
  auto a = assemble_enhanced_noise(sample_white_noise(l, 1), 0.125, m);
  auto b = assemble_enhanced_noise(sample_white_noise(l, 2), 0.125, m);
  auto c = assemble_enhanced_noise(sample_white_noise(l, 3), 0.125, m);
  CHECK(enhanced_distance(a, a, 0.1) == 0.0);
  CHECK(enhanced_distance(a, b, 0.1) == enhanced_distance(b, a, 0.1));
  CHECK(enhanced_distance(a, c, 0.1) <= enhanced_distance(a, b, 0.1) + enhanced_distance(b, c, 0.1) + 1e-12);
  CHECK(enhanced_distance(a, b, 0.1) > 0.0);
  CHECK(enhanced_exponents(2, 0.1).size() == 2);
  CHECK(enhanced_exponents(3, 0.1).size() == 4);
  auto d = assemble_enhanced_noise(sample_white_noise(Lattice(2, 32), 1), 0.125, m);
  CHECK_THROWS_AS(enhanced_distance(a, d, 0.1), Error);
}

TEST_CASE("enhanced noise distance decays over dyadic eps once 2^(-kappa n) dominates") {
  std::vector<double> dist;
  for (double eps : {1.0 / 4, 1.0 / 8, 1.0 / 16}) dist.push_back(mean_distance(2, 256, eps, 20, 0.25, 0));
  CAPTURE(dist[0]);
  CAPTURE(dist[1]);
  CAPTURE(dist[2]);
  CHECK(dist[1] < dist[0]);
  CHECK(dist[2] < dist[1]);
}
