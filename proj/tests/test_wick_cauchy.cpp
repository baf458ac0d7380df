#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "anderson/besov.hpp"
#include "anderson/experiments.hpp"
#include "anderson/wick.hpp"

using namespace anderson;

// Dyadic Cauchy monitors at the default kappa. Mean over 20 seeds of the distance between
// consecutive dyadic regularizations of the same noise sample must decrease.

namespace {

const double kKappa = ExperimentConfig{}.kappa;

GridField cross(const NoiseSample& n, double eps, const Mollifier& m) {
  auto x = solve_x(mollify(n, eps, m));
  auto y = solve_y(grad_square(x, ProductMode::padded));
  y.regularization = x.regularization;
  return cross_grad_xy(x, y, ProductMode::padded);
}

}  // namespace

TEST_CASE("enhanced noise is Cauchy in eps in 2D") {
  Lattice l(2, 256);
  auto m = Mollifier::gaussian();
  std::vector<double> dist;
  for (double eps : {1.0 / 4, 1.0 / 8, 1.0 / 16}) {
    AssembleOptions a, b;
    a.constants = renorm_constants(l, eps, m);
    b.constants = renorm_constants(l, eps / 2, m);
    double s = 0.0;
    for (std::uint64_t i = 0; i < 20; ++i) {
      auto noise = sample_white_noise(l, 700 + i);
      s += enhanced_distance(assemble_enhanced_noise(noise, eps, m, a), assemble_enhanced_noise(noise, eps / 2, m, b),
                             kKappa);
    }
    dist.push_back(s / 20);
  }
  CAPTURE(dist[0]);
  CAPTURE(dist[1]);
  CAPTURE(dist[2]);
  CHECK(dist[1] < dist[0]);
  CHECK(dist[2] < dist[1]);
}

TEST_CASE("cross term is Cauchy in eps in 3D") {
  Lattice l(3, 64);
  auto m = Mollifier::gaussian();
  std::vector<double> dist;
  for (double eps : {1.0, 1.0 / 2, 1.0 / 4}) {
    double s = 0.0;
    for (std::uint64_t i = 0; i < 20; ++i) {
      auto noise = sample_white_noise(l, 700 + i);
      auto a = cross(noise, eps, m);
      auto b = cross(noise, eps / 2, m);
      for (std::size_t j = 0; j < a.values.size(); ++j) a.values[j] -= b.values[j];
      s += holder_norm(forward_transform(a), -0.5 - 3 * kKappa);
    }
    dist.push_back(s / 20);
  }
  CAPTURE(dist[0]);
  CAPTURE(dist[1]);
  CAPTURE(dist[2]);
  CHECK(dist[1] < dist[0]);
  CHECK(dist[2] < dist[1]);
}
