#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "../vendor/doctest.h"

#include <cmath>
#include <random>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "stripeforge/kernel.hpp"

using namespace sf;

TEST_CASE("kernel values by direct substitution") {
  const Params prm = make_params(2, 4, 1.0, 1.0, 1.0, 8);
  CHECK(kernel_value({1.0, 0.0}, prm) == doctest::Approx(1.0 / 16));
  CHECK(kernel_value({0.0, 0.0}, prm) == doctest::Approx(1.0));
  std::mt19937_64 rng(1);
  std::normal_distribution<double> N(0.0, 2.0);
  for (int k = 0; k < 100; ++k) {
    const double a = N(rng), b = N(rng);
    CHECK(kernel_value({a, b}, prm) == kernel_value({-a, -b}, prm));
  }
}

TEST_CASE("marginal kernel") {
  const Params p1 = make_params(1, 3, 0.5, 1.0, 1.0, 8);
  for (double t : {0.0, 0.3, 1.0, 7.5}) CHECK(kernel_marginal(t, p1) == doctest::Approx(kernel_value({t}, p1)));
  // d = 2, p = 4, tau = 1: int_R (|s| + 1)^-4 ds = 2/3
  const Params p2 = make_params(2, 4, 1.0, 1.0, 1.0, 8);
  CHECK(kernel_marginal(0.0, p2) == doctest::Approx(2.0 / 3).epsilon(1e-12));
  CHECK(marginal_quadrature(0.0, p2) == doctest::Approx(2.0 / 3).epsilon(1e-10));
  for (double t : {0.1, 0.7, 2.0, 10.0})
    CHECK(kernel_marginal(t, p2) == doctest::Approx(marginal_quadrature(t, p2)).epsilon(1e-9));
  for (double tau : {1.0, 0.2, 0.01}) {
    const Params p = make_params(2, 4, tau, 1.0, 1.0, 8);
    CHECK(kernel_marginal(1.0, p) < kernel_marginal(0.0, p));
  }
}

TEST_CASE("kernel moments: closed form against quadrature") {
  for (double p : {3.0, 4.0}) {
    const Params prm = make_params(1, p, 1.0, 1.0, 1.0, 8);
    const Moments m = kernel_moments(prm), q = kernel_moments_quadrature(prm);
    CHECK(m.c_tau == doctest::Approx(2.0 / ((p - 1) * (p - 2))).epsilon(1e-14));
    CHECK(std::abs(m.c_tau - q.c_tau) < 1e-8);
  }
  const Params p3 = make_params(1, 3, 1.0, 1.0, 1.0, 8);
  CHECK(kernel_moments(p3).j_c == doctest::Approx(kernel_moments(p3).c_tau));
  for (double tau : {0.3, 0.05}) {
    const Params prm = make_params(2, 4, tau, 0.5, 1.0, 8);
    CHECK(kernel_moments(prm).c_tau == doctest::Approx(kernel_moments_quadrature(prm).c_tau).epsilon(1e-8));
  }
}

TEST_CASE("tail bound") {
  const Params prm = make_params(1, 3, 1.0, 1.0, 1.0, 8);
  CHECK(tail_bound(9.0, prm) == doctest::Approx(0.01).epsilon(1e-14));
  double prev = tail_bound(0.0, prm);
  for (int k = 1; k < 50; ++k) {
    const double v = tail_bound(0.2 * k, prm);
    CHECK(v <= prev);
    prev = v;
  }
  boost::math::quadrature::exp_sinh<double> q;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int k = 0; k < 20; ++k) {
    const double p = 3 + 2 * U(rng), tau = 0.05 + U(rng), r = 5 * U(rng);
    const Params pk = make_params(1, p, tau, 1.0, 1.0, 8);
    const double brute = 2 * q.integrate([&](double s) { return kernel_value({s}, pk); }, r,
                                         std::numeric_limits<double>::infinity());
    CHECK(tail_bound(r, pk) >= brute * (1 - 1e-10));
  }
}

TEST_CASE("complete monotonicity spot check") {
  CHECK(complete_monotonicity_spot_check(make_params(1, 3, 0.2, 0.3, 1.0, 16)));
  CHECK(complete_monotonicity_spot_check(make_params(2, 4, 0.2, 0.3, 1.0, 16)));
}

TEST_CASE("kernel table") {
  const Params prm = make_params(2, 4, 0.2, 0.3, 1.0, 16);
  const KernelTable t = build_kernel_table(prm);
  CHECK(t.c_tau == doctest::Approx(kernel_moments(prm).c_tau));
  for (double x : {0.0, 0.01, 0.1, 0.5})
    CHECK(t.marginal(x) == doctest::Approx(kernel_marginal(x, prm)).epsilon(1e-4));
  CHECK(t.lattice.N == 16);
  CHECK(t.lattice.w.size() == 256);
}
