#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "../vendor/doctest.h"

#include <cmath>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "oracles.hpp"
#include "stripeforge/energy.hpp"

using namespace sf;

namespace {

double max_abs(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

ScalarField triangle_wave(const Params& prm) {
  ScalarField f(prm);
  for (int i = 0; i < f.N(); ++i) {
    const double x = i * prm.dx();
    f[i] = x < 0.5 ? 2 * x : 2 - 2 * x;
  }
  return f;
}

}  // namespace

TEST_CASE("double well") {
  CHECK(double_well(0.5) == doctest::Approx(1.0 / 16));
  CHECK(double_well(0.0) == 0.0);
  CHECK(double_well(1.0) == 0.0);
  for (double t : {0.1, 0.37, 0.8}) CHECK(double_well(t) == double_well(1 - t));
  CHECK(segment_well(0.0, 1.0) == doctest::Approx(1.0 / 30));
  CHECK(segment_well(0.3, 0.3) == doctest::Approx(double_well(0.3)));
}

TEST_CASE("Modica-Mortola term") {
  const Params prm = make_params(1, 3, 1.0, 1.0, 1.0, 16);
  CHECK(modica_mortola(make_constant_field(prm, 0.0), 1.0) == 0.0);
  CHECK(modica_mortola(make_constant_field(prm, 0.5), 1.0) == doctest::Approx(3.0 / 16));
  // slope +-2 triangle wave: 3 * 4 + 3 * (1/30) = 12.1 in the continuum
  double prev = 1e300;
  for (int n : {32, 64, 128, 256}) {
    const Params p = make_params(1, 3, 1.0, 1.0, 1.0, n);
    const double err = std::abs(modica_mortola(triangle_wave(p), 1.0) - 12.1);
    CHECK(err < 4.0 / n);
    CHECK(err <= prev);
    prev = err;
  }
}

TEST_CASE("nonlocal term against a naive image sum") {
  const Params prm = make_params(1, 3, 0.5, 1.0, 1.0, 4);
  const KernelTable t = build_kernel_table(prm);
  ScalarField f(prm);
  f.values = {1, 0, 1, 0};
  const LatticeKernel& lat = t.lattice;
  const int N = 4;
  double brute = 0;
  for (int c = 0; c < N; ++c)
    for (long k = -lat.box; k <= lat.box; ++k) {
      if (k == 0) continue;
      const double du = f[c] - f[((c + k) % N + N) % N];
      brute += (*lat.hat)(std::labs(k), 0) * du * du;
    }
  for (int c = 0; c < N; ++c)
    for (int j = 0; j < N; ++j) {
      const double du = f[c] - f[(c + j) % N];
      brute += lat.far_per_offset * du * du;
    }
  brute *= prm.dx();
  CHECK(nonlocal_energy(f, t) == doctest::Approx(brute).epsilon(1e-12));
  CHECK(nonlocal_energy(make_constant_field(prm, 0.3), t) == 0.0);
}

TEST_CASE("translation invariance") {
  const Params prm = make_params(2, 4, 0.2, 0.3, 1.0, 16);
  const KernelTable t = build_kernel_table(prm);
  const ScalarField f = make_random_field(prm, 4, 0.25);
  const double e = total_energy(f, t).total;
  CHECK(total_energy(shifted(f, 0, 5), t).total == doctest::Approx(e).epsilon(1e-13));
  CHECK(total_energy(transposed(f, 0, 1), t).total == doctest::Approx(e).epsilon(1e-13));
  CHECK(total_energy(swapped(f), t).total == doctest::Approx(e).epsilon(1e-13));
  const auto g = energy_gradient(f, t), gs = energy_gradient(shifted(f, 1, 3), t);
  Grid grid{2, 16};
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(gs[grid.shift(i, 1, 3)] == doctest::Approx(g[i]).epsilon(1e-10));
}

TEST_CASE("total energy of constant fields") {
  const Params p2 = make_params(2, 4, 0.2, 0.3, 1.0, 16);
  const KernelTable t2 = build_kernel_table(p2);
  CHECK(total_energy(make_constant_field(p2, 0.0), t2).total == 0.0);
  // C_tau = 1 for d = 1, p = 3, tau = 1
  const Params p1 = make_params(1, 3, 1.0, 1.0, 1.0, 16);
  const KernelTable t1 = build_kernel_table(p1);
  CHECK(std::abs(total_energy(make_constant_field(p1, 0.5), t1).total) < 1e-12);
  CHECK(max_abs(energy_gradient(make_constant_field(p2, 0.5), t2)) < 1e-12);
}

TEST_CASE("gradient matches finite differences") {
  const Params prm = make_params(2, 4, 0.2, 0.3, 1.0, 16);
  const KernelTable t = build_kernel_table(prm);
  for (std::uint64_t seed : {1, 2, 3}) {
    const ScalarField f = make_random_field(prm, seed, 0.25);
    const auto g = energy_gradient(f, t), fd = oracle::fd_gradient(f, t, 1e-6);
    double e = 0;
    for (std::size_t i = 0; i < g.size(); ++i) e = std::max(e, std::abs(g[i] - fd[i]));
    CHECK(e / max_abs(fd) < 1e-5);
  }
}

TEST_CASE("functional backends agree with the reference energy") {
  const Params prm = make_params(2, 4, 0.2, 0.3, 1.0, 16);
  const KernelTable t = build_kernel_table(prm);
  const ScalarField f = make_random_field(prm, 9, 0.25);
  Functional direct(prm, t.lattice, t.c_tau, Functional::Backend::Direct);
  Functional fft(prm, t.lattice, t.c_tau, Functional::Backend::Fft);
  CHECK(fft.uses_fft());
  std::vector<double> g1(f.size()), g2(f.size());
  const double e1 = direct.evaluate(f.values.data(), g1.data());
  const double e2 = fft.evaluate(f.values.data(), g2.data());
  CHECK(e1 == doctest::Approx(total_energy(f, t).total).epsilon(1e-12));
  CHECK(e2 == doctest::Approx(e1).epsilon(1e-10));
  for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g2[i] == doctest::Approx(g1[i]).epsilon(1e-8));

  // the smoothed search direction leaves the energy untouched
  direct.set_direction_smoothing(1e-2);
  std::vector<double> g3(f.size());
  CHECK(direct.evaluate(f.values.data(), g3.data()) == e1);
  double dot = 0;
  for (std::size_t i = 0; i < g1.size(); ++i) dot += g1[i] * g3[i];
  CHECK(dot > 0);
}

TEST_CASE("direct backend is exactly shift and swap symmetric") {
  const Params prm = make_params(2, 4, 0.2, 0.3, 1.0, 8);
  const KernelTable t = build_kernel_table(prm);
  Functional fn(prm, t.lattice, t.c_tau, Functional::Backend::Direct);
  const ScalarField f = make_random_field(prm, 2, 0.25);
  const ScalarField s = shifted(f, 0, 3), w = swapped(f), r = transposed(f, 0, 1);
  const double e = fn.evaluate(f.values.data(), nullptr);
  CHECK(fn.evaluate(s.values.data(), nullptr) == e);
  CHECK(fn.evaluate(w.values.data(), nullptr) == e);
  CHECK(fn.evaluate(r.values.data(), nullptr) == doctest::Approx(e).epsilon(1e-14));
}

TEST_CASE("sharp-interface energy") {
  const Params prm = make_params(1, 3, 1.0, 1.0, 2.0, 32);
  const KernelTable t = build_kernel_table(prm);
  CHECK(sharp_interface_energy(make_constant_field(prm, 1.0), t) == 0.0);
  const ScalarField s = make_stripe_field(prm, 0, 1.0, 0.0);
  CHECK(perimeter_l1(s) == 2.0);
  CHECK_THROWS_AS(sharp_interface_energy(make_constant_field(prm, 0.5), t), InputError);
  // C_tau = 1: only the nonlocal part remains, -(1/2) int_R 2 dist(z, 2Z) (|z|+1)^-3 dz
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  auto m = [](double z) { return std::abs(z - 2 * std::round(z / 2)); };
  double q = 0;
  const int Z = 4000;
  for (int k = 0; k < Z; ++k) q += GK::integrate([&](double z) { return m(z) * std::pow(z + 1, -3); }, k, k + 1, 0, 1e-15);
  q += 0.5 * std::pow(Z + 1.0, -2) / 2;  // tail with dist averaging 1/2
  const double ref = -2 * q;
  CHECK(sharp_interface_energy(s, t) == doctest::Approx(ref).epsilon(1e-6));
}

TEST_CASE("mollified stripe approaches the sharp energy") {
  const Params prm = make_params(1, 3, 0.8, 0.2, 8.0, 200);
  const auto pts = gamma_trend(prm, 4.0, {0.2, 0.1, 0.05});
  REQUIRE(pts.size() == 3);
  CHECK(pts[1].rel_error < pts[0].rel_error);
  CHECK(pts[2].rel_error < pts[1].rel_error);
  const ScalarField u = mollified_stripe(make_params(1, 3, 0.8, 0.2, 8.0, 50), 4.0);
  for (int i = 0; i < u.N(); ++i) CHECK(u[i] == doctest::Approx(1 - u[u.N() - 1 - i]).epsilon(1e-12));
}

TEST_CASE("screened Laplacian solve inverts the metric") {
  const Params prm = make_params(2, 4, 0.2, 0.3, 1.0, 16);
  ScreenedLaplacian P(prm, 0.01);
  const ScalarField f = make_random_field(prm, 5, 0.25);
  std::vector<double> v = f.values;
  P.solve(v.data());
  // s . P s with s = P^-1 f equals f . P^-1 f
  double fv = 0;
  for (std::size_t i = 0; i < v.size(); ++i) fv += f[i] * v[i];
  CHECK(P.metric(v.data()) == doctest::Approx(fv).epsilon(1e-10));
}
