// One line per acceptance criterion.  Exit status is the number of failed
// criteria unless --report-only is given.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/core.h>

#include "oracles.hpp"
#include "stripeforge/decompose.hpp"
#include "stripeforge/energy.hpp"
#include "stripeforge/kernel.hpp"
#include "stripeforge/minimize.hpp"
#include "stripeforge/onedim.hpp"
#include "stripeforge/stripes.hpp"
#include "stripeforge/verify.hpp"

using namespace sf;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome kernel_closed_forms() {
  double worst = 0;
  for (double p : {3.0, 4.0}) {
    const Params prm = make_params(1, p, 1.0, 1.0, 1.0, 16);
    const double expected = 2.0 / ((p - 1) * (p - 2));  // a = 1
    const double closed = kernel_moments(prm).c_tau, quad = kernel_moments_quadrature(prm).c_tau;
    worst = std::max({worst, std::abs(closed - quad), std::abs(closed - expected)});
  }
  return {worst < 1e-8, fmt::format("max |C_tau - reference| = {:.3e}", worst)};
}

Outcome normalization() {
  auto f = [](double s) { return 6 * std::sqrt(double_well(s)); };
  const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, 1.0, 15, 1e-14);
  return {std::abs(v - 1) < 1e-10, fmt::format("int_0^1 6 sqrt(W) = {:.15f}", v)};
}

Outcome gradient_check() {
  const Params prm = make_params(2, 4, 0.2, 0.3, 1.0, 16);
  const KernelTable table = build_kernel_table(prm);
  double worst = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const ScalarField f = make_random_field(prm, seed, 0.25);
    const auto g = energy_gradient(f, table);
    const auto fd = oracle::fd_gradient(f, table, 1e-6);
    double e = 0, m = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      e = std::max(e, std::abs(g[i] - fd[i]));
      m = std::max(m, std::abs(fd[i]));
    }
    worst = std::max(worst, e / m);
  }
  return {worst < 1e-5, fmt::format("worst relative error {:.3e} over 20 fields", worst)};
}

Outcome one_dim_solver() {
  OneDimResult r[2];
  try {
    for (int lvl = 0; lvl < 2; ++lvl)
      r[lvl] = optimal_period_search(make_params(1, 3, 0.05, 0.05, 1.0, 50 << lvl));
  } catch (const BracketError& e) {
    double emin = 1e300, hmin = 0;
    for (auto& [h, v] : e.trace())
      if (v < emin) emin = v, hmin = h;
    return {false, fmt::format("{} (lowest sampled energy {:.6g} at h = {:.4g})", e.what(), emin, hmin)};
  }
  const double dh = std::abs(r[1].h_star - r[0].h_star) / r[1].h_star;
  const double sym = std::max(r[0].profile.symmetry_residual, r[1].profile.symmetry_residual);
  return {r[1].c_star < 0 && sym < 1e-8 && dh < 0.02,
          fmt::format("C* = {:.6g}, h* = {:.6g} / {:.6g}, |dh*| = {:.3g}, symmetry residual {:.2e}",
                      r[1].c_star, r[0].h_star, r[1].h_star, dh, sym)};
}

Outcome decomposition_bound() {
  const Params prm = make_params(2, 4, 0.2, 0.3, 1.0, 16);
  const KernelTable table = build_kernel_table(prm);
  double worst = 1e300;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const ScalarField f = make_random_field(prm, seed, seed % 2 ? 0.25 : prm.dx());
    const Decomposer D(f, table);
    worst = std::min(worst, D.lower_bound_report(prm.L / 4).lower_bound_residual);
  }
  return {worst >= -1e-6, fmt::format("min residual {:.6g} over 100 fields", worst)};
}

Outcome positivity_suite() {
  const SuiteReport rep = run_suite(default_verify_config());
  bool ok = true;
  std::string detail;
  for (const char* name : {"pos1", "pos2", "partpos0", "omega_ab", "gom"}) {
    const CheckResult* c = rep.find(name);
    ok = ok && c && c->failures == 0 && c->instances >= 10000 && c->worst_margin >= -1e-9;
    detail += fmt::format("{} n={} worst={:.2e}; ", name, c->instances, c->worst_margin);
  }
  const CheckResult* vw = rep.find("vw_nonneg");
  ok = ok && vw->failures == 0;
  detail += fmt::format("V,W>=0 on {} evaluations, {} failures", vw->instances, vw->failures);
  return {ok, detail};
}

Outcome oracle_equivalence() {
  const Params prm = make_params(2, 4, 0.2, 0.3, 1.0, 32);
  const KernelTable table = build_kernel_table(prm);
  std::mt19937_64 rng(2024);
  double worst = 0;
  for (int k = 0; k < 20; ++k) {
    const ScalarField f = make_random_field(prm, 500 + k, k % 2 ? 0.125 : prm.dx());
    const Decomposer D(f, table);
    const int axis = static_cast<int>(rng() % 2);
    std::vector<int> xp = {static_cast<int>(rng() % 32), static_cast<int>(rng() % 32)};
    const long a = static_cast<long>(rng() % 32), n = 1 + static_cast<long>(rng() % 32);
    worst = std::max(worst, std::abs(D.r_term(axis, xp, a, n) - oracle::literal_r(D, axis, xp, a, n)));
    worst = std::max(worst, std::abs(D.v_term(axis, xp, a, n) - oracle::literal_v(D, axis, xp, a, n)));
  }
  return {worst < 1e-8, fmt::format("max |reduced - literal| = {:.3e} (R and V, 20 slices)", worst)};
}

Outcome desk_scale_theorem() {
  const double n = 32;
  const OneDimResult od = optimal_period_search(make_params(2, 4, 0.2, 0.1, 1.0, n));
  const double h = od.h_star, c = od.c_star;
  const Params prm = make_params(2, 4, 0.2, 0.1, 2 * h, n);
  const KernelTable table = build_kernel_table(prm);

  MinimizeOptions opt;
  opt.restarts = 7;
  opt.seed = 1;
  opt.max_iters = 4000;
  opt.smoothness = prm.L / 4;
  const ScalarField init = make_random_field(prm, 1000, opt.smoothness);
  const MinimizeResult coarse = minimize_field(prm, init, opt, table);
  MinimizeOptions polish = opt;
  polish.restarts = 0;
  polish.max_iters = 20000;
  const MinimizeResult best = minimize_field(prm, coarse.field, polish, table);

  const ScalarField& u = best.field;
  const Cube torus = make_cube(u, std::vector<int>(2, u.N() / 2), prm.L);
  const DirectionDistance dd = direction_distance(u, torus, h / 4);
  const OneDimensionalityReport od_rep = one_dimensionality_report(u, 0.01);
  const double dev = od_rep.deviation[dd.best_direction];
  const double e = total_energy(u, table).total;
  const double gap = std::abs(e - c) / std::abs(c);
  return {dd.d_eta < 0.05 && dev < 0.01 && gap < 0.05,
          fmt::format("h* = {:.6g}, C* = {:.6g}, F = {:.6g}, gap {:.3g}, D_eta = {:.4g}, deviation {:.4g}",
                      h, c, e, gap, dd.d_eta, dev)};
}

Outcome gamma_convergence() {
  const Params prm = make_params(1, 3, 0.8, 0.2, 8.0, 500);
  const auto pts = gamma_trend(prm, 4.0, {0.2, 0.1, 0.05, 0.025});
  bool dec = true;
  std::string detail;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    if (k && !(pts[k].rel_error < pts[k - 1].rel_error)) dec = false;
    detail += fmt::format("{:.4g}{}", pts[k].rel_error, k + 1 < pts.size() ? " > " : "");
  }
  return {dec && pts.back().rel_error < 0.1, "relative errors " + detail};
}

Outcome stripe_distance_oracle() {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int mismatches = 0;
  for (int k = 0; k < 50; ++k) {
    std::vector<double> m(16);
    for (auto& v : m) v = U(rng);
    if (fit_binary_profile(m, 3) != oracle::exhaustive_fit(m, 3)) ++mismatches;
  }
  const Params prm = make_params(2, 4, 0.2, 0.3, 1.0, 32);
  const double l = prm.L / 4, eta = l / 4, dx = prm.dx();
  const double bound = 4 * prm.d / l * dx + 2 * dx / l;
  double worst = 0;
  int violations = 0;
  for (int k = 0; k < 100; ++k) {
    const ScalarField f = make_random_field(prm, 700 + k / 10, 0.125);
    std::vector<int> z = {static_cast<int>(rng() % 32), static_cast<int>(rng() % 32)};
    std::vector<int> z2 = z;
    const int ax = static_cast<int>(rng() % 2);
    z2[ax] = (z2[ax] + 1) % 32;
    const double d1 = direction_distance(f, make_cube(f, z, l), eta).d_eta;
    const double d2 = direction_distance(f, make_cube(f, z2, l), eta).d_eta;
    worst = std::max(worst, std::abs(d1 - d2));
    if (std::abs(d1 - d2) > bound) ++violations;
  }
  return {mismatches == 0 && violations == 0,
          fmt::format("DP vs exhaustive mismatches {}/50; max |dD| = {:.4g} <= {:.4g} on {} of 100 pairs",
                      mismatches, worst, bound, 100 - violations)};
}

}  // namespace

int main(int argc, char** argv) {
  const bool report_only = argc > 1 && std::strcmp(argv[1], "--report-only") == 0;
  struct Criterion {
    int id;
    double limit_s;
    std::function<Outcome()> run;
  };
  const Criterion all[] = {
      {1, 1, kernel_closed_forms},      {2, 1, normalization},        {3, 30, gradient_check},
      {4, 300, one_dim_solver},         {5, 1200, decomposition_bound}, {6, 600, positivity_suite},
      {7, 600, oracle_equivalence},     {8, 7200, desk_scale_theorem}, {9, 600, gamma_convergence},
      {10, 300, stripe_distance_oracle},
  };
  int failed = 0;
  for (const auto& c : all) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool pass = o.pass && t < c.limit_s;
    failed += !pass;
    std::printf("criterion %2d: %s  %s  [%.2f s, limit %.0f s]\n", c.id, pass ? "PASS" : "FAIL", o.detail.c_str(),
                t, c.limit_s);
    std::fflush(stdout);
  }
  std::printf("%d of 10 criteria passed\n", 10 - failed);
  return report_only ? 0 : failed;
}
