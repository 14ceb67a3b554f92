#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "../vendor/doctest.h"

#include <cmath>
#include <numbers>

#include "stripeforge/energy.hpp"
#include "stripeforge/minimize.hpp"
#include "stripeforge/onedim.hpp"

using namespace sf;

TEST_CASE("one-dimensionality report") {
  const Params prm = make_params(2, 4, 0.2, 0.3, 2.0, 8);
  const ScalarField s = make_stripe_field(prm, 0, 0.5, 0.0);
  const auto r = one_dimensionality_report(s, 0.01);
  CHECK(r.is_1d);
  CHECK(r.direction == 0);
  CHECK(r.deviation[0] == 0.0);

  const auto c = one_dimensionality_report(make_constant_field(prm, 0.3), 0.01);
  CHECK(c.deviation[0] < 1e-30);
  CHECK(c.deviation[1] < 1e-30);
  CHECK(c.direction == 0);

  // stripe plus a transverse sinusoid of amplitude 0.2: variance 0.02 on every column
  ScalarField w = s;
  Grid g{2, s.N()};
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double y = g.coords(i)[1] * prm.dx();
    w[i] = 0.5 + 0.3 * (2 * s[i] - 1) + 0.2 * std::sin(2 * std::numbers::pi * y / prm.L);
  }
  const auto rw = one_dimensionality_report(w, 0.01);
  CHECK_FALSE(rw.is_1d);
  CHECK(rw.deviation[0] == doctest::Approx(0.02).epsilon(1e-12));
}

TEST_CASE("runs are monotone and the best restart is kept") {
  const Params prm = make_params(2, 4, 0.2, 0.3, 1.0, 16);
  const KernelTable t = build_kernel_table(prm);
  MinimizeOptions opt;
  opt.max_iters = 150;
  opt.restarts = 3;
  opt.seed = 5;
  opt.smoothness = 0.25;
  const MinimizeResult r = minimize_field(prm, make_random_field(prm, 1, 0.25), opt, t);
  REQUIRE(r.runs.size() == 4);
  CHECK(r.runs[0].seed == -1);
  double best = 1e300;
  for (const auto& run : r.runs) {
    for (std::size_t k = 1; k < run.energy_trace.size(); ++k) CHECK(run.energy_trace[k] <= run.energy_trace[k - 1]);
    CHECK(run.energy_trace.back() == doctest::Approx(total_energy(run.field, t).total).epsilon(1e-10));
    best = std::min(best, run.energy);
  }
  CHECK(r.runs[r.best_restart].energy == best);
  CHECK(r.field.values == r.runs[r.best_restart].field.values);

  const MinimizeResult again = minimize_field(prm, make_random_field(prm, 1, 0.25), opt, t);
  CHECK(again.field.values == r.field.values);
}

TEST_CASE("the extended optimal profile is already near-critical") {
  const Params p = make_params(2, 4, 0.2, 0.1, 1.0, 16);
  const OneDimResult od = optimal_period_search(p);
  const ScalarField u = extend_profile(od.profile, p, 0, 1);
  const KernelTable t = build_kernel_table(u.params);
  MinimizeOptions opt;
  opt.max_iters = 200;
  const MinimizeResult r = minimize_field(u.params, u, opt, t);
  const double e0 = total_energy(u, t).total;
  CHECK(r.energy_trace.back() <= e0);
  CHECK(std::abs(r.energy_trace.back() - e0) < 1e-6);
  CHECK(one_dimensionality_report(r.field, 0.01).is_1d);
}
