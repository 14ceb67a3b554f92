#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "../vendor/doctest.h"

#include <algorithm>
#include <cmath>

#include "stripeforge/energy.hpp"
#include "stripeforge/onedim.hpp"

using namespace sf;

namespace {

const Params kRegime = make_params(1, 3, 0.5, 0.2, 1.0, 16);

const OneDimResult& search16() {
  static const OneDimResult r = optimal_period_search(kRegime);
  return r;
}

}  // namespace

TEST_CASE("reflection extension") {
  const auto e = reflect_extend({0.9, 0.6, 0.2});
  REQUIRE(e.size() == 6);
  for (int i = 0; i < 3; ++i) CHECK(e[3 + i] == 1.0 - e[2 - i]);
}

TEST_CASE("profile at a fixed period") {
  const OneDimSolver s(kRegime, 5.0);
  const ProfileRun a = s.solve(3.0, ProfileInit::Logistic), b = s.solve(3.0, ProfileInit::Step);
  CHECK(a.converged);
  for (double v : a.profile.samples) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK(a.profile.symmetry_residual < 1e-8);
  // descent from the sharp step is one admissible run
  std::vector<double> step(a.profile.samples.size(), 1.0);
  CHECK(a.profile.energy_density <= s.energy(3.0, step));
  // independent initializers agree
  CHECK(a.profile.energy_density == doctest::Approx(b.profile.energy_density).epsilon(1e-4));
  for (std::size_t k = 1; k < a.trace.size(); ++k) CHECK(a.trace[k] <= a.trace[k - 1]);
  CHECK_THROWS_AS(s.cells_for(3.03), InputError);
}

TEST_CASE("optimal period search") {
  const OneDimResult& r = search16();
  CHECK(r.c_star < 0);
  CHECK(r.converged);
  CHECK(r.profile.symmetry_residual < 1e-8);
  CHECK(std::is_sorted(r.search_trace.begin(), r.search_trace.end()));
  double lowest = 1e300;
  for (auto& [h, e] : r.search_trace) lowest = std::min(lowest, e);
  CHECK(lowest == r.c_star);
}

TEST_CASE("refinement study") {
  const OneDimResult& a = search16();
  const OneDimResult b = optimal_period_search(make_params(1, 3, 0.5, 0.2, 1.0, 32));
  CHECK(std::abs(b.c_star - a.c_star) / std::abs(b.c_star) < 0.01);
  CHECK(std::abs(b.h_star - a.h_star) / b.h_star < 0.02);
}

TEST_CASE("no lower value on a fine sweep around h*") {
  const OneDimResult& r = search16();
  const OneDimSolver s(kRegime, 6.0);
  const double dx = kRegime.dx();
  for (double h = r.h_star - 1.0; h <= r.h_star + 1.0 + 1e-9; h += dx) {
    const double e = s.solve(std::round(h / dx) * dx).profile.energy_density;
    CHECK(e >= r.c_star - 1e-6 * std::abs(r.c_star));
  }
}

TEST_CASE("bracket edge is reported with the trace") {
  try {
    optimal_period_search(make_params(1, 3, 0.05, 0.05, 1.0, 16));
    FAIL("expected a bracket error");
  } catch (const BracketError& e) {
    CHECK(!e.trace().empty());
    CHECK(std::string(e.what()).find("bracket edge") != std::string::npos);
  }
}

TEST_CASE("extension to two dimensions keeps the energy") {
  const Params p2 = make_params(2, 4, 0.2, 0.1, 1.0, 16);
  const OneDimResult r = optimal_period_search(p2);
  const ScalarField u = extend_profile(r.profile, p2, 1, 1);
  CHECK(u.params.L == doctest::Approx(2 * r.h_star));
  const KernelTable t = build_kernel_table(u.params);
  CHECK(total_energy(u, t).total == doctest::Approx(r.c_star).epsilon(1e-6));
  CHECK(total_energy(u, t).total < total_energy(make_constant_field(u.params, 0.5), t).total);
}
