#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "../vendor/doctest.h"

#include <algorithm>
#include <cmath>

#include "stripeforge/descent.hpp"

using namespace sf;

namespace {

// separable quadratic whose unconstrained minimizer leaves the box
struct Quadratic {
  std::vector<double> c, t;
  double operator()(const double* x, double* g) const {
    double f = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      const double r = x[i] - t[i];
      f += 0.5 * c[i] * r * r;
      if (g) g[i] = c[i] * r;
    }
    return f;
  }
};

Quadratic make_problem(int n) {
  Quadratic q;
  for (int i = 0; i < n; ++i) {
    q.c.push_back(1.0 + 9.0 * i / n);
    q.t.push_back(-0.5 + 2.0 * i / n);
  }
  return q;
}

}  // namespace

TEST_CASE("projected descent reaches the clipped minimizer under every step rule") {
  const Quadratic q = make_problem(40);
  for (StepRule rule : {StepRule::Fixed, StepRule::Backtracking, StepRule::BarzilaiBorwein}) {
    DescentOptions opt;
    opt.rule = rule;
    opt.max_iters = 20000;
    opt.grad_tol = 1e-10;
    opt.step0 = rule == StepRule::Fixed ? 0.09 : 0;
    const DescentResult r = projected_descent(q, std::vector<double>(40, 0.5), opt);
    CHECK(r.converged);
    for (std::size_t i = 0; i < 40; ++i) CHECK(std::abs(r.x[i] - std::clamp(q.t[i], 0.0, 1.0)) < 1e-7);
    for (std::size_t k = 1; k < r.trace.size(); ++k) CHECK(r.trace[k] <= r.trace[k - 1]);
  }
}

TEST_CASE("iterates stay in the box") {
  const Quadratic q = make_problem(10);
  DescentOptions opt;
  opt.max_iters = 3;
  const DescentResult r = projected_descent(q, std::vector<double>(10, 0.5), opt);
  for (double v : r.x) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK(r.stop_reason == "max_iters");
  CHECK(r.iters == 3);
}

TEST_CASE("preconditioned steps") {
  const Quadratic q = make_problem(40);
  DescentOptions opt;
  opt.grad_tol = 1e-10;
  opt.max_iters = 5000;
  // exact diagonal metric
  opt.precondition = [&](double* v) {
    for (std::size_t i = 0; i < 40; ++i) v[i] /= q.c[i];
  };
  opt.metric = [&](const double* s) {
    double m = 0;
    for (std::size_t i = 0; i < 40; ++i) m += q.c[i] * s[i] * s[i];
    return m;
  };
  const DescentResult r = projected_descent(q, std::vector<double>(40, 0.5), opt);
  CHECK(r.converged);
  for (std::size_t i = 0; i < 40; ++i) CHECK(std::abs(r.x[i] - std::clamp(q.t[i], 0.0, 1.0)) < 1e-7);
  for (std::size_t k = 1; k < r.trace.size(); ++k) CHECK(r.trace[k] <= r.trace[k - 1]);
}

TEST_CASE("projected gradient norm ignores blocked directions") {
  CHECK(projected_gradient_norm({0.0, 1.0, 0.5}, {1.0, -1.0, 0.0}, 1.0) == 0.0);
  CHECK(projected_gradient_norm({0.0, 1.0, 0.5}, {-2.0, 0.0, 0.0}, 1.0) > 0.0);
  CHECK(projected_gradient_norm({0.5}, {0.3}, 2.0) == doctest::Approx(0.6));
}

TEST_CASE("energy stall stops the run") {
  auto flat = [](const double*, double* g) {
    if (g) g[0] = 1e-30;
    return 1.0;
  };
  DescentOptions opt;
  opt.grad_tol = 0;
  const DescentResult r = projected_descent(flat, {0.5}, opt);
  CHECK(r.stop_reason != "max_iters");
  CHECK(r.iters < opt.max_iters);
}
