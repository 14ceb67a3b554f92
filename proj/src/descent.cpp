#include "stripeforge/descent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace sf {

double projected_gradient_norm(const std::vector<double>& x, const std::vector<double>& g, double scale) {
  double m = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double pg = g[i];
    if (x[i] <= 0 && pg > 0) pg = 0;
    if (x[i] >= 1 && pg < 0) pg = 0;
    m = std::max(m, std::abs(pg));
  }
  return m * scale;
}

namespace {

bool blocked(double x, double g) { return (x <= 0 && g > 0) || (x >= 1 && g < 0); }

}  // namespace

DescentResult projected_descent(const Objective& f, std::vector<double> x0, const DescentOptions& opt) {
  if (opt.max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
  const std::size_t n = x0.size();
  const bool pre = static_cast<bool>(opt.precondition);
  DescentResult r;
  for (auto& v : x0) v = std::clamp(v, 0.0, 1.0);
  std::vector<double> x = std::move(x0), g(n), xn(n), gn(n), dir(n);
  double fx = f(x.data(), g.data());
  if (!std::isfinite(fx)) throw std::runtime_error("non-finite energy at iteration 0");
  r.trace.push_back(fx);

  // search direction on the free cells: g, or P^-1 g
  auto direction = [&](bool use_pre) {
    for (std::size_t i = 0; i < n; ++i) dir[i] = blocked(x[i], g[i]) ? 0.0 : g[i];
    if (use_pre) {
      opt.precondition(dir.data());
      for (std::size_t i = 0; i < n; ++i)
        if (blocked(x[i], g[i])) dir[i] = 0;
    }
  };

  // steps act on the scaled gradient so that step sizes are O(1)-ish
  const double sc = opt.grad_scale;
  direction(pre);
  double dmax = 0;
  for (double v : dir) dmax = std::max(dmax, std::abs(v) * sc);
  double step = opt.step0 > 0 ? opt.step0 : (dmax > 0 ? 0.05 / dmax : 1.0);
  const double fixed_step = step;
  int stall = 0;

  for (int it = 1; it <= opt.max_iters; ++it) {
    r.pg_norm = projected_gradient_norm(x, g, sc);
    if (r.pg_norm <= opt.grad_tol) {
      r.converged = true;
      r.stop_reason = "grad_tol";
      break;
    }
    double fn = 0;
    bool accepted = false;
    bool used_pre = false;
    double t = opt.rule == StepRule::Fixed ? fixed_step : step;
    for (int attempt = pre ? 0 : 1; attempt < 2 && !accepted; ++attempt) {
      used_pre = attempt == 0;
      direction(used_pre);
      if (attempt == 1 && pre) {
        // plain gradient fallback, started from a step matched to its size
        double m = 0;
        for (double v : dir) m = std::max(m, std::abs(v) * sc);
        t = m > 0 ? 0.05 / m : 1.0;
      }
      for (int bt = 0; bt < 60; ++bt) {
        double decrease = 0;
        for (std::size_t i = 0; i < n; ++i) {
          xn[i] = std::clamp(x[i] - t * sc * dir[i], 0.0, 1.0);
          decrease += g[i] * (xn[i] - x[i]);
        }
        fn = f(xn.data(), gn.data());
        if (!std::isfinite(fn)) throw std::runtime_error(fmt::format("non-finite energy at iteration {}", it));
        if (fn <= fx + 1e-4 * decrease && fn <= fx) {
          accepted = true;
          break;
        }
        t *= 0.5;
      }
    }
    r.iters = it;
    if (!accepted) {
      r.stop_reason = "line search failed";
      r.converged = r.pg_norm <= 10 * opt.grad_tol;
      break;
    }
    // Barzilai-Borwein (long) step from the accepted pair, safeguarded; in
    // the P metric when preconditioned
    double ss = 0, sy = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double s = xn[i] - x[i], y = (gn[i] - g[i]) * sc;
      ss += s * s;
      sy += s * y;
    }
    if (pre) {
      for (std::size_t i = 0; i < n; ++i) dir[i] = xn[i] - x[i];
      ss = opt.metric(dir.data());
    }
    if (opt.rule == StepRule::BarzilaiBorwein)
      step = sy > 0 ? std::clamp(ss / sy, 1e-12, 1e12) : std::min(2 * t, 1e12);
    else if (opt.rule == StepRule::Backtracking)
      step = std::min(2 * t, 1e12);
    if (pre && !used_pre) step = std::min(step, fixed_step);
    const double rel = (fx - fn) / std::max(1.0, std::abs(fx));
    x.swap(xn);
    g.swap(gn);
    fx = fn;
    r.trace.push_back(fx);
    stall = rel <= opt.energy_tol ? stall + 1 : 0;
    if (stall >= opt.stall_window) {
      r.converged = true;
      r.stop_reason = "energy_tol";
      r.pg_norm = projected_gradient_norm(x, g, sc);
      break;
    }
  }
  if (r.stop_reason.empty()) {
    r.stop_reason = "max_iters";
    r.pg_norm = projected_gradient_norm(x, g, sc);
  }
  r.x = std::move(x);
  return r;
}

}  // namespace sf
