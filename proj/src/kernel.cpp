#include "stripeforge/kernel.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/special_functions/fpclassify.hpp>
using boost::math::isnan;
#include <boost/math/interpolators/pchip.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <fmt/format.h>

namespace sf {

double marginal_kappa(int d, double p) {
  const double q = p - d + 1;
  return std::ldexp(1.0, d - 1) * std::exp(std::lgamma(q) - std::lgamma(p));
}

KernelShape full_shape(const Params& prm) { return {prm.d, 1.0, prm.p, prm.a()}; }

KernelShape marginal_shape(const Params& prm) {
  return {1, marginal_kappa(prm.d, prm.p), prm.p - prm.d + 1, prm.a()};
}

double kernel_value(const std::vector<double>& zeta, const Params& prm) {
  double n1 = 0;
  for (double z : zeta) n1 += std::abs(z);
  return std::pow(n1 + prm.a(), -prm.p);
}

double kernel_marginal(double t, const Params& prm) {
  // c_{d-1} int_0^inf s^(d-2) (|t|+s+a)^(-p) ds, antidifferentiated d-1 times
  return marginal_shape(prm)(std::abs(t));
}

Moments kernel_moments(const Params& prm) {
  Moments m;
  m.c_tau = marginal_shape(prm).first_moment();
  KernelShape unit = marginal_shape(prm);
  unit.a = 1.0;
  m.j_c = unit.first_moment();
  return m;
}

namespace {

double integrate_half_line(const std::function<double(double)>& f, double tol, const char* what) {
  boost::math::quadrature::exp_sinh<double> q;
  double err = 0, l1 = 0;
  const double v = q.integrate(f, tol, &err, &l1);
  if (!(err <= tol * std::max(1.0, std::abs(v))))
    throw QuadratureError(err, fmt::format("{}: quadrature did not reach {} (achieved {})", what, tol, err));
  return v;
}

double marginal_quad(double t, int d, double p, double a, double tol) {
  if (d == 1) return std::pow(std::abs(t) + a, -p);
  double fact = 1;
  for (int j = 2; j <= d - 2; ++j) fact *= j;
  const double c = std::ldexp(1.0, d - 1) / fact;
  return c * integrate_half_line(
                 [&](double s) { return std::pow(s, d - 2) * std::pow(std::abs(t) + s + a, -p); }, tol,
                 "marginal");
}

double moment_quad(int d, double p, double a, double tol) {
  return 2 * integrate_half_line([&](double t) { return t * marginal_quad(t, d, p, a, tol * 1e-2); }, tol,
                                 "first moment");
}

}  // namespace

double marginal_quadrature(double t, const Params& prm) {
  return marginal_quad(t, prm.d, prm.p, prm.a(), prm.quad_tol);
}

Moments kernel_moments_quadrature(const Params& prm) {
  return {moment_quad(prm.d, prm.p, prm.a(), prm.quad_tol), moment_quad(prm.d, prm.p, 1.0, prm.quad_tol)};
}

double tail_bound(double r, const Params& prm) { return l1_tail_mass(prm.d, prm.p, prm.a(), r); }

bool complete_monotonicity_spot_check(const Params& prm, int samples, int max_order) {
  const KernelShape s = marginal_shape(prm);
  for (int i = 1; i <= samples; ++i) {
    const double t = prm.r_cut * std::pow(1e-6, 1.0 - double(i) / (samples + 1));
    const double h = 0.05 * (t + s.a);
    for (int n = 1; n <= max_order; ++n) {
      double diff = 0, c = 1;
      for (int j = 0; j <= n; ++j) {
        if (j > 0) c = c * (n - j + 1) / j;
        diff += (((n - j) % 2) ? -c : c) * s(t + j * h);
      }
      if (!(((n % 2) ? -diff : diff) > 0)) return false;
    }
  }
  return true;
}

double KernelTable::marginal(double t) const {
  t = std::abs(t);
  if (t >= radial_t.back()) return tail_coefficient * std::pow(t, -(params.p - params.d + 1));
  return std::exp(log_interp(t));
}

KernelTable build_kernel_table(const Params& prm, long box) {
  validate(prm);
  KernelTable t;
  t.params = prm;
  const Moments m = kernel_moments(prm);
  t.c_tau = m.c_tau;
  t.j_c = m.j_c;
  const KernelShape ms = marginal_shape(prm);
  t.tail_coefficient = ms.kappa;
  const int ns = 400;
  const double t0 = 1e-4 * prm.a();
  t.radial_t.push_back(0.0);
  for (int i = 0; i < ns; ++i)
    t.radial_t.push_back(t0 * std::pow(prm.r_cut / t0, double(i) / (ns - 1)));
  std::vector<double> lv;
  for (double x : t.radial_t) {
    t.radial_values.push_back(ms(x));
    lv.push_back(std::log(ms(x)));
  }
  using boost::math::interpolators::pchip;
  auto ip = std::make_shared<pchip<std::vector<double>>>(std::vector<double>(t.radial_t), std::move(lv));
  t.log_interp = [ip](double x) { return (*ip)(x); };
  auto hat = std::make_shared<HatWeights>(full_shape(prm), prm.dx(), box);
  t.lattice = build_lattice(hat, prm.d, prm.N(), box);
  return t;
}

KernelTable build_kernel_table(const Params& prm) {
  validate(prm);
  return build_kernel_table(prm, default_box(prm.d, prm.N(), prm.dx(), prm.r_cut));
}

}  // namespace sf
