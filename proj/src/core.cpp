#include "stripeforge/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

namespace sf {

int Params::N() const { return static_cast<int>(std::lround(n_per_unit * L)); }

double Params::a() const { return std::pow(tau, 1.0 / beta); }

std::size_t Params::cells() const {
  std::size_t n = 1;
  for (int i = 0; i < d; ++i) n *= static_cast<std::size_t>(N());
  return n;
}

Params Params::with_L(double newL) const {
  Params q = *this;
  q.L = newL;
  validate(q);
  return q;
}

double l1_tail_mass(int d, double p, double a, double r) {
  // surface measure of the l1 sphere of radius s is 2^d s^(d-1)/(d-1)!;
  // expand s^(d-1) = ((s+a) - a)^(d-1) and integrate term by term.
  double fact = 1;
  for (int j = 2; j < d; ++j) fact *= j;
  const double c = std::ldexp(1.0, d) / fact;
  double acc = 0, binom = 1;
  for (int j = 0; j <= d - 1; ++j) {
    if (j > 0) binom = binom * (d - j) / j;
    const double sign = ((d - 1 - j) % 2) ? -1.0 : 1.0;
    acc += binom * sign * std::pow(a, d - 1 - j) * std::pow(r + a, j + 1 - p) / (p - j - 1);
  }
  return c * acc;
}

void validate(const Params& prm) {
  if (prm.d < 1) throw InputError("d", fmt::format("d must be >= 1 (got {})", prm.d));
  if (!(prm.p >= prm.d + 2))
    throw InputError("p", fmt::format("p must satisfy p >= d+2 (got p={}, d={})", prm.p, prm.d));
  if (!(prm.tau > 0)) throw InputError("tau", "tau must be > 0");
  if (!(prm.eps > 0)) throw InputError("eps", "eps must be > 0");
  if (!(prm.L > 0)) throw InputError("L", "L must be > 0");
  if (!(prm.n_per_unit > 0)) throw InputError("n_per_unit", "n_per_unit must be > 0");
  const double nl = prm.n_per_unit * prm.L;
  if (std::abs(nl - std::round(nl)) > 1e-9 * std::max(1.0, nl) || std::round(nl) < 1)
    throw InputError("L", fmt::format("n_per_unit*L = {} is not a positive integer", nl));
}

Params make_params(int d, double p, double tau, double eps, double L, double n_per_unit) {
  Params prm;
  prm.d = d;
  prm.p = p;
  prm.tau = tau;
  prm.eps = eps;
  prm.L = L;
  prm.n_per_unit = n_per_unit;
  validate(prm);
  prm.beta = p - d - 1;
  prm.alpha = eps * std::pow(tau, 1.0 / prm.beta);
  prm.theta_g = 1e-8 * n_per_unit;
  // smallest r with tail < 1e-8 |C_tau|; C_tau closed form for the marginal
  const double a = prm.a();
  const double q = p - d + 1;
  const double kappa = std::ldexp(1.0, d - 1) * std::exp(std::lgamma(q) - std::lgamma(p));
  const double c_tau = 2 * kappa * std::pow(a, 2 - q) / ((q - 1) * (q - 2));
  const double target = 1e-8 * std::abs(c_tau);
  double lo = 0, hi = 1;
  while (l1_tail_mass(d, p, a, hi) >= target) hi *= 2;
  for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (l1_tail_mass(d, p, a, mid) < target ? hi : lo) = mid;
  }
  prm.r_cut = hi;
  return prm;
}

std::size_t Grid::size() const {
  std::size_t n = 1;
  for (int i = 0; i < d; ++i) n *= static_cast<std::size_t>(N);
  return n;
}

std::size_t Grid::stride(int axis) const {
  std::size_t s = 1;
  for (int i = d - 1; i > axis; --i) s *= static_cast<std::size_t>(N);
  return s;
}

std::size_t Grid::index(const std::vector<int>& c) const {
  std::size_t idx = 0;
  for (int i = 0; i < d; ++i) idx = idx * N + static_cast<std::size_t>(((c[i] % N) + N) % N);
  return idx;
}

std::vector<int> Grid::coords(std::size_t idx) const {
  std::vector<int> c(d);
  for (int i = d - 1; i >= 0; --i) {
    c[i] = static_cast<int>(idx % N);
    idx /= N;
  }
  return c;
}

std::size_t Grid::shift(std::size_t idx, int axis, int by) const {
  const std::size_t s = stride(axis);
  const int ci = static_cast<int>((idx / s) % N);
  const int nc = ((ci + by) % N + N) % N;
  return idx + (static_cast<std::ptrdiff_t>(nc) - ci) * static_cast<std::ptrdiff_t>(s);
}

ScalarField::ScalarField(const Params& prm, double fill) : params(prm), values(prm.cells(), fill) {}

ScalarField make_constant_field(const Params& prm, double v) {
  if (!(v >= 0 && v <= 1)) throw InputError("value", "constant must lie in [0,1]");
  return ScalarField(prm, v);
}

ScalarField make_stripe_field(const Params& prm, int direction, double half_period, double phase) {
  validate(prm);
  if (direction < 0 || direction >= prm.d)
    throw InputError("direction", fmt::format("axis {} outside 0..{}", direction, prm.d - 1));
  const int N = prm.N();
  const double hc = half_period * prm.n_per_unit;
  const double pc = phase * prm.n_per_unit;
  const long m = std::lround(hc);
  if (m < 1 || std::abs(hc - m) > 1e-9 * std::max(1.0, hc) || N % (2 * m) != 0)
    throw InputError("half_period",
                     fmt::format("half_period {} is not commensurate with the grid: need "
                                 "half_period*n_per_unit integer and 2*that dividing N={}",
                                 half_period, N));
  const long ph = std::lround(pc);
  if (std::abs(pc - ph) > 1e-9 * std::max(1.0, std::abs(pc)))
    throw InputError("phase", "phase must be a multiple of the grid spacing");
  ScalarField f(prm);
  Grid g{prm.d, N};
  for (std::size_t idx = 0; idx < f.size(); ++idx) {
    const long c = g.coords(idx)[direction];
    const long q = (((c - ph) % (2 * m)) + 2 * m) % (2 * m);
    f[idx] = q < m ? 1.0 : 0.0;
  }
  return f;
}

ScalarField make_random_field(const Params& prm, std::uint64_t seed, double smoothness) {
  validate(prm);
  if (!(smoothness >= prm.dx() * (1 - 1e-12)))
    throw InputError("smoothness", "smoothness must be at least the grid spacing");
  const int N = prm.N();
  Grid g{prm.d, N};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> v(g.size());
  for (auto& x : v) x = gauss(rng);

  // separable periodic Gaussian smoothing with std `smoothness`
  const double sc = smoothness * prm.n_per_unit;
  const int R = std::min(N / 2, static_cast<int>(std::ceil(4 * sc)));
  std::vector<double> ker(2 * R + 1);
  for (int k = -R; k <= R; ++k) ker[k + R] = std::exp(-0.5 * k * k / (sc * sc));
  const double ks = std::accumulate(ker.begin(), ker.end(), 0.0);
  for (auto& k : ker) k /= ks;
  std::vector<double> tmp(v.size());
  for (int axis = 0; axis < prm.d; ++axis) {
    for (std::size_t idx = 0; idx < v.size(); ++idx) {
      double s = 0;
      for (int k = -R; k <= R; ++k) s += ker[k + R] * v[g.shift(idx, axis, k)];
      tmp[idx] = s;
    }
    v.swap(tmp);
  }
  double mean = 0, var = 0;
  for (double x : v) mean += x;
  mean /= v.size();
  for (double x : v) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / v.size());
  ScalarField f(prm);
  for (std::size_t i = 0; i < v.size(); ++i)
    f[i] = std::clamp(0.5 + 0.35 * (v[i] - mean) / (sd > 0 ? sd : 1.0), 0.0, 1.0);
  return f;
}

ScalarField shifted(const ScalarField& f, int axis, int by) {
  ScalarField out(f.params);
  Grid g{f.d(), f.N()};
  for (std::size_t i = 0; i < f.size(); ++i) out[g.shift(i, axis, by)] = f[i];
  return out;
}

ScalarField transposed(const ScalarField& f, int axis_a, int axis_b) {
  ScalarField out(f.params);
  Grid g{f.d(), f.N()};
  for (std::size_t i = 0; i < f.size(); ++i) {
    auto c = g.coords(i);
    std::swap(c[axis_a], c[axis_b]);
    out[g.index(c)] = f[i];
  }
  return out;
}

ScalarField swapped(const ScalarField& f) {
  ScalarField out(f.params);
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = 1.0 - f[i];
  return out;
}

double pairwise_sum(const double* v, std::size_t n) {
  if (n <= 8) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

double stable_sum(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return pairwise_sum(v.data(), v.size());
}

}  // namespace sf
