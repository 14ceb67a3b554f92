#pragma once
// Independent brute-force paths used as test oracles.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "stripeforge/decompose.hpp"
#include "stripeforge/energy.hpp"

namespace oracle {

// Integral of a piecewise-constant function over [lo, hi], split at `br`.
inline double piecewise(const std::function<double(double)>& f, std::vector<double> br, double lo, double hi) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
  br.push_back(lo);
  br.push_back(hi);
  std::sort(br.begin(), br.end());
  double acc = 0;
  for (std::size_t k = 0; k + 1 < br.size(); ++k) {
    const double x0 = std::max(lo, br[k]), x1 = std::min(hi, br[k + 1]);
    if (x1 > x0) acc += GK::integrate(f, x0, x1, 0, 0);
  }
  return acc;
}

// G(rho)^-1 times the measure of {(a, b) : a in [a0, a1) mod L, (s, rho) in Omega(a, b)},
// by nested quadrature of the literal membership test.
inline double omega_weight(double s, double rho, double a0, double a1, double L) {
  const double lo = std::min(s, s + rho), hi = std::max(s, s + rho);
  auto inside = [&](double a, double b) {
    for (long m = -3; m <= 3; ++m) {
      const double am = a + m * L;
      if (lo <= std::min(am, b) && std::max(am, b) <= hi) return true;
    }
    return false;
  };
  std::vector<double> abr;
  for (long m = -3; m <= 3; ++m) {
    abr.push_back(lo + m * L);
    abr.push_back(hi + m * L);
  }
  auto outer = [&](double a) {
    return piecewise([&](double b) { return inside(a, b) ? 1.0 : 0.0; }, {lo, hi}, lo - 1.0, hi + 1.0);
  };
  const double G = std::abs(rho) * std::min(std::abs(rho), L);
  return piecewise(outer, abr, a0, a1) / G;
}

// R over cells [a, a+n) of one slice, with every reduced weight replaced by
// the literal Omega integral.  The far-image bracket is shared with the
// implementation (it carries no Omega weight).
inline double literal_r(const sf::Decomposer& D, int axis, const std::vector<int>& xp, long a, long n) {
  const sf::ScalarField& f = D.field();
  const int N = f.N();
  const double dx = f.params.dx(), L = N * dx;
  const sf::SlicePrefix sp = sf::slice_prefix(f, D.mm(), axis, xp);
  const auto& nm = D.tables().near_marginal;
  double acc = 0;
  for (long s = 0; s < N; ++s)
    for (long k = -(N - 1); k <= N - 1; ++k) {
      if (k == 0) continue;
      const long t = s + k;
      const double du = sp.values[s] - sp.values[((t % N) + N) % N];
      const double M = k > 0 ? sp.interval(s, t) : sp.interval(t, s);
      const double w = omega_weight(s * dx, k * dx, a * dx, (a + n) * dx, L);
      acc += w * (M - du * du) * nm[std::labs(k) + N - 1] * dx;
    }
  // recover the far part as R minus its near part on the full period
  const double full = D.r_term(axis, xp, 0, N);
  double near_full = -sp.interval(0, N);
  for (long s = 0; s < N; ++s)
    for (long k = 1; k < N; ++k) {
      const double dp = sp.values[s] - sp.values[(s + k) % N];
      const double dm = sp.values[s] - sp.values[(s - k + N) % N];
      near_full += (sp.interval(s, s + k) - dp * dp + sp.interval(s - k, s) - dm * dm) * nm[k + N - 1] * dx;
    }
  return -sp.interval(a, a + n) + acc + double(n) / N * (full - near_full);
}

// V over cells [a, a+n) of one slice of a 2D field, literal Omega weights.
inline double literal_v(const sf::Decomposer& D, int axis, const std::vector<int>& xp, long a, long n) {
  const sf::ScalarField& f = D.field();
  const int N = f.N(), d = f.d();
  const double dx = f.params.dx(), L = N * dx;
  const auto& t = D.tables();
  std::vector<int> c = xp;
  c[axis] = 0;
  sf::Grid g{d, N};
  const std::size_t x0 = g.index(c);
  const std::size_t P = t.near[0].size();
  double acc = 0, far = 0;
  for (long s = 0; s < N; ++s) {
    const std::size_t x = g.shift(x0, axis, static_cast<int>(s));
    std::vector<double> w(N, 0.0);
    for (long k = 1; k < N; ++k) w[k] = omega_weight(s * dx, k * dx, a * dx, (a + n) * dx, L);
    for (std::size_t p = 0; p < P; ++p) {
      const std::vector<int> jp = {static_cast<int>(p)};
      for (long k = 1; k < N; ++k) acc += w[k] * t.near[k + N - 1][p] * D.f_u(x, axis, k, jp);
      for (long j = 0; j < N; ++j) far += t.far_pos[j][p] * D.f_u(x, axis, j, jp);
    }
  }
  return dx / (2.0 * d) * (acc + double(n) / N * far);
}

// Exhaustive minimum of sum_k |m_k - chi_k| over 0/1 sequences whose interior
// runs are at least `gap` long; the sum is accumulated left to right.
inline double exhaustive_fit(const std::vector<double>& m, int gap) {
  const int n = static_cast<int>(m.size());
  double best = std::numeric_limits<double>::infinity();
  for (unsigned long mask = 0; mask < (1ul << n); ++mask) {
    std::vector<int> b(n);
    for (int k = 0; k < n; ++k) b[k] = (mask >> k) & 1;
    std::vector<int> starts = {0};
    for (int k = 1; k < n; ++k)
      if (b[k] != b[k - 1]) starts.push_back(k);
    starts.push_back(n);
    bool ok = true;
    for (std::size_t r = 1; r + 2 < starts.size(); ++r)
      if (starts[r + 1] - starts[r] < gap) ok = false;
    if (!ok) continue;
    double c = 0;
    for (int k = 0; k < n; ++k) c += std::abs(m[k] - b[k]);
    best = std::min(best, c);
  }
  return best;
}

// Central finite differences of the energy (value only, no gradient code).
inline std::vector<double> fd_gradient(const sf::ScalarField& f, const sf::KernelTable& table, double h) {
  sf::Functional fn(f.params, table.lattice, table.c_tau);
  std::vector<double> g(f.size()), w = f.values;
  for (std::size_t i = 0; i < f.size(); ++i) {
    w[i] = f[i] + h;
    const double ep = fn.evaluate(w.data(), nullptr);
    w[i] = f[i] - h;
    const double em = fn.evaluate(w.data(), nullptr);
    w[i] = f[i];
    g[i] = (ep - em) / (2 * h);
  }
  return g;
}

}  // namespace oracle
