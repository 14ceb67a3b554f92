#include "stripeforge/onedim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <fmt/format.h>

#include "stripeforge/energy.hpp"
#include "stripeforge/kernel.hpp"

namespace sf {

namespace {

Params line_params(const Params& prm, int N) {
  Params q = prm;
  q.d = 1;
  q.L = N / prm.n_per_unit;
  return q;
}

}  // namespace

std::vector<double> reflect_extend(const std::vector<double>& g) {
  const std::size_t m = g.size();
  std::vector<double> u(2 * m);
  for (std::size_t j = 0; j < m; ++j) {
    u[j] = g[j];
    u[2 * m - 1 - j] = 1.0 - g[j];
  }
  return u;
}

OneDimSolver::OneDimSolver(const Params& prm, double h_max, OneDimOptions opt)
    : prm_(prm), opt_(opt), c_tau_(kernel_moments(prm).c_tau) {
  const int nmax = static_cast<int>(std::ceil(2 * h_max * prm.n_per_unit));
  const long box = default_box(1, nmax, prm.dx(), prm.r_cut);
  hat_ = std::make_shared<HatWeights>(marginal_shape(prm), prm.dx(), box);
}

int OneDimSolver::cells_for(double h) const {
  const double m = h * prm_.n_per_unit;
  if (!(h > 0) || std::abs(m - std::round(m)) > 1e-9 * std::max(1.0, m) || std::round(m) < 1)
    throw InputError("h", fmt::format("half-period {} is not a whole number of cells (dx = {})", h, prm_.dx()));
  return static_cast<int>(std::lround(m));
}

double OneDimSolver::energy(double h, const std::vector<double>& g) const {
  const int m = cells_for(h);
  if (static_cast<int>(g.size()) != m) throw InputError("profile", "profile length does not match h");
  const int N = 2 * m;
  const Params q = line_params(prm_, N);
  const LatticeKernel lat = build_lattice(hat_, 1, N, std::max<long>(N, hat_->kmax()));
  Functional fn(q, lat, c_tau_);
  const auto u = reflect_extend(g);
  return fn.evaluate(u.data(), nullptr);
}

ProfileRun OneDimSolver::solve(double h, ProfileInit init) const {
  const int m = cells_for(h);
  std::vector<double> g(m);
  for (int j = 0; j < m; ++j) {
    const double t = (j + 0.5) * prm_.dx();
    if (init == ProfileInit::Step) {
      g[j] = 1.0;
    } else {
      // two interfaces of width ~alpha at 0 and h
      const double s = std::min(t, h - t) / prm_.alpha;
      g[j] = 1.0 / (1.0 + std::exp(-s));
    }
  }
  return solve_from(h, std::move(g));
}

ProfileRun OneDimSolver::solve_from(double h, std::vector<double> g0) const {
  const int m = cells_for(h);
  if (static_cast<int>(g0.size()) != m) throw InputError("profile", "initial profile length does not match h");
  const int N = 2 * m;
  const Params q = line_params(prm_, N);
  const LatticeKernel lat = build_lattice(hat_, 1, N, std::max<long>(N, hat_->kmax()));
  Functional fn(q, lat, c_tau_);
  std::vector<double> u(N), gu(N);
  Objective obj = [&](const double* g, double* grad) {
    for (int j = 0; j < m; ++j) {
      u[j] = g[j];
      u[N - 1 - j] = 1.0 - g[j];
    }
    const double e = fn.evaluate(u.data(), gu.data());
    for (int j = 0; j < m; ++j) grad[j] = gu[j] - gu[N - 1 - j];
    return e;
  };
  DescentOptions dopt;
  dopt.max_iters = opt_.max_iters;
  dopt.grad_tol = opt_.grad_tol;
  dopt.energy_tol = opt_.energy_tol;
  dopt.grad_scale = N;
  // P = I + alpha^2 (-Delta_h) on the full line commutes with the reflection,
  // so it maps antisymmetric extensions of half-line vectors to themselves
  ScreenedLaplacian P(q, prm_.alpha * prm_.alpha);
  std::vector<double> ext(N);
  auto extend = [&](const double* v) {
    for (int j = 0; j < m; ++j) {
      ext[j] = v[j];
      ext[N - 1 - j] = -v[j];
    }
  };
  if (opt_.precondition) {
    dopt.precondition = [&](double* v) {
      extend(v);
      P.solve(ext.data());
      std::copy(ext.begin(), ext.begin() + m, v);
    };
    dopt.metric = [&](const double* v) {
      extend(v);
      return 0.5 * P.metric(ext.data());
    };
  }
  DescentResult dr = projected_descent(obj, std::move(g0), dopt);

  ProfileRun run;
  run.converged = dr.converged;
  run.iters = dr.iters;
  run.trace = dr.trace;
  run.profile.h = h;
  run.profile.samples = dr.x;
  run.profile.energy_density = dr.trace.back();
  const auto full = reflect_extend(dr.x);
  double res = 0;
  for (int j = 0; j < N; ++j) res = std::max(res, std::abs(full[j] + full[N - 1 - j] - 1.0));
  run.profile.symmetry_residual = res;
  return run;
}

Profile1D optimal_profile_for_period(const Params& prm, double h, const OneDimOptions& opt) {
  return OneDimSolver(prm, h, opt).solve(h).profile;
}

OneDimResult optimal_period_search(const Params& prm, double h_min, double h_max, const OneDimOptions& opt) {
  OneDimSolver solver(prm, h_max, opt);
  return optimal_period_search(solver, h_min, h_max);
}

OneDimResult optimal_period_search(const OneDimSolver& solver, double h_min, double h_max) {
  if (!(h_min > 0 && h_min < h_max)) throw InputError("h_min", "need 0 < h_min < h_max");
  const double n = solver.params().n_per_unit;
  const int m_lo = std::max(1, static_cast<int>(std::ceil(h_min * n - 1e-9)));
  const int m_hi = static_cast<int>(std::floor(h_max * n + 1e-9));
  if (m_hi - m_lo < 2) throw InputError("h_max", "bracket holds fewer than three grid half-periods");

  std::map<int, ProfileRun> runs;
  bool all_conv = true;
  auto eval = [&](int m) -> double {
    auto it = runs.find(m);
    if (it == runs.end()) {
      it = runs.emplace(m, solver.solve(m / n)).first;
      all_conv = all_conv && it->second.converged;
    }
    return it->second.profile.energy_density;
  };
  auto trace = [&] {
    std::vector<std::pair<double, double>> t;
    for (const auto& [m, r] : runs) t.emplace_back(m / n, r.profile.energy_density);
    return t;
  };

  const int K = std::max(3, solver.options().coarse_points);
  std::vector<int> ms;
  for (int k = 0; k < K; ++k) {
    const double m = m_lo * std::pow(double(m_hi) / m_lo, double(k) / (K - 1));
    const int mi = std::clamp(static_cast<int>(std::lround(m)), m_lo, m_hi);
    if (ms.empty() || mi != ms.back()) ms.push_back(mi);
  }
  std::size_t best = 0;
  for (std::size_t k = 0; k < ms.size(); ++k)
    if (eval(ms[k]) < eval(ms[best])) best = k;
  if (best == 0 || best + 1 == ms.size())
    throw BracketError(fmt::format("minimum over h in [{}, {}] sits at the bracket edge h = {}; enlarge the bracket",
                                   h_min, h_max, ms[best] / n),
                       trace());

  // golden-section over integer cell counts inside the winning bracket
  int a = ms[best - 1], b = ms[best + 1];
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  while (b - a > 3) {
    int c = b - static_cast<int>(std::lround(phi * (b - a)));
    int d = a + static_cast<int>(std::lround(phi * (b - a)));
    if (c >= d) d = c + 1;
    if (eval(c) <= eval(d))
      b = d;
    else
      a = c;
  }
  int mstar = a;
  for (int m = a; m <= b; ++m)
    if (eval(m) < eval(mstar)) mstar = m;

  OneDimResult r;
  r.h_star = mstar / n;
  r.c_star = runs.at(mstar).profile.energy_density;
  r.profile = runs.at(mstar).profile;
  r.search_trace = trace();
  r.grid_level = n;
  r.converged = all_conv;
  return r;
}

ScalarField extend_profile(const Profile1D& prof, const Params& prm, int direction, int periods) {
  if (direction < 0 || direction >= prm.d) throw InputError("direction", "axis out of range");
  const auto period = reflect_extend(prof.samples);
  const int P = static_cast<int>(period.size());
  const Params q = prm.with_L(periods * 2 * prof.h);
  if (q.N() != P * periods) throw InputError("h", "profile resolution does not match n_per_unit");
  ScalarField f(q);
  Grid g{q.d, q.N()};
  for (std::size_t c = 0; c < f.size(); ++c) f[c] = period[g.coords(c)[direction] % P];
  return f;
}

void write_search_trace(const std::vector<std::pair<double, double>>& trace, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw InputError("path", fmt::format("cannot write {}", path.string()));
  os << "h_length,energy_density\n";
  for (const auto& [h, e] : trace) os << fmt::format("{:.17g},{:.17g}\n", h, e);
}

}  // namespace sf
