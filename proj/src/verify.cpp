#include "stripeforge/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/format.h>
#include <tbb/parallel_for.h>

#include "stripeforge/core.hpp"
#include "stripeforge/decompose.hpp"
#include "stripeforge/energy.hpp"
#include "stripeforge/kernel.hpp"
#include "stripeforge/onedim.hpp"
#include "stripeforge/stripes.hpp"

namespace sf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Tally {
  CheckResult r;
  double tol = 0;

  Tally(std::string name, double tol_, bool monitor = false) : tol(tol_) {
    r.name = std::move(name);
    r.monitor = monitor;
    r.worst_margin = kInf;
  }
  void check(double margin) {
    ++r.instances;
    r.worst_margin = std::min(r.worst_margin, margin);
    if (!(margin >= -tol)) ++r.failures;
  }
  void fail() {
    ++r.instances;
    ++r.failures;
  }
  void skip() { ++r.skipped; }
};

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// periodic signed distance x - p folded into [-L/2, L/2)
double fold(double x, double L) { return x - L * std::floor(x / L + 0.5); }

// Alternating 0 -> 1 -> 0 transitions at sorted positions (even count) along
// `axis`, each a logistic profile of width w.
ScalarField logistic_train(const Params& prm, int axis, const std::vector<double>& pos, double w) {
  ScalarField f(prm, 0.0);
  Grid g{prm.d, prm.N()};
  const double dx = prm.dx();
  for (std::size_t c = 0; c < f.size(); ++c) {
    const double x = (g.coords(c)[axis] + 0.5) * dx;
    std::size_t j = 0;
    double best = kInf;
    for (std::size_t k = 0; k < pos.size(); ++k) {
      const double dd = std::abs(fold(x - pos[k], prm.L));
      if (dd < best) {
        best = dd;
        j = k;
      }
    }
    const double t = logistic(fold(x - pos[j], prm.L) / w);
    f[c] = j % 2 == 0 ? t : 1.0 - t;
  }
  return f;
}

std::vector<double> random_interfaces(std::mt19937_64& rng, double L, double min_gap, double max_extra) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<double> pos;
  double x = U(rng) * min_gap;
  while (x < L - min_gap) {
    pos.push_back(x);
    x += min_gap + U(rng) * max_extra;
  }
  if (pos.size() % 2) pos.pop_back();
  return pos;
}

// Band-limited field with seeded coefficients, sampled at cell centers; the
// same seed gives the same continuum function on every grid.
ScalarField smooth_analytic(const Params& prm, std::uint64_t seed) {
  std::mt19937_64 rng(seed * 7919 + 17);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const int d = prm.d;
  std::vector<std::vector<double>> amp(d, std::vector<double>(3)), ph(d, std::vector<double>(3));
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < 3; ++k) {
      amp[i][k] = 0.3 * U(rng) / (k + 1);
      ph[i][k] = std::numbers::pi * U(rng);
    }
  ScalarField f(prm);
  Grid g{d, prm.N()};
  for (std::size_t c = 0; c < f.size(); ++c) {
    const auto x = g.coords(c);
    double v = 0;
    for (int i = 0; i < d; ++i)
      for (int k = 0; k < 3; ++k)
        v += amp[i][k] * std::sin(2 * std::numbers::pi * (k + 1) * (x[i] + 0.5) * prm.dx() / prm.L + ph[i][k]);
    f[c] = std::clamp(0.5 + v, 0.0, 1.0);
  }
  return f;
}

// Prefix sums of a density over two periods so that any [a, a+n) is O(1).
struct Prefix {
  std::vector<double> c;
  long N;
  explicit Prefix(const std::vector<double>& v) : c(2 * v.size() + 1, 0.0), N(static_cast<long>(v.size())) {
    for (std::size_t k = 0; k < 2 * v.size(); ++k) c[k + 1] = c[k] + v[k % v.size()];
  }
  double operator()(long a, long n) const {
    const long a0 = ((a % N) + N) % N;
    return c[a0 + n] - c[a0];
  }
};

std::vector<std::vector<int>> slice_bases(int d, int N, int axis) {
  Grid g{d, N};
  std::vector<std::vector<int>> out;
  for (std::size_t c = 0; c < g.size(); ++c) {
    auto x = g.coords(c);
    if (x[axis] == 0) out.push_back(x);
  }
  return out;
}

double c_star_of(const Params& prm1d) {
  // inf over periods of the 1D energy density; the constant field gives 0
  OneDimOptions opt;
  opt.max_iters = 4000;
  opt.grad_tol = 1e-7;
  const double hmax = prm1d.L / 2;
  const double hmin = std::max(2 * prm1d.dx(), 0.05 * hmax);
  std::vector<std::pair<double, double>> trace;
  try {
    trace = optimal_period_search(prm1d, hmin, hmax, opt).search_trace;
  } catch (const BracketError& e) {
    trace = e.trace();
  }
  double c = 0;
  for (auto& [h, e] : trace) c = std::min(c, e);
  return c;
}

// ---------------------------------------------------------------------------

CheckResult check_omega_ab(const VerifyConfig& cfg) {
  Tally t("omega_ab", cfg.tolerance("omega_ab"));
  const int M = 200;
  for (int ib = 0; ib <= M; ++ib)
    for (int it = 1; it <= M - ib; ++it) {
      const double b = double(ib) / M, tt = double(it) / M, a = b + tt;
      const double ratio = (suite_omega(a, cfg.fault_injection) - suite_omega(b, cfg.fault_injection)) / (tt * tt);
      const double exact = 6 * b * (1 - b - tt) / tt + 3 - 2 * tt;
      const bool corner = ib == 0 && it == M;
      double m = std::min(ratio - (3 - 2 * tt), -std::abs(ratio - exact));
      // equality with 1 exactly at the corner a = 1, b = 0 and nowhere else
      if (corner) m = std::min(m, -std::abs(ratio - 1.0));
      else if (ratio - 1.0 <= 1e-12) m = std::min(m, -1.0);
      t.check(m);
    }
  return t.r;
}

CheckResult check_gom(const VerifyConfig& cfg) {
  Tally t("gom", cfg.tolerance("gom"));
  const double L = 1.0;
  for (auto seed : cfg.seeds) {
    std::mt19937_64 rng(seed * 104729 + 3);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int k = 0; k < 500; ++k) {
      const double s = U(rng) * L, rho = (U(rng) * 6 - 3) * L;
      if (rho == 0) continue;
      const double G = std::abs(rho) * std::min(std::abs(rho), L);
      t.check(-std::abs(omega_measure(s, rho, L) - G) / std::max(1.0, G));
    }
  }
  return t.r;
}

struct PairChecks {
  CheckResult pos1, pos2, partpos0;
};

PairChecks check_pairs(const VerifyConfig& cfg) {
  Tally t1("pos1", cfg.tolerance("pos1")), t2("pos2", cfg.tolerance("pos2")),
      t3("partpos0", cfg.tolerance("partpos0"));
  auto run_field = [&](const ScalarField& f, std::mt19937_64& rng, bool sample) {
    const int d = f.d(), N = f.N();
    const double dx = f.params.dx();
    const MMSplit mm = mm_split(f);
    std::vector<std::vector<SlicePrefix>> sl(d);
    for (int ax = 0; ax < d; ++ax)
      for (auto& b : slice_bases(d, N, ax)) sl[ax].push_back(slice_prefix(f, mm, ax, b));
    if (sample) {
      std::uniform_int_distribution<int> Ax(0, d - 1), S(0, N - 1), K(-2 * N, 2 * N);
      std::uniform_int_distribution<std::size_t> P(0, sl[0].size() - 1);
      for (int q = 0; q < cfg.pair_samples; ++q) {
        const SlicePrefix& sp = sl[Ax(rng)][P(rng)];
        const long s = S(rng);
        long k = K(rng);
        if (k == 0) k = 1;
        const long e = ((s + k) % N + N) % N;
        const double diff = sp.values[s] - sp.values[e];
        const double Mb = k > 0 ? sp.interval(s, s + k) : sp.interval(s + k, s);
        t1.check(Mb - diff * diff);
        if (std::abs(diff) <= 1 - cfg.delta_pos2) t2.check(Mb / (1 + 2 * cfg.delta_pos2) - diff * diff);
        else t2.skip();
      }
    }
    for (int ax = 0; ax < d; ++ax)
      for (const SlicePrefix& sp : sl[ax]) {
        const double total = sp.interval(0, N);
        for (long rho = 1; rho < N; ++rho) {
          double sum_m = 0, sum_w = 0;
          for (long s = 0; s < N; ++s) {
            sum_m += sp.interval(s, s + rho);
            sum_w += std::abs(suite_omega(sp.values[(s + rho) % N], cfg.fault_injection) -
                              suite_omega(sp.values[s], cfg.fault_injection));
          }
          const double lhs = rho * dx * total;
          const double eq = -std::abs(dx * sum_m - lhs) / std::max(1.0, lhs) * 1e3;
          t3.check(std::min(lhs - dx * sum_w, eq));
        }
      }
  };
  for (auto seed : cfg.seeds) {
    std::mt19937_64 rng(seed * 6151 + 11);
    for (int n : cfg.sizes_1d) {
      const Params prm = make_params(1, cfg.p_1d, cfg.tau, cfg.eps, 1.0, n);
      run_field(make_random_field(prm, seed, 2 * prm.dx()), rng, true);
    }
    for (int n : cfg.sizes_2d) {
      const Params prm = make_params(2, cfg.p_2d, cfg.tau, cfg.eps, 1.0, n);
      run_field(make_random_field(prm, seed, 2 * prm.dx()), rng, true);
    }
  }
  // near-optimal interfaces: the slices where the omega bound is almost tight
  for (int n : cfg.sizes_1d) {
    const Params prm = make_params(1, cfg.p_1d, cfg.tau, cfg.eps, 1.0, n);
    std::mt19937_64 rng(n);
    run_field(logistic_train(prm, 0, {0.25, 0.75}, prm.alpha), rng, false);
  }
  return {t1.r, t2.r, t3.r};
}

// ---------------------------------------------------------------------------
// small-tau slice lemmas on a fine one-dimensional grid

struct LemmaSetup {
  Params prm;
  KernelTable table;
  SplitTables tabs;
  int n0 = 0;        // eta0 in cells (even)
  int nd0 = 0;       // delta0 in cells
  double rpos2_bracket = 0;
};

int scan_eta0(const SplitTables& t, int N, double dx, double upsilon) {
  int best = 0;
  for (int n0 = 2; 8 * n0 <= N; n0 += 2)
    if (bump_bracket(t.near_marginal, N, dx, n0, upsilon) >= 2.0) best = n0;
  return best;
}

LemmaSetup lemma_setup(const VerifyConfig& cfg) {
  LemmaSetup s;
  s.prm = make_params(1, cfg.p_1d, cfg.lemma_tau, cfg.lemma_eps, cfg.lemma_cells / cfg.lemma_n_per_unit,
                      cfg.lemma_n_per_unit);
  s.table = build_kernel_table(s.prm);
  s.tabs = split_tables(s.table);
  const double dx = s.prm.dx();
  const int N = s.prm.N();
  s.n0 = cfg.eta0 > 0 ? 2 * static_cast<int>(std::lround(cfg.eta0 / dx / 2)) : scan_eta0(s.tabs, N, dx, cfg.upsilon);
  const double d0 = cfg.delta0 > 0 ? cfg.delta0 : std::max(s.prm.a(), 2 * dx);
  s.nd0 = std::max(1, static_cast<int>(std::lround(d0 / dx)));
  // constructive form of the small-tau requirement of the oscillation lemma
  double acc = 0;
  for (int k = 1; k < N; ++k) {
    const double r = k * dx;
    if (r >= s.prm.a() / 2 && r <= s.prm.a()) acc += 2 * (r / 4) * s.tabs.near_marginal[k + N - 1];
  }
  s.rpos2_bracket = cfg.delta / (1 + 2 * cfg.delta) * acc;
  return s;
}

std::vector<ScalarField> lemma_fields(const VerifyConfig& cfg, const LemmaSetup& s) {
  std::vector<ScalarField> out;
  const double dx = s.prm.dx(), L = s.prm.L;
  for (auto seed : cfg.seeds) {
    std::mt19937_64 rng(seed * 31337 + 5);
    out.push_back(logistic_train(s.prm, 0, random_interfaces(rng, L, 6 * dx, 20 * dx), s.prm.alpha));
    out.push_back(logistic_train(s.prm, 0, random_interfaces(rng, L, 30 * dx, 200 * dx), s.prm.alpha));
    out.push_back(make_random_field(s.prm, seed, 8 * dx));
  }
  return out;
}

struct LemmaChecks {
  CheckResult bump, mineq, rpos2, cor44;
};

LemmaChecks check_lemmas(const VerifyConfig& cfg, const LemmaSetup& s) {
  Tally tb("lemma_bump", cfg.tolerance("lemma_bump")), tm("mineq", cfg.tolerance("mineq")),
      tr("rpos2", cfg.tolerance("rpos2")), tc("cor44", cfg.tolerance("cor44"));
  const int N = s.prm.N(), n0 = s.n0, nd0 = s.nd0;
  const double U = cfg.upsilon;
  const bool have_eta0 = n0 >= 2;
  const bool have_rpos2 = s.rpos2_bracket > 1;
  const double close = 0.25 + std::sqrt(2 * cfg.delta);
  std::uint64_t k_seed = 0;
  for (const ScalarField& f : lemma_fields(cfg, s)) {
    std::mt19937_64 rng(1000 + k_seed++);
    Decomposer D(f, s.table);
    const Prefix R(D.r_density(0));
    const SlicePrefix sp = slice_prefix(f, D.mm(), 0, {0});
    const auto& u = sp.values;
    auto val = [&](long x) { return u[((x % N) + N) % N]; };

    for (long A = 0; A < N; A += 4) {
      if (!have_eta0) {
        tb.skip();
        tc.skip();
        continue;
      }
      const double Mbig = sp.interval(A - n0, A + n0);
      const double RI = R(A - n0 / 2, n0);
      const int k = static_cast<int>(std::floor(Mbig / U));
      if (k >= 1) tb.check(RI - k * U);
      else tb.skip();

      if (!(RI < 0) || !have_rpos2) {
        tc.skip();
        continue;
      }
      // (1) and the lower bound on R
      double m = std::min(U - Mbig, RI + U);
      // (2): the steepest pair within delta0 on the enlarged window
      const long lo = A - n0 / 2 - nd0 / 2, hi = A + n0 / 2 + nd0 / 2;
      double best = -1;
      long s0 = lo, t0 = lo;
      for (long a = lo; a <= hi; ++a)
        for (long b = a + 1; b <= std::min(hi, a + nd0); ++b) {
          const double dv = std::abs(val(a) - val(b));
          if (dv > best) {
            best = dv;
            s0 = a;
            t0 = b;
          }
        }
      m = std::min(m, best - (1 - cfg.delta));
      for (long x = t0; x <= A + n0; ++x) m = std::min(m, close - std::abs(val(x) - val(t0)));
      for (long x = A - n0; x <= s0; ++x) m = std::min(m, close - std::abs(val(x) - val(s0)));
      tc.check(m);
    }

    std::uniform_int_distribution<long> Apos(0, N - 1), Len(1, N - 1);
    for (int q = 0; q < 200; ++q) {
      const long a = Apos(rng), n = Len(rng);
      const double RI = R(a, n);
      if (have_eta0 && RI < 0) tm.check(2 * U * std::max(double(n) / n0, 1.0) - sp.interval(a, a + n));
      else tm.skip();
    }

    for (long A = 0; A < N; A += 16)
      for (int c : {std::max(1, n0 / 2), std::max(1, n0), std::max(1, 2 * n0)}) {
        if (!have_rpos2 || 2 * c + nd0 >= N) {
          tr.skip();
          continue;
        }
        const long lo = A - c - nd0 / 2, hi = A + c + nd0 / 2;
        double worst = 0;
        for (long x = lo; x <= hi; ++x)
          for (long y = x + 1; y <= std::min(hi, x + nd0); ++y) worst = std::max(worst, std::abs(val(x) - val(y)));
        if (worst > 1 - cfg.delta) {
          tr.skip();
          continue;
        }
        const double RI = R(A - c, 2 * c);
        if (RI > 0) tr.check(RI);
        else tr.fail(), tr.r.worst_margin = std::min(tr.r.worst_margin, RI);
      }
  }
  if (!have_eta0) tb.r.note = tm.r.note = tc.r.note = "no admissible eta0 on this grid";
  if (!have_rpos2) tr.r.note = tc.r.note = "oscillation bracket not above 1 at this tau";
  if (tc.r.instances == 0 && have_eta0) tc.r.note = "no interval with R < 0 on the lemma grid";
  if (tm.r.instances == 0 && have_eta0) tm.r.note = "no interval with R < 0 on the lemma grid";
  return {tb.r, tm.r, tr.r, tc.r};
}

// ---------------------------------------------------------------------------
// d = 2 decomposition instances

struct DecChecks {
  CheckResult residual, vw;
};

DecChecks check_decomposition(const VerifyConfig& cfg) {
  Tally tres("dec_residual", cfg.tolerance("dec_residual")), tvw("vw_nonneg", cfg.tolerance("vw_nonneg"));
  for (int n : cfg.sizes_2d) {
    const Params prm = make_params(2, cfg.p_2d, cfg.tau, cfg.eps, 1.0, n);
    const KernelTable table = build_kernel_table(prm);
    const double l = cfg.l_fraction * prm.L;
    for (auto seed : cfg.seeds) {
      const ScalarField f = make_random_field(prm, seed, 2 * prm.dx());
      Decomposer D(f, table);
      const DecompositionReport rep = D.lower_bound_report(l);
      tres.check(rep.lower_bound_residual);
      for (int ax = 0; ax < 2; ++ax)
        for (std::size_t q = 0; q < rep.centers.size(); ++q)
          tvw.check(std::min(rep.v_value[ax][q], rep.w_value[ax][q]));
      // slice-level V on random intervals
      std::mt19937_64 rng(seed);
      std::uniform_int_distribution<int> X(0, n - 1), Len(1, n);
      for (int q = 0; q < 8; ++q) {
        const int ax = q % 2;
        std::vector<int> xp = {X(rng), X(rng)};
        tvw.check(D.v_term(ax, xp, X(rng), Len(rng)));
      }
    }
  }
  return {tres.r, tvw.r};
}

ScalarField stripe_indicator(const Params& prm, int axis, const std::vector<int>& cuts) {
  ScalarField f(prm, 0.0);
  Grid g{prm.d, prm.N()};
  for (std::size_t c = 0; c < f.size(); ++c) {
    const int x = g.coords(c)[axis];
    int parity = 0;
    for (int cut : cuts) parity += x >= cut;
    f[c] = parity % 2;
  }
  return f;
}

std::vector<int> random_cuts(std::mt19937_64& rng, int N, int gap) {
  std::uniform_int_distribution<int> U(0, gap);
  std::vector<int> cuts;
  int x = U(rng);
  const int first = x;
  // the run across the periodic seam must also be at least `gap` long
  while (x <= N - gap + first) {
    cuts.push_back(x);
    x += gap + U(rng);
  }
  if (cuts.size() % 2) cuts.pop_back();
  return cuts;
}

CheckResult check_int14(const VerifyConfig& cfg) {
  Tally t("int14", cfg.tolerance("int14"));
  for (int n : cfg.sizes_2d) {
    const Params prm = make_params(2, cfg.p_2d, cfg.tau, cfg.eps, 1.0, n);
    const double dx = prm.dx();
    Grid g{2, n};
    for (auto seed : cfg.seeds) {
      std::mt19937_64 rng(seed * 271 + 9);
      for (int j = 0; j < 2; ++j) {
        const ScalarField f = stripe_indicator(prm, j, random_cuts(rng, n, 3));
        for (int axis = 0; axis < 2; ++axis) {  // difference direction
          const int other = 1 - axis;
          for (int m = 1; m <= 3; ++m) {
            std::uniform_int_distribution<int> X(0, n - 1), Dt(-m, m);
            const int xp = X(rng), s0 = X(rng), t0 = s0 + Dt(rng);
            // exact integral of the piecewise-constant field: the transverse
            // ball (-alpha, alpha) around a cell center covers 2m-1 full cells
            // and two half cells
            double acc = 0;
            for (int z = -m; z <= m; ++z) {
              const double wz = std::abs(z) == m ? 0.5 : 1.0;
              for (int xi = s0 - m; xi < s0; ++xi)
                for (int yi = t0; yi < t0 + m; ++yi) {
                  std::vector<int> p(2), q(2);
                  p[axis] = ((xi % n) + n) % n;
                  q[axis] = ((yi % n) + n) % n;
                  p[other] = q[other] = ((xp + z) % n + n) % n;
                  const double v = 0.25 - (f[g.index(p)] - f[g.index(q)]);
                  acc += wz * v * v;
                }
            }
            const double alpha = m * dx;
            t.check(acc * dx * dx * dx - std::pow(alpha, 3) / 8);
          }
        }
      }
    }
  }
  return t.r;
}

CheckResult check_deta(const VerifyConfig& cfg) {
  Tally t("deta_stripes", cfg.tolerance("deta_stripes"));
  for (int n : cfg.sizes_2d) {
    const Params prm = make_params(2, cfg.p_2d, cfg.tau, cfg.eps, 1.0, n);
    const int gap = 3;
    const double eta = gap * prm.dx();
    for (auto seed : cfg.seeds) {
      std::mt19937_64 rng(seed * 613 + 1);
      const int j = static_cast<int>(seed % 2);
      const ScalarField f = stripe_indicator(prm, j, random_cuts(rng, n, gap));
      const double l = cfg.l_fraction * prm.L;
      for (int z0 = 0; z0 < n; z0 += 3)
        for (int z1 = 0; z1 < n; z1 += 3) {
          const Cube q = make_cube(f, {z0, z1}, l);
          t.check(-direction_distance(f, q, eta).d_eta);
        }
    }
  }
  return t.r;
}

// wavy stripes u = g(x_0 + A sin(2 pi x_1 / L)) with g a two-interface logistic
ScalarField wavy_stripes(const Params& prm, double amp) {
  ScalarField f(prm);
  Grid g{2, prm.N()};
  const double dx = prm.dx(), L = prm.L, w = prm.alpha;
  for (std::size_t c = 0; c < f.size(); ++c) {
    const auto x = g.coords(c);
    const double y = (x[0] + 0.5) * dx + amp * std::sin(2 * std::numbers::pi * (x[1] + 0.5) * dx / L);
    const double d1 = fold(y - 0.25 * L, L), d2 = fold(y - 0.75 * L, L);
    f[c] = std::abs(d1) < std::abs(d2) ? logistic(d1 / w) : 1.0 - logistic(d2 / w);
  }
  return f;
}

struct StabilityChecks {
  CheckResult equality, strict, margin_monitor;
};

StabilityChecks check_stability(const VerifyConfig& cfg) {
  Tally te("lemma47_equality", cfg.tolerance("lemma47_equality")),
      ts("lemma47_strict", cfg.tolerance("lemma47_strict")),
      tmon("lemma47_margin", 0.0, true);
  const int n_base = cfg.sizes_2d.empty() ? 16 : cfg.sizes_2d.front();
  std::vector<double> margins;
  for (int n : {n_base, 2 * n_base}) {
    const Params prm = make_params(2, cfg.p_2d, cfg.tau, cfg.eps, 1.0, n);
    const KernelTable table = build_kernel_table(prm);
    // one-dimensional fields: V vanishes on every slice, R + V >= 0 across
    std::vector<ScalarField> flat = {wavy_stripes(prm, 0.0)};
    {
      const Params p1 = make_params(1, cfg.p_2d, cfg.tau, cfg.eps, 1.0, n);
      const ScalarField g1 = smooth_analytic(p1, 3);
      ScalarField f(prm);
      Grid g{2, n};
      for (std::size_t c = 0; c < f.size(); ++c) f[c] = g1[g.coords(c)[0]];
      flat.push_back(f);
    }
    for (const ScalarField& f : flat) {
      Decomposer D(f, table);
      for (int ax = 0; ax < 2; ++ax)
        for (auto& b : slice_bases(2, n, ax)) {
          const double V = D.v_term(ax, b, 0, n);
          te.check(-std::abs(V));
          if (ax == 1) te.check(D.r_term(ax, b, 0, n) + V);
        }
    }
    // non-one-dimensional: strictly positive on every transversal slice
    const ScalarField f = wavy_stripes(prm, prm.alpha);
    Decomposer D(f, table);
    double worst = kInf;
    for (auto& b : slice_bases(2, n, 1)) {
      const double rv = D.r_term(1, b, 0, n) + D.v_term(1, b, 0, n);
      worst = std::min(worst, rv);
      if (rv > ts.tol) ts.check(rv);
      else ts.fail(), ts.r.worst_margin = std::min(ts.r.worst_margin, rv);
    }
    margins.push_back(worst);
  }
  const double lo = *std::min_element(margins.begin(), margins.end());
  const double hi = *std::max_element(margins.begin(), margins.end());
  tmon.r.value = margins.back();
  tmon.check(lo > 0 && hi <= 2 * lo ? 2 * lo - hi : -1.0);
  tmon.r.note = fmt::format("min R+V over transversal slices: {:.6g} (n={}), {:.6g} (n={})", margins[0], n_base,
                            margins[1], 2 * n_base);
  return {te.r, ts.r, tmon.r};
}

// ratio test for an empirical constant at two or more grid levels
void stability(Tally& t, const std::vector<double>& vals, const std::vector<int>& sizes) {
  const double lo = *std::min_element(vals.begin(), vals.end());
  const double hi = *std::max_element(vals.begin(), vals.end());
  const double floor_ = 1e-9;
  double m;
  if (hi <= floor_) m = 0;  // vanishes at every level
  else if (lo <= 0) m = -1;
  else m = 2 * lo - hi;
  t.check(m);
  t.r.value = vals.back();
  std::string s;
  for (std::size_t k = 0; k < vals.size(); ++k) s += fmt::format("{}{:.6g} (n={})", k ? ", " : "", vals[k], sizes[k]);
  t.r.note = s;
}

struct OneDimChecks {
  CheckResult c0, gstr28;
};

OneDimChecks check_onedim_bounds(const VerifyConfig& cfg) {
  Tally tc0("c0_monitor", 0.0, true), tg("gstr28", cfg.tolerance("gstr28"));
  std::vector<double> c0s, raw;
  for (int n : cfg.sizes_1d) {
    const Params prm = make_params(1, cfg.p_1d, cfg.tau, cfg.eps, 1.0, n);
    const KernelTable table = build_kernel_table(prm);
    const double cstar = c_star_of(prm);
    double c0 = -kInf;
    std::vector<ScalarField> fields;
    for (auto seed : cfg.seeds) {
      fields.push_back(smooth_analytic(prm, seed));
      std::mt19937_64 rng(seed * 97 + 1);
      fields.push_back(logistic_train(prm, 0, random_interfaces(rng, prm.L, 0.15, 0.2), prm.alpha));
    }
    for (const ScalarField& f : fields) {
      Decomposer D(f, table);
      const Prefix R(D.r_density(0));
      for (long a = 0; a < n; a += 2)
        for (long len = 1; len <= n; ++len) c0 = std::max(c0, cstar * len * prm.dx() - R(a, len));
      const DecompositionReport rep = D.lower_bound_report(cfg.l_fraction * prm.L);
      tg.check(rep.rhs - cstar);
    }
    raw.push_back(c0);
    c0s.push_back(std::max(c0, 0.0));
  }
  stability(tc0, c0s, cfg.sizes_1d);
  tc0.r.note += fmt::format("; unclamped max of C*|I| - R: {:.6g} .. {:.6g}", *std::min_element(raw.begin(), raw.end()),
                            *std::max_element(raw.begin(), raw.end()));
  return {tc0.r, tg.r};
}

CheckResult check_c1(const VerifyConfig& cfg, double eta0) {
  Tally t("c1_monitor", 0.0, true);
  const int n_base = cfg.sizes_2d.empty() ? 16 : cfg.sizes_2d.front();
  std::vector<double> vals;
  std::vector<int> sizes = {n_base, 2 * n_base};
  for (int n : sizes) {
    const Params prm = make_params(2, cfg.p_2d, cfg.tau, cfg.eps, 1.0, n);
    const KernelTable table = build_kernel_table(prm);
    const double l = cfg.l_fraction * prm.L;
    double c1 = 0;
    long used = 0;
    for (auto seed : cfg.seeds) {
      // nearly full phase with one soft hole
      std::mt19937_64 rng(seed * 4099 + 7);
      std::uniform_real_distribution<double> U(0.0, 1.0);
      const double cx = U(rng), cy = U(rng), r = 0.04 + 0.04 * U(rng);
      ScalarField f(prm);
      Grid g{2, n};
      for (std::size_t c = 0; c < f.size(); ++c) {
        const auto x = g.coords(c);
        const double dx0 = fold((x[0] + 0.5) * prm.dx() - cx, 1.0), dx1 = fold((x[1] + 0.5) * prm.dx() - cy, 1.0);
        f[c] = 1.0 - std::exp(-(dx0 * dx0 + dx1 * dx1) / (2 * r * r));
      }
      Decomposer D(f, table);
      const DecompositionReport rep = D.lower_bound_report(l);
      const int cells = static_cast<int>(std::lround(l * n));
      for (std::size_t q = 0; q < rep.centers.size(); ++q) {
        const Cube cube = make_cube(f, rep.centers[q], l);
        double s0 = 0, s1 = 0;
        const auto sec = section_profile(f, 0, cube);
        for (double v : sec) {
          s0 += v;
          s1 += 1 - v;
        }
        const double nu_q = std::min(s0, s1) / cells;  // L1 fraction of the cube
        if (nu_q > cfg.nu) continue;
        ++used;
        const double fbar = rep.fbar[0][q] + rep.fbar[1][q];
        c1 = std::max(c1, -fbar * eta0 / (cfg.upsilon * cfg.nu * 2));
      }
    }
    vals.push_back(c1);
    if (used == 0) t.skip();
  }
  stability(t, vals, sizes);
  return t.r;
}

}  // namespace

// ---------------------------------------------------------------------------

double VerifyConfig::tolerance(const std::string& check) const {
  if (auto it = tolerances.find(check); it != tolerances.end()) return it->second;
  if (check == "dec_residual") return 1e-6;
  if (check == "gom") return 1e-12;
  return 1e-9;
}

VerifyConfig default_verify_config() { return VerifyConfig{}; }

void validate(const VerifyConfig& c) {
  if (!(c.upsilon > 1 && c.upsilon <= 17.0 / 16.0)) throw InputError("upsilon", "upsilon must lie in (1, 17/16]");
  if (!(c.delta > 0 && c.delta < 1)) throw InputError("delta", "delta must lie in (0, 1)");
  if (!(c.delta_pos2 > 0 && c.delta_pos2 < 1)) throw InputError("delta_pos2", "delta_pos2 must lie in (0, 1)");
  if (!(c.eta0 >= 0)) throw InputError("eta0", "eta0 must be >= 0");
  if (!(c.sigma > 0)) throw InputError("sigma", "sigma must be > 0");
  if (!(c.nu > 0)) throw InputError("nu", "nu must be > 0");
  if (!(c.l_fraction > 0 && c.l_fraction < 1)) throw InputError("l", "cube side must be a fraction of L in (0, 1)");
  if (c.seeds.empty()) throw InputError("seeds", "at least one seed is required");
  if (c.sizes_1d.empty() || c.sizes_2d.empty()) throw InputError("sizes", "sizes must not be empty");
  for (int n : c.sizes_1d)
    if (n < 8) throw InputError("sizes", "grid sizes must be >= 8");
  for (int n : c.sizes_2d)
    if (n < 8) throw InputError("sizes", "grid sizes must be >= 8");
  if (c.pair_samples < 1) throw InputError("pair_samples", "pair_samples must be >= 1");
  if (c.lemma_cells < 64) throw InputError("lemma_cells", "lemma_cells must be >= 64");
  if (c.delta0 > 0) {
    const double beta = c.p_1d - 2;
    if (c.delta0 < std::pow(c.lemma_tau, 1.0 / beta) * (1 - 1e-12))
      throw InputError("delta0", "delta0 must be >= tau^(1/beta)");
  }
  const auto names = suite_check_names();
  for (auto& [k, v] : c.tolerances) {
    if (std::find(names.begin(), names.end(), k) == names.end())
      throw InputError("tolerances." + k, fmt::format("no check named {}", k));
    if (!(v >= 0)) throw InputError("tolerances", fmt::format("tolerance for {} must be >= 0", k));
  }
}

std::vector<std::string> suite_check_names() {
  return {"c0_monitor", "c1_monitor", "cor44", "dec_residual", "deta_stripes", "gom", "gstr28",
          "int14", "lemma47_equality", "lemma47_margin", "lemma47_strict", "lemma_bump", "mineq",
          "omega_ab", "partpos0", "pos1", "pos2", "rpos2", "vw_nonneg"};
}

double suite_omega(double t, bool faulty) { return faulty ? t * t * (3.0 - t) : omega(t); }

double bump_bracket(const std::vector<double>& near_marginal, int N, double dx, int n0, double upsilon) {
  double x = 0;
  for (int k = 3 * n0; k <= 4 * n0 && k < N; ++k)
    x += 2.0 * (k - 2 * n0 + 1) * (double(n0) / k) * near_marginal[k + N - 1] * dx;
  return (upsilon - 1) / upsilon * x;
}

bool in_omega(double s, double rho, double a, double b) {
  const double lo = std::min(s, s + rho), hi = std::max(s, s + rho);
  return lo <= std::min(a, b) && std::max(a, b) <= hi;
}

double omega_measure(double s, double rho, double L) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
  // the integrand is piecewise constant; splitting at the breakpoints makes
  // each panel exact
  auto integrate = [](const std::function<double(double)>& f, std::vector<double> br, double lo, double hi) {
    br.push_back(lo);
    br.push_back(hi);
    std::sort(br.begin(), br.end());
    double acc = 0;
    for (std::size_t k = 0; k + 1 < br.size(); ++k) {
      const double x0 = std::max(lo, br[k]), x1 = std::min(hi, br[k + 1]);
      if (x1 > x0) acc += GK::integrate(f, x0, x1, 0, 0);
    }
    return acc;
  };
  const double lo = std::min(s, s + rho), hi = std::max(s, s + rho);
  // periodic representatives of a inside [lo, hi]
  auto member = [&](double a, double b) {
    const long m0 = static_cast<long>(std::floor((lo - a) / L)) - 1;
    for (long m = m0; a + m * L <= hi + L; ++m)
      if (in_omega(s, rho, a + m * L, b)) return true;
    return false;
  };
  std::vector<double> abr;
  for (long m = -static_cast<long>(std::ceil(std::abs(rho) / L)) - 2; m <= std::ceil(std::abs(rho) / L) + 2; ++m) {
    abr.push_back(lo + m * L);
    abr.push_back(hi + m * L);
  }
  auto outer = [&](double a) {
    auto inner = [&](double b) { return member(a, b) ? 1.0 : 0.0; };
    return integrate(inner, {lo, hi}, lo - 1.0, hi + 1.0);
  };
  return integrate(outer, abr, s, s + L);
}

const CheckResult* SuiteReport::find(const std::string& name) const {
  for (auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

SuiteReport run_suite(const VerifyConfig& cfg) {
  validate(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const LemmaSetup ls = lemma_setup(cfg);
  const double eta0 = ls.n0 * ls.prm.dx();

  std::vector<std::function<std::vector<CheckResult>()>> jobs = {
      [&] { return std::vector<CheckResult>{check_omega_ab(cfg)}; },
      [&] { return std::vector<CheckResult>{check_gom(cfg)}; },
      [&] {
        auto p = check_pairs(cfg);
        return std::vector<CheckResult>{p.pos1, p.pos2, p.partpos0};
      },
      [&] {
        auto l = check_lemmas(cfg, ls);
        return std::vector<CheckResult>{l.bump, l.mineq, l.rpos2, l.cor44};
      },
      [&] {
        auto d = check_decomposition(cfg);
        return std::vector<CheckResult>{d.residual, d.vw};
      },
      [&] { return std::vector<CheckResult>{check_int14(cfg)}; },
      [&] { return std::vector<CheckResult>{check_deta(cfg)}; },
      [&] {
        auto s = check_stability(cfg);
        return std::vector<CheckResult>{s.equality, s.strict, s.margin_monitor};
      },
      [&] {
        auto o = check_onedim_bounds(cfg);
        return std::vector<CheckResult>{o.c0, o.gstr28};
      },
      [&] { return std::vector<CheckResult>{check_c1(cfg, eta0 > 0 ? eta0 : ls.prm.a())}; },
  };
  std::vector<std::vector<CheckResult>> out(jobs.size());
  tbb::parallel_for(std::size_t{0}, jobs.size(), [&](std::size_t k) {
    const auto s = std::chrono::steady_clock::now();
    out[k] = jobs[k]();
    const double w = std::chrono::duration<double>(std::chrono::steady_clock::now() - s).count();
    for (auto& c : out[k]) c.wall_seconds = w / out[k].size();
  });

  SuiteReport rep;
  for (auto& v : out)
    for (auto& c : v) rep.checks.push_back(std::move(c));
  std::sort(rep.checks.begin(), rep.checks.end(), [](auto& a, auto& b) { return a.name < b.name; });
  for (auto& c : rep.checks) rep.pass = rep.pass && c.failures == 0;
  rep.eta0 = eta0;
  rep.delta0 = ls.nd0 * ls.prm.dx();
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

bool same_outcome(const SuiteReport& a, const SuiteReport& b) {
  if (a.pass != b.pass || a.checks.size() != b.checks.size() || a.eta0 != b.eta0 || a.delta0 != b.delta0)
    return false;
  for (std::size_t k = 0; k < a.checks.size(); ++k) {
    const auto &x = a.checks[k], &y = b.checks[k];
    if (x.name != y.name || x.instances != y.instances || x.skipped != y.skipped || x.failures != y.failures ||
        !(x.worst_margin == y.worst_margin) || !(x.value == y.value) || x.note != y.note)
      return false;
  }
  return true;
}

void write_suite_csv(const SuiteReport& r, const std::filesystem::path& path, bool with_timing) {
  std::ofstream os(path);
  if (!os) throw InputError("path", fmt::format("cannot write {}", path.string()));
  os << "check,kind,instances,skipped,failures,worst_margin,value" << (with_timing ? ",wall_seconds_s\n" : "\n");
  for (auto& c : r.checks) {
    os << fmt::format("{},{},{},{},{},{:.17g},{:.17g}", c.name, c.monitor ? "monitor" : "hard", c.instances,
                      c.skipped, c.failures, c.worst_margin, c.value);
    os << (with_timing ? fmt::format(",{:.6f}\n", c.wall_seconds) : "\n");
  }
}

std::string format_suite(const SuiteReport& r) {
  std::ostringstream os;
  os << fmt::format("eta0 = {:.6g}\ndelta0 = {:.6g}\n", r.eta0, r.delta0);
  for (auto& c : r.checks) {
    os << fmt::format("[{}] {} {}: instances={} skipped={} failures={} worst_margin={:.6g}", c.failures ? "FAIL" : "ok",
                      c.monitor ? "monitor" : "hard", c.name, c.instances, c.skipped, c.failures, c.worst_margin);
    if (c.monitor) os << fmt::format(" value={:.6g}", c.value);
    if (!c.note.empty()) os << " (" << c.note << ")";
    os << '\n';
  }
  os << fmt::format("suite {} in {:.1f} s\n", r.pass ? "PASSED" : "FAILED", r.wall_seconds);
  return os.str();
}

}  // namespace sf
