#include "stripeforge/decompose.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "stripeforge/energy.hpp"

namespace sf {

namespace {

// adds val on the periodic arc [p, p+len), len < N, through a difference array
void add_arc(std::vector<double>& diff, long p, long len, double val) {
  const long N = static_cast<long>(diff.size()) - 1;
  const long p0 = ((p % N) + N) % N;
  if (p0 + len <= N) {
    diff[p0] += val;
    diff[p0 + len] -= val;
  } else {
    diff[p0] += val;
    diff[N] -= val;
    diff[0] += val;
    diff[p0 + len - N] -= val;
  }
}

std::vector<double> undiff(const std::vector<double>& diff) {
  std::vector<double> out(diff.size() - 1);
  double run = 0;
  for (std::size_t c = 0; c + 1 < diff.size(); ++c) {
    run += diff[c];
    out[c] = run;
  }
  return out;
}

// periodic cube sums: out[z] = sum over the n^d cells starting at z - n/2
std::vector<double> cube_sums(const std::vector<double>& in, int d, int N, int n) {
  Grid g{d, N};
  std::vector<double> cur = in, next(in.size());
  for (int a = 0; a < d; ++a) {
    const std::size_t st = g.stride(a);
    for (std::size_t c = 0; c < cur.size(); ++c) {
      const int x = g.coords(c)[a];
      const std::size_t base = c - static_cast<std::size_t>(x) * st;
      double s = 0;
      for (int t = 0; t < n; ++t) {
        const int y = ((x - n / 2 + t) % N + N) % N;
        s += cur[base + static_cast<std::size_t>(y) * st];
      }
      next[c] = s;
    }
    cur.swap(next);
  }
  return cur;
}

}  // namespace

double omega(double t) { return t * t * (3.0 - 2.0 * t); }

MMSplit mm_split(const ScalarField& f) {
  const int d = f.d(), N = f.N();
  const double h = f.params.dx(), al = f.params.alpha, th = f.params.theta_g;
  Grid gr{d, N};
  MMSplit s;
  s.d = d;
  s.m.assign(d, std::vector<double>(f.size(), 0.0));
  s.flat.assign(f.size(), 0);
  s.flat_well.assign(f.size(), 0.0);
  std::vector<double> ad(d), ws(d);
  for (std::size_t c = 0; c < f.size(); ++c) {
    const double p = f[c];
    double g = 0, wm = 0;
    for (int i = 0; i < d; ++i) {
      const double q = f[gr.shift(c, i, 1)];
      ad[i] = std::abs(q - p) / h;
      ws[i] = segment_well(p, q);
      g += ad[i];
      wm += ad[i] * ws[i];
    }
    if (g >= th && g > 0) {
      for (int i = 0; i < d; ++i) s.m[i][c] = 3 * al * ad[i] * g + (3 / al) * ws[i] * ad[i] / g;
    } else {
      s.flat[c] = 1;
      s.flat_well[c] = (3 / al) * (g > 0 ? wm / g : double_well(p));
    }
  }
  return s;
}

double SlicePrefix::interval(long s, long t) const {
  const long n = N();
  const double total = cum_mm[n];
  auto at = [&](long x) {
    const long q = x >= 0 ? x / n : -((-x + n - 1) / n);
    return q * total + cum_mm[x - q * n];
  };
  return at(t) - at(s);
}

SlicePrefix slice_prefix(const ScalarField& f, const MMSplit& mm, int axis, const std::vector<int>& x_perp) {
  const int N = f.N();
  Grid g{f.d(), N};
  SlicePrefix sp;
  sp.direction = axis;
  sp.x_perp = x_perp;
  sp.x_perp[axis] = 0;
  sp.dx = f.params.dx();
  sp.cum_mm.assign(N + 1, 0.0);
  sp.values.resize(N);
  std::size_t c = g.index(sp.x_perp);
  for (int s = 0; s < N; ++s) {
    sp.values[s] = f[c];
    sp.cum_mm[s + 1] = sp.cum_mm[s] + sp.dx * mm.m[axis][c];
    c = g.shift(c, axis, 1);
  }
  return sp;
}

double interval_mm(const SlicePrefix& p, long s, long t) { return p.interval(s, t); }

long arc_overlap(long p, long len, long a, long n, long N) {
  const long p0 = ((p % N) + N) % N;
  long cnt = 0;
  for (long m = -1; m <= 2; ++m) {
    const long lo = std::max(p0, a + m * N), hi = std::min(p0 + len, a + n + m * N);
    if (hi > lo) cnt += hi - lo;
  }
  return cnt;
}

SplitTables split_tables(const KernelTable& table) {
  const LatticeKernel& lat = table.lattice;
  const int d = lat.d, N = lat.N;
  const long B = lat.box;
  const HatWeights& W = *lat.hat;
  SplitTables t;
  t.d = d;
  t.N = N;
  t.dx = lat.dx;
  t.c_tau = table.c_tau;
  std::size_t P = 1;
  for (int i = 1; i < d; ++i) P *= N;
  t.near.assign(2 * N - 1, std::vector<double>(P, 0.0));
  t.far.assign(N, std::vector<double>(P, 0.0));
  t.far_pos.assign(N, std::vector<double>(P, 0.0));

  std::vector<long> kp(std::max(d - 1, 0), -B);
  while (true) {
    long Kp = 0;
    int zp = 0;
    std::size_t jp = 0;
    for (int l = 0; l < d - 1; ++l) {
      Kp += std::labs(kp[l]);
      zp += kp[l] == 0;
      jp = jp * N + static_cast<std::size_t>(((kp[l] % N) + N) % N);
    }
    for (long k0 = -B; k0 <= B; ++k0) {
      const long K = Kp + std::labs(k0);
      const int z = zp + (k0 == 0);
      if (K == 0) continue;
      const double w = W(K, z);
      if (std::labs(k0) < N)
        t.near[k0 + N - 1][jp] += w;
      else if (k0 >= N)
        t.far_pos[k0 % N][jp] += w;
    }
    int l = d - 2;
    while (l >= 0 && kp[l] == B) kp[l--] = -B;
    if (l < 0) break;
    ++kp[l];
  }
  for (int j = 0; j < N; ++j)
    for (std::size_t p = 0; p < P; ++p) {
      double nearsum = 0;
      for (int k = -(N - 1); k <= N - 1; ++k)
        if (((k % N) + N) % N == j) nearsum += t.near[k + N - 1][p];
      t.far[j][p] = lat.w[static_cast<std::size_t>(j) * P + p] - nearsum;
      t.far_pos[j][p] += 0.5 * lat.far_per_offset;
    }
  t.near_marginal.assign(2 * N - 1, 0.0);
  t.far_marginal.assign(N, 0.0);
  for (int k = 0; k < 2 * N - 1; ++k)
    for (double v : t.near[k]) t.near_marginal[k] += v;
  for (int j = 0; j < N; ++j)
    for (double v : t.far[j]) t.far_marginal[j] += v;
  double mom = 0;
  for (int k = 1; k < N; ++k) mom += 2.0 * k * t.dx * t.near_marginal[k + N - 1];
  t.far_moment = table.c_tau - mom;
  return t;
}

Decomposer::Decomposer(const ScalarField& f, const KernelTable& table)
    : f_(f), table_(&table), mm_(mm_split(f)), t_(split_tables(table)), grid_{f.d(), f.N()} {
  if (table.lattice.N != f.N() || table.lattice.d != f.d())
    throw InputError("table", "kernel table does not match the field grid");
}

std::vector<int> Decomposer::perp_coords(std::size_t jpf) const {
  const int d = f_.d(), N = f_.N();
  std::vector<int> jp(std::max(d - 1, 0));
  for (int l = d - 2; l >= 0; --l) {
    jp[l] = static_cast<int>(jpf % N);
    jpf /= N;
  }
  return jp;
}

std::size_t Decomposer::perp_flat(const std::vector<int>& jp) const {
  std::size_t r = 0;
  for (int v : jp) r = r * f_.N() + static_cast<std::size_t>(((v % f_.N()) + f_.N()) % f_.N());
  return r;
}

double Decomposer::f_u(std::size_t x, int axis, long k, const std::vector<int>& jp) const {
  const int N = f_.N();
  const int kk = static_cast<int>(((k % N) + N) % N);
  std::size_t y = x;  // x + y_perp
  for (int l = 0, ax = 0; ax < f_.d(); ++ax) {
    if (ax == axis) continue;
    y = grid_.shift(y, ax, jp[l++]);
  }
  const double a = f_[grid_.shift(x, axis, kk)] - f_[x];
  const double b = f_[grid_.shift(y, axis, kk)] - f_[y];
  return (a - b) * (a - b);
}

double Decomposer::r_far_bracket(const SlicePrefix& sp) const {
  const int N = sp.N();
  double nl = 0;
  for (int s = 0; s < N; ++s)
    for (int j = 1; j < N; ++j) {
      const double df = sp.values[s] - sp.values[(s + j) % N];
      nl += t_.far_marginal[j] * df * df;
    }
  return sp.interval(0, N) * t_.far_moment - sp.dx * nl;
}

double Decomposer::r_term(int axis, const std::vector<int>& x_perp, long a, long n) const {
  const int N = f_.N();
  if (a < 0 || a >= N || n < 1 || n > N) throw InputError("interval", "interval must lie in one period");
  const SlicePrefix sp = slice_prefix(f_, mm_, axis, x_perp);
  const double dx = sp.dx;
  double acc = 0;
  for (long s = 0; s < N; ++s)
    for (long k = 1; k < N; ++k) {
      const double w = t_.near_marginal[k + N - 1] * dx;
      const double dp = sp.values[s] - sp.values[(s + k) % N];
      const double dm = sp.values[s] - sp.values[(s - k + N) % N];
      const long op = arc_overlap(s, k, a, n, N), om = arc_overlap(s - k, k, a, n, N);
      if (op) acc += double(op) / k * (sp.interval(s, s + k) - dp * dp) * w;
      if (om) acc += double(om) / k * (sp.interval(s - k, s) - dm * dm) * w;
    }
  return -sp.interval(a, a + n) + acc + double(n) / N * r_far_bracket(sp);
}

double Decomposer::v_term(int axis, const std::vector<int>& x_perp, long a, long n) const {
  const int d = f_.d(), N = f_.N();
  if (a < 0 || a >= N || n < 1 || n > N) throw InputError("interval", "interval must lie in one period");
  if (d == 1) return 0.0;
  std::vector<int> xs = x_perp;
  xs[axis] = 0;
  const std::size_t x0 = grid_.index(xs);
  const std::size_t P = t_.near[0].size();
  double acc = 0, far = 0;
  std::size_t x = x0;
  for (long s = 0; s < N; ++s, x = grid_.shift(x, axis, 1)) {
    for (std::size_t p = 0; p < P; ++p) {
      const auto jp = perp_coords(p);
      for (long k = 1; k < N; ++k) {
        const long ov = arc_overlap(s, k, a, n, N);
        if (ov) acc += double(ov) / k * t_.near[k + N - 1][p] * f_u(x, axis, k, jp);
      }
      for (long j = 0; j < N; ++j) far += t_.far_pos[j][p] * f_u(x, axis, j, jp);
    }
  }
  const double dx = f_.params.dx();
  return dx / (2.0 * d) * (acc + double(n) / N * far);
}

std::vector<double> Decomposer::r_density(int axis) const {
  const int N = f_.N();
  std::vector<double> out(f_.size(), 0.0);
  for (std::size_t c0 = 0; c0 < f_.size(); ++c0) {
    auto xs = grid_.coords(c0);
    if (xs[axis] != 0) continue;
    const SlicePrefix sp = slice_prefix(f_, mm_, axis, xs);
    const double dx = sp.dx;
    std::vector<double> diff(N + 1, 0.0);
    for (long s = 0; s < N; ++s)
      for (long k = 1; k < N; ++k) {
        const double w = t_.near_marginal[k + N - 1] * dx;
        const double dp = sp.values[s] - sp.values[(s + k) % N];
        const double dm = sp.values[s] - sp.values[(s - k + N) % N];
        add_arc(diff, s, k, (sp.interval(s, s + k) - dp * dp) * w / k);
        add_arc(diff, s - k, k, (sp.interval(s - k, s) - dm * dm) * w / k);
      }
    const auto acc = undiff(diff);
    const double far = r_far_bracket(sp) / N;
    std::size_t c = c0;
    for (int s = 0; s < N; ++s, c = grid_.shift(c, axis, 1))
      out[c] = -dx * mm_.m[axis][c] + acc[s] + far;
  }
  return out;
}

std::vector<double> Decomposer::v_density(int axis) const {
  const int d = f_.d(), N = f_.N();
  std::vector<double> out(f_.size(), 0.0);
  if (d == 1) return out;
  const std::size_t P = t_.near[0].size();
  std::vector<std::vector<int>> jps(P);
  for (std::size_t p = 0; p < P; ++p) jps[p] = perp_coords(p);
  const double pre = f_.params.dx() / (2.0 * d);
  for (std::size_t c0 = 0; c0 < f_.size(); ++c0) {
    if (grid_.coords(c0)[axis] != 0) continue;
    std::vector<double> diff(N + 1, 0.0);
    double far = 0;
    std::size_t x = c0;
    for (long s = 0; s < N; ++s, x = grid_.shift(x, axis, 1)) {
      for (long k = 1; k < N; ++k) {
        double v = 0;
        for (std::size_t p = 0; p < P; ++p) v += t_.near[k + N - 1][p] * f_u(x, axis, k, jps[p]);
        add_arc(diff, s, k, v / k);
      }
      for (long j = 0; j < N; ++j)
        for (std::size_t p = 0; p < P; ++p) far += t_.far_pos[j][p] * f_u(x, axis, j, jps[p]);
    }
    const auto acc = undiff(diff);
    std::size_t c = c0;
    for (int s = 0; s < N; ++s, c = grid_.shift(c, axis, 1)) out[c] = pre * (acc[s] + far / N);
  }
  return out;
}

std::vector<double> Decomposer::w_density(int axis) const {
  const int d = f_.d();
  std::vector<double> out(f_.size(), 0.0);
  if (d == 1) return out;
  const auto& w = table_->lattice.w;
  for (std::size_t x = 0; x < f_.size(); ++x) {
    double acc = 0;
    for (std::size_t J = 0; J < f_.size(); ++J) {
      const auto jc = grid_.coords(J);
      std::vector<int> jp;
      for (int ax = 0; ax < d; ++ax)
        if (ax != axis) jp.push_back(jc[ax]);
      acc += w[J] * f_u(x, axis, jc[axis], jp);
    }
    out[x] = acc / (2.0 * d);
  }
  return out;
}

std::vector<double> Decomposer::wcal_density() const {
  std::vector<double> out(f_.size(), 0.0);
  const double c = (table_->c_tau - 1) / f_.d();
  for (std::size_t x = 0; x < f_.size(); ++x)
    if (mm_.flat[x]) out[x] = c * mm_.flat_well[x];
  return out;
}

double Decomposer::w_term(int axis, const Cube& q) const {
  const auto dens = w_density(axis);
  const auto s = cube_sums(dens, f_.d(), f_.N(), q.cells);
  return std::pow(f_.params.dx(), f_.d()) * s[grid_.index(q.center)] / (2.0 * f_.d());
}

double Decomposer::wcal_term(const Cube& q) const {
  const auto s = cube_sums(wcal_density(), f_.d(), f_.N(), q.cells);
  return std::pow(f_.params.dx(), f_.d()) * s[grid_.index(q.center)];
}

CubeTerms Decomposer::localized_cube_energy(const Cube& q) const {
  const int d = f_.d(), N = f_.N(), n = q.cells;
  const double dx = f_.params.dx();
  const double ld = std::pow(n * dx, d);
  CubeTerms t;
  t.wcal = wcal_term(q) / ld;
  for (int i = 0; i < d; ++i) {
    double rs = 0, vs = 0;
    const long a = ((q.center[i] - n / 2) % N + N) % N;
    // odometer over the perpendicular section of the cube
    std::vector<int> off(d, 0), x(d);
    while (true) {
      for (int ax = 0; ax < d; ++ax) x[ax] = ax == i ? 0 : ((q.center[ax] - n / 2 + off[ax]) % N + N) % N;
      rs += r_term(i, x, a, n);
      vs += v_term(i, x, a, n);
      int ax = d - 1;
      while (ax >= 0 && (ax == i || off[ax] == n - 1)) {
        if (ax != i) off[ax] = 0;
        --ax;
      }
      if (ax < 0) break;
      ++off[ax];
    }
    const double sl = std::pow(dx, d - 1);
    t.r.push_back(sl * rs / ld);
    t.v.push_back(sl * vs / ld);
    t.w.push_back(w_term(i, q) / ld);
    t.fbar.push_back(t.r[i] + t.v[i] + t.w[i] + t.wcal);
    t.total += t.fbar[i];
  }
  return t;
}

DecompositionReport Decomposer::lower_bound_report(double l) const {
  const int d = f_.d(), N = f_.N();
  const double dx = f_.params.dx();
  const double nl = l / dx;
  const int n = static_cast<int>(std::lround(nl));
  if (n < 1 || std::abs(nl - n) > 1e-9 * nl) throw InputError("l", "cube side is not a whole number of cells");
  if (n >= N) throw InputError("l", "cube side must be smaller than L");
  const double ld = std::pow(l, d), vol = std::pow(dx, d), sl = std::pow(dx, d - 1);

  DecompositionReport r;
  r.d = d;
  r.l = l;
  r.box = table_->lattice.box;
  r.truncation_bound = table_->lattice.truncation_bound();
  r.theta_g = f_.params.theta_g;
  r.c_tau = table_->c_tau;
  r.c_tau_le_one = table_->c_tau <= 1;
  for (std::size_t z = 0; z < f_.size(); ++z) r.centers.push_back(grid_.coords(z));

  const auto wc = cube_sums(wcal_density(), d, N, n);
  r.wcal_value.resize(f_.size());
  for (std::size_t z = 0; z < f_.size(); ++z) r.wcal_value[z] = vol * wc[z] / ld;
  double rhs = 0;
  for (int i = 0; i < d; ++i) {
    const auto rs = cube_sums(r_density(i), d, N, n);
    const auto vs = cube_sums(v_density(i), d, N, n);
    const auto ws = cube_sums(w_density(i), d, N, n);
    std::vector<double> rv(f_.size()), vv(f_.size()), wv(f_.size()), fb(f_.size());
    for (std::size_t z = 0; z < f_.size(); ++z) {
      rv[z] = sl * rs[z] / ld;
      vv[z] = sl * vs[z] / ld;
      wv[z] = vol * ws[z] / (2.0 * d) / ld;
      fb[z] = rv[z] + vv[z] + wv[z] + r.wcal_value[z];
    }
    rhs += vol * pairwise_sum(fb.data(), fb.size());
    r.r_value.push_back(std::move(rv));
    r.v_value.push_back(std::move(vv));
    r.w_value.push_back(std::move(wv));
    r.fbar.push_back(std::move(fb));
  }
  r.rhs = rhs / std::pow(f_.params.L, d);
  r.lhs = total_energy(f_, *table_).total;
  r.lower_bound_residual = r.lhs - r.rhs;
  return r;
}

double decomposition_lhs(const ScalarField& f, const KernelTable& table) { return total_energy(f, table).total; }

void write_report_csv(const DecompositionReport& r, const ScalarField& f, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw InputError("path", fmt::format("cannot write {}", path.string()));
  const double dx = f.params.dx();
  for (int i = 0; i < r.d; ++i) os << fmt::format("z{}_length,", i + 1);
  os << "axis,R_energy,V_energy,W_energy,Wcal_energy,Fbar_energy\n";
  for (int i = 0; i < r.d; ++i)
    for (std::size_t z = 0; z < r.centers.size(); ++z) {
      for (int a = 0; a < r.d; ++a) os << fmt::format("{:.17g},", (r.centers[z][a] + 0.5) * dx);
      os << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", i + 1, r.r_value[i][z], r.v_value[i][z],
                        r.w_value[i][z], r.wcal_value[z], r.fbar[i][z]);
    }
}

}  // namespace sf
