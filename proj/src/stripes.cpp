#include "stripeforge/stripes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <fmt/format.h>

namespace sf {

Cube make_cube(const ScalarField& f, const std::vector<int>& center, double l) {
  const int N = f.N();
  if (static_cast<int>(center.size()) != f.d()) throw InputError("center", "cube center has the wrong dimension");
  const double nl = l * f.params.n_per_unit;
  const int n = static_cast<int>(std::lround(nl));
  if (n < 1 || std::abs(nl - n) > 1e-9 * std::max(1.0, nl))
    throw InputError("l", fmt::format("cube side {} is not a whole number of cells", l));
  if (n > N) throw InputError("l", "cube side exceeds the torus");
  Cube q;
  q.cells = n;
  for (int c : center) q.center.push_back(((c % N) + N) % N);
  return q;
}

int gap_cells(double eta, double dx) {
  if (!(eta >= dx * (1 - 1e-12)))
    throw InputError("eta", fmt::format("eta = {} is below the grid spacing {}", eta, dx));
  return static_cast<int>(std::ceil(eta / dx - 1e-9));
}

std::vector<double> section_profile(const ScalarField& f, int axis, const Cube& q) {
  const int d = f.d(), N = f.N(), n = q.cells;
  Grid g{d, N};
  std::vector<double> prof(n, 0.0);
  std::vector<int> off(d, 0), x(d);
  const long per = static_cast<long>(std::pow(n, d - 1));
  // odometer over the cube; offsets measured from the cube start
  while (true) {
    for (int i = 0; i < d; ++i) x[i] = (q.center[i] - n / 2 + off[i] + N) % N;
    prof[off[axis]] += f[g.index(x)];
    int i = d - 1;
    while (i >= 0 && off[i] == n - 1) off[i--] = 0;
    if (i < 0) break;
    ++off[i];
  }
  for (auto& v : prof) v /= static_cast<double>(per);
  return prof;
}

double fit_binary_profile(const std::vector<double>& m, int gap, std::vector<int>* pattern) {
  const int n = static_cast<int>(m.size());
  gap = std::max(gap, 1);
  // state (v, r): current value v, current run length r capped at gap; the
  // first run starts saturated because its length is unconstrained
  const double inf = std::numeric_limits<double>::infinity();
  const int S = 2 * gap;
  auto id = [gap](int v, int r) { return v * gap + (r - 1); };
  std::vector<double> cost(S, inf), next(S);
  std::vector<std::vector<int>> from(n, std::vector<int>(S, -1));
  for (int v = 0; v < 2; ++v) cost[id(v, gap)] = v ? 1.0 - m[0] : m[0];
  for (int k = 1; k < n; ++k) {
    std::fill(next.begin(), next.end(), inf);
    for (int v = 0; v < 2; ++v) {
      const double c = v ? 1.0 - m[k] : m[k];
      for (int r = 1; r <= gap; ++r) {
        const double base = cost[id(v, r)];
        if (base == inf) continue;
        const int rn = std::min(r + 1, gap);
        if (base + c < next[id(v, rn)]) {
          next[id(v, rn)] = base + c;
          from[k][id(v, rn)] = id(v, r);
        }
        if (r == gap) {
          const double cw = v ? m[k] : 1.0 - m[k];
          if (base + cw < next[id(1 - v, 1)]) {
            next[id(1 - v, 1)] = base + cw;
            from[k][id(1 - v, 1)] = id(v, r);
          }
        }
      }
    }
    cost.swap(next);
  }
  int best = 0;
  for (int s = 1; s < S; ++s)
    if (cost[s] < cost[best]) best = s;
  if (pattern) {
    pattern->assign(n, 0);
    int s = best;
    for (int k = n - 1; k >= 0; --k) {
      (*pattern)[k] = s / gap;
      if (k > 0) s = from[k][s];
    }
  }
  return cost[best];
}

StripeFit stripe_fit_distance(const ScalarField& f, int axis, const Cube& q, double eta) {
  if (axis < 0 || axis >= f.d()) throw InputError("axis", "axis out of range");
  const double dx = f.params.dx();
  const int gap = gap_cells(eta, dx);
  const auto prof = section_profile(f, axis, q);
  StripeFit s;
  s.direction = axis;
  s.eta = eta;
  const double c = fit_binary_profile(prof, gap, &s.pattern);
  s.distance = c / q.cells;
  const int start = q.center[axis] - q.cells / 2;
  int last = -1;
  for (int k = 1; k < q.cells; ++k) {
    if (s.pattern[k] != s.pattern[k - 1]) {
      if (last >= 0 && k - last < gap) s.admissible = false;
      last = k;
      const double pos = std::fmod((start + k) * dx + 2 * f.params.L, f.params.L);
      s.transitions.push_back(pos);
    }
  }
  std::sort(s.transitions.begin(), s.transitions.end());
  return s;
}

DirectionDistance direction_distance(const ScalarField& f, const Cube& q, double eta) {
  DirectionDistance r;
  for (int i = 0; i < f.d(); ++i) {
    r.per_axis.push_back(stripe_fit_distance(f, i, q, eta).distance);
    if (r.per_axis[i] < r.per_axis[r.best_direction]) r.best_direction = i;
  }
  r.d_eta = r.per_axis[r.best_direction];
  return r;
}

CubeClassification classify_cubes(const ScalarField& f, double l, double eta, double sigma, double stride) {
  const int d = f.d(), N = f.N();
  if (!(l < f.params.L)) throw InputError("l", "cube side must be smaller than L");
  const int st = static_cast<int>(std::lround(stride * f.params.n_per_unit));
  if (st < 1) throw InputError("stride", "stride must be at least one grid spacing");
  CubeClassification out;
  out.sigma = sigma;
  out.eta = eta;
  out.l = l;
  const int per = (N + st - 1) / st;
  std::vector<int> k(d, 0);
  while (true) {
    std::vector<int> c(d);
    for (int i = 0; i < d; ++i) c[i] = k[i] * st;
    const Cube q = make_cube(f, c, l);
    const DirectionDistance dd = direction_distance(f, q, eta);
    int close = 0, which = 0;
    for (int i = 0; i < d; ++i)
      if (dd.per_axis[i] <= sigma) {
        ++close;
        which = i;
      }
    out.centers.push_back(c);
    out.distances.push_back(dd.per_axis);
    out.labels.push_back(close >= 2 ? -1 : (close == 0 ? 0 : which + 1));
    int i = d - 1;
    while (i >= 0 && k[i] == per - 1) k[i--] = 0;
    if (i < 0) break;
    ++k[i];
  }
  return out;
}

void write_classification(const CubeClassification& c, const ScalarField& f, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw InputError("path", fmt::format("cannot write {}", path.string()));
  const int d = f.d();
  for (int i = 0; i < d; ++i) os << fmt::format("x{}_length,", i + 1);
  for (int i = 0; i < d; ++i) os << fmt::format("D{}_fraction,", i + 1);
  os << "label\n";
  const double dx = f.params.dx();
  for (std::size_t k = 0; k < c.labels.size(); ++k) {
    for (int i = 0; i < d; ++i) os << fmt::format("{:.17g},", (c.centers[k][i] + 0.5) * dx);
    for (int i = 0; i < d; ++i) os << fmt::format("{:.17g},", c.distances[k][i]);
    const int lab = c.labels[k];
    os << (lab == -1 ? std::string("A-1") : fmt::format("A{}", lab)) << '\n';
  }
}

}  // namespace sf
