#include "stripeforge/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>

#include <boost/math/quadrature/gauss.hpp>

namespace sf {

namespace {

constexpr int kTaylorTerms = 18;

double binom(int n, int k) {
  double r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

double KernelShape::operator()(double s) const { return kappa * std::pow(s + a, -expo); }

double KernelShape::mass() const {
  return std::ldexp(kappa, dim) * std::exp(std::lgamma(expo - dim) - std::lgamma(expo)) *
         std::pow(a, dim - expo);
}

double KernelShape::first_moment() const {
  const double q = expo - dim + 1;
  const double km = std::ldexp(kappa, dim - 1) * std::exp(std::lgamma(q) - std::lgamma(expo));
  return 2 * km * std::pow(a, 2 - q) / ((q - 1) * (q - 2));
}

double KernelShape::mass_outside_box(double b) const {
  // inclusion-exclusion over the coordinates exceeding b, per orthant
  double prod = 1;
  for (int i = 1; i <= dim; ++i) prod *= expo - i;
  double acc = 0;
  for (int j = 1; j <= dim; ++j) {
    const double h = std::pow(j * b + a, dim - expo) / prod;
    acc += ((j % 2) ? 1.0 : -1.0) * binom(dim, j) * h;
  }
  return std::ldexp(kappa, dim) * acc;
}

HatWeights::HatWeights(const KernelShape& shape, double dx, long kmax)
    : shape_(shape), dx_(dx), kmax_(kmax) {
  const int dim = shape_.dim;
  // E[Y^n]/n! for Y = sum of hat variables (nonzero offsets) and folded hat
  // variables |X| (zero offsets), in cell units.
  std::vector<double> mx(kTaylorTerms + 1), mabs(kTaylorTerms + 1);
  for (int n = 0; n <= kTaylorTerms; ++n) {
    mabs[n] = 2.0 / ((n + 1.0) * (n + 2.0));
    mx[n] = (n % 2) ? 0.0 : mabs[n];
  }
  moments_.assign(dim + 1, {});
  for (int z = 0; z <= dim; ++z) {
    std::vector<double> m(kTaylorTerms + 1, 0.0);
    m[0] = 1;
    for (int v = 0; v < dim; ++v) {
      const auto& mv = v < dim - z ? mx : mabs;
      std::vector<double> nm(kTaylorTerms + 1, 0.0);
      for (int n = 0; n <= kTaylorTerms; ++n)
        for (int j = 0; j <= n; ++j) nm[n] += binom(n, j) * m[j] * mv[n - j];
      m = nm;
    }
    double fact = 1;
    for (int n = 0; n <= kTaylorTerms; ++n) {
      if (n > 0) fact *= n;
      m[n] /= fact;
    }
    moments_[z] = m;
  }
  table_.assign(dim + 1, {});
  for (int z = 0; z <= dim; ++z) {
    const int nz = dim - z;
    const long kmaxK = nz == 0 ? 0 : static_cast<long>(dim) * kmax_;
    table_[z].assign(kmaxK + 1, 0.0);
    for (long K = nz; K <= kmaxK; ++K) table_[z][K] = compute(K, z);
  }
}

double HatWeights::operator()(long K, int zeros) const { return table_[zeros][K]; }

double HatWeights::compute(long K, int zeros) const {
  const double dist = K + shape_.a / dx_;  // distance to the singularity, cells
  if (dist >= 12.0 * shape_.dim) return taylor(K, zeros);
  return quadrature(K, zeros);
}

double HatWeights::taylor(long K, int zeros) const {
  const double s = K * dx_ + shape_.a;
  double term = shape_.kappa * std::pow(s, -shape_.expo);
  const auto& m = moments_[zeros];
  double acc = term * m[0];
  for (int n = 1; n <= kTaylorTerms; ++n) {
    term *= -(shape_.expo + n - 1) * dx_ / s;
    acc += term * m[n];
  }
  return acc * std::pow(dx_, shape_.dim);
}

double HatWeights::quadrature(long K, int zeros) const {
  const int dim = shape_.dim;
  const double e = shape_.expo, a = shape_.a, kap = shape_.kappa, h = dx_;
  auto G1 = [&](double s) { return kap * std::pow(s + a, 1 - e) / (1 - e); };
  auto G2 = [&](double s) { return kap * std::pow(s + a, 2 - e) / ((1 - e) * (2 - e)); };
  // closed-form hat integral along one coordinate with c already accumulated
  auto hat1d = [&](double c, long k) {
    if (k == 0) return 2 * (G2(c + h) - G2(c) - h * G1(c)) / h;
    return (G2(c + (k + 1) * h) - 2 * G2(c + k * h) + G2(c + (k - 1) * h)) / h;
  };

  const int nz = dim - zeros;
  std::vector<long> k(dim, 0);
  if (nz > 0) {
    k[0] = K - (nz - 1);
    for (int i = 1; i < nz; ++i) k[i] = 1;
  }
  if (dim == 1) return hat1d(0.0, k[0]);

  using GL = boost::math::quadrature::gauss<double, 20>;
  std::function<double(int, double)> integ = [&](int level, double c) -> double {
    if (level == dim - 1) return hat1d(c, k[level]);
    struct Piece {
      double lo, hi;
      double w0, w1;  // weight is linear: w0 at lo, w1 at hi
    };
    std::vector<Piece> pieces;
    if (k[level] == 0) {
      pieces.push_back({0.0, h, 2.0, 0.0});
    } else {
      const double kc = k[level] * h;
      pieces.push_back({kc - h, kc, 0.0, 1.0});
      pieces.push_back({kc, kc + h, 1.0, 0.0});
    }
    double total = 0;
    for (const auto& pc : pieces) {
      auto f = [&](double x) {
        const double t = (x - pc.lo) / (pc.hi - pc.lo);
        return (pc.w0 + (pc.w1 - pc.w0) * t) * integ(level + 1, c + x);
      };
      // geometric grading towards a nearby singularity at x = -(c + a)
      const double len = pc.hi - pc.lo;
      const double D = pc.lo + c + a;
      double upper = pc.hi;
      double sub = len;
      while (D < sub && sub > 1e-14 * len) {
        sub *= 0.5;
        total += GL::integrate(f, pc.lo + sub, upper);
        upper = pc.lo + sub;
      }
      total += GL::integrate(f, pc.lo, upper);
    }
    return total;
  };
  return integ(0, 0.0);
}

double LatticeKernel::total() const { return std::accumulate(w.begin(), w.end(), 0.0); }

long default_box(int d, int N, double dx, double r_cut, double budget) {
  const long want = static_cast<long>(std::ceil(r_cut / dx));
  long cap = d == 1 ? 2000000L
                    : static_cast<long>((std::pow(budget, 1.0 / d) - 1) / 2);
  return std::max<long>(N, std::min(want, cap));
}

OffsetOrbits offset_orbits(int d, int N) {
  std::size_t total = 1;
  for (int i = 0; i < d; ++i) total *= N;
  std::map<std::size_t, std::vector<std::size_t>> groups;
  std::vector<int> m(d);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t r = idx;
    for (int i = d - 1; i >= 0; --i) {
      const int c = static_cast<int>(r % N);
      r /= N;
      m[i] = std::min(c, N - c);
    }
    std::sort(m.begin(), m.end());
    std::size_t key = 0;
    for (int i = 0; i < d; ++i) key = key * N + m[i];
    groups[key].push_back(idx);
  }
  OffsetOrbits o;
  for (auto& [key, mem] : groups) {
    o.rep.push_back(key);
    o.members.push_back(std::move(mem));
  }
  return o;
}

LatticeKernel build_lattice(std::shared_ptr<const HatWeights> hat, int d, int N, long box) {
  LatticeKernel lk;
  lk.d = d;
  lk.N = N;
  lk.dx = hat->dx();
  lk.box = box;
  lk.hat = hat;
  std::size_t total = 1;
  for (int i = 0; i < d; ++i) total *= N;
  std::vector<double> w(total, 0.0);

  // odometer over the outer d-1 coordinates of the box; innermost is a line
  std::vector<long> k(d, -box);
  const HatWeights& W = *hat;
  while (true) {
    long Kp = 0;
    int zp = 0;
    std::size_t base = 0;
    for (int i = 0; i + 1 < d; ++i) {
      Kp += std::labs(k[i]);
      zp += k[i] == 0;
      base = base * N + static_cast<std::size_t>(((k[i] % N) + N) % N);
    }
    base *= N;
    for (long kl = -box; kl <= box; ++kl) {
      const long K = Kp + std::labs(kl);
      const int z = zp + (kl == 0);
      if (K == 0 && z != d) continue;
      w[base + static_cast<std::size_t>(((kl % N) + N) % N)] += W(K, z);
    }
    int i = d - 2;
    while (i >= 0 && k[i] == box) k[i--] = -box;
    if (i < 0) break;
    ++k[i];
  }

  // exact hyperoctahedral symmetry: every orbit takes its representative's value
  const OffsetOrbits orb = offset_orbits(d, N);
  for (std::size_t o = 0; o < orb.rep.size(); ++o) {
    const double v = w[orb.rep[o]];
    for (std::size_t j : orb.members[o]) w[j] = v;
  }
  lk.far_mass = hat->shape().mass_outside_box((box + 0.5) * lk.dx);
  lk.far_per_offset = lk.far_mass / static_cast<double>(total);
  for (auto& x : w) x += lk.far_per_offset;
  lk.w = std::move(w);
  return lk;
}

}  // namespace sf
