#include "stripeforge/energy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <mutex>

#include <fftw3.h>
#include <fmt/format.h>

namespace sf {

namespace {

constexpr std::size_t kDirectMaxCells = 4096;

// FFTW planning is not thread-safe
std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

double dxd(const Params& prm) { return std::pow(prm.dx(), prm.d); }

// d/da of segment_well in centred variables
double segment_well_da(double a, double b) {
  return -(2 * a + b) / 6 + (4 * a * a * a + 3 * a * a * b + 2 * a * b * b + b * b * b) / 5;
}

// Reference nonlocal sum, independent of summation order: squared
// differences per offset and offset sums per orbit go through stable_sum, so
// shifts, axis permutations and u -> 1-u reproduce the value bit for bit.
double nonlocal_reference(const ScalarField& f, const LatticeKernel& lat) {
  const int d = f.d(), N = f.N();
  Grid gr{d, N};
  const std::size_t n = f.size();
  std::vector<double> S(n, 0.0), sq(n);
  for (std::size_t j = 1; j < n; ++j) {
    const auto jc = gr.coords(j);
    for (std::size_t c = 0; c < n; ++c) {
      std::size_t t = c;
      for (int i = 0; i < d; ++i) t = gr.shift(t, i, jc[i]);
      const double df = f[c] - f[t];
      sq[c] = df * df;
    }
    S[j] = stable_sum(sq);
  }
  const OffsetOrbits orb = offset_orbits(d, N);
  double e = 0;
  for (std::size_t o = 0; o < orb.rep.size(); ++o) {
    std::vector<double> t;
    for (std::size_t j : orb.members[o]) t.push_back(S[j]);
    e += lat.w[orb.rep[o]] * stable_sum(std::move(t));
  }
  return std::pow(f.params.dx(), d) * e;
}

}  // namespace

double double_well(double t) {
  const double y = t - 0.5;
  const double s = 0.25 - y * y;
  return s * s;
}

double segment_well(double p, double q) {
  const double a = p - 0.5, b = q - 0.5;
  const double a2 = a * a, b2 = b * b, ab = a * b;
  const double s2 = (a2 + ab + b2) / 3;
  const double s4 = (a2 * a2 + a2 * ab + a2 * b2 + ab * b2 + b2 * b2) / 5;
  return 0.0625 - 0.5 * s2 + s4;
}

double mm_value_grad(const Params& prm, const double* u, double* grad, double scale) {
  const int d = prm.d, N = prm.N();
  const double h = prm.dx(), al = prm.alpha;
  Grid gr{d, N};
  const std::size_t n = gr.size();
  const double vol = dxd(prm);
  std::vector<double> D(d), ws(d);
  std::vector<std::size_t> nbr(d);
  double total = 0;
  for (std::size_t c = 0; c < n; ++c) {
    const double p = u[c];
    double g = 0;
    for (int i = 0; i < d; ++i) {
      nbr[i] = gr.shift(c, i, 1);
      D[i] = (u[nbr[i]] - p) / h;
      g += std::abs(D[i]);
    }
    if (g > 0) {
      double wm = 0;
      for (int i = 0; i < d; ++i) {
        ws[i] = segment_well(p, u[nbr[i]]);
        wm += std::abs(D[i]) * ws[i];
      }
      wm /= g;
      total += 3 * al * g * g + (3 / al) * wm;
      if (grad) {
        const double s = scale * vol;
        for (int i = 0; i < d; ++i) {
          const double sg = D[i] > 0 ? 1.0 : (D[i] < 0 ? -1.0 : 0.0);
          const double dD = 6 * al * g * sg + (3 / al) * sg * (ws[i] - wm) / g;
          const double dW = (3 / al) * std::abs(D[i]) / g;
          const double a = p - 0.5, b = u[nbr[i]] - 0.5;
          grad[c] += s * (-dD / h + dW * segment_well_da(a, b));
          grad[nbr[i]] += s * (dD / h + dW * segment_well_da(b, a));
        }
      }
    } else {
      total += (3 / al) * double_well(p);
      if (grad) {
        const double y = p - 0.5;
        grad[c] += scale * vol * (3 / al) * (-4 * y * (0.25 - y * y));
      }
    }
  }
  return vol * total;
}

void mm_smoothed_grad(const Params& prm, const double* u, double* grad, double scale, double mu) {
  const int d = prm.d, N = prm.N();
  const double h = prm.dx(), al = prm.alpha;
  const double m = mu / h;  // in units of D
  Grid gr{d, N};
  const double s = scale * dxd(prm);
  std::vector<double> D(d), a(d), ws(d);
  std::vector<std::size_t> nbr(d);
  for (std::size_t c = 0; c < gr.size(); ++c) {
    const double p = u[c];
    double G = 0, A = 0, wm = 0;
    for (int i = 0; i < d; ++i) {
      nbr[i] = gr.shift(c, i, 1);
      D[i] = (u[nbr[i]] - p) / h;
      a[i] = std::sqrt(D[i] * D[i] + m * m);
      ws[i] = segment_well(p, u[nbr[i]]);
      G += a[i] - m;
      A += a[i];
      wm += a[i] * ws[i];
    }
    wm /= A;
    for (int i = 0; i < d; ++i) {
      const double da = D[i] / a[i];
      const double dD = 6 * al * G * da + (3 / al) * da * (ws[i] - wm) / A;
      const double dW = (3 / al) * a[i] / A;
      const double x = p - 0.5, y = u[nbr[i]] - 0.5;
      grad[c] += s * (-dD / h + dW * segment_well_da(x, y));
      grad[nbr[i]] += s * (dD / h + dW * segment_well_da(y, x));
    }
  }
}

std::vector<double> mm_densities(const ScalarField& f, double alpha) {
  const int d = f.d(), N = f.N();
  const double h = f.params.dx();
  Grid gr{d, N};
  std::vector<double> e(f.size());
  std::vector<std::pair<double, double>> ax(d);
  for (std::size_t c = 0; c < f.size(); ++c) {
    const double p = f[c];
    for (int i = 0; i < d; ++i) {
      const double q = f[gr.shift(c, i, 1)];
      ax[i] = {std::abs(q - p) / h, segment_well(p, q)};
    }
    // axis order must not matter for the rounding
    std::sort(ax.begin(), ax.end());
    double g = 0, wm = 0;
    for (const auto& [ad, w] : ax) {
      g += ad;
      wm += ad * w;
    }
    e[c] = g > 0 ? 3 * alpha * g * g + (3 / alpha) * (wm / g) : (3 / alpha) * double_well(p);
  }
  return e;
}

double modica_mortola(const ScalarField& f, double alpha) {
  if (!(alpha > 0)) throw InputError("alpha", "alpha must be > 0");
  return dxd(f.params) * stable_sum(mm_densities(f, alpha));
}

struct Functional::FftState {
  int rank = 1;
  std::vector<int> dims;
  std::size_t ncomplex = 0;
  double* in = nullptr;
  fftw_complex* spec = nullptr;
  std::vector<double> wspec;  // real spectrum of the symmetric weights
  fftw_plan fwd = nullptr, bwd = nullptr;
  ~FftState() {
    std::lock_guard<std::mutex> lock(plan_mutex());
    if (fwd) fftw_destroy_plan(fwd);
    if (bwd) fftw_destroy_plan(bwd);
    if (in) fftw_free(in);
    if (spec) fftw_free(spec);
  }
};

Functional::Functional(const Params& prm, const LatticeKernel& lattice, double c_tau, Backend b)
    : prm_(prm), lat_(&lattice), c_tau_(c_tau), cells_(prm.cells()) {
  if (lattice.N != prm.N() || lattice.d != prm.d)
    throw InputError("table", "kernel lattice does not match the field grid");
  fft_ = b == Backend::Fft || (b == Backend::Auto && cells_ > kDirectMaxCells);
  for (std::size_t j = 1; j < cells_; ++j) wsum_ += lattice.w[j];
  if (!fft_) {
    orbits_ = offset_orbits(prm.d, prm.N());
    return;
  }
  fs_ = std::make_unique<FftState>();
  const int N = prm.N();
  fs_->rank = prm.d;
  fs_->dims.assign(prm.d, N);
  fs_->ncomplex = cells_ / N * (N / 2 + 1);
  std::lock_guard<std::mutex> lock(plan_mutex());
  fs_->in = fftw_alloc_real(cells_);
  fs_->spec = fftw_alloc_complex(fs_->ncomplex);
  fs_->fwd = fftw_plan_dft_r2c(fs_->rank, fs_->dims.data(), fs_->in, fs_->spec, FFTW_ESTIMATE);
  fs_->bwd = fftw_plan_dft_c2r(fs_->rank, fs_->dims.data(), fs_->spec, fs_->in, FFTW_ESTIMATE);
  std::memcpy(fs_->in, lattice.w.data(), cells_ * sizeof(double));
  fs_->in[0] = 0;
  fftw_execute(fs_->fwd);
  fs_->wspec.resize(fs_->ncomplex);
  for (std::size_t k = 0; k < fs_->ncomplex; ++k) fs_->wspec[k] = fs_->spec[k][0];
}

Functional::~Functional() = default;

void Functional::convolve(const double* v, double* out) {
  std::memcpy(fs_->in, v, cells_ * sizeof(double));
  fftw_execute(fs_->fwd);
  for (std::size_t k = 0; k < fs_->ncomplex; ++k) {
    fs_->spec[k][0] *= fs_->wspec[k];
    fs_->spec[k][1] *= fs_->wspec[k];
  }
  fftw_execute(fs_->bwd);
  const double inv = 1.0 / static_cast<double>(cells_);
  for (std::size_t c = 0; c < cells_; ++c) out[c] = fs_->in[c] * inv;
}

double Functional::nonlocal_direct(const double* u, double* grad, double scale) {
  const int d = prm_.d, N = prm_.N();
  Grid gr{d, N};
  const double vol = dxd(prm_);
  std::vector<int> cc(cells_ * d);
  for (std::size_t c = 0; c < cells_; ++c) {
    auto v = gr.coords(c);
    for (int i = 0; i < d; ++i) cc[c * d + i] = v[i];
  }
  std::vector<double> S(cells_, 0.0);
  std::vector<double> conv(grad ? cells_ : 0, 0.0);
  for (std::size_t j = 1; j < cells_; ++j) {
    const int* jc = &cc[j * d];
    const double wj = lat_->w[j];
    double s = 0;
    for (std::size_t c = 0; c < cells_; ++c) {
      std::size_t t = 0;
      for (int i = 0; i < d; ++i) {
        int x = cc[c * d + i] + jc[i];
        if (x >= N) x -= N;
        t = t * N + x;
      }
      const double df = u[c] - u[t];
      s += df * df;
      if (grad) conv[c] += wj * df;
    }
    S[j] = s;
  }
  double e = 0;
  for (std::size_t o = 0; o < orbits_.rep.size(); ++o) {
    double t = 0;
    for (std::size_t j : orbits_.members[o]) t += S[j];
    e += lat_->w[orbits_.rep[o]] * t;
  }
  if (grad)
    for (std::size_t c = 0; c < cells_; ++c) grad[c] += scale * 4 * vol * conv[c];
  return vol * e;
}

double Functional::nonlocal_fft(const double* u, double* grad, double scale) {
  double mean = 0;
  for (std::size_t c = 0; c < cells_; ++c) mean += u[c];
  mean /= static_cast<double>(cells_);
  std::vector<double> v(cells_), conv(cells_);
  for (std::size_t c = 0; c < cells_; ++c) v[c] = u[c] - mean;
  convolve(v.data(), conv.data());
  double s2 = 0, sc = 0;
  for (std::size_t c = 0; c < cells_; ++c) {
    s2 += v[c] * v[c];
    sc += v[c] * conv[c];
  }
  const double vol = dxd(prm_);
  if (grad)
    for (std::size_t c = 0; c < cells_; ++c) grad[c] += scale * 4 * vol * (wsum_ * v[c] - conv[c]);
  return vol * (2 * wsum_ * s2 - 2 * sc);
}

double Functional::nonlocal(const double* u, double* grad, double scale) {
  return fft_ ? nonlocal_fft(u, grad, scale) : nonlocal_direct(u, grad, scale);
}

double Functional::evaluate(const double* u, double* grad, EnergyBreakdown* parts) {
  if (grad) std::fill(grad, grad + cells_, 0.0);
  const double Ld = std::pow(prm_.L, prm_.d);
  const double wmm = (c_tau_ - 1) / Ld;
  const bool smooth = grad && smoothing_ > 0;
  const double M = mm_value_grad(prm_, u, smooth ? nullptr : grad, wmm);
  if (smooth) mm_smoothed_grad(prm_, u, grad, wmm, smoothing_);
  const double NL = nonlocal(u, grad, -1.0 / Ld);
  EnergyBreakdown br;
  br.mm_term = (c_tau_ - 1) * M / Ld;
  br.nonlocal_term = NL / Ld;
  br.total = br.mm_term - br.nonlocal_term;
  br.truncation_error_bound = lat_->truncation_bound();
  if (!std::isfinite(br.total)) throw std::runtime_error("non-finite energy");
  if (parts) *parts = br;
  return br.total;
}

struct ScreenedLaplacian::State {
  std::vector<int> dims;
  std::size_t ncomplex = 0;
  double* in = nullptr;
  fftw_complex* spec = nullptr;
  std::vector<double> inv;  // 1 / (1 + c lambda_k) / cells
  fftw_plan fwd = nullptr, bwd = nullptr;
  ~State() {
    std::lock_guard<std::mutex> lock(plan_mutex());
    if (fwd) fftw_destroy_plan(fwd);
    if (bwd) fftw_destroy_plan(bwd);
    if (in) fftw_free(in);
    if (spec) fftw_free(spec);
  }
};

ScreenedLaplacian::ScreenedLaplacian(const Params& prm, double c) : prm_(prm), c_(c), st_(std::make_unique<State>()) {
  const int d = prm.d, N = prm.N();
  const std::size_t cells = prm.cells();
  st_->dims.assign(d, N);
  const int half = N / 2 + 1;
  st_->ncomplex = cells / N * half;
  {
    std::lock_guard<std::mutex> lock(plan_mutex());
    st_->in = fftw_alloc_real(cells);
    st_->spec = fftw_alloc_complex(st_->ncomplex);
    st_->fwd = fftw_plan_dft_r2c(d, st_->dims.data(), st_->in, st_->spec, FFTW_ESTIMATE);
    st_->bwd = fftw_plan_dft_c2r(d, st_->dims.data(), st_->spec, st_->in, FFTW_ESTIMATE);
  }
  const double h2 = prm.dx() * prm.dx();
  std::vector<double> lam1(N);
  for (int k = 0; k < N; ++k) lam1[k] = (2 - 2 * std::cos(2 * M_PI * k / N)) / h2;
  st_->inv.resize(st_->ncomplex);
  // r2c layout: all axes full length except the last, which has N/2 + 1 entries
  for (std::size_t m = 0; m < st_->ncomplex; ++m) {
    std::size_t r = m;
    double lam = lam1[r % half];
    r /= half;
    for (int i = 0; i + 1 < d; ++i) {
      lam += lam1[r % N];
      r /= N;
    }
    st_->inv[m] = 1.0 / ((1 + c * lam) * static_cast<double>(cells));
  }
}

ScreenedLaplacian::~ScreenedLaplacian() = default;

void ScreenedLaplacian::solve(double* v) {
  const std::size_t cells = prm_.cells();
  std::memcpy(st_->in, v, cells * sizeof(double));
  fftw_execute(st_->fwd);
  for (std::size_t m = 0; m < st_->ncomplex; ++m) {
    st_->spec[m][0] *= st_->inv[m];
    st_->spec[m][1] *= st_->inv[m];
  }
  fftw_execute(st_->bwd);
  std::memcpy(v, st_->in, cells * sizeof(double));
}

double ScreenedLaplacian::metric(const double* s) const {
  Grid g{prm_.d, prm_.N()};
  const double h2 = prm_.dx() * prm_.dx();
  double acc = 0;
  for (std::size_t c = 0; c < g.size(); ++c) {
    double grad2 = 0;
    for (int i = 0; i < prm_.d; ++i) {
      const double dv = s[g.shift(c, i, 1)] - s[c];
      grad2 += dv * dv;
    }
    acc += s[c] * s[c] + c_ * grad2 / h2;
  }
  return acc;
}

double nonlocal_energy(const ScalarField& f, const KernelTable& table) {
  if (f.size() <= kDirectMaxCells) return nonlocal_reference(f, table.lattice);
  Functional fn(f.params, table.lattice, table.c_tau);
  return fn.nonlocal(f.values.data(), nullptr, 0.0);
}

EnergyBreakdown total_energy(const ScalarField& f, const KernelTable& table) {
  const Params& prm = f.params;
  EnergyBreakdown br;
  const double Ld = std::pow(prm.L, prm.d);
  const double M = modica_mortola(f, prm.alpha);
  const double NL = nonlocal_energy(f, table);
  br.mm_term = (table.c_tau - 1) * M / Ld;
  br.nonlocal_term = NL / Ld;
  br.total = br.mm_term - br.nonlocal_term;
  br.truncation_error_bound = table.lattice.truncation_bound();
  return br;
}

std::vector<double> energy_gradient(const ScalarField& f, const KernelTable& table) {
  Functional fn(f.params, table.lattice, table.c_tau);
  std::vector<double> g(f.size());
  fn.evaluate(f.values.data(), g.data());
  return g;
}

double perimeter_l1(const ScalarField& f) {
  Grid gr{f.d(), f.N()};
  double jumps = 0;
  for (std::size_t c = 0; c < f.size(); ++c)
    for (int i = 0; i < f.d(); ++i) jumps += std::abs(f[gr.shift(c, i, 1)] - f[c]);
  return jumps * std::pow(f.params.dx(), f.d() - 1);
}

double sharp_interface_energy(const ScalarField& f, const KernelTable& table) {
  for (std::size_t c = 0; c < f.size(); ++c)
    if (f[c] != 0.0 && f[c] != 1.0)
      throw InputError("indicator", fmt::format("sample {} = {} is not 0 or 1", c, f[c]));
  // on {0,1} values |chi(x) - chi(y)| equals its square
  const double Ld = std::pow(f.params.L, f.d());
  return ((table.c_tau - 1) * perimeter_l1(f) - nonlocal_energy(f, table)) / Ld;
}

ScalarField mollified_stripe(const Params& prm0, double h) {
  const Params prm = prm0.with_L(2 * h);
  ScalarField f = make_stripe_field(prm, 0, h, 0.0);
  Grid g{prm.d, prm.N()};
  for (std::size_t idx = 0; idx < f.size(); ++idx) {
    const double x = (g.coords(idx)[0] + 0.5) * prm.dx();
    const double s = x < h ? std::min(x, h - x) : -std::min(x - h, 2 * h - x);
    f[idx] = 1.0 / (1.0 + std::exp(-s / prm.alpha));
  }
  return f;
}

std::vector<GammaTrendPoint> gamma_trend(const Params& prm0, double h, const std::vector<double>& eps) {
  const Params base = prm0.with_L(2 * h);
  const KernelTable table = build_kernel_table(base);
  const double sharp = sharp_interface_energy(make_stripe_field(base, 0, h, 0.0), table);
  std::vector<GammaTrendPoint> out;
  for (double e : eps) {
    const Params prm = make_params(base.d, base.p, base.tau, e, base.L, base.n_per_unit);
    GammaTrendPoint pt;
    pt.eps = e;
    pt.alpha = prm.alpha;
    pt.energy = total_energy(mollified_stripe(prm, h), table).total;
    pt.sharp = sharp;
    pt.rel_error = std::abs(pt.energy - sharp) / std::abs(sharp);
    out.push_back(pt);
  }
  return out;
}

}  // namespace sf
