#include "stripeforge/minimize.hpp"

#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <tbb/parallel_for.h>

#include "stripeforge/energy.hpp"

namespace sf {

namespace {

// smoothing scale of the search direction, in units of u; see
// Functional::set_direction_smoothing
constexpr double kDirectionSmoothing = 1e-2;

RestartRecord run_one(const Params& prm, const ScalarField& start, const MinimizeOptions& opt,
                      const KernelTable& table) {
  Functional fn(prm, table.lattice, table.c_tau);
  fn.set_direction_smoothing(kDirectionSmoothing);
  Objective obj = [&](const double* u, double* g) { return fn.evaluate(u, g); };
  DescentOptions d;
  d.max_iters = opt.max_iters;
  d.rule = opt.step_rule;
  d.grad_tol = opt.grad_tol;
  d.energy_tol = opt.energy_tol;
  d.grad_scale = static_cast<double>(prm.cells());
  // screening length alpha: balances 6 alpha |grad|^2 against (3/alpha) W''
  ScreenedLaplacian P(prm, prm.alpha * prm.alpha);
  d.precondition = [&](double* v) { P.solve(v); };
  d.metric = [&](const double* v) { return P.metric(v); };
  DescentResult dr = projected_descent(obj, start.values, d);
  RestartRecord r;
  r.energy = dr.trace.back();
  r.converged = dr.converged;
  r.iters = dr.iters;
  r.pg_norm = dr.pg_norm;
  r.stop_reason = dr.stop_reason;
  r.energy_trace = std::move(dr.trace);
  r.field = ScalarField(prm);
  r.field.values = std::move(dr.x);
  return r;
}

}  // namespace

MinimizeResult minimize_field(const Params& prm, const ScalarField& init, const MinimizeOptions& opt,
                              const KernelTable& table) {
  if (opt.max_iters < 1) throw InputError("max_iters", "max_iters must be >= 1");
  if (!(opt.grad_tol > 0)) throw InputError("grad_tol", "grad_tol must be > 0");
  if (!(opt.energy_tol > 0)) throw InputError("energy_tol", "energy_tol must be > 0");
  if (opt.restarts < 0) throw InputError("restarts", "restarts must be >= 0");
  if (init.params.N() != prm.N() || init.params.d != prm.d || init.params.L != prm.L)
    throw InputError("init", "initial field does not match params");

  const int runs = 1 + opt.restarts;
  const double smooth = opt.smoothness > 0 ? opt.smoothness : 4 * prm.dx();
  std::vector<RestartRecord> rec(runs);
  tbb::parallel_for(0, runs, [&](int k) {
    if (k == 0) {
      rec[0] = run_one(prm, init, opt, table);
    } else {
      const std::uint64_t seed = opt.seed + static_cast<std::uint64_t>(k - 1);
      rec[k] = run_one(prm, make_random_field(prm, seed, smooth), opt, table);
      rec[k].seed = static_cast<std::int64_t>(seed);
    }
  });
  int best = 0;
  for (int k = 1; k < runs; ++k)
    if (rec[k].energy < rec[best].energy) best = k;
  MinimizeResult res;
  res.field = rec[best].field;
  res.energy_trace = rec[best].energy_trace;
  res.converged = rec[best].converged;
  res.best_restart = best;
  res.runs = std::move(rec);
  return res;
}

OneDimensionalityReport one_dimensionality_report(const ScalarField& f, double tol) {
  const int d = f.d(), N = f.N();
  Grid g{d, N};
  OneDimensionalityReport r;
  r.deviation.assign(d, 0.0);
  for (int i = 0; i < d; ++i) {
    std::vector<double> s(N, 0.0), s2(N, 0.0);
    std::vector<long> cnt(N, 0);
    for (std::size_t c = 0; c < f.size(); ++c) {
      const int xi = g.coords(c)[i];
      s[xi] += f[c];
      ++cnt[xi];
    }
    for (int x = 0; x < N; ++x) s[x] /= cnt[x];
    for (std::size_t c = 0; c < f.size(); ++c) {
      const int xi = g.coords(c)[i];
      const double dv = f[c] - s[xi];
      s2[xi] += dv * dv;
    }
    double acc = 0;
    for (int x = 0; x < N; ++x) acc += s2[x] / cnt[x];
    r.deviation[i] = acc / N;
  }
  for (int i = 1; i < d; ++i)
    if (r.deviation[i] < r.deviation[r.direction]) r.direction = i;
  r.is_1d = r.deviation[r.direction] < tol;
  return r;
}

void write_energy_trace(const std::vector<double>& trace, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw InputError("path", fmt::format("cannot write {}", path.string()));
  os << "iteration_count,energy_density\n";
  for (std::size_t k = 0; k < trace.size(); ++k) os << fmt::format("{},{:.17g}\n", k, trace[k]);
}

}  // namespace sf
