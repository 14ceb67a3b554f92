#include "stripeforge/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <set>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <tbb/global_control.h>

#include "stripeforge/core.hpp"
#include "stripeforge/decompose.hpp"
#include "stripeforge/energy.hpp"
#include "stripeforge/kernel.hpp"
#include "stripeforge/manifest.hpp"
#include "stripeforge/minimize.hpp"
#include "stripeforge/onedim.hpp"
#include "stripeforge/stripes.hpp"
#include "stripeforge/verify.hpp"

namespace fs = std::filesystem;

namespace sf {
namespace {

struct Key {
  std::string section, key, def, help;
  std::string full() const { return section + "." + key; }
};

std::string num(double v) { return fmt::format("{}", v); }

std::vector<Key> params_keys(int d, double p, double tau, double eps, double L, double n, bool with_eps = true,
                             bool with_L = true) {
  std::vector<Key> k = {{"params", "d", num(d), "dimension"},
                        {"params", "p", num(p), "kernel exponent, p > d + 1"},
                        {"params", "tau", num(tau), "kernel parameter tau > 0"}};
  if (with_eps) k.push_back({"params", "eps", num(eps), "interface parameter eps > 0"});
  if (with_L) k.push_back({"params", "L", num(L), "torus side length"});
  k.push_back({"params", "n", num(n), "grid cells per unit length"});
  return k;
}

std::vector<Key> onedim_keys() {
  return {{"solve1d", "h_min", "0.2", "lower end of the period bracket"},
          {"solve1d", "h_max", "5", "upper end of the period bracket"},
          {"solve1d", "max_iters", "20000", "profile solver iterations"},
          {"solve1d", "grad_tol", "1e-08", "profile solver gradient tolerance"},
          {"solve1d", "coarse_points", "24", "coarse sweep points over the bracket"}};
}

std::vector<Key> field_keys() {
  return {{"field", "input", "", "field file; empty: random field"},
          {"field", "seed", "1", "seed of the random field"},
          {"field", "smoothness", "0", "correlation length of the random field; 0: 4 cells"}};
}

std::string join_seeds(const std::vector<std::uint64_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::vector<Key> verify_keys() {
  const VerifyConfig c = default_verify_config();
  return {{"verify", "upsilon", num(c.upsilon), "slice lemma constant in (1, 17/16]"},
          {"verify", "eta0", num(c.eta0), "0: largest admissible value"},
          {"verify", "delta0", num(c.delta0), "0: max(tau^(1/beta), 2 dx)"},
          {"verify", "delta", num(c.delta), "delta of the slice lemmas"},
          {"verify", "delta_pos2", num(c.delta_pos2), "delta of the two-point inequality"},
          {"verify", "sigma", num(c.sigma), "classification threshold"},
          {"verify", "nu", num(c.nu), "rigidity threshold"},
          {"verify", "l_fraction", num(c.l_fraction), "cube side as a fraction of L"},
          {"verify", "seeds", join_seeds(c.seeds), "seed list, e.g. 1-20 or 1,5,9"},
          {"verify", "sizes_1d", join_ints(c.sizes_1d), "grid sizes of the d=1 instances"},
          {"verify", "sizes_2d", join_ints(c.sizes_2d), "grid sizes of the d=2 instances"},
          {"verify", "pair_samples", std::to_string(c.pair_samples), "samples per random field"},
          {"verify", "p_1d", num(c.p_1d), "p of the d=1 instances"},
          {"verify", "p_2d", num(c.p_2d), "p of the d=2 instances"},
          {"verify", "tau", num(c.tau), "tau of the random instances"},
          {"verify", "eps", num(c.eps), "eps of the random instances"},
          {"verify", "lemma_tau", num(c.lemma_tau), "tau of the fine lemma grid"},
          {"verify", "lemma_eps", num(c.lemma_eps), "eps of the fine lemma grid"},
          {"verify", "lemma_n_per_unit", num(c.lemma_n_per_unit), "cells per unit of the lemma grid"},
          {"verify", "lemma_cells", std::to_string(c.lemma_cells), "cells of the lemma grid"},
          {"verify", "fault_injection", "false", "replace omega by a wrong polynomial"}};
}

struct Command {
  std::string name, help;
  std::vector<Key> keys;
  bool open_tolerances = false;  // accepts [tolerances] check = value
};

std::vector<Command> commands() {
  std::vector<Command> cs;
  auto cat = [](std::vector<Key> a, const std::vector<Key>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
  };
  cs.push_back({"solve1d", "optimal period and profile of the one-dimensional problem",
                cat(params_keys(1, 3, 0.05, 0.05, 1, 50, true, false), onedim_keys())});
  cs.push_back({"minimize", "projected-gradient minimization with random restarts",
                cat(cat(cat(params_keys(2, 4, 0.2, 0.1, 0, 32), onedim_keys()), field_keys()),
                    {{"minimize", "h_star", "0", "half period; 0: from the one-dimensional search"},
                     {"minimize", "restarts", "8", "random restarts besides the initial field"},
                     {"minimize", "max_iters", "5000", "descent iterations per run"},
                     {"minimize", "grad_tol", "1e-06", "projected gradient tolerance"},
                     {"minimize", "energy_tol", "1e-13", "relative energy change tolerance"},
                     {"minimize", "step", "bb", "step rule: bb, backtracking or fixed"},
                     {"minimize", "eta", "0", "stripe distance gap; 0: h*/4"},
                     {"minimize", "one_dim_tol", "0.01", "deviation threshold of the 1D report"}})});
  cs.push_back({"decompose", "localized lower-bound decomposition of a field",
                cat(cat(params_keys(2, 4, 0.2, 0.3, 1, 16), field_keys()),
                    {{"decompose", "l", "0", "cube side; 0: L/4"},
                     {"decompose", "tol", "1e-06", "allowed negative lower-bound residual"}})});
  const std::vector<Key> stripe_common = {{"stripes", "l", "0", "cube side; 0: L/4"},
                                          {"stripes", "eta", "0", "minimal stripe width; 0: l/4"},
                                          {"stripes", "stride", "0", "spacing of cube centers; 0: l"}};
  cs.push_back({"stripedist", "stripe distance of cubes",
                cat(cat(params_keys(2, 4, 0.2, 0.3, 1, 16), field_keys()), stripe_common)});
  cs.push_back({"classify", "cube classification",
                cat(cat(cat(params_keys(2, 4, 0.2, 0.3, 1, 16), field_keys()), stripe_common),
                    {{"stripes", "sigma", "0.05", "classification threshold"}})});
  cs.push_back({"verify", "property suite of the positivity and slice estimates", verify_keys(), true});
  cs.push_back({"gamma-check", "mollified stripe energies against the sharp-interface limit",
                cat(params_keys(1, 3, 0.8, 0, 0, 500, false, false),
                    {{"gamma", "half_period", "4", "stripe half period"},
                     {"gamma", "eps_list", "0.2,0.1,0.05,0.025", "decreasing eps sequence"},
                     {"gamma", "max_rel_error", "0.1", "bound on the last relative error"}})});
  return cs;
}

const Command* find_command(const std::vector<Command>& cs, const std::string& name) {
  for (auto& c : cs)
    if (c.name == name) return &c;
  return nullptr;
}

// ---------------------------------------------------------------------------
// resolved configuration with typed, key-naming accessors

struct Resolved {
  const Command* cmd = nullptr;
  Config cfg;
  std::set<std::string> explicit_keys;

  const std::string& str(const std::string& s, const std::string& k) const {
    const std::string* v = cfg.find(s, k);
    if (!v) throw InputError(s + "." + k, "missing value");
    return *v;
  }
  double real(const std::string& s, const std::string& k) const {
    const std::string& v = str(s, k);
    try {
      std::size_t pos = 0;
      const double x = std::stod(v, &pos);
      if (pos == v.size() && std::isfinite(x)) return x;
    } catch (const std::exception&) {
    }
    throw InputError(s + "." + k, fmt::format("'{}' is not a finite number", v));
  }
  long integer(const std::string& s, const std::string& k) const {
    const std::string& v = str(s, k);
    try {
      std::size_t pos = 0;
      const long x = std::stol(v, &pos);
      if (pos == v.size()) return x;
    } catch (const std::exception&) {
    }
    throw InputError(s + "." + k, fmt::format("'{}' is not an integer", v));
  }
  bool flag(const std::string& s, const std::string& k) const {
    const std::string& v = str(s, k);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw InputError(s + "." + k, fmt::format("'{}' is not a boolean", v));
  }
  std::vector<double> reals(const std::string& s, const std::string& k) const {
    std::vector<double> out;
    const std::string& v = str(s, k);
    std::size_t b = 0;
    while (b <= v.size()) {
      const std::size_t e = std::min(v.find(',', b), v.size());
      try {
        std::size_t pos = 0;
        const std::string item = v.substr(b, e - b);
        out.push_back(std::stod(item, &pos));
        if (pos != item.size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw InputError(s + "." + k, fmt::format("'{}' is not a comma-separated number list", v));
      }
      b = e + 1;
    }
    return out;
  }
  // comma-separated integers and inclusive ranges a-b
  std::vector<long> ints(const std::string& s, const std::string& k) const {
    std::vector<long> out;
    const std::string& v = str(s, k);
    std::size_t b = 0;
    while (b <= v.size()) {
      const std::size_t e = std::min(v.find(',', b), v.size());
      const std::string item = v.substr(b, e - b);
      try {
        std::size_t pos = 0;
        const long lo = std::stol(item, &pos);
        long hi = lo;
        if (pos < item.size() && item[pos] == '-') {
          std::size_t pos2 = 0;
          hi = std::stol(item.substr(pos + 1), &pos2);
          pos += 1 + pos2;
        }
        if (pos != item.size() || hi < lo || hi - lo > 1000000) throw std::invalid_argument("bad");
        for (long x = lo; x <= hi; ++x) out.push_back(x);
      } catch (const std::exception&) {
        throw InputError(s + "." + k, fmt::format("'{}' is not an integer list", v));
      }
      b = e + 1;
    }
    return out;
  }
};

Params params_from(const Resolved& r, std::optional<double> L_override = {}) {
  const long d = r.integer("params", "d");
  if (d < 1 || d > 3) throw InputError("params.d", "d must be 1, 2 or 3");
  const double eps = r.cfg.has("params", "eps") ? r.real("params", "eps") : 1.0;
  const double L = L_override ? *L_override : r.cfg.has("params", "L") ? r.real("params", "L") : 1.0;
  return make_params(static_cast<int>(d), r.real("params", "p"), r.real("params", "tau"), eps, L,
                     r.real("params", "n"));
}

// ---------------------------------------------------------------------------

struct Ctx {
  fs::path dir;
  RunManifest man;
  std::ostream& out;
};

void write_text(Ctx& ctx, const std::string& name, const std::string& text, bool is_volatile = false) {
  const fs::path p = ctx.dir / name;
  fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os) throw InputError("output", fmt::format("cannot write {}", p.string()));
  os << text;
  os.close();
  ctx.man.add_output(ctx.dir, name, is_volatile);
}

void write_field(Ctx& ctx, const std::string& name, const ScalarField& f) {
  fs::create_directories((ctx.dir / name).parent_path());
  save_field(f, ctx.dir / name, FieldFormat::Binary);
  ctx.man.add_output(ctx.dir, name);
}

template <class Writer>
void write_with(Ctx& ctx, const std::string& name, Writer&& w) {
  fs::create_directories((ctx.dir / name).parent_path());
  w(ctx.dir / name);
  ctx.man.add_output(ctx.dir, name);
}

std::string kv(const std::string& k, const std::string& v) { return k + " = " + v + "\n"; }
std::string kv(const std::string& k, double v) { return kv(k, fmt::format("{:.17g}", v)); }

double same_value(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); }

// The field named by field.input, or a random field.  A loaded field fixes the
// grid and kernel parameters; explicit params must agree with it.
ScalarField field_source(Resolved& r, Ctx& ctx) {
  const std::string& path = r.str("field", "input");
  if (path.empty()) {
    const Params prm = params_from(r);
    const long seed = r.integer("field", "seed");
    if (seed < 0) throw InputError("field.seed", "seed must be >= 0");
    double sm = r.real("field", "smoothness");
    if (sm == 0) sm = 4 * prm.dx();
    if (sm < prm.dx()) throw InputError("field.smoothness", "smoothness must be at least one grid spacing");
    return make_random_field(prm, static_cast<std::uint64_t>(seed), sm);
  }
  ScalarField f;
  try {
    f = load_field(path);
  } catch (const FieldFormatError& e) {
    throw InputError("field.input", fmt::format("{} (record {})", e.what(), e.record()));
  } catch (const InputError& e) {
    throw InputError("field.input", e.what());
  }
  ctx.man.inputs.emplace_back(path, file_hash(path));
  const Params& q = f.params;
  const std::vector<std::pair<std::string, double>> file_vals = {
      {"d", q.d}, {"p", q.p}, {"tau", q.tau}, {"eps", q.eps}, {"L", q.L}, {"n", q.n_per_unit}};
  for (auto& [k, v] : file_vals) {
    if (!r.cfg.has("params", k)) continue;
    if (r.explicit_keys.count("params." + k) && !same_value(r.real("params", k), v))
      throw InputError("params." + k, fmt::format("{} conflicts with the input field value {}", r.str("params", k), v));
    r.cfg.set("params", k, num(v));
  }
  return f;
}

// ---------------------------------------------------------------------------
// subcommands

OneDimOptions onedim_options(const Resolved& r) {
  OneDimOptions o;
  o.max_iters = static_cast<int>(r.integer("solve1d", "max_iters"));
  o.grad_tol = r.real("solve1d", "grad_tol");
  o.coarse_points = static_cast<int>(r.integer("solve1d", "coarse_points"));
  if (o.max_iters < 1) throw InputError("solve1d.max_iters", "must be >= 1");
  if (!(o.grad_tol > 0)) throw InputError("solve1d.grad_tol", "must be > 0");
  if (o.coarse_points < 3) throw InputError("solve1d.coarse_points", "must be >= 3");
  return o;
}

struct PeriodOutcome {
  double h = 0, c = 0;
  Profile1D profile;
  std::vector<std::pair<double, double>> trace;
  bool edge = false;
  bool converged = true;
};

PeriodOutcome period_search(const Resolved& r, const Params& prm, Ctx& ctx) {
  const double h_min = r.real("solve1d", "h_min"), h_max = r.real("solve1d", "h_max");
  if (!(h_min > 0)) throw InputError("solve1d.h_min", "must be > 0");
  if (!(h_max > h_min)) throw InputError("solve1d.h_max", "must exceed solve1d.h_min");
  const OneDimOptions opt = onedim_options(r);
  PeriodOutcome o;
  try {
    OneDimResult res = optimal_period_search(prm, h_min, h_max, opt);
    o.h = res.h_star;
    o.c = res.c_star;
    o.profile = res.profile;
    o.trace = res.search_trace;
    o.converged = res.converged;
  } catch (const BracketError& e) {
    o.trace = e.trace();
    auto best = std::min_element(o.trace.begin(), o.trace.end(),
                                 [](auto& a, auto& b) { return a.second < b.second; });
    o.h = best->first;
    o.profile = optimal_profile_for_period(prm, o.h, opt);
    o.c = o.profile.energy_density;
    o.edge = true;
    ctx.man.warnings.push_back(fmt::format(
        "minimum of the period search at the bracket edge h = {:.6g} (energy {:.6g}); enlarge [solve1d.h_min, "
        "solve1d.h_max]",
        o.h, o.c));
  }
  return o;
}

int cmd_solve1d(Resolved& r, Ctx& ctx) {
  const Params prm = params_from(r);
  const PeriodOutcome o = period_search(r, prm, ctx);
  write_with(ctx, "search_trace.csv", [&](const fs::path& p) { write_search_trace(o.trace, p); });
  write_field(ctx, "profile.field", extend_profile(o.profile, prm, 0, 1));
  std::string csv = "x_length,u_fraction\n";
  const std::vector<double> full = reflect_extend(o.profile.samples);
  for (std::size_t j = 0; j < full.size(); ++j) csv += fmt::format("{:.17g},{:.17g}\n", (j + 0.5) * prm.dx(), full[j]);
  write_text(ctx, "profile.csv", csv);
  std::string s = kv("h_star", o.h) + kv("c_star", o.c) + kv("period", 2 * o.h) +
                  kv("symmetry_residual", o.profile.symmetry_residual) + kv("bracket_edge", o.edge ? "true" : "false") +
                  kv("converged", o.converged ? "true" : "false");
  write_text(ctx, "summary.txt", s);
  ctx.out << s;
  return 0;
}

StepRule step_rule(const std::string& s) {
  if (s == "bb") return StepRule::BarzilaiBorwein;
  if (s == "backtracking") return StepRule::Backtracking;
  if (s == "fixed") return StepRule::Fixed;
  throw InputError("minimize.step", fmt::format("unknown step rule '{}' (bb, backtracking, fixed)", s));
}

int cmd_minimize(Resolved& r, Ctx& ctx) {
  // the one-dimensional problem does not depend on L
  const Params base = params_from(r, 1.0);
  const double h_given = r.real("minimize", "h_star");
  if (h_given < 0) throw InputError("minimize.h_star", "must be >= 0");
  double h_star = h_given, c_star = 0;
  if (h_given > 0) {
    const Profile1D prof = optimal_profile_for_period(base, h_given, onedim_options(r));
    c_star = prof.energy_density;
  } else {
    const PeriodOutcome o = period_search(r, base, ctx);
    h_star = o.h;
    c_star = o.c;
    write_with(ctx, "search_trace.csv", [&](const fs::path& p) { write_search_trace(o.trace, p); });
  }
  double L = r.real("params", "L");
  if (L == 0) {
    L = 2 * h_star;
    r.cfg.set("params", "L", num(L));
  }
  const double ratio = L / (2 * h_star);
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio || std::round(ratio) < 1)
    ctx.man.warnings.push_back(
        fmt::format("L = {} is not a multiple of the optimal period 2h* = {:.6g} (ratio {:.6g})", L, 2 * h_star, ratio));
  const ScalarField init = field_source(r, ctx);
  const Params prm = init.params;
  const KernelTable table = build_kernel_table(prm);

  MinimizeOptions opt;
  opt.max_iters = static_cast<int>(r.integer("minimize", "max_iters"));
  opt.grad_tol = r.real("minimize", "grad_tol");
  opt.energy_tol = r.real("minimize", "energy_tol");
  opt.step_rule = step_rule(r.str("minimize", "step"));
  opt.restarts = static_cast<int>(r.integer("minimize", "restarts"));
  opt.seed = static_cast<std::uint64_t>(r.integer("field", "seed")) + 1;
  opt.smoothness = r.real("field", "smoothness");
  if (opt.max_iters < 1) throw InputError("minimize.max_iters", "must be >= 1");
  if (opt.restarts < 0) throw InputError("minimize.restarts", "must be >= 0");
  const MinimizeResult res = minimize_field(prm, init, opt, table);

  std::string runs_csv = "run_index,seed,energy_density,converged,iteration_count,pg_norm,stop_reason\n";
  for (std::size_t k = 0; k < res.runs.size(); ++k) {
    const RestartRecord& rr = res.runs[k];
    const std::string sub = fmt::format("run_{:02d}", k);
    write_with(ctx, sub + "/energy_trace.csv", [&](const fs::path& p) { write_energy_trace(rr.energy_trace, p); });
    write_field(ctx, sub + "/field.field", rr.field);
    runs_csv += fmt::format("{},{},{:.17g},{},{},{:.6g},{}\n", k, rr.seed, rr.energy, rr.converged ? 1 : 0, rr.iters,
                            rr.pg_norm, rr.stop_reason);
  }
  write_text(ctx, "runs.csv", runs_csv);
  write_field(ctx, "best.field", res.field);
  write_with(ctx, "energy_trace.csv", [&](const fs::path& p) { write_energy_trace(res.energy_trace, p); });

  double eta = r.real("minimize", "eta");
  if (eta == 0) eta = h_star / 4;
  const OneDimensionalityReport od = one_dimensionality_report(res.field, r.real("minimize", "one_dim_tol"));
  std::vector<int> center(prm.d, prm.N() / 2);
  const DirectionDistance dd = direction_distance(res.field, make_cube(res.field, center, prm.L), eta);
  const double energy = res.runs[res.best_restart].energy;
  std::string s = kv("energy", energy) + kv("best_run", std::to_string(res.best_restart)) + kv("h_star", h_star) +
                  kv("c_star", c_star) + kv("L", prm.L) +
                  kv("relative_gap", c_star != 0 ? std::abs(energy - c_star) / std::abs(c_star) : INFINITY) +
                  kv("stripe_distance", dd.d_eta) + kv("stripe_eta", eta) +
                  kv("stripe_direction", std::to_string(dd.best_direction + 1)) +
                  kv("one_dimensional", od.is_1d ? "true" : "false") +
                  kv("one_dim_direction", std::to_string(od.direction + 1)) +
                  kv("one_dim_deviation", od.deviation[od.direction]) + kv("converged", res.converged ? "true" : "false");
  write_text(ctx, "summary.txt", s);
  ctx.out << s;
  return 0;
}

int cmd_decompose(Resolved& r, Ctx& ctx) {
  const ScalarField f = field_source(r, ctx);
  double l = r.real("decompose", "l");
  if (l == 0) l = f.params.L / 4;
  const double tol = r.real("decompose", "tol");
  const KernelTable table = build_kernel_table(f.params);
  const Decomposer D(f, table);
  const DecompositionReport rep = D.lower_bound_report(l);
  write_with(ctx, "decomposition.csv", [&](const fs::path& p) { write_report_csv(rep, f, p); });
  if (rep.c_tau_le_one) ctx.man.warnings.push_back("C_tau <= 1: the W terms lose their sign");
  const bool ok = rep.lower_bound_residual >= -tol;
  std::string s = kv("lhs", rep.lhs) + kv("rhs", rep.rhs) + kv("lower_bound_residual", rep.lower_bound_residual) +
                  kv("truncation_bound", rep.truncation_bound) + kv("l", l) + kv("c_tau", rep.c_tau) +
                  kv("lower_bound_holds", ok ? "true" : "false");
  write_text(ctx, "summary.txt", s);
  ctx.out << s;
  return ok ? 0 : 1;
}

struct StripeArgs {
  double l, eta, stride;
};

StripeArgs stripe_args(const Resolved& r, const ScalarField& f) {
  StripeArgs a{r.real("stripes", "l"), r.real("stripes", "eta"), r.real("stripes", "stride")};
  if (a.l == 0) a.l = f.params.L / 4;
  if (a.eta == 0) a.eta = a.l / 4;
  if (a.stride == 0) a.stride = a.l;
  if (!(a.l > 0 && a.l <= f.params.L)) throw InputError("stripes.l", "cube side must lie in (0, L]");
  if (!(a.eta > 0)) throw InputError("stripes.eta", "must be > 0");
  if (!(a.stride > 0)) throw InputError("stripes.stride", "must be > 0");
  return a;
}

int cmd_stripedist(Resolved& r, Ctx& ctx) {
  const ScalarField f = field_source(r, ctx);
  const StripeArgs a = stripe_args(r, f);
  const int d = f.d(), N = f.N();
  const int st = static_cast<int>(std::lround(a.stride * f.params.n_per_unit));
  if (st < 1) throw InputError("stripes.stride", "stride must be at least one grid spacing");
  std::string csv;
  for (int i = 0; i < d; ++i) csv += fmt::format("x{}_length,", i + 1);
  for (int i = 0; i < d; ++i) csv += fmt::format("D{}_fraction,", i + 1);
  csv += "D_eta_fraction,best_direction_index\n";
  const int per_axis = (N + st - 1) / st;
  std::vector<int> k(d, 0);
  double worst = 0;
  for (;;) {
    std::vector<int> center(d);
    for (int i = 0; i < d; ++i) center[i] = k[i] * st;
    const DirectionDistance dd = direction_distance(f, make_cube(f, center, a.l), a.eta);
    for (int i = 0; i < d; ++i) csv += fmt::format("{:.17g},", (center[i] + 0.5) * f.params.dx());
    for (int i = 0; i < d; ++i) csv += fmt::format("{:.17g},", dd.per_axis[i]);
    csv += fmt::format("{:.17g},{}\n", dd.d_eta, dd.best_direction + 1);
    worst = std::max(worst, dd.d_eta);
    int i = d - 1;
    while (i >= 0 && ++k[i] == per_axis) k[i--] = 0;
    if (i < 0) break;
  }
  write_text(ctx, "stripe_distance.csv", csv);
  std::string s = kv("l", a.l) + kv("eta", a.eta) + kv("max_stripe_distance", worst);
  write_text(ctx, "summary.txt", s);
  ctx.out << s;
  return 0;
}

int cmd_classify(Resolved& r, Ctx& ctx) {
  const ScalarField f = field_source(r, ctx);
  const StripeArgs a = stripe_args(r, f);
  const double sigma = r.real("stripes", "sigma");
  if (!(sigma > 0)) throw InputError("stripes.sigma", "must be > 0");
  const CubeClassification c = classify_cubes(f, a.l, a.eta, sigma, a.stride);
  write_with(ctx, "classification.csv", [&](const fs::path& p) { write_classification(c, f, p); });
  std::vector<long> counts(f.d() + 2, 0);
  for (int lab : c.labels) ++counts[lab + 1];
  std::string s = kv("cubes", std::to_string(c.labels.size())) + kv("A-1", std::to_string(counts[0])) +
                  kv("A0", std::to_string(counts[1]));
  for (int i = 1; i <= f.d(); ++i) s += kv(fmt::format("A{}", i), std::to_string(counts[i + 1]));
  write_text(ctx, "summary.txt", s);
  ctx.out << s;
  return 0;
}

int cmd_verify(Resolved& r, Ctx& ctx) {
  VerifyConfig c;
  c.upsilon = r.real("verify", "upsilon");
  c.eta0 = r.real("verify", "eta0");
  c.delta0 = r.real("verify", "delta0");
  c.delta = r.real("verify", "delta");
  c.delta_pos2 = r.real("verify", "delta_pos2");
  c.sigma = r.real("verify", "sigma");
  c.nu = r.real("verify", "nu");
  c.l_fraction = r.real("verify", "l_fraction");
  c.seeds.clear();
  for (long s : r.ints("verify", "seeds")) {
    if (s < 0) throw InputError("verify.seeds", "seeds must be >= 0");
    c.seeds.push_back(static_cast<std::uint64_t>(s));
  }
  c.sizes_1d.clear();
  for (long n : r.ints("verify", "sizes_1d")) c.sizes_1d.push_back(static_cast<int>(n));
  c.sizes_2d.clear();
  for (long n : r.ints("verify", "sizes_2d")) c.sizes_2d.push_back(static_cast<int>(n));
  c.pair_samples = static_cast<int>(r.integer("verify", "pair_samples"));
  c.p_1d = r.real("verify", "p_1d");
  c.p_2d = r.real("verify", "p_2d");
  c.tau = r.real("verify", "tau");
  c.eps = r.real("verify", "eps");
  c.lemma_tau = r.real("verify", "lemma_tau");
  c.lemma_eps = r.real("verify", "lemma_eps");
  c.lemma_n_per_unit = r.real("verify", "lemma_n_per_unit");
  c.lemma_cells = static_cast<int>(r.integer("verify", "lemma_cells"));
  c.fault_injection = r.flag("verify", "fault_injection");
  if (auto it = r.cfg.sections.find("tolerances"); it != r.cfg.sections.end())
    for (auto& [k, v] : it->second) c.tolerances[k] = r.real("tolerances", k);
  try {
    validate(c);
  } catch (const InputError& e) {
    const std::string key = e.key().find('.') == std::string::npos ? "verify." + e.key() : e.key();
    throw InputError(key, e.what());
  }
  const SuiteReport rep = run_suite(c);
  write_with(ctx, "suite.csv", [&](const fs::path& p) { write_suite_csv(rep, p, false); });
  std::string timing = "check,wall_seconds_s\n";
  for (auto& ch : rep.checks) timing += fmt::format("{},{:.6f}\n", ch.name, ch.wall_seconds);
  write_text(ctx, "timing.csv", timing, true);
  const std::string text = format_suite(rep);
  write_text(ctx, "suite.txt", text, true);
  ctx.out << text;
  return rep.pass ? 0 : 1;
}

int cmd_gamma(Resolved& r, Ctx& ctx) {
  const double h = r.real("gamma", "half_period");
  const std::vector<double> eps = r.reals("gamma", "eps_list");
  const double bound = r.real("gamma", "max_rel_error");
  if (!(h > 0)) throw InputError("gamma.half_period", "must be > 0");
  if (eps.size() < 2) throw InputError("gamma.eps_list", "need at least two values");
  for (double e : eps)
    if (!(e > 0)) throw InputError("gamma.eps_list", "values must be > 0");
  Resolved t = r;
  t.cfg.set("params", "L", num(2 * h));
  t.cfg.set("params", "eps", num(eps.front()));
  const Params prm = params_from(t);
  const std::vector<GammaTrendPoint> pts = gamma_trend(prm, h, eps);
  std::string csv = "eps,alpha_length,energy_density,sharp_energy_density,relative_error\n";
  bool decreasing = true;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    csv += fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", pts[i].eps, pts[i].alpha, pts[i].energy,
                       pts[i].sharp, pts[i].rel_error);
    if (i && !(pts[i].rel_error < pts[i - 1].rel_error)) decreasing = false;
  }
  write_text(ctx, "gamma_trend.csv", csv);
  const bool ok = decreasing && pts.back().rel_error < bound;
  std::string s = kv("sharp_energy", pts.front().sharp) + kv("last_relative_error", pts.back().rel_error) +
                  kv("strictly_decreasing", decreasing ? "true" : "false") + kv("pass", ok ? "true" : "false");
  write_text(ctx, "summary.txt", s);
  ctx.out << s;
  return ok ? 0 : 1;
}

using Runner = std::function<int(Resolved&, Ctx&)>;

Runner runner_for(const std::string& name) {
  if (name == "solve1d") return cmd_solve1d;
  if (name == "minimize") return cmd_minimize;
  if (name == "decompose") return cmd_decompose;
  if (name == "stripedist") return cmd_stripedist;
  if (name == "classify") return cmd_classify;
  if (name == "verify") return cmd_verify;
  return cmd_gamma;
}

// ---------------------------------------------------------------------------

std::string utc_stamp(const char* format) {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::strftime(buf, sizeof buf, format, &tm);
  return buf;
}

fs::path make_run_dir(const fs::path& base, const std::string& command) {
  const std::string stem = command + "-" + utc_stamp("%Y%m%dT%H%M%SZ");
  std::error_code ec;
  fs::create_directories(base, ec);
  for (int k = 0;; ++k) {
    const fs::path p = base / (k ? fmt::format("{}-{}", stem, k) : stem);
    if (fs::create_directory(p, ec)) return p;
    if (ec) throw InputError("out", fmt::format("cannot create run directory under {}: {}", base.string(), ec.message()));
  }
}

int resolve_threads(const std::optional<int>& flag) {
  if (flag) {
    if (*flag < 1) throw InputError("threads", "--threads must be >= 1");
    return *flag;
  }
  if (const char* env = std::getenv("STRIPEFORGE_THREADS"); env && *env) {
    try {
      std::size_t pos = 0;
      const int n = std::stoi(env, &pos);
      if (pos == std::string(env).size() && n >= 1) return n;
    } catch (const std::exception&) {
    }
    throw InputError("threads", fmt::format("STRIPEFORGE_THREADS='{}' is not a positive integer", env));
  }
  return 0;
}

struct RunOutcome {
  int status = 0;
  RunManifest manifest;
  fs::path dir;
};

RunOutcome run(const Command& cmd, Resolved& r, const fs::path& out_base, int threads, std::ostream& out) {
  std::unique_ptr<tbb::global_control> gc;
  if (threads > 0) gc = std::make_unique<tbb::global_control>(tbb::global_control::max_allowed_parallelism, threads);
  Ctx ctx{make_run_dir(out_base, cmd.name), {}, out};
  ctx.man.command = cmd.name;
  ctx.man.version = tool_version();
  ctx.man.started = utc_stamp("%Y-%m-%dT%H:%M:%SZ");
  ctx.man.threads = threads;
  const auto t0 = std::chrono::steady_clock::now();
  RunOutcome o;
  o.dir = ctx.dir;
  try {
    o.status = runner_for(cmd.name)(r, ctx);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(ctx.dir, ec);
    throw;
  }
  ctx.man.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ctx.man.exit_status = o.status;
  ctx.man.config = r.cfg;
  for (auto& w : ctx.man.warnings) out << "warning: " << w << "\n";
  out << "run directory: " << ctx.dir.string() << "\n";
  ctx.man.write(ctx.dir / "manifest.txt");
  o.manifest = ctx.man;
  return o;
}

// Applies file values, --set items and flags on top of the defaults.
Resolved resolve(const Command& cmd, const std::vector<Command>& all, const std::string& config_path,
                 const std::vector<std::string>& sets, const std::vector<std::pair<const Key*, std::string>>& flags) {
  Resolved r;
  r.cmd = &cmd;
  for (auto& k : cmd.keys) r.cfg.set(k.section, k.key, k.def);
  auto owned = [&](const std::string& s, const std::string& k) {
    if (cmd.open_tolerances && s == "tolerances") return true;
    for (auto& key : cmd.keys)
      if (key.section == s && key.key == k) return true;
    return false;
  };
  auto known_anywhere = [&](const std::string& s, const std::string& k) {
    for (auto& c : all) {
      if (c.open_tolerances && s == "tolerances") return true;
      for (auto& key : c.keys)
        if (key.section == s && key.key == k) return true;
    }
    return false;
  };
  if (!config_path.empty() && config_path != "default") {
    const Config file = read_config(config_path);
    for (auto& [s, kvs] : file.sections)
      for (auto& [k, v] : kvs) {
        if (!known_anywhere(s, k)) throw InputError(s + "." + k, fmt::format("unknown key in {}", config_path));
        if (!owned(s, k)) continue;  // belongs to another subcommand
        r.cfg.set(s, k, v);
        r.explicit_keys.insert(s + "." + k);
      }
  }
  for (auto& item : sets) {
    const auto eq = item.find('=');
    const auto dot = item.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq)
      throw InputError("set", fmt::format("'{}' is not section.key=value", item));
    const std::string s = item.substr(0, dot), k = item.substr(dot + 1, eq - dot - 1);
    if (!owned(s, k)) throw InputError(s + "." + k, fmt::format("not a {} setting", cmd.name));
    r.cfg.set(s, k, item.substr(eq + 1));
    r.explicit_keys.insert(s + "." + k);
  }
  for (auto& [key, v] : flags) {
    r.cfg.set(key->section, key->key, v);
    r.explicit_keys.insert(key->full());
  }
  return r;
}

// Bare keys from module errors are qualified with their section when unique.
std::string qualify(const std::string& key, const Command* cmd) {
  if (!cmd || key.find('.') != std::string::npos) return key;
  if (key == "n_per_unit") return "params.n";
  std::string found;
  for (auto& k : cmd->keys)
    if (k.key == key) {
      if (!found.empty()) return key;
      found = k.full();
    }
  return found.empty() ? key : found;
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  while (!s.empty() && s.back() == ' ') s.pop_back();
  return s;
}

int replay(const fs::path& manifest_path, const std::optional<std::string>& out_flag, const std::optional<int>& thr,
           std::ostream& out, std::ostream& err) {
  const RunManifest m = read_manifest(manifest_path);
  const std::vector<Command> all = commands();
  const Command* cmd = find_command(all, m.command);
  if (!cmd) throw InputError("run.command", fmt::format("unknown command '{}'", m.command));
  for (auto& [path, hash] : m.inputs) {
    if (!fs::exists(path)) throw InputError("inputs." + path, "input file is missing");
    if (file_hash(path) != hash) throw InputError("inputs." + path, "input content differs from the recorded hash");
  }
  if (m.version != tool_version())
    err << fmt::format("stripeforge: warning: manifest written by version {}, this is {}\n", m.version, tool_version());
  Resolved r;
  r.cmd = cmd;
  r.cfg = m.config;
  for (auto& [s, kvs] : r.cfg.sections)
    for (auto& [k, v] : kvs) r.explicit_keys.insert(s + "." + k);
  const fs::path base = out_flag ? fs::path(*out_flag) : manifest_path.parent_path().parent_path();
  const RunOutcome o = run(*cmd, r, base, thr ? resolve_threads(thr) : m.threads, out);
  std::map<std::string, std::string> now(o.manifest.outputs.begin(), o.manifest.outputs.end());
  int mismatches = 0;
  for (auto& [name, hash] : m.outputs) {
    auto it = now.find(name);
    if (it == now.end() || it->second != hash) {
      out << "replay mismatch: " << name << "\n";
      ++mismatches;
    }
  }
  if (now.size() != m.outputs.size()) ++mismatches;
  if (o.status != m.exit_status) ++mismatches;
  out << (mismatches ? "replay differs\n" : "replay identical\n");
  return mismatches ? 1 : 0;
}

}  // namespace

int execute(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const std::vector<Command> all = commands();
  CLI::App app{"stripeforge: stripe formation in nonlocal phase-field models"};
  app.require_subcommand(1);

  struct Sub {
    CLI::App* app;
    const Command* cmd;
    std::vector<std::pair<const Key*, CLI::Option*>> opts;
    std::vector<std::string> values;
  };
  std::string config_path, out_dir = "runs";
  std::vector<std::string> sets;
  std::optional<int> threads;
  bool fault = false;
  std::vector<Sub> subs;
  subs.reserve(all.size());
  for (auto& c : all) {
    Sub s{app.add_subcommand(c.name, c.help), &c, {}, std::vector<std::string>(c.keys.size())};
    s.app->add_option("--config", config_path, "key = value config file with sections ('default': built-in values)");
    s.app->add_option("--out", out_dir, "parent directory of the run directory")->capture_default_str();
    s.app->add_option("--set", sets, "override section.key=value (repeatable)");
    s.app->add_option("--threads", threads, "cap on worker threads (else STRIPEFORGE_THREADS)");
    for (std::size_t i = 0; i < c.keys.size(); ++i) {
      const Key& k = c.keys[i];
      if (c.name == "verify" && k.key == "fault_injection") continue;
      // names shared by two sections of one subcommand are prefixed by the section
      const bool shared = std::count_if(c.keys.begin(), c.keys.end(), [&](const Key& o) { return o.key == k.key; }) > 1;
      const std::string flag = shared ? k.section + "_" + k.key : k.key;
      std::string names = "--" + flag;
      if (flag.find('_') != std::string::npos) {
        std::string dash = flag;
        std::replace(dash.begin(), dash.end(), '_', '-');
        names += ",--" + dash;
      }
      if (k.section == "field" && k.key == "input") names += ",--input";
      s.opts.emplace_back(&k, s.app->add_option(names, s.values[i], fmt::format("{} [{}]", k.help, k.def)));
    }
    if (c.name == "verify") s.app->add_flag("--fault-injection,--fault_injection", fault, "deliberately break omega");
    subs.push_back(std::move(s));
  }
  // option pointers into `values` must stay valid: reserve above, no reallocation
  std::string manifest_path;
  std::optional<std::string> replay_out;
  CLI::App* rp = app.add_subcommand("replay", "re-run a manifest and compare output hashes");
  rp->add_option("manifest", manifest_path, "manifest.txt of a previous run")->required();
  rp->add_option("--out", replay_out, "parent directory of the new run directory");
  rp->add_option("--threads", threads, "cap on worker threads");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    for (auto& s : subs)
      if (s.app->parsed()) out << s.app->help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "stripeforge: error: " << one_line(e.what()) << "\n";
    return 2;
  }

  const Command* active = nullptr;
  try {
    if (rp->parsed()) return replay(manifest_path, replay_out, threads, out, err);
    for (auto& s : subs) {
      if (!s.app->parsed()) continue;
      active = s.cmd;
      std::vector<std::pair<const Key*, std::string>> flags;
      for (std::size_t i = 0; i < s.opts.size(); ++i)
        if (s.opts[i].second->count() > 0) flags.emplace_back(s.opts[i].first, s.values[i]);
      if (fault) {
        for (auto& k : s.cmd->keys)
          if (k.key == "fault_injection") flags.emplace_back(&k, "true");
      }
      Resolved r = resolve(*s.cmd, all, config_path, sets, flags);
      const int thr = resolve_threads(threads);
      return run(*s.cmd, r, out_dir, thr, out).status;
    }
  } catch (const InputError& e) {
    err << "stripeforge: error: " << qualify(e.key(), active) << ": " << one_line(e.what()) << "\n";
    return 2;
  } catch (const FieldFormatError& e) {
    err << "stripeforge: error: field.input: " << one_line(e.what()) << "\n";
    return 2;
  }
  return 2;
}

}  // namespace sf
