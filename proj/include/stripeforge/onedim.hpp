#pragma once

#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stripeforge/core.hpp"
#include "stripeforge/descent.hpp"
#include "stripeforge/lattice.hpp"

namespace sf {

struct OneDimOptions {
  int max_iters = 20000;
  double grad_tol = 1e-8;
  double energy_tol = 1e-15;
  int coarse_points = 24;
  bool precondition = true;  // screened-Laplacian metric for the descent steps
};

struct ProfileRun {
  Profile1D profile;
  bool converged = false;
  int iters = 0;
  std::vector<double> trace;
};

struct OneDimResult {
  double h_star = 0;
  double c_star = 0;
  Profile1D profile;
  std::vector<std::pair<double, double>> search_trace;  // (h, best energy at h), sorted by h
  double grid_level = 0;                                // n_per_unit used
  bool converged = true;                                // every profile solve converged
};

class BracketError : public std::runtime_error {
 public:
  BracketError(const std::string& what, std::vector<std::pair<double, double>> trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}
  const std::vector<std::pair<double, double>>& trace() const { return trace_; }

 private:
  std::vector<std::pair<double, double>> trace_;
};

enum class ProfileInit { Logistic, Step };

// The d-dimensional energy restricted to fields u(x_1), with the reflection
// symmetry u(h + t) = 1 - u(h - t) built in: only the m = h n cells of [0, h)
// are unknowns.  The 1D lattice comes from the marginal kernel; its hat
// weights are computed once and shared by all periods.
class OneDimSolver {
 public:
  OneDimSolver(const Params& prm, double h_max, OneDimOptions opt = {});

  ProfileRun solve(double h, ProfileInit init = ProfileInit::Logistic) const;
  ProfileRun solve_from(double h, std::vector<double> g0) const;
  // energy density of the reflection-extended profile
  double energy(double h, const std::vector<double>& g) const;
  int cells_for(double h) const;  // m; throws if h is not on the grid

  const Params& params() const { return prm_; }
  double c_tau() const { return c_tau_; }
  const OneDimOptions& options() const { return opt_; }

 private:
  Params prm_;
  OneDimOptions opt_;
  double c_tau_;
  std::shared_ptr<const HatWeights> hat_;
};

std::vector<double> reflect_extend(const std::vector<double>& g);

Profile1D optimal_profile_for_period(const Params& prm, double h, const OneDimOptions& opt = {});
OneDimResult optimal_period_search(const Params& prm, double h_min = 0.2, double h_max = 5.0,
                                   const OneDimOptions& opt = {});
OneDimResult optimal_period_search(const OneDimSolver& solver, double h_min, double h_max);

// The profile repeated `periods` times along `direction` on a d-torus of side
// L = 2 h periods.
ScalarField extend_profile(const Profile1D& prof, const Params& prm, int direction, int periods);

void write_search_trace(const std::vector<std::pair<double, double>>& trace, const std::filesystem::path& path);

}  // namespace sf
