#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "stripeforge/core.hpp"
#include "stripeforge/descent.hpp"
#include "stripeforge/kernel.hpp"

namespace sf {

struct MinimizeOptions {
  int max_iters = 5000;
  StepRule step_rule = StepRule::BarzilaiBorwein;
  double grad_tol = 1e-6;
  double energy_tol = 1e-13;
  std::uint64_t seed = 1;
  int restarts = 0;         // extra random starts, seeds seed+0 .. seed+restarts-1
  double smoothness = 0;    // of the random starts; 0 means 4 cells
};

struct RestartRecord {
  std::int64_t seed = -1;  // -1: the supplied initial field
  double energy = 0;
  bool converged = false;
  int iters = 0;
  double pg_norm = 0;
  std::string stop_reason;
  std::vector<double> energy_trace;
  ScalarField field;
};

struct MinimizeResult {
  ScalarField field;
  std::vector<double> energy_trace;
  bool converged = false;
  int best_restart = 0;              // index into `runs`; 0 is the supplied init
  std::vector<RestartRecord> runs;
};

// Runs projected descent from `init` and from each random restart; returns
// the lowest final energy.
MinimizeResult minimize_field(const Params& prm, const ScalarField& init, const MinimizeOptions& opt,
                              const KernelTable& table);

struct OneDimensionalityReport {
  bool is_1d = false;
  int direction = 0;               // 0-based axis
  std::vector<double> deviation;   // per axis
};

// deviation_i = mean over x_i of the variance of u over the hyperplane {x_i = const}.
OneDimensionalityReport one_dimensionality_report(const ScalarField& f, double tol);

void write_energy_trace(const std::vector<double>& trace, const std::filesystem::path& path);

}  // namespace sf
