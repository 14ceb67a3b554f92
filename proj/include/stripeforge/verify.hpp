#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace sf {

// Free parameters of the slice lemmas plus the instance sets the suite runs on.
struct VerifyConfig {
  double upsilon = 17.0 / 16.0;  // 1 < upsilon <= 17/16
  double eta0 = 0;               // 0: largest admissible value from the discrete bump bound
  double delta0 = 0;             // 0: max(tau^(1/beta), 2 dx) on the lemma grid
  double delta = 0.01;
  double delta_pos2 = 0.1;       // delta used by the two-point inequality check
  double sigma = 0.05;
  double nu = 0.05;
  double l_fraction = 0.25;      // cube side as a fraction of L
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20};
  std::vector<int> sizes_1d = {32, 64};
  std::vector<int> sizes_2d = {16};
  int pair_samples = 200;        // (slice, s, rho) samples per random field

  // regime of the random-instance checks
  double p_1d = 3, p_2d = 4, tau = 0.2, eps = 0.3;
  // fine one-dimensional grid for the small-tau slice lemmas
  double lemma_tau = 2e-4, lemma_eps = 0.1, lemma_n_per_unit = 1e5;
  int lemma_cells = 1024;

  std::map<std::string, double> tolerances;  // check name -> tolerance; missing names use defaults
  bool fault_injection = false;              // replaces omega by 3t^2 - t^3

  double tolerance(const std::string& check) const;
};

void validate(const VerifyConfig& cfg);
VerifyConfig default_verify_config();
std::vector<std::string> suite_check_names();

struct CheckResult {
  std::string name;
  bool monitor = false;         // stability check on an empirical constant
  long instances = 0;           // instances whose hypotheses held and were checked
  long skipped = 0;             // hypotheses not met on the grid
  long failures = 0;
  double worst_margin = 0;      // min over checked instances; +inf when none
  double value = 0;             // monitors: the extracted constant at the finest level
  double wall_seconds = 0;
  std::string note;
};

struct SuiteReport {
  std::vector<CheckResult> checks;  // sorted by name
  bool pass = true;
  double eta0 = 0, delta0 = 0;      // resolved lemma parameters
  double wall_seconds = 0;

  const CheckResult* find(const std::string& name) const;
};

SuiteReport run_suite(const VerifyConfig& cfg);

// Same checks, counts and margins (wall times ignored).
bool same_outcome(const SuiteReport& a, const SuiteReport& b);

void write_suite_csv(const SuiteReport& r, const std::filesystem::path& path, bool with_timing = true);
std::string format_suite(const SuiteReport& r);

// omega(t) = 3t^2 - 2t^3, or the deliberately wrong 3t^2 - t^3.
double suite_omega(double t, bool faulty);

// Discrete form of the bump estimate:
// ((U-1)/U) sum_{3n0 <= |k| <= 4n0} (|k| - 2n0 + 1) (n0/|k|) w_k dx.
double bump_bracket(const std::vector<double>& near_marginal, int N, double dx, int n0, double upsilon);

// Measure of {(a, b) : (s, rho) in Omega(a, b), a in [s, s+L)} by nested
// Gauss-Kronrod quadrature of the literal membership test.
double omega_measure(double s, double rho, double L);
bool in_omega(double s, double rho, double a, double b);

}  // namespace sf
