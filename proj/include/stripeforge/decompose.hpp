#pragma once

#include <filesystem>
#include <vector>

#include "stripeforge/core.hpp"
#include "stripeforge/kernel.hpp"
#include "stripeforge/stripes.hpp"

namespace sf {

double omega(double t);  // 3t^2 - 2t^3

// Per-axis split of the Modica-Mortola density: on cells with |grad u|_1 >=
// theta_g, m_i = 3 alpha |D_i u| |grad u|_1 + (3/alpha) Wbar |D_i u| / |grad u|_1
// and sum_i m_i is the full cell density; flat cells carry their whole
// density in `flat_well` (the well part) and m_i = 0.
struct MMSplit {
  int d = 1;
  std::vector<std::vector<double>> m;  // [axis][cell]
  std::vector<char> flat;
  std::vector<double> flat_well;       // (3/alpha) Wbar on flat cells, else 0
};
MMSplit mm_split(const ScalarField& f);

// Prefix sums of m_i along one line {x_perp + s e_i}.
struct SlicePrefix {
  int direction = 0;
  std::vector<int> x_perp;    // full coordinates, the entry along `direction` is 0
  std::vector<double> cum_mm; // cum_mm[s] = dx * sum_{t<s} m_i(t), size N+1
  std::vector<double> values; // u along the line
  double dx = 1;

  int N() const { return static_cast<int>(values.size()); }
  // Mbar over cells [s, t) of the periodic unrolling, s <= t (any integers)
  double interval(long s, long t) const;
};
SlicePrefix slice_prefix(const ScalarField& f, const MMSplit& mm, int axis, const std::vector<int>& x_perp);
double interval_mm(const SlicePrefix& p, long s, long t);

// Number of cells of the unrolled arc [p, p+len) whose periodic index falls in
// the interval [a, a+n) (0 <= a < N, 1 <= n <= N).
long arc_overlap(long p, long len, long a, long n, long N);

// Weights of the localized decomposition, derived from the kernel lattice.
struct SplitTables {
  int d = 1, N = 1;
  double dx = 1, c_tau = 0;
  // T(k, j_perp) for |k| < N along the slicing axis: row k + N - 1
  std::vector<std::vector<double>> near;
  std::vector<std::vector<double>> far;      // folded remainder, row j in Z_N
  std::vector<std::vector<double>> far_pos;  // images with k >= N, plus half the uniform part
  std::vector<double> near_marginal;         // sum over j_perp of near, index k + N - 1
  std::vector<double> far_marginal;          // index j
  double far_moment = 0;                     // C_tau - sum_{0<|k|<N} |k| dx near_marginal
};
SplitTables split_tables(const KernelTable& table);

struct CubeTerms {
  std::vector<double> r, v, w;  // per axis, already divided by l^d
  double wcal = 0;              // identical for every axis
  std::vector<double> fbar;     // per axis
  double total = 0;             // sum of fbar
};

struct DecompositionReport {
  int d = 1;
  double l = 0;
  std::vector<std::vector<int>> centers;
  std::vector<std::vector<double>> r_value, v_value, w_value, fbar;  // [axis][cube]
  std::vector<double> wcal_value;                                    // [cube]
  double lhs = 0;   // F(u)
  double rhs = 0;   // L^-d sum_i int Fbar_i
  double lower_bound_residual = 0;
  double truncation_bound = 0;
  long box = 0;
  double theta_g = 0;
  double c_tau = 0;
  bool c_tau_le_one = false;  // W-bar and wcal lose their sign when C_tau <= 1
};

class Decomposer {
 public:
  Decomposer(const ScalarField& f, const KernelTable& table);

  const ScalarField& field() const { return f_; }
  const MMSplit& mm() const { return mm_; }
  const SplitTables& tables() const { return t_; }

  // Slice terms over the cell interval [a, a+n), evaluated through the
  // reduced weights |I ∩ arc| / |k|.
  double r_term(int axis, const std::vector<int>& x_perp, long a, long n) const;
  double v_term(int axis, const std::vector<int>& x_perp, long a, long n) const;
  // (1/2d) dx^d sum_{x in Q} W_i(x)  (not divided by l^d)
  double w_term(int axis, const Cube& q) const;
  // 3 (C-1)/(d alpha) dx^d sum over flat cells of Q of Wbar  (not divided by l^d)
  double wcal_term(const Cube& q) const;
  CubeTerms localized_cube_energy(const Cube& q) const;

  // Per-cell densities with R(I) = sum_{c in I} r_c etc. on every slice.
  std::vector<double> r_density(int axis) const;
  std::vector<double> v_density(int axis) const;
  std::vector<double> w_density(int axis) const;  // W_i(x)
  std::vector<double> wcal_density() const;

  DecompositionReport lower_bound_report(double l) const;

  // f_u for slice point x (cell index), axis i, offset (k along i, jp across)
  double f_u(std::size_t x, int axis, long k, const std::vector<int>& jp) const;

 private:
  std::vector<int> perp_coords(std::size_t j_perp_flat) const;
  std::size_t perp_flat(const std::vector<int>& jp) const;
  double r_far_bracket(const SlicePrefix& sp) const;

  ScalarField f_;
  const KernelTable* table_;
  MMSplit mm_;
  SplitTables t_;
  Grid grid_;
};

// F(u) with the same MM split and lattice the decomposition uses
double decomposition_lhs(const ScalarField& f, const KernelTable& table);

void write_report_csv(const DecompositionReport& r, const ScalarField& f, const std::filesystem::path& path);

}  // namespace sf
