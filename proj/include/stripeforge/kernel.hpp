#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include "stripeforge/core.hpp"
#include "stripeforge/lattice.hpp"

namespace sf {

class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(double achieved, const std::string& what)
      : std::runtime_error(what), achieved_(achieved) {}
  double achieved_error() const { return achieved_; }

 private:
  double achieved_;
};

double marginal_kappa(int d, double p);
KernelShape full_shape(const Params& prm);      // K_tau on R^d
KernelShape marginal_shape(const Params& prm);  // K-hat_tau on R

double kernel_value(const std::vector<double>& zeta, const Params& prm);
double kernel_marginal(double t, const Params& prm);

struct Moments {
  double c_tau = 0;
  double j_c = 0;
};
Moments kernel_moments(const Params& prm);             // closed form
Moments kernel_moments_quadrature(const Params& prm);  // adaptive, to quad_tol
double marginal_quadrature(double t, const Params& prm);

double tail_bound(double r, const Params& prm);

// Forward differences of K-hat of orders 1..max_order alternate in sign at
// `samples` points of (0, r_cut).
bool complete_monotonicity_spot_check(const Params& prm, int samples = 10, int max_order = 4);

struct KernelTable {
  Params params;
  std::vector<double> radial_t;       // 0 and a log-spaced grid up to r_cut
  std::vector<double> radial_values;  // K-hat at radial_t
  double tail_coefficient = 0;        // K-hat(t) <= tail_coefficient * t^(-q) beyond r_cut
  double c_tau = 0;
  double j_c = 0;
  LatticeKernel lattice;              // periodized weights for the field grid
  std::function<double(double)> log_interp;  // monotone (PCHIP) in log K-hat

  double marginal(double t) const;    // monotone interpolation of radial samples
};

KernelTable build_kernel_table(const Params& prm);
KernelTable build_kernel_table(const Params& prm, long box);

}  // namespace sf
