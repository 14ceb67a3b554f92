#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "stripeforge/core.hpp"
#include "stripeforge/kernel.hpp"

namespace sf {

struct EnergyBreakdown {
  double mm_term = 0;        // (C_tau - 1) M_alpha / L^d
  double nonlocal_term = 0;  // nonlocal double integral / L^d
  double total = 0;
  double truncation_error_bound = 0;
};

// W(t) = t^2 (1-t)^2, written through y = t - 1/2 so that t -> 1-t is exact.
double double_well(double t);
// Mean of W along the segment [p, q].
double segment_well(double p, double q);

// Modica-Mortola cell densities 3 alpha |grad u|_1^2 + (3/alpha) Wbar on the
// forward-difference stencil; Wbar mixes the segment means of W along each
// axis with weights |D_i u| / |grad u|_1 (plain W(u_c) where the gradient
// vanishes).  M_alpha = dx^d * sum of the densities.
std::vector<double> mm_densities(const ScalarField& f, double alpha);
double modica_mortola(const ScalarField& f, double alpha);

// Raw nonlocal term  dx^d sum_c sum_j w_j (u_c - u_{c+j})^2  (not divided by L^d).
double nonlocal_energy(const ScalarField& f, const KernelTable& table);

EnergyBreakdown total_energy(const ScalarField& f, const KernelTable& table);
std::vector<double> energy_gradient(const ScalarField& f, const KernelTable& table);

// Sharp-interface energy of a {0,1} field: Per_1 counted on cell faces.
double sharp_interface_energy(const ScalarField& indicator, const KernelTable& table);
double perimeter_l1(const ScalarField& indicator);

// The stripe [0, h) x T^(d-1) on the torus of side 2h, each transition
// replaced by the logistic profile 1/(1+exp(-s/alpha)) of the signed distance.
ScalarField mollified_stripe(const Params& prm, double h);

struct GammaTrendPoint {
  double eps = 0, alpha = 0;
  double energy = 0;     // F of the mollified stripe
  double sharp = 0;      // sharp_interface_energy of the indicator
  double rel_error = 0;  // |energy - sharp| / |sharp|
};
// One point per eps on the same grid and kernel (L = 2h).
std::vector<GammaTrendPoint> gamma_trend(const Params& prm, double h, const std::vector<double>& eps);

// Repeated evaluation of F and its gradient on a fixed grid.  Small grids use
// direct orbit-grouped sums (bitwise symmetric); large grids use an FFTW
// circular convolution with the same weights.
class Functional {
 public:
  enum class Backend { Auto, Direct, Fft };
  Functional(const Params& prm, const LatticeKernel& lattice, double c_tau, Backend b = Backend::Auto);
  ~Functional();
  Functional(const Functional&) = delete;
  Functional& operator=(const Functional&) = delete;

  // Returns F; fills grad (size cells) when non-null.
  double evaluate(const double* u, double* grad, EnergyBreakdown* parts = nullptr);
  // With mu > 0 the gradient returned by evaluate() is that of the smoothed
  // Modica-Mortola density (see mm_smoothed_grad) plus the exact nonlocal
  // part: a search direction that does not chatter on the kinks of |D_i u|.
  // The returned energy stays exact.  0 (default): exact gradient.
  void set_direction_smoothing(double mu) { smoothing_ = mu; }
  const Params& params() const { return prm_; }
  std::size_t cells() const { return cells_; }
  bool uses_fft() const { return fft_; }

  // dx^d sum_c sum_j w_j (u_c - u_{c+j})^2 and its gradient (grad accumulated
  // with factor `scale`).
  double nonlocal(const double* u, double* grad, double scale);

 private:
  double nonlocal_direct(const double* u, double* grad, double scale);
  double nonlocal_fft(const double* u, double* grad, double scale);
  void convolve(const double* v, double* out);

  Params prm_;
  const LatticeKernel* lat_;
  double c_tau_;
  std::size_t cells_;
  bool fft_ = false;
  double wsum_ = 0;  // sum of w_j over j != 0
  double smoothing_ = 0;
  OffsetOrbits orbits_;
  struct FftState;
  std::unique_ptr<FftState> fs_;
};

// P = I + c (-Delta_h) on the periodic grid (5-point / 2d+1-point stencil).
// solve() applies P^-1 in place through FFTs; metric(s) = s . P s.
class ScreenedLaplacian {
 public:
  ScreenedLaplacian(const Params& prm, double c);
  ~ScreenedLaplacian();
  ScreenedLaplacian(const ScreenedLaplacian&) = delete;
  ScreenedLaplacian& operator=(const ScreenedLaplacian&) = delete;
  void solve(double* v);
  double metric(const double* s) const;

 private:
  Params prm_;
  double c_;
  struct State;
  std::unique_ptr<State> st_;
};

// M_alpha and its gradient (accumulated into grad with factor `scale`).
double mm_value_grad(const Params& prm, const double* u, double* grad, double scale);
// Gradient of the density with every |D_i u| replaced by sqrt(D_i u^2 + m^2),
// m = mu / dx, in |grad u|_1 (shifted to vanish on flat cells) and in the Wbar
// weights; accumulated into grad with factor `scale`.
void mm_smoothed_grad(const Params& prm, const double* u, double* grad, double scale, double mu);

}  // namespace sf
