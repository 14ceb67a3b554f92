#pragma once

#include <memory>
#include <vector>

namespace sf {

// Radial profile f(s) = kappa * (s + a)^(-expo) of an l1-radial kernel in `dim`
// dimensions: dim = d with kappa = 1 for K_tau itself, dim = 1 for its marginal.
struct KernelShape {
  int dim = 1;
  double kappa = 1;
  double expo = 3;
  double a = 1;

  double operator()(double s) const;
  double first_moment() const;  // integral of |z_1| f(||z||_1) over R^dim
  double mass() const;          // integral of f(||z||_1) over R^dim
  double mass_outside_box(double b) const;  // over the complement of [-b,b]^dim
};

// Lattice weights W(k) = int f(||z||_1) prod_i hat(z_i/dx - k_i) dz, i.e. the
// exact interaction of piecewise-linear hats; equivalently the nonlocal term
// evaluated on the piecewise-constant interpolant.  Depends on k only through
// K = ||k||_1 and the number z of zero components.
class HatWeights {
 public:
  HatWeights(const KernelShape& shape, double dx, long kmax);

  double operator()(long K, int zeros) const;
  double dx() const { return dx_; }
  long kmax() const { return kmax_; }
  const KernelShape& shape() const { return shape_; }

 private:
  double compute(long K, int zeros) const;
  double taylor(long K, int zeros) const;
  double quadrature(long K, int zeros) const;

  KernelShape shape_;
  double dx_;
  long kmax_;
  std::vector<std::vector<double>> table_;       // [zeros][K]
  std::vector<std::vector<double>> moments_;     // [zeros][n] E[Y^n]/n! (cell units)
};

// Periodized weights on the torus Z_N^dim: explicit images for |k_i| <= box,
// the remaining mass spread uniformly over all offsets.
struct LatticeKernel {
  int d = 1;
  int N = 1;
  double dx = 1;
  long box = 0;
  double far_mass = 0;        // kernel mass outside the explicit box
  double far_per_offset = 0;  // far_mass / N^d, included in w
  std::vector<double> w;      // folded weights, row-major over Z_N^d
  std::shared_ptr<const HatWeights> hat;

  double total() const;  // sum of w
  // bound on |error| of the uniform far-field model, in energy-density units
  double truncation_bound() const { return 2 * far_mass; }
};

// Half-width (cells) of the explicit image box: covers r_cut when affordable,
// otherwise as many whole periods as a (2B+1)^d <= budget loop allows.
long default_box(int d, int N, double dx, double r_cut, double budget = 4e7);

LatticeKernel build_lattice(std::shared_ptr<const HatWeights> hat, int d, int N, long box);

// Offsets grouped by the hyperoctahedral symmetry of the torus (sign flips
// mod N and coordinate permutations).  Orbit order is canonical.
struct OffsetOrbits {
  std::vector<std::size_t> rep;                 // canonical representative
  std::vector<std::vector<std::size_t>> members;
};
OffsetOrbits offset_orbits(int d, int N);

}  // namespace sf
