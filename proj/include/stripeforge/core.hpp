#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace sf {

// Raised for invalid parameters or inputs; `key` names the offending item.
class InputError : public std::runtime_error {
 public:
  InputError(std::string key, const std::string& what)
      : std::runtime_error(what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

// Field-file rejection; `record` is the 0-based index of the first offending
// record (header line/field or sample), `-1` when not applicable.
class FieldFormatError : public std::runtime_error {
 public:
  FieldFormatError(long long record, const std::string& what)
      : std::runtime_error(what), record_(record) {}
  long long record() const { return record_; }

 private:
  long long record_;
};

struct Params {
  int d = 1;
  double p = 3;
  double tau = 1;
  double eps = 1;
  double L = 1;
  double beta = 1;        // p - d - 1
  double alpha = 1;       // eps * tau^(1/beta)
  double n_per_unit = 1;  // cells per unit length
  double r_cut = 0;
  double theta_g = 0;     // gradient-zero threshold
  double quad_tol = 1e-10;

  int N() const;          // cells per axis
  double dx() const { return 1.0 / n_per_unit; }
  double a() const;       // tau^(1/beta), the kernel offset
  std::size_t cells() const;
  Params with_L(double newL) const;
};

// Validates and derives beta, alpha, r_cut, theta_g.
Params make_params(int d, double p, double tau, double eps, double L, double n_per_unit);
void validate(const Params& prm);

// Closed-form mass of f(s) = (s + a)^(-p) integrated over {||z||_1 > r} in R^d.
double l1_tail_mass(int d, double p, double a, double r);

struct ScalarField {
  Params params;
  std::vector<double> values;  // row-major, last axis fastest

  ScalarField() = default;
  explicit ScalarField(const Params& prm, double fill = 0.0);

  int N() const { return params.N(); }
  int d() const { return params.d; }
  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
};

struct Profile1D {
  double h = 0;
  std::vector<double> samples;  // cells of [0, h)
  double energy_density = 0;
  double symmetry_residual = 0;
};

// Periodic multi-index helpers for an N^d grid.
struct Grid {
  int d;
  int N;
  std::size_t size() const;
  std::size_t stride(int axis) const;  // stride of axis in the flat index
  std::size_t index(const std::vector<int>& c) const;
  std::vector<int> coords(std::size_t idx) const;
  std::size_t shift(std::size_t idx, int axis, int by) const;  // wraps
};

ScalarField make_constant_field(const Params& prm, double v);
ScalarField make_stripe_field(const Params& prm, int direction, double half_period, double phase);
ScalarField make_random_field(const Params& prm, std::uint64_t seed, double smoothness);

// Cyclic shift by `by` cells along `axis`; axis swap; value swap u -> 1-u.
ScalarField shifted(const ScalarField& f, int axis, int by);
ScalarField transposed(const ScalarField& f, int axis_a, int axis_b);
ScalarField swapped(const ScalarField& f);

enum class FieldFormat { Binary, Csv };
void save_field(const ScalarField& f, const std::filesystem::path& path,
                FieldFormat fmt = FieldFormat::Binary);
ScalarField load_field(const std::filesystem::path& path);

// Order-independent deterministic sum: sorted, then pairwise.
double stable_sum(std::vector<double> v);
double pairwise_sum(const double* v, std::size_t n);

}  // namespace sf
