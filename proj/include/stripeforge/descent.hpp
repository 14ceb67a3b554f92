#pragma once

#include <functional>
#include <string>
#include <vector>

namespace sf {

enum class StepRule { Fixed, Backtracking, BarzilaiBorwein };

struct DescentOptions {
  int max_iters = 5000;
  StepRule rule = StepRule::BarzilaiBorwein;
  double grad_tol = 1e-7;     // on the scaled projected gradient (sup norm)
  double energy_tol = 1e-14;  // relative decrease per step
  int stall_window = 8;       // consecutive steps below energy_tol before stopping
  double step0 = 0;           // 0: chosen from the first gradient
  double grad_scale = 1;      // multiplies raw gradients before the norm test
  // Optional metric P: `precondition` applies P^-1 in place and `metric(s)`
  // returns s . P s.  Steps then follow -P^-1 g on the free cells, falling
  // back to -g when the line search fails.
  std::function<void(double*)> precondition;
  std::function<double(const double*)> metric;
};

struct DescentResult {
  std::vector<double> x;
  std::vector<double> trace;  // energy after each accepted step (trace[0] = start)
  bool converged = false;
  int iters = 0;
  double pg_norm = 0;
  std::string stop_reason;
};

// f(x, grad) returns the objective and writes the gradient.
using Objective = std::function<double(const double*, double*)>;

// Projected descent on the box [0,1]^n; every accepted step decreases f.
DescentResult projected_descent(const Objective& f, std::vector<double> x0, const DescentOptions& opt);

double projected_gradient_norm(const std::vector<double>& x, const std::vector<double>& g, double scale);

}  // namespace sf
