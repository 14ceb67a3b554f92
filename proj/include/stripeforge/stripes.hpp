#pragma once

#include <filesystem>
#include <vector>

#include "stripeforge/core.hpp"

namespace sf {

// Axis-aligned cube of n cells per side starting at z - floor(n/2) (periodic).
struct Cube {
  std::vector<int> center;  // grid indices
  int cells = 1;
};
Cube make_cube(const ScalarField& f, const std::vector<int>& center, double l);

struct StripeFit {
  int direction = 0;
  double eta = 0;
  std::vector<double> transitions;  // boundary positions along the axis (torus coordinates)
  double distance = 0;
  bool admissible = true;
  std::vector<int> pattern;         // fitted 0/1 value per cell along the axis
};

// Mean over the cube's perpendicular section, one value per cell along axis i.
std::vector<double> section_profile(const ScalarField& f, int axis, const Cube& q);

// Best 0/1 sequence over `profile` whose interior runs are at least `gap`
// cells long (first and last runs are free; no transition at all is allowed).
// Returns the L1 cost sum_k |profile_k - chi_k|, accumulated left to right.
double fit_binary_profile(const std::vector<double>& profile, int gap, std::vector<int>* pattern = nullptr);
int gap_cells(double eta, double dx);

StripeFit stripe_fit_distance(const ScalarField& f, int axis, const Cube& q, double eta);

struct DirectionDistance {
  double d_eta = 0;
  int best_direction = 0;
  std::vector<double> per_axis;
};
DirectionDistance direction_distance(const ScalarField& f, const Cube& q, double eta);

struct CubeClassification {
  std::vector<std::vector<int>> centers;
  std::vector<std::vector<double>> distances;  // [cube][axis]
  std::vector<int> labels;                     // -1, 0, or 1..d (axis + 1)
  double sigma = 0;
  double eta = 0;
  double l = 0;
};
CubeClassification classify_cubes(const ScalarField& f, double l, double eta, double sigma, double stride);
void write_classification(const CubeClassification& c, const ScalarField& f, const std::filesystem::path& path);

}  // namespace sf
