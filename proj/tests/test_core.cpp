#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "../vendor/doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "stripeforge/core.hpp"

using namespace sf;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "stripeforge_test_core";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("make_params derives alpha and beta") {
  const Params prm = make_params(2, 4, 0.2, 0.3, 1.0, 16);
  CHECK(prm.beta == doctest::Approx(1.0));
  CHECK(prm.alpha == doctest::Approx(0.3 * 0.2));
  CHECK(prm.N() == 16);
  CHECK(prm.cells() == 256);
  CHECK(prm.r_cut > 0);
}

TEST_CASE("make_params rejects invalid parameters by name") {
  auto key_of = [](auto&& fn) {
    try {
      fn();
    } catch (const InputError& e) {
      return e.key();
    }
    return std::string("none");
  };
  CHECK(key_of([] { make_params(0, 4, 0.2, 0.3, 1, 16); }) == "d");
  CHECK(key_of([] { make_params(2, 3.5, 0.2, 0.3, 1, 16); }) == "p");
  CHECK(key_of([] { make_params(1, 3, -1, 0.3, 1, 16); }) == "tau");
  CHECK(key_of([] { make_params(1, 3, 0.2, 0, 1, 16); }) == "eps");
  CHECK(key_of([] { make_params(1, 3, 0.2, 0.3, 1.03, 16); }) == "L");
}

TEST_CASE("l1 tail mass matches quadrature") {
  // d = 1, p = 3, a = 1, r = 9: 2 (r+1)^-2 / 2 = 1/100
  CHECK(l1_tail_mass(1, 3, 1, 9) == doctest::Approx(0.01).epsilon(1e-14));
  boost::math::quadrature::exp_sinh<double> q;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int k = 0; k < 20; ++k) {
    const int d = 1 + k % 3;
    const double p = d + 2 + 2 * U(rng), a = 0.05 + U(rng), r = 3 * U(rng);
    // l1 sphere of radius s in R^d has surface 2^d s^(d-1)/(d-1)!
    const double fact = d == 3 ? 2 : 1;
    const double ref = q.integrate([&](double s) {
      return std::ldexp(1.0, d) * std::pow(s, d - 1) / fact * std::pow(s + a, -p);
    }, r, std::numeric_limits<double>::infinity());
    CHECK(l1_tail_mass(d, p, a, r) == doctest::Approx(ref).epsilon(1e-9));
  }
}

TEST_CASE("stripe fields") {
  const Params p1 = make_params(1, 3, 1, 1, 2.0, 8);
  const ScalarField s = make_stripe_field(p1, 0, 1.0, 0.0);
  for (int i = 0; i < 16; ++i) CHECK(s[i] == (i < 8 ? 1.0 : 0.0));

  const Params p2 = make_params(2, 4, 1, 1, 4.0, 4);
  const ScalarField t = make_stripe_field(p2, 1, 1.0, 0.0);
  CHECK(std::count(t.values.begin(), t.values.end(), 1.0) == static_cast<long>(t.size() / 2));
  // constant across the perpendicular axis
  const int N = t.N();
  for (int x = 0; x < N; ++x)
    for (int y = 0; y < N; ++y) CHECK(t[x * N + y] == t[y]);
  CHECK_THROWS_AS(make_stripe_field(p2, 2, 1.0, 0.0), InputError);
}

TEST_CASE("random fields are deterministic and clipped") {
  const Params prm = make_params(2, 4, 0.2, 0.3, 1.0, 16);
  const ScalarField a = make_random_field(prm, 1, 0.25), b = make_random_field(prm, 1, 0.25);
  const ScalarField c = make_random_field(prm, 2, 0.25);
  CHECK(a.values == b.values);
  CHECK(a.values != c.values);
  for (double v : a.values) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK_THROWS_AS(make_random_field(prm, 1, 0.01), InputError);
}

TEST_CASE("symmetry operations") {
  const Params prm = make_params(2, 4, 0.2, 0.3, 1.0, 8);
  const ScalarField f = make_random_field(prm, 3, 0.25);
  const ScalarField s = shifted(f, 1, 3);
  Grid g{2, 8};
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(s[g.shift(i, 1, 3)] == f[i]);
  CHECK(transposed(transposed(f, 0, 1), 0, 1).values == f.values);
  const ScalarField w = swapped(f);
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(w[i] == 1.0 - f[i]);
  CHECK(shifted(f, 0, 8).values == f.values);
}

TEST_CASE("grid index round trip") {
  Grid g{3, 5};
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(g.index(g.coords(i)) == i);
  CHECK(g.shift(g.index({4, 0, 0}), 0, 1) == g.index({0, 0, 0}));
  CHECK(g.shift(g.index({0, 2, 0}), 1, -3) == g.index({0, 4, 0}));
}

TEST_CASE("field files round trip over many seeds") {
  const Params prm = make_params(2, 4, 0.2, 0.3, 1.0, 8);
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const ScalarField f = make_random_field(prm, seed, 0.25);
    const FieldFormat fmt = seed % 2 ? FieldFormat::Binary : FieldFormat::Csv;
    const fs::path path = scratch("rt.field");
    save_field(f, path, fmt);
    const ScalarField g = load_field(path);
    REQUIRE(g.values == f.values);
    CHECK(g.params.d == 2);
    CHECK(g.params.tau == prm.tau);
    CHECK(g.params.L == prm.L);
  }
}

TEST_CASE("csv rejections") {
  const Params prm = make_params(1, 3, 0.2, 0.3, 1.0, 4);
  const fs::path path = scratch("bad.csv");
  save_field(make_constant_field(prm, 0.5), path, FieldFormat::Csv);
  std::ifstream in(path);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  in.close();

  {
    std::ofstream out(path);
    out << header << "\n0.5,1.5,0.5,0.5\n";
  }
  try {
    load_field(path);
    FAIL("accepted an out-of-range sample");
  } catch (const FieldFormatError& e) {
    CHECK(std::string(e.what()).find("[0,1]") != std::string::npos);
    CHECK(e.record() == 1);
  }

  const Params p2 = make_params(2, 4, 0.2, 0.3, 1.0, 2);
  save_field(make_constant_field(p2, 0.5), path, FieldFormat::Csv);
  std::ifstream in2(path);
  std::getline(in2, header);
  in2.close();
  {
    std::ofstream out(path);
    out << header << "\n";
    for (int r = 0; r < 4; ++r) out << "0.5,0.5\n";  // a 2x2x2 payload
  }
  try {
    load_field(path);
    FAIL("accepted a d=3 payload under a d=2 header");
  } catch (const FieldFormatError& e) {
    CHECK(std::string(e.what()).find("shape mismatch") != std::string::npos);
  }
}

TEST_CASE("stable sums") {
  std::vector<double> v = {1e16, 1.0, -1e16, 1.0};
  CHECK(stable_sum(v) == stable_sum({1.0, -1e16, 1.0, 1e16}));
  std::vector<double> w(1000, 0.1);
  CHECK(pairwise_sum(w.data(), w.size()) == doctest::Approx(100.0).epsilon(1e-14));
}
