#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "../vendor/doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "stripeforge/core.hpp"
#include "stripeforge/verify.hpp"

using namespace sf;

namespace {

const SuiteReport& default_report() {
  static const SuiteReport r = run_suite(default_verify_config());
  return r;
}

}  // namespace

TEST_CASE("default configuration passes") {
  const SuiteReport& r = default_report();
  CHECK(r.pass);
  for (const auto& c : r.checks) {
    INFO(c.name);
    CHECK(c.failures == 0);
  }
  std::vector<std::string> names;
  for (const auto& c : r.checks) names.push_back(c.name);
  CHECK(names == suite_check_names());
  CHECK(r.eta0 > 0);
}

TEST_CASE("fault injection is caught") {
  VerifyConfig cfg = default_verify_config();
  cfg.fault_injection = true;
  const SuiteReport r = run_suite(cfg);
  CHECK_FALSE(r.pass);
  CHECK(r.find("partpos0")->failures > 0);
  CHECK(suite_omega(0.5, true) != suite_omega(0.5, false));
}

TEST_CASE("suite is deterministic") {
  VerifyConfig cfg = default_verify_config();
  cfg.seeds = {1, 2, 3};
  cfg.sizes_1d = {32};
  CHECK(same_outcome(run_suite(cfg), run_suite(cfg)));
  VerifyConfig other = cfg;
  other.seeds = {4, 5, 6};
  CHECK_FALSE(same_outcome(run_suite(cfg), run_suite(other)));
}

TEST_CASE("configuration validation") {
  VerifyConfig cfg = default_verify_config();
  cfg.tolerances["no_such_check"] = 1e-9;
  try {
    validate(cfg);
    FAIL("unknown tolerance accepted");
  } catch (const InputError& e) {
    CHECK(e.key() == "tolerances.no_such_check");
  }
  VerifyConfig bad = default_verify_config();
  bad.upsilon = 1.5;
  CHECK_THROWS_AS(validate(bad), InputError);
}

TEST_CASE("Omega measure equals G") {
  for (double rho : {-2.5, -0.3, 0.7, 1.0, 3.2}) {
    const double G = std::abs(rho) * std::min(std::abs(rho), 1.0);
    CHECK(omega_measure(0.37, rho, 1.0) == doctest::Approx(G).epsilon(1e-12));
  }
  CHECK(in_omega(0.0, 1.0, 0.2, 0.8));
  CHECK(in_omega(1.0, -1.0, 0.8, 0.2));
  CHECK_FALSE(in_omega(0.0, 0.5, 0.2, 0.8));
}

TEST_CASE("bump bracket") {
  // N = 16, unit weights: sum over k = 3..4 of 2 (k - 1) (1/k) dx
  std::vector<double> w(31, 1.0);
  const double expect = (1.0 / 17) * 2 * ((2.0 / 3) + (3.0 / 4)) * 0.5;
  CHECK(bump_bracket(w, 16, 0.5, 1, 17.0 / 16) == doctest::Approx(expect));
}

TEST_CASE("suite csv") {
  const auto path = std::filesystem::temp_directory_path() / "stripeforge_suite.csv";
  write_suite_csv(default_report(), path, false);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header.find("wall_seconds_s") == std::string::npos);
  long rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == static_cast<long>(suite_check_names().size()));
  write_suite_csv(default_report(), path, true);
  std::ifstream in2(path);
  std::getline(in2, header);
  CHECK(header.find("wall_seconds_s") != std::string::npos);
  CHECK(format_suite(default_report()).find("PASS") != std::string::npos);
}
