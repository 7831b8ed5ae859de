#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "evtol/bspline.hpp"
#include "evtol/rng.hpp"

using evtol::BSpline;
using evtol::Rng;

namespace {

// Clamped uniform cubic knot vector matching the curve's construction:
// 4 zeros, n-4 evenly spaced interior knots, 4 at the duration.
std::vector<double> clamped_knots(int n, double T) {
  std::vector<double> k(n + 4);
  const int interior = n - 4;
  for (int i = 0; i <= 3; ++i) k[i] = 0.0;
  for (int i = 1; i <= interior; ++i) k[3 + i] = T * i / (interior + 1);
  for (int i = n; i < n + 4; ++i) k[i] = T;
  return k;
}

// Control points that reproduce the cubic a0 + a1 t + a2 t^2 + a3 t^3 exactly:
// the polar form (blossom) evaluated on knot triples (t_{i+1},t_{i+2},t_{i+3}).
std::vector<double> cubic_blossom_controls(int n, double T, double a0, double a1, double a2,
                                           double a3) {
  const auto k = clamped_knots(n, T);
  std::vector<double> c(n);
  for (int i = 0; i < n; ++i) {
    const double t1 = k[i + 1], t2 = k[i + 2], t3 = k[i + 3];
    const double e1 = t1 + t2 + t3;
    const double e2 = t1 * t2 + t1 * t3 + t2 * t3;
    const double e3 = t1 * t2 * t3;
    c[i] = a0 + a1 * e1 / 3.0 + a2 * e2 / 3.0 + a3 * e3;
  }
  return c;
}

}  // namespace

TEST_CASE("curve interpolates its first and last control points") {
  BSpline s({0.3, 0.9, -0.5, 0.7, 0.2, 1.4}, 12.0);
  CHECK(s.eval(0.0) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(s.eval(12.0) == doctest::Approx(1.4).epsilon(1e-15));
}

TEST_CASE("constant control polygons reproduce the constant") {
  for (int n : {4, 5, 9, 20}) {
    BSpline s(std::vector<double>(n, 0.6180339887), 7.5);
    for (double t = 0.0; t <= 7.5; t += 0.05)
      CHECK(s.eval(t) == doctest::Approx(0.6180339887).epsilon(1e-14));
  }
}

TEST_CASE("blossom control points reproduce cubic polynomials exactly") {
  const double T = 9.0;
  const double a0 = 0.4, a1 = -1.2, a2 = 0.35, a3 = -0.02;
  for (int n : {4, 6, 11, 23}) {
    BSpline s(cubic_blossom_controls(n, T, a0, a1, a2, a3), T);
    for (double t = 0.0; t <= T + 1e-9; t += T / 300.0) {
      const double want = a0 + a1 * t + a2 * t * t + a3 * t * t * t;
      CHECK(s.eval(t) == doctest::Approx(want).epsilon(1e-11));
    }
  }
}

TEST_CASE("curve stays inside the convex hull of the control polygon") {
  Rng rng(123);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 4 + static_cast<int>(rng.uniform_index(17));
    std::vector<double> c(n);
    for (auto& v : c) v = rng.uniform(0.0, 1.0);
    const double lo = *std::min_element(c.begin(), c.end());
    const double hi = *std::max_element(c.begin(), c.end());
    BSpline s(c, 25.0);
    for (double t = 0.0; t <= 25.0; t += 0.05) {
      const double v = s.eval(t);
      CHECK(v >= lo - 1e-12);
      CHECK(v <= hi + 1e-12);
    }
  }
}

TEST_CASE("evaluation clamps the parameter to the domain") {
  BSpline s({1.0, 2.0, 3.0, 4.0}, 5.0);
  CHECK(s.eval(-3.0) == s.eval(0.0));
  CHECK(s.eval(99.0) == s.eval(5.0));
}

TEST_CASE("fewer than four control points or non-positive durations are rejected") {
  CHECK_THROWS_AS(BSpline({1.0, 2.0, 3.0}, 5.0), std::invalid_argument);
  CHECK_THROWS_AS(BSpline({1.0, 2.0, 3.0, 4.0}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(BSpline({1.0, 2.0, 3.0, 4.0}, -1.0), std::invalid_argument);
}
