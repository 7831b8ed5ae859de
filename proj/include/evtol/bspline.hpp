#pragma once
// Clamped uniform cubic B-spline on [0, T], evaluated by De Boor's algorithm.
// The curve interpolates its first and last control points and stays inside
// the convex hull of the control polygon.

#include <vector>

namespace evtol {

class BSpline {
 public:
  // degree-3 spline over n >= 4 control points on the domain [0, duration]
  BSpline(std::vector<double> control, double duration);

  double eval(double t) const;  // t clamped to [0, duration]

  double duration() const { return duration_; }
  const std::vector<double>& control() const { return ctrl_; }

 private:
  std::vector<double> ctrl_;
  std::vector<double> knots_;
  double duration_;
};

}  // namespace evtol
