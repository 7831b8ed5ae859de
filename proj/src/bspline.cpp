#include "evtol/bspline.hpp"

#include <algorithm>
#include <stdexcept>

namespace evtol {

namespace {
constexpr int kDegree = 3;
}

BSpline::BSpline(std::vector<double> control, double duration)
    : ctrl_(std::move(control)), duration_(duration) {
  const int n = static_cast<int>(ctrl_.size());
  if (n < kDegree + 1) throw std::invalid_argument("BSpline: need at least 4 control points");
  if (!(duration > 0.0)) throw std::invalid_argument("BSpline: duration must be positive");
  // clamped uniform knots: 4 zeros, n-4 evenly spaced interior, 4 at duration
  knots_.resize(n + kDegree + 1);
  const int interior = n - kDegree - 1;
  for (int i = 0; i <= kDegree; ++i) knots_[i] = 0.0;
  for (int i = 1; i <= interior; ++i)
    knots_[kDegree + i] = duration * static_cast<double>(i) / (interior + 1);
  for (int i = n; i < n + kDegree + 1; ++i) knots_[i] = duration;
}

double BSpline::eval(double t) const {
  t = std::clamp(t, 0.0, duration_);
  const int n = static_cast<int>(ctrl_.size());

  int span;
  if (t >= knots_[n]) {
    span = n - 1;
  } else {
    span = kDegree;
    while (span < n - 1 && t >= knots_[span + 1]) ++span;
  }

  double d[kDegree + 1];
  for (int j = 0; j <= kDegree; ++j) d[j] = ctrl_[span - kDegree + j];
  for (int r = 1; r <= kDegree; ++r) {
    for (int j = kDegree; j >= r; --j) {
      const int i = span - kDegree + j;
      const double den = knots_[i + kDegree - r + 1] - knots_[i];
      const double alpha = den > 0.0 ? (t - knots_[i]) / den : 0.0;
      d[j] = (1.0 - alpha) * d[j - 1] + alpha * d[j];
    }
  }
  return d[kDegree];
}

}  // namespace evtol
