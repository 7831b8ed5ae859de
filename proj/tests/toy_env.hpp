#pragma once
// 1-D double-integrator control problem used to sanity-check the learner:
// a unit point mass on a line must reach and hold a target coordinate.
// Observation [position, velocity], one action in [-1,1] commanding
// acceleration.  Dense negative reward proportional to distance plus a small
// control cost; episodes end only by timeout.

#include <algorithm>
#include <cmath>
#include <vector>

#include "evtol/rng.hpp"
#include "evtol/sac.hpp"

namespace evtol_test {

class ToyDoubleIntegrator : public evtol::RlEnv {
 public:
  int obs_dim() const override { return 2; }
  int act_dim() const override { return 1; }

  std::vector<double> reset(std::uint64_t seed) override {
    evtol::Rng rng(seed);
    pos_ = -1.5 + rng.uniform();  // start somewhere left of the target
    vel_ = 0.0;
    t_ = 0;
    return {pos_, vel_};
  }

  Step step(const std::vector<double>& action) override {
    const double a = std::clamp(action.at(0), -1.0, 1.0);
    vel_ = std::clamp(vel_ + a * kDt, -3.0, 3.0);
    pos_ = std::clamp(pos_ + vel_ * kDt, -5.0, 5.0);
    t_ += 1;
    const double reward = -0.1 * std::fabs(pos_ - kTarget) - 0.001 * a * a;
    return {{pos_, vel_}, reward, t_ >= kSteps};
  }

  static constexpr double kTarget = 0.5;
  static constexpr double kDt = 0.1;
  static constexpr int kSteps = 60;

 private:
  double pos_ = 0.0, vel_ = 0.0;
  int t_ = 0;
};

}  // namespace evtol_test
