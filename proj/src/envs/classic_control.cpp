/* Copyright 2026 The ActorQ Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "actorq/envs/classic_control.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "actorq/common/rng.hpp"

namespace actorq::envs {

// ---------------------------------------------------------------- CartPole

CartPole::CartPole() : Environment({"cartpole", 4, 2, kMaxSteps}) {}

void CartPole::set_state(const State& s) {
  state_ = s;
  mark_running();
}

Observation CartPole::observe() const {
  return {static_cast<float>(state_[0]), static_cast<float>(state_[1]),
          static_cast<float>(state_[2]), static_cast<float>(state_[3])};
}

Observation CartPole::do_reset(std::uint64_t seed) {
  Rng rng(seed);
  for (double& v : state_) v = rng.uniform(-0.05, 0.05);
  return observe();
}

StepResult CartPole::do_step(int action, bool /*at_cap*/) {
  constexpr double total_mass = kCartMass + kPoleMass;
  constexpr double polemass_length = kPoleMass * kHalfPoleLength;
  auto [x, x_dot, theta, theta_dot] = state_;
  const double force = action == 1 ? kForce : -kForce;
  const double cos_t = std::cos(theta);
  const double sin_t = std::sin(theta);
  const double temp = (force + polemass_length * theta_dot * theta_dot * sin_t) / total_mass;
  const double theta_acc = (kGravity * sin_t - cos_t * temp) /
                           (kHalfPoleLength * (4.0 / 3.0 - kPoleMass * cos_t * cos_t / total_mass));
  const double x_acc = temp - polemass_length * theta_acc * cos_t / total_mass;
  x += kTau * x_dot;
  x_dot += kTau * x_acc;
  theta += kTau * theta_dot;
  theta_dot += kTau * theta_acc;
  state_ = {x, x_dot, theta, theta_dot};

  StepResult r;
  r.observation = observe();
  r.reward = 1.0f;
  r.terminated = x < -kXThreshold || x > kXThreshold || theta < -kThetaThreshold ||
                 theta > kThetaThreshold;
  return r;
}

// ------------------------------------------------------------- MountainCar

MountainCar::MountainCar() : Environment({"mountaincar", 2, 3, kMaxSteps}) {}

void MountainCar::set_state(double position, double velocity) {
  position_ = position;
  velocity_ = velocity;
  mark_running();
}

Observation MountainCar::do_reset(std::uint64_t seed) {
  Rng rng(seed);
  position_ = rng.uniform(-0.6, -0.4);
  velocity_ = 0.0;
  return {static_cast<float>(position_), static_cast<float>(velocity_)};
}

StepResult MountainCar::do_step(int action, bool /*at_cap*/) {
  velocity_ += (action - 1) * kForce + std::cos(3.0 * position_) * (-kGravity);
  velocity_ = std::clamp(velocity_, -kMaxSpeed, kMaxSpeed);
  position_ += velocity_;
  position_ = std::clamp(position_, kMinPosition, kMaxPosition);
  if (position_ == kMinPosition && velocity_ < 0.0) velocity_ = 0.0;

  StepResult r;
  r.observation = {static_cast<float>(position_), static_cast<float>(velocity_)};
  r.reward = -1.0f;
  r.terminated = position_ >= kGoalPosition && velocity_ >= 0.0;
  return r;
}

// ----------------------------------------------------------------- Acrobot

namespace {

double wrap(double x, double lo, double hi) {
  const double span = hi - lo;
  while (x > hi) x -= span;
  while (x < lo) x += span;
  return x;
}

}  // namespace

Acrobot::Acrobot() : Environment({"acrobot", 6, 3, kMaxSteps}) {}

void Acrobot::set_state(const State& s) {
  state_ = s;
  mark_running();
}

Observation Acrobot::observe() const {
  const auto& s = state_;
  return {static_cast<float>(std::cos(s[0])), static_cast<float>(std::sin(s[0])),
          static_cast<float>(std::cos(s[1])), static_cast<float>(std::sin(s[1])),
          static_cast<float>(s[2]), static_cast<float>(s[3])};
}

Observation Acrobot::do_reset(std::uint64_t seed) {
  Rng rng(seed);
  for (double& v : state_) v = rng.uniform(-0.1, 0.1);
  return observe();
}

Acrobot::State Acrobot::derivatives(const State& s, double torque) {
  constexpr double m1 = kLinkMass1, m2 = kLinkMass2, l1 = kLinkLength1;
  constexpr double lc1 = kLinkCom1, lc2 = kLinkCom2, i1 = kLinkMoi, i2 = kLinkMoi, g = kGravity;
  constexpr double half_pi = std::numbers::pi / 2.0;
  const auto [theta1, theta2, dtheta1, dtheta2] = s;
  const double d1 =
      m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * std::cos(theta2)) + i1 + i2;
  const double d2 = m2 * (lc2 * lc2 + l1 * lc2 * std::cos(theta2)) + i2;
  const double phi2 = m2 * lc2 * g * std::cos(theta1 + theta2 - half_pi);
  const double phi1 = -m2 * l1 * lc2 * dtheta2 * dtheta2 * std::sin(theta2) -
                      2.0 * m2 * l1 * lc2 * dtheta2 * dtheta1 * std::sin(theta2) +
                      (m1 * lc1 + m2 * l1) * g * std::cos(theta1 - half_pi) + phi2;
  const double ddtheta2 =
      (torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dtheta1 * dtheta1 * std::sin(theta2) - phi2) /
      (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
  const double ddtheta1 = -(d2 * ddtheta2 + phi1) / d1;
  return {dtheta1, dtheta2, ddtheta1, ddtheta2};
}

StepResult Acrobot::do_step(int action, bool /*at_cap*/) {
  const double torque = static_cast<double>(action - 1);
  auto add = [](const State& a, const State& b, double h) {
    return State{a[0] + h * b[0], a[1] + h * b[1], a[2] + h * b[2], a[3] + h * b[3]};
  };
  const State& s = state_;
  const State k1 = derivatives(s, torque);
  const State k2 = derivatives(add(s, k1, kDt / 2.0), torque);
  const State k3 = derivatives(add(s, k2, kDt / 2.0), torque);
  const State k4 = derivatives(add(s, k3, kDt), torque);
  State next;
  for (int i = 0; i < 4; ++i) next[i] = s[i] + kDt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  next[0] = wrap(next[0], -std::numbers::pi, std::numbers::pi);
  next[1] = wrap(next[1], -std::numbers::pi, std::numbers::pi);
  next[2] = std::clamp(next[2], -kMaxVel1, kMaxVel1);
  next[3] = std::clamp(next[3], -kMaxVel2, kMaxVel2);
  state_ = next;

  StepResult r;
  r.observation = observe();
  r.terminated = -std::cos(next[0]) - std::cos(next[1] + next[0]) > 1.0;
  r.reward = r.terminated ? 0.0f : -1.0f;
  return r;
}

}  // namespace actorq::envs
