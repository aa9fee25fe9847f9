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

#pragma once

#include <array>

#include "actorq/envs/environment.hpp"

namespace actorq::envs {

// Cart-pole balancing with the canonical constants and explicit Euler
// integration. Actions: 0 push left, 1 push right. Reward 1 per step.
class CartPole final : public Environment {
 public:
  static constexpr double kGravity = 9.8;
  static constexpr double kCartMass = 1.0;
  static constexpr double kPoleMass = 0.1;
  static constexpr double kHalfPoleLength = 0.5;
  static constexpr double kForce = 10.0;
  static constexpr double kTau = 0.02;
  static constexpr double kXThreshold = 2.4;
  static constexpr double kThetaThreshold = 12.0 * 2.0 * 3.14159265358979323846 / 360.0;
  static constexpr int kMaxSteps = 500;

  using State = std::array<double, 4>;  // x, x_dot, theta, theta_dot

  CartPole();

  const State& state() const { return state_; }
  void set_state(const State& s);

  std::unique_ptr<Environment> clone() const override { return std::make_unique<CartPole>(*this); }

 private:
  Observation do_reset(std::uint64_t seed) override;
  StepResult do_step(int action, bool at_cap) override;
  Observation observe() const;

  State state_{};
};

// Mountain car: 0 push left, 1 no push, 2 push right. Reward -1 per step.
class MountainCar final : public Environment {
 public:
  static constexpr double kMinPosition = -1.2;
  static constexpr double kMaxPosition = 0.6;
  static constexpr double kMaxSpeed = 0.07;
  static constexpr double kGoalPosition = 0.5;
  static constexpr double kForce = 0.001;
  static constexpr double kGravity = 0.0025;
  static constexpr int kMaxSteps = 200;

  MountainCar();

  double position() const { return position_; }
  double velocity() const { return velocity_; }
  void set_state(double position, double velocity);

  std::unique_ptr<Environment> clone() const override {
    return std::make_unique<MountainCar>(*this);
  }

 private:
  Observation do_reset(std::uint64_t seed) override;
  StepResult do_step(int action, bool at_cap) override;

  double position_ = 0.0;
  double velocity_ = 0.0;
};

// Two-link acrobot with the book dynamics and one RK4 step per action.
// Actions apply torque -1, 0, +1 at the joint. Reward -1 per step, 0 on
// reaching the target height.
class Acrobot final : public Environment {
 public:
  static constexpr double kDt = 0.2;
  static constexpr double kLinkLength1 = 1.0;
  static constexpr double kLinkMass1 = 1.0;
  static constexpr double kLinkMass2 = 1.0;
  static constexpr double kLinkCom1 = 0.5;
  static constexpr double kLinkCom2 = 0.5;
  static constexpr double kLinkMoi = 1.0;
  static constexpr double kGravity = 9.8;
  static constexpr double kMaxVel1 = 4.0 * 3.14159265358979323846;
  static constexpr double kMaxVel2 = 9.0 * 3.14159265358979323846;
  static constexpr int kMaxSteps = 500;

  using State = std::array<double, 4>;  // theta1, theta2, dtheta1, dtheta2

  Acrobot();

  const State& state() const { return state_; }
  void set_state(const State& s);

  // Time derivative of (state, torque); exposed for tests.
  static State derivatives(const State& s, double torque);

  std::unique_ptr<Environment> clone() const override { return std::make_unique<Acrobot>(*this); }

 private:
  Observation do_reset(std::uint64_t seed) override;
  StepResult do_step(int action, bool at_cap) override;
  Observation observe() const;

  State state_{};
};

}  // namespace actorq::envs
