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
#include <vector>

#include "actorq/envs/environment.hpp"

namespace actorq::envs {

struct Nav2dParams {
  double arena = 25.0;          // square side, metres
  double v_max = 2.5;           // m/s
  double t_max = 1.0;           // actuation duration, s
  double distance_weight = 1.0; // weight on the distance-correction term
  double goal_radius = 0.5;
  int max_steps = 750;
};

// Terminal-flag reward: 1000*reached - 100*failed - goal_distance
// - (v_max - v_now) * t_max * distance_weight - 1. Throws DomainError when
// both flags are set.
float nav2d_reward(bool reached, bool failed, double goal_distance, double v_now,
                   const Nav2dParams& params);

struct Nav2dAction {
  double speed;          // m/s
  double heading_delta;  // radians
};

// 25 actions: speeds {0.5 .. 2.5} x heading changes {-60, -30, 0, 30, 60} deg.
const std::vector<Nav2dAction>& nav2d_actions();

struct Box {
  double x0, y0, x1, y1;

  bool contains(double x, double y, double margin = 0.0) const {
    return x >= x0 - margin && x <= x1 + margin && y >= y0 - margin && y <= y1 + margin;
  }
};

struct Nav2dState {
  double x = 0.0, y = 0.0, heading = 0.0;
  double goal_x = 0.0, goal_y = 0.0;
  double v_now = 0.0;
  std::vector<Box> obstacles;
};

// Point robot navigating a walled arena with 1-5 box obstacles to a goal.
// Goal and obstacles are resampled from the reset seed every episode; the
// agent always starts at the arena centre facing +x.
//
// Observation (14): goal offset in the body frame / arena, goal distance /
// arena, v_now / v_max, position / arena (2), cos/sin heading, and eight
// range readings (body-frame bearings 0, 45, ..., 315 deg) / arena.
class Nav2d final : public Environment {
 public:
  static constexpr std::size_t kRays = 8;

  explicit Nav2d(Nav2dParams params = {});

  const Nav2dParams& params() const { return params_; }
  const Nav2dState& state() const { return state_; }
  // Installs a layout and reopens the episode (tests and tooling).
  void set_state(const Nav2dState& s);

  std::unique_ptr<Environment> clone() const override { return std::make_unique<Nav2d>(*this); }

 private:
  Observation do_reset(std::uint64_t seed) override;
  StepResult do_step(int action, bool at_cap) override;
  Observation observe() const;
  double ray_distance(double angle) const;

  Nav2dParams params_;
  Nav2dState state_;
};

}  // namespace actorq::envs
