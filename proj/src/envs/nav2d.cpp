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

#include "actorq/envs/nav2d.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "actorq/common/error.hpp"
#include "actorq/common/rng.hpp"

namespace actorq::envs {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double deg(double d) { return d * std::numbers::pi / 180.0; }

// First parameter t >= 0 at which p + t * d enters the box, or +inf.
double ray_box(double px, double py, double dx, double dy, const Box& b) {
  double t0 = 0.0, t1 = kInf;
  const double p[2] = {px, py}, d[2] = {dx, dy}, lo[2] = {b.x0, b.y0}, hi[2] = {b.x1, b.y1};
  for (int a = 0; a < 2; ++a) {
    if (std::fabs(d[a]) < 1e-12) {
      if (p[a] < lo[a] || p[a] > hi[a]) return kInf;
      continue;
    }
    double ta = (lo[a] - p[a]) / d[a];
    double tb = (hi[a] - p[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return kInf;
  }
  return t0;
}

// Parameter t >= 0 at which p + t * d leaves the square [0, side]^2.
double ray_exit(double px, double py, double dx, double dy, double side) {
  double t = kInf;
  if (dx > 0) t = std::min(t, (side - px) / dx);
  if (dx < 0) t = std::min(t, -px / dx);
  if (dy > 0) t = std::min(t, (side - py) / dy);
  if (dy < 0) t = std::min(t, -py / dy);
  return std::max(t, 0.0);
}

}  // namespace

float nav2d_reward(bool reached, bool failed, double goal_distance, double v_now,
                   const Nav2dParams& params) {
  if (reached && failed) throw DomainError("goal and failure flags are mutually exclusive");
  const double distance_correction = (params.v_max - v_now) * params.t_max;
  const double r = 1000.0 * (reached ? 1.0 : 0.0) - 100.0 * (failed ? 1.0 : 0.0) - goal_distance -
                   distance_correction * params.distance_weight - 1.0;
  return static_cast<float>(r);
}

const std::vector<Nav2dAction>& nav2d_actions() {
  static const std::vector<Nav2dAction> table = [] {
    std::vector<Nav2dAction> t;
    for (double speed : {0.5, 1.0, 1.5, 2.0, 2.5}) {
      for (double turn : {-60.0, -30.0, 0.0, 30.0, 60.0}) t.push_back({speed, deg(turn)});
    }
    return t;
  }();
  return table;
}

Nav2d::Nav2d(Nav2dParams params)
    : Environment({"nav2d", 8 + kRays, 25, params.max_steps}), params_(params) {}

void Nav2d::set_state(const Nav2dState& s) {
  state_ = s;
  mark_running();
}

Observation Nav2d::do_reset(std::uint64_t seed) {
  Rng rng(seed);
  const double side = params_.arena;
  const double cx = side / 2.0, cy = side / 2.0;
  state_ = Nav2dState{};
  state_.x = cx;
  state_.y = cy;
  const int count = 1 + static_cast<int>(rng.below(5));
  while (static_cast<int>(state_.obstacles.size()) < count) {
    const double hx = rng.uniform(0.5, 2.0), hy = rng.uniform(0.5, 2.0);
    const double bx = rng.uniform(hx, side - hx), by = rng.uniform(hy, side - hy);
    const Box b{bx - hx, by - hy, bx + hx, by + hy};
    if (b.contains(cx, cy, 1.0)) continue;
    state_.obstacles.push_back(b);
  }
  for (;;) {
    const double gx = rng.uniform(1.0, side - 1.0), gy = rng.uniform(1.0, side - 1.0);
    if (std::hypot(gx - cx, gy - cy) < 3.0) continue;
    const bool blocked = std::any_of(state_.obstacles.begin(), state_.obstacles.end(),
                                     [&](const Box& b) { return b.contains(gx, gy, 0.5); });
    if (blocked) continue;
    state_.goal_x = gx;
    state_.goal_y = gy;
    break;
  }
  return observe();
}

double Nav2d::ray_distance(double angle) const {
  const double dx = std::cos(angle), dy = std::sin(angle);
  double t = ray_exit(state_.x, state_.y, dx, dy, params_.arena);
  for (const Box& b : state_.obstacles) t = std::min(t, ray_box(state_.x, state_.y, dx, dy, b));
  return std::min(t, params_.arena);
}

Observation Nav2d::observe() const {
  const double side = params_.arena;
  const double gx = state_.goal_x - state_.x, gy = state_.goal_y - state_.y;
  const double c = std::cos(state_.heading), s = std::sin(state_.heading);
  Observation o;
  o.reserve(spec().observation_dim);
  o.push_back(static_cast<float>((c * gx + s * gy) / side));
  o.push_back(static_cast<float>((-s * gx + c * gy) / side));
  o.push_back(static_cast<float>(std::hypot(gx, gy) / side));
  o.push_back(static_cast<float>(state_.v_now / params_.v_max));
  o.push_back(static_cast<float>(state_.x / side));
  o.push_back(static_cast<float>(state_.y / side));
  o.push_back(static_cast<float>(c));
  o.push_back(static_cast<float>(s));
  for (std::size_t i = 0; i < kRays; ++i) {
    const double bearing = state_.heading + 2.0 * std::numbers::pi * static_cast<double>(i) / kRays;
    o.push_back(static_cast<float>(ray_distance(bearing) / side));
  }
  return o;
}

StepResult Nav2d::do_step(int action, bool at_cap) {
  const Nav2dAction a = nav2d_actions()[static_cast<std::size_t>(action)];
  state_.heading = std::remainder(state_.heading + a.heading_delta, 2.0 * std::numbers::pi);
  state_.v_now = std::clamp(a.speed, 0.0, params_.v_max);
  const double len = state_.v_now * params_.t_max;
  const double dx = len * std::cos(state_.heading), dy = len * std::sin(state_.heading);
  const double px = state_.x, py = state_.y;

  // Swept segment p + t * d, t in [0, 1].
  double t_hit = ray_exit(px, py, dx, dy, params_.arena);
  for (const Box& b : state_.obstacles) t_hit = std::min(t_hit, ray_box(px, py, dx, dy, b));
  double t_goal = kInf;
  {
    const double ox = px - state_.goal_x, oy = py - state_.goal_y;
    const double qa = dx * dx + dy * dy;
    const double qb = 2.0 * (dx * ox + dy * oy);
    const double qc = ox * ox + oy * oy - params_.goal_radius * params_.goal_radius;
    if (qc <= 0.0) {
      t_goal = 0.0;
    } else if (qa > 0.0) {
      const double disc = qb * qb - 4.0 * qa * qc;
      if (disc >= 0.0) {
        const double root = (-qb - std::sqrt(disc)) / (2.0 * qa);
        if (root >= 0.0) t_goal = root;
      }
    }
  }

  bool reached = false, failed = false;
  double t = 1.0;
  if (t_goal <= 1.0 && t_goal <= t_hit) {
    reached = true;
    t = t_goal;
  } else if (t_hit <= 1.0) {
    failed = true;
    t = t_hit;
  }
  state_.x = std::clamp(px + t * dx, 0.0, params_.arena);
  state_.y = std::clamp(py + t * dy, 0.0, params_.arena);
  if (!reached && !failed && at_cap) failed = true;  // out of steps

  const double goal_distance =
      reached ? 0.0 : std::hypot(state_.goal_x - state_.x, state_.goal_y - state_.y);
  StepResult r;
  r.observation = observe();
  r.reward = nav2d_reward(reached, failed, goal_distance, state_.v_now, params_);
  r.terminated = reached || failed;
  return r;
}

}  // namespace actorq::envs
