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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "actorq/common/error.hpp"
#include "actorq/common/rng.hpp"
#include "actorq/envs/classic_control.hpp"
#include "actorq/envs/nav2d.hpp"

namespace actorq::envs {
namespace {

// Reference cart-pole Euler update written out independently.
std::array<double, 4> cartpole_oracle(std::array<double, 4> s, int action) {
  const double g = 9.8, mc = 1.0, mp = 0.1, l = 0.5, f = action ? 10.0 : -10.0, tau = 0.02;
  const double x = s[0], v = s[1], th = s[2], w = s[3];
  const double m = mc + mp;
  const double tmp = (f + mp * l * w * w * std::sin(th)) / m;
  const double alpha =
      (g * std::sin(th) - std::cos(th) * tmp) / (l * (4.0 / 3.0 - mp * std::pow(std::cos(th), 2) / m));
  const double acc = tmp - mp * l * alpha * std::cos(th) / m;
  return {x + tau * v, v + tau * acc, th + tau * w, w + tau * alpha};
}

std::pair<double, double> mountaincar_oracle(double p, double v, int action) {
  v += (action - 1) * 0.001 - 0.0025 * std::cos(3 * p);
  v = std::min(std::max(v, -0.07), 0.07);
  p += v;
  p = std::min(std::max(p, -1.2), 0.6);
  if (p == -1.2 && v < 0) v = 0;
  return {p, v};
}

TEST(CartPole, PushRightFromRest) {
  CartPole env;
  env.reset(0);
  env.set_state({0, 0, 0, 0});
  env.step(1);
  const auto& s = env.state();
  EXPECT_NEAR(s[0], 0.0, 1e-12);
  EXPECT_NEAR(s[1], 0.19512, 1e-5);
  EXPECT_NEAR(s[2], 0.0, 1e-12);
  EXPECT_NEAR(s[3], -0.29268, 1e-5);
}

TEST(CartPole, DynamicsMatchScalarOracle) {
  Rng rng(11);
  CartPole env;
  for (int i = 0; i < 1000; ++i) {
    const CartPole::State s{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-0.2, 0.2),
                            rng.uniform(-2, 2)};
    const int a = static_cast<int>(rng.below(2));
    env.reset(i);
    env.set_state(s);
    env.step(a);
    const auto want = cartpole_oracle(s, a);
    for (int k = 0; k < 4; ++k) {
      ASSERT_NEAR(env.state()[k], want[k], 1e-6 * std::max(1.0, std::fabs(want[k])));
    }
  }
}

TEST(CartPole, ResetWithinBand) {
  CartPole env;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto obs = env.reset(seed);
    for (float v : obs) {
      EXPECT_LE(std::fabs(v), 0.05f);
    }
  }
}

TEST(CartPole, EpisodeCapIs500) {
  CartPole env;
  env.reset(3);
  StepResult r;
  int steps = 0;
  // Keep the pole balanced by resetting the state before each step.
  while (true) {
    env.set_state({0, 0, 0, 0});
    r = env.step(steps % 2);
    ++steps;
    if (r.done()) break;
  }
  EXPECT_EQ(steps, 500);
  EXPECT_TRUE(r.truncated);
  EXPECT_FALSE(r.terminated);
}

TEST(MountainCar, GravityOnlyAtRest) {
  MountainCar env;
  env.reset(0);
  const double p0 = -0.3;
  env.set_state(p0, 0.0);
  env.step(1);
  const double dv = -0.0025 * std::cos(3 * p0);
  EXPECT_NEAR(env.velocity(), dv, 1e-15);
  EXPECT_NEAR(env.position(), p0 + dv, 1e-15);
  EXPECT_LT(env.position(), p0);
}

TEST(MountainCar, DynamicsMatchScalarOracle) {
  Rng rng(5);
  MountainCar env;
  for (int i = 0; i < 1000; ++i) {
    const double p = rng.uniform(-1.2, 0.45), v = rng.uniform(-0.07, 0.07);
    const int a = static_cast<int>(rng.below(3));
    env.reset(i);
    env.set_state(p, v);
    env.step(a);
    const auto [wp, wv] = mountaincar_oracle(p, v, a);
    ASSERT_NEAR(env.position(), wp, 1e-12);
    ASSERT_NEAR(env.velocity(), wv, 1e-12);
  }
}

TEST(Acrobot, RestingStateIsFixedPoint) {
  Acrobot env;
  env.reset(0);
  env.set_state({0, 0, 0, 0});
  env.step(1);
  for (double v : env.state()) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(Acrobot, DerivativesMatchScalarOracle) {
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) {
    const Acrobot::State s{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-5, 5),
                           rng.uniform(-10, 10)};
    const double tau = static_cast<double>(rng.below(3)) - 1.0;
    // Equations of motion of the two-link pendulum with unit masses and
    // lengths, centre of mass at mid-link and unit inertia.
    const double t1 = s[0], t2 = s[1], w1 = s[2], w2 = s[3], g = 9.8;
    const double d1 = 0.25 + (1 + 0.25 + std::cos(t2)) + 2;
    const double d2 = (0.25 + 0.5 * std::cos(t2)) + 1;
    const double phi2 = 0.5 * g * std::sin(t1 + t2);
    const double phi1 = -0.5 * w2 * w2 * std::sin(t2) - w2 * w1 * std::sin(t2) +
                        1.5 * g * std::sin(t1) + phi2;
    const double a2 =
        (tau + d2 / d1 * phi1 - 0.5 * w1 * w1 * std::sin(t2) - phi2) / (1.25 - d2 * d2 / d1);
    const double a1 = -(d2 * a2 + phi1) / d1;
    const auto got = Acrobot::derivatives(s, tau);
    ASSERT_NEAR(got[0], w1, 1e-12);
    ASSERT_NEAR(got[1], w2, 1e-12);
    ASSERT_NEAR(got[2], a1, 1e-6 * std::max(1.0, std::fabs(a1)));
    ASSERT_NEAR(got[3], a2, 1e-6 * std::max(1.0, std::fabs(a2)));
  }
}

TEST(Environment, RejectsBadActions) {
  for (const auto& name : env_names()) {
    auto env = make_env(name);
    EXPECT_THROW(env->step(0), UsageError) << name;
    env->reset(1);
    EXPECT_THROW(env->step(-1), DomainError) << name;
    EXPECT_THROW(env->step(env->spec().action_count), DomainError) << name;
  }
}

TEST(Environment, StepAfterDoneIsUsageError) {
  CartPole env;
  env.reset(0);
  StepResult r;
  do r = env.step(1);
  while (!r.done());
  EXPECT_THROW(env.step(1), UsageError);
}

TEST(Environment, UnknownNameIsDomainError) { EXPECT_THROW(make_env("pong"), DomainError); }

TEST(Environment, SeededDeterminism) {
  for (const auto& name : env_names()) {
    auto a = make_env(name);
    auto b = make_env(name);
    for (std::uint64_t seed : {0ull, 1ull, 77ull}) {
      auto oa = a->reset(seed);
      auto ob = b->reset(seed);
      ASSERT_EQ(oa, ob) << name;
      Rng rng(seed);
      for (int t = 0; t < 300; ++t) {
        const int act = static_cast<int>(rng.below(a->spec().action_count));
        const auto ra = a->step(act);
        const auto rb = b->step(act);
        ASSERT_EQ(ra.observation, rb.observation) << name;
        ASSERT_EQ(ra.reward, rb.reward) << name;
        ASSERT_EQ(ra.terminated, rb.terminated) << name;
        ASSERT_EQ(ra.truncated, rb.truncated) << name;
        if (ra.done()) break;
      }
    }
  }
}

TEST(EnvSpec, Dimensions) {
  EXPECT_EQ(make_env("cartpole")->spec().max_episode_steps, 500);
  EXPECT_EQ(make_env("nav2d")->spec().max_episode_steps, 750);
  EXPECT_EQ(make_env("nav2d")->spec().action_count, 25);
  EXPECT_EQ(make_env("acrobot")->spec().observation_dim, 6u);
  EXPECT_EQ(make_env("mountaincar")->spec().action_count, 3);
}

TEST(EnvSpec, ObservationMatchesDeclaredWidth) {
  for (const char* name : {"cartpole", "mountaincar", "acrobot", "nav2d"}) {
    auto env = make_env(name);
    const auto obs = env->reset(7);
    EXPECT_EQ(obs.size(), env->spec().observation_dim) << name;
    const auto step = env->step(0);
    EXPECT_EQ(step.observation.size(), env->spec().observation_dim) << name;
  }
}

TEST(Nav2dReward, GoalAtFullSpeed) {
  EXPECT_EQ(nav2d_reward(true, false, 0.0, 2.5, Nav2dParams{}), 999.0f);
}

TEST(Nav2dReward, Collision) {
  EXPECT_EQ(nav2d_reward(false, true, 10.0, 2.5, Nav2dParams{}), -111.0f);
}

TEST(Nav2dReward, MidEpisode) {
  EXPECT_EQ(nav2d_reward(false, false, 5.0, 1.5, Nav2dParams{}), -7.0f);
}

TEST(Nav2dReward, BothFlagsRejected) {
  EXPECT_THROW(nav2d_reward(true, true, 0.0, 0.0, Nav2dParams{}), DomainError);
}

TEST(Nav2dReward, AffineSlopes) {
  Rng rng(21);
  for (int i = 0; i < 10000; ++i) {
    Nav2dParams p;
    p.distance_weight = rng.uniform(0.0, 3.0);
    p.t_max = rng.uniform(0.1, 2.0);
    const bool a = rng.uniform() < 0.3, b = !a && rng.uniform() < 0.3;
    const double dg = rng.uniform(0.0, 30.0), v = rng.uniform(0.0, 2.5);
    const double h = 0.25;
    const double r = nav2d_reward(a, b, dg, v, p);
    const double r_dg = nav2d_reward(a, b, dg + h, v, p);
    const double r_v = nav2d_reward(false || a, b, dg, std::min(v + h, 2.5), p);
    const double dv = std::min(v + h, 2.5) - v;
    ASSERT_NEAR((r_dg - r) / h, -1.0, 2e-3);
    if (dv > 1e-3) ASSERT_NEAR((r_v - r) / dv, p.distance_weight * p.t_max, 5e-2);
  }
}

TEST(Nav2dActions, Table) {
  const auto& t = nav2d_actions();
  ASSERT_EQ(t.size(), 25u);
  double vmax = 0.0;
  for (const auto& a : t) vmax = std::max(vmax, a.speed);
  EXPECT_EQ(vmax, 2.5);
}

TEST(Nav2d, StraightMoveAlongX) {
  Nav2d env;
  env.reset(0);
  Nav2dState s;
  s.x = 5.0;
  s.y = 5.0;
  s.goal_x = 20.0;
  s.goal_y = 20.0;
  env.set_state(s);
  int straight_fast = -1;
  for (std::size_t i = 0; i < nav2d_actions().size(); ++i) {
    if (nav2d_actions()[i].speed == 2.5 && nav2d_actions()[i].heading_delta == 0.0) {
      straight_fast = static_cast<int>(i);
    }
  }
  ASSERT_GE(straight_fast, 0);
  const auto r = env.step(straight_fast);
  EXPECT_DOUBLE_EQ(env.state().x, 7.5);
  EXPECT_DOUBLE_EQ(env.state().y, 5.0);
  EXPECT_FALSE(r.done());
  EXPECT_FLOAT_EQ(r.reward, -1.0f - static_cast<float>(std::hypot(12.5, 15.0)));
}

TEST(Nav2d, ResetLayout) {
  Nav2d env;
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    env.reset(seed);
    const auto& s = env.state();
    EXPECT_DOUBLE_EQ(s.x, 12.5);
    EXPECT_DOUBLE_EQ(s.y, 12.5);
    ASSERT_GE(s.obstacles.size(), 1u);
    ASSERT_LE(s.obstacles.size(), 5u);
    for (const auto& b : s.obstacles) EXPECT_FALSE(b.contains(s.goal_x, s.goal_y));
    EXPECT_GE(s.goal_x, 0.0);
    EXPECT_LE(s.goal_x, 25.0);
  }
}

TEST(Nav2d, ReachingGoalPaysBonus) {
  Nav2d env;
  env.reset(0);
  Nav2dState s;
  s.x = 5.0;
  s.y = 5.0;
  s.goal_x = 7.0;
  s.goal_y = 5.0;
  env.set_state(s);
  // 2.5 m straight ahead passes through the goal disc.
  int a = 22;  // speed 2.5, no turn
  ASSERT_EQ(nav2d_actions()[a].speed, 2.5);
  ASSERT_EQ(nav2d_actions()[a].heading_delta, 0.0);
  const auto r = env.step(a);
  EXPECT_TRUE(r.terminated);
  EXPECT_EQ(r.reward, 999.0f);
}

TEST(Nav2d, SweptCollisionWithThinBox) {
  Nav2d env;
  env.reset(0);
  Nav2dState s;
  s.x = 5.0;
  s.y = 5.0;
  s.goal_x = 20.0;
  s.goal_y = 5.0;
  // Thin wall between the start and the end of a 2.5 m step.
  s.obstacles.push_back(Box{6.0, 4.0, 6.1, 6.0});
  env.set_state(s);
  const auto r = env.step(22);
  EXPECT_TRUE(r.terminated);
  EXPECT_NEAR(env.state().x, 6.0, 1e-12);
  EXPECT_FLOAT_EQ(r.reward, -100.0f - 14.0f - 1.0f);
}

TEST(Nav2d, StepCapIsFailure) {
  Nav2dParams p;
  p.max_steps = 3;
  Nav2d env(p);
  env.reset(0);
  Nav2dState s;
  s.x = 12.5;
  s.y = 12.5;
  s.goal_x = 2.0;
  s.goal_y = 2.0;
  env.set_state(s);
  // Spin in place with small steps.
  StepResult r;
  for (int i = 0; i < 3; ++i) r = env.step(4);  // speed 0.5, +60 deg
  EXPECT_TRUE(r.terminated);
  EXPECT_FALSE(r.truncated);
  EXPECT_LT(r.reward, -100.0f);
}

}  // namespace
}  // namespace actorq::envs
