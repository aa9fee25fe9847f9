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

#include "actorq/envs/environment.hpp"

#include <string>

#include "actorq/common/error.hpp"
#include "actorq/envs/classic_control.hpp"
#include "actorq/envs/nav2d.hpp"

namespace actorq::envs {

Observation Environment::reset(std::uint64_t seed) {
  steps_ = 0;
  done_ = false;
  started_ = true;
  return do_reset(seed);
}

StepResult Environment::step(int action) {
  if (!started_) throw UsageError(spec_.name + ": step before reset");
  if (done_) throw UsageError(spec_.name + ": step after the episode finished");
  if (action < 0 || action >= spec_.action_count) {
    throw DomainError(spec_.name + ": action " + std::to_string(action) + " outside [0, " +
                      std::to_string(spec_.action_count) + ")");
  }
  ++steps_;
  const bool at_cap = steps_ >= spec_.max_episode_steps;
  StepResult r = do_step(action, at_cap);
  if (at_cap && !r.terminated) r.truncated = true;
  done_ = r.done();
  return r;
}

std::unique_ptr<Environment> make_env(std::string_view name) {
  if (name == "cartpole") return std::make_unique<CartPole>();
  if (name == "mountaincar") return std::make_unique<MountainCar>();
  if (name == "acrobot") return std::make_unique<Acrobot>();
  if (name == "nav2d") return std::make_unique<Nav2d>();
  throw DomainError("unknown environment '" + std::string(name) + "'");
}

std::vector<std::string> env_names() { return {"cartpole", "mountaincar", "acrobot", "nav2d"}; }

}  // namespace actorq::envs
