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

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace actorq::envs {

using Observation = std::vector<float>;

struct EnvSpec {
  std::string name;
  std::size_t observation_dim = 0;
  int action_count = 0;
  int max_episode_steps = 0;
};

struct StepResult {
  Observation observation;
  float reward = 0.0f;
  bool terminated = false;  // reached a terminal state of the task
  bool truncated = false;   // hit the step cap without a terminal state

  bool done() const { return terminated || truncated; }
};

// Seeded episodic environment. Subclasses implement the dynamics; the base
// enforces action bounds, the step cap, and step-after-done detection.
class Environment {
 public:
  virtual ~Environment() = default;

  const EnvSpec& spec() const { return spec_; }
  Observation reset(std::uint64_t seed);
  StepResult step(int action);

  int elapsed_steps() const { return steps_; }
  bool episode_done() const { return done_; }

  virtual std::unique_ptr<Environment> clone() const = 0;

 protected:
  explicit Environment(EnvSpec spec) : spec_(std::move(spec)) {}

  virtual Observation do_reset(std::uint64_t seed) = 0;
  // Advances one step. `at_cap` is true when this step reaches the cap; a
  // subclass may treat the cap as terminal (Nav2d) instead of truncation.
  virtual StepResult do_step(int action, bool at_cap) = 0;

  // Lets state-injection helpers reopen an episode.
  void mark_running() {
    done_ = false;
    started_ = true;
  }

 private:
  EnvSpec spec_;
  int steps_ = 0;
  bool done_ = false;
  bool started_ = false;
};

// "cartpole", "mountaincar", "acrobot", "nav2d". Throws DomainError otherwise.
std::unique_ptr<Environment> make_env(std::string_view name);
std::vector<std::string> env_names();

}  // namespace actorq::envs
