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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "actorq/common/rng.hpp"
#include "actorq/envs/environment.hpp"
#include "actorq/nn/adam.hpp"
#include "actorq/nn/mlp.hpp"
#include "actorq/replay/replay_buffer.hpp"

namespace actorq::dqn {

struct DqnConfig {
  double gamma = 0.99;
  float lr = 1e-4f;
  std::int64_t target_update_every = 1000;  // learner steps
  double eps_final = 0.01;
  double eps_fraction = 0.1;
  std::int64_t total_steps = 60000;  // env steps; drives the epsilon schedule
  std::size_t batch_size = 32;
  std::int64_t quant_delay = 500000;
  float huber_delta = 1.0f;
  // Global gradient-norm clip; <= 0 disables.
  float max_grad_norm = 10.0f;

  // Throws DomainError on out-of-range values.
  void validate() const;
};

// Linear anneal from 1 to eps_final over eps_fraction * total_steps.
double epsilon(std::int64_t step, const DqnConfig& config);

// y = r + gamma * max_a Q_target(s', a), or y = r on terminal transitions.
Tensor td_targets(const replay::TransitionBatch& batch, double gamma,
                  const nn::MlpPolicy& target_net);

// Mean Huber loss and its gradient with respect to the predictions.
float huber_loss(std::span<const float> prediction, std::span<const float> target, float delta,
                 std::span<float> grad);

// Rescales grads so their global L2 norm is at most max_norm; returns the
// norm before clipping.
double clip_grad_norm(nn::Gradients& grads, double max_norm);

// Full-precision DQN learner. Sole owner and mutator of the online and
// target networks.
class Learner {
 public:
  Learner(nn::MlpPolicy net, DqnConfig config, std::uint64_t seed);

  // Samples a batch (blocking per the buffer's rate limiter) and trains.
  float step(replay::ReplayBuffer& buffer);
  // One optimization step on a given batch; returns the loss.
  float train_on_batch(const replay::TransitionBatch& batch);

  // QAT gate position; by default the learner's own step count.
  void set_fake_quant_step(std::int64_t step) { gate_step_ = step; }

  const nn::MlpPolicy& online() const { return online_; }
  const nn::MlpPolicy& target() const { return target_; }
  std::int64_t steps() const { return steps_; }
  const DqnConfig& config() const { return config_; }
  Rng& rng() { return rng_; }

 private:
  DqnConfig config_;
  nn::MlpPolicy online_;
  nn::MlpPolicy target_;
  nn::AdamState adam_;
  Rng rng_;
  std::int64_t steps_ = 0;
  std::optional<std::int64_t> gate_step_;
};

using PolicyFn = std::function<int(std::span<const float>)>;

PolicyFn greedy_policy(const nn::MlpPolicy& net);

// Epsilon-greedy choice: a uniform action with probability eps, else greedy.
int epsilon_greedy(const PolicyFn& greedy, std::span<const float> obs, double eps, int actions,
                   Rng& rng);

// Undiscounted returns of `episodes` greedy episodes. Episode i resets
// with derive_seed(seed, i).
std::vector<double> evaluate(const PolicyFn& policy, envs::Environment& env, int episodes,
                             std::uint64_t seed);

double mean(std::span<const double> v);
double stddev(std::span<const double> v);

struct EvalPoint {
  std::int64_t env_step = 0;
  std::int64_t learner_step = 0;
  double wall_time_s = 0.0;
  double mean_return = 0.0;
};

// Single-process DQN training (one environment, one learner) used for
// quantization-aware training and baselines.
struct TrainOptions {
  std::string env = "cartpole";
  DqnConfig dqn;
  std::vector<std::size_t> hidden = {64, 64};
  std::uint64_t seed = 0;
  std::size_t buffer_capacity = 10000;
  std::uint64_t warmup = 1000;
  std::int64_t train_every = 1;  // env steps per learner step
  std::int64_t eval_every = 2000;  // env steps
  int eval_episodes = 5;
  std::optional<nn::FakeQuantConfig> qat;
  // Keep the best-evaluated snapshot as the returned model.
  bool keep_best = true;
};

struct TrainResult {
  nn::MlpPolicy model;
  std::vector<EvalPoint> curve;
  std::vector<float> losses;
  double best_eval = 0.0;
};

TrainResult train_dqn(const TrainOptions& options);

}  // namespace actorq::dqn
