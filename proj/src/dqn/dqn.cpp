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

#include "actorq/dqn/dqn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/Core>

#include "actorq/common/error.hpp"
#include "actorq/common/fpenv.hpp"

namespace actorq::dqn {

void DqnConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw DomainError("gamma must lie in (0, 1]");
  if (!(eps_final >= 0.0 && eps_final <= 1.0)) throw DomainError("eps_final must lie in [0, 1]");
  if (!(eps_fraction >= 0.0 && eps_fraction <= 1.0)) {
    throw DomainError("eps_fraction must lie in [0, 1]");
  }
  if (!(lr > 0.0f)) throw DomainError("learning rate must be positive");
  if (batch_size == 0) throw DomainError("batch size must be positive");
  if (target_update_every <= 0) throw DomainError("target update period must be positive");
}

double epsilon(std::int64_t step, const DqnConfig& config) {
  const double horizon = config.eps_fraction * static_cast<double>(config.total_steps);
  if (horizon <= 0.0) return config.eps_final;
  const double frac = static_cast<double>(std::max<std::int64_t>(step, 0)) / horizon;
  if (frac >= 1.0) return config.eps_final;
  return config.eps_final + (1.0 - frac) * (1.0 - config.eps_final);
}

Tensor td_targets(const replay::TransitionBatch& batch, double gamma,
                  const nn::MlpPolicy& target_net) {
  if (batch.size() == 0) throw DomainError("td_targets needs a non-empty batch");
  const Tensor next_q = nn::forward_f32(target_net, batch.next_obs);
  Tensor y({batch.size()});
  const std::size_t actions = next_q.dim(1);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    double target = batch.rewards[i];
    if (!batch.dones[i]) {
      const auto row = next_q.row(i);
      target += gamma * static_cast<double>(*std::max_element(row.begin(), row.begin() + actions));
    }
    y[i] = static_cast<float>(target);
  }
  return y;
}

float huber_loss(std::span<const float> prediction, std::span<const float> target, float delta,
                 std::span<float> grad) {
  const std::size_t n = prediction.size();
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(prediction[i]) - target[i];
    const double a = std::fabs(d);
    loss += a <= delta ? 0.5 * d * d : delta * (a - 0.5 * delta);
    grad[i] = static_cast<float>(std::clamp(d, -static_cast<double>(delta),
                                            static_cast<double>(delta)) /
                                 static_cast<double>(n));
  }
  return static_cast<float>(loss / static_cast<double>(n));
}

double clip_grad_norm(nn::Gradients& grads, double max_norm) {
  using Vec = Eigen::Map<Eigen::VectorXf>;
  auto view = [](Tensor& t) { return Vec(t.raw(), static_cast<Eigen::Index>(t.size())); };
  double sq = 0.0;
  for (auto& g : grads) {
    sq += static_cast<double>(view(g.weight).squaredNorm());
    sq += static_cast<double>(view(g.bias).squaredNorm());
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const float scale = static_cast<float>(max_norm / norm);
    for (auto& g : grads) {
      view(g.weight) *= scale;
      view(g.bias) *= scale;
    }
  }
  return norm;
}

Learner::Learner(nn::MlpPolicy net, DqnConfig config, std::uint64_t seed)
    : config_(config), online_(std::move(net)), target_(online_), rng_(seed) {
  config_.validate();
  adam_ = nn::make_adam_state(online_, nn::AdamOptions{.lr = config_.lr});
}

float Learner::step(replay::ReplayBuffer& buffer) {
  return train_on_batch(buffer.sample(config_.batch_size, rng_));
}

float Learner::train_on_batch(const replay::TransitionBatch& batch) {
  const std::int64_t gate = gate_step_.value_or(steps_);
  online_.update_fake_quant_gate(gate);
  target_.update_fake_quant_gate(gate);

  const Tensor y = td_targets(batch, config_.gamma, target_);
  nn::ForwardCache cache;
  const Tensor q = nn::forward_train(online_, batch.obs, cache);
  const std::size_t n = batch.size();
  const std::size_t actions = q.dim(1);
  std::vector<float> chosen(n), grad(n);
  for (std::size_t i = 0; i < n; ++i) chosen[i] = q[i * actions + batch.actions[i]];
  const float loss = huber_loss(chosen, y.data(), config_.huber_delta, grad);
  if (!std::isfinite(loss)) {
    throw TrainingError("non-finite DQN loss at learner step " + std::to_string(steps_));
  }
  Tensor grad_out({n, actions});
  for (std::size_t i = 0; i < n; ++i) grad_out[i * actions + batch.actions[i]] = grad[i];
  nn::Gradients grads = nn::backward(online_, cache, grad_out);
  if (config_.max_grad_norm > 0.0f) clip_grad_norm(grads, config_.max_grad_norm);
  nn::apply_adam(adam_, online_, grads);

  ++steps_;
  if (steps_ % config_.target_update_every == 0) target_ = online_;
  return loss;
}

PolicyFn greedy_policy(const nn::MlpPolicy& net) {
  return [&net](std::span<const float> obs) {
    const Tensor q = nn::forward_f32(net, obs);
    return nn::argmax(q.data());
  };
}

int epsilon_greedy(const PolicyFn& greedy, std::span<const float> obs, double eps, int actions,
                   Rng& rng) {
  if (rng.uniform() < eps) return static_cast<int>(rng.below(static_cast<std::uint64_t>(actions)));
  return greedy(obs);
}

std::vector<double> evaluate(const PolicyFn& policy, envs::Environment& env, int episodes,
                             std::uint64_t seed) {
  std::vector<double> returns;
  for (int e = 0; e < episodes; ++e) {
    envs::Observation obs = env.reset(derive_seed(seed, static_cast<std::uint64_t>(e)));
    double total = 0.0;
    for (;;) {
      envs::StepResult r = env.step(policy(obs));
      total += r.reward;
      if (r.done()) break;
      obs = std::move(r.observation);
    }
    returns.push_back(total);
  }
  return returns;
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

TrainResult train_dqn(const TrainOptions& options) {
  options.dqn.validate();
  const FlushDenormals ftz;
  auto env = envs::make_env(options.env);
  auto eval_env = env->clone();
  const auto& spec = env->spec();

  std::vector<std::size_t> dims{spec.observation_dim};
  dims.insert(dims.end(), options.hidden.begin(), options.hidden.end());
  dims.push_back(static_cast<std::size_t>(spec.action_count));
  nn::MlpPolicy net = nn::MlpPolicy::init(dims, derive_seed(options.seed, 1));
  if (options.qat) net.set_fake_quant(options.qat);

  replay::ReplayBuffer buffer(
      options.buffer_capacity,
      replay::RateLimiterOptions{.samples_per_insert = 0.0,
                                 .min_size_to_sample = options.warmup,
                                 .batch_size = options.dqn.batch_size});
  Learner learner(std::move(net), options.dqn, derive_seed(options.seed, 2));
  Rng act_rng(derive_seed(options.seed, 3));

  // With QAT, only snapshots taken after the gate opens are candidates.
  const bool gated = options.qat && options.qat->quant_delay < options.dqn.total_steps;
  TrainResult result;
  result.best_eval = -std::numeric_limits<double>::infinity();
  const auto start = std::chrono::steady_clock::now();
  std::uint64_t episode = 0;
  envs::Observation obs = env->reset(derive_seed(options.seed, 100 + episode));
  for (std::int64_t t = 0; t < options.dqn.total_steps; ++t) {
    nn::MlpPolicy& online = const_cast<nn::MlpPolicy&>(learner.online());
    online.update_fake_quant_gate(t);
    const int action = epsilon_greedy(greedy_policy(online), obs, epsilon(t, options.dqn),
                                      spec.action_count, act_rng);
    envs::StepResult r = env->step(action);
    replay::Transition tr{obs, action, r.reward, r.observation, r.terminated};
    buffer.insert(std::move(tr));
    if (r.done()) {
      ++episode;
      obs = env->reset(derive_seed(options.seed, 100 + episode));
    } else {
      obs = std::move(r.observation);
    }

    replay::TransitionBatch batch;
    if ((t + 1) % options.train_every == 0 &&
        buffer.try_sample(options.dqn.batch_size, learner.rng(), batch)) {
      learner.set_fake_quant_step(t);
      result.losses.push_back(learner.train_on_batch(batch));
    }

    if ((t + 1) % options.eval_every == 0 || t + 1 == options.dqn.total_steps) {
      online.update_fake_quant_gate(t);
      const auto returns = evaluate(greedy_policy(online), *eval_env, options.eval_episodes,
                                    derive_seed(options.seed, 7));
      EvalPoint p;
      p.env_step = t + 1;
      p.learner_step = learner.steps();
      p.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      p.mean_return = mean(returns);
      result.curve.push_back(p);
      const bool eligible = !gated || online.fake_quant_active();
      if (eligible && (!options.keep_best || p.mean_return >= result.best_eval)) {
        result.best_eval = p.mean_return;
        result.model = online;
      }
    }
  }
  return result;
}

}  // namespace actorq::dqn
