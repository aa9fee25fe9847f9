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

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <mutex>
#include <vector>

#include "actorq/common/rng.hpp"
#include "actorq/common/tensor.hpp"

namespace actorq::replay {

struct Transition {
  std::vector<float> obs;
  int action = 0;
  float reward = 0.0f;
  std::vector<float> next_obs;
  bool done = false;  // terminal: no bootstrapping from next_obs
};

struct TransitionBatch {
  Tensor obs;       // [batch, obs_dim]
  std::vector<int> actions;
  std::vector<float> rewards;
  Tensor next_obs;  // [batch, obs_dim]
  std::vector<std::uint8_t> dones;

  std::size_t size() const { return actions.size(); }
};

TransitionBatch make_batch(const std::vector<const Transition*>& items);

struct RateLimiterOptions {
  // Target learner samples per actor insert; <= 0 disables rate limiting.
  double samples_per_insert = 16.0;
  // Inserts required before the first sample.
  std::uint64_t min_size_to_sample = 1000;
  // Sampling granularity; also the tolerance band on each side.
  std::uint64_t batch_size = 32;
};

// Two-sided token bucket over the insert/sample counters. With
//   deviation = spi * (inserts - min_size) - samples
// inserts are admitted while deviation + spi <= max(batch, spi) and batches
// are admitted while deviation >= 0, so after warm-up
//   -batch <= deviation <= max(batch, spi).
// Either side can always make progress when the other is blocked.
class RateLimiter {
 public:
  explicit RateLimiter(RateLimiterOptions options) : options_(options) {}

  bool enabled() const { return options_.samples_per_insert > 0.0; }
  bool can_insert() const;
  bool can_sample(std::uint64_t batch) const;
  void record_insert() { ++inserts_; }
  void record_sample(std::uint64_t batch) { samples_ += batch; }

  std::uint64_t inserts() const { return inserts_; }
  std::uint64_t samples() const { return samples_; }
  double deviation() const;
  bool warmed_up() const { return inserts_ >= options_.min_size_to_sample; }
  const RateLimiterOptions& options() const { return options_; }

 private:
  RateLimiterOptions options_;
  std::uint64_t inserts_ = 0;
  std::uint64_t samples_ = 0;
};

// Bounded FIFO transition store with uniform sampling. Safe for many
// inserting threads and one sampling thread; blocking calls throw
// ChannelClosed once close() is called.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, RateLimiterOptions limiter);

  void insert(Transition t);
  // Non-blocking variant: returns false when the limiter refuses.
  bool try_insert(Transition& t);

  TransitionBatch sample(std::size_t batch_size, Rng& rng);
  // Returns false without sampling when the limiter or size refuses.
  bool try_sample(std::size_t batch_size, Rng& rng, TransitionBatch& out);

  bool can_insert() const;
  bool can_sample(std::size_t batch_size) const;

  void close();
  bool closed() const;

  std::size_t size() const;
  std::size_t capacity() const { return capacity_; }
  std::uint64_t inserts() const;
  std::uint64_t samples() const;
  double deviation() const;

 private:
  bool sample_ready(std::size_t batch_size) const;
  void push(Transition t);
  TransitionBatch draw(std::size_t batch_size, Rng& rng);

  const std::size_t capacity_;
  mutable std::mutex mu_;
  std::condition_variable insert_cv_;
  std::condition_variable sample_cv_;
  RateLimiter limiter_;
  std::vector<Transition> items_;
  std::size_t next_ = 0;  // ring slot for the next insert once full
  bool closed_ = false;
};

}  // namespace actorq::replay
