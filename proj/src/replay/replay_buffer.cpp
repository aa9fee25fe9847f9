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

#include "actorq/replay/replay_buffer.hpp"

#include <algorithm>
#include <cstring>

#include "actorq/common/error.hpp"

namespace actorq::replay {

TransitionBatch make_batch(const std::vector<const Transition*>& items) {
  TransitionBatch b;
  if (items.empty()) return b;
  const std::size_t dim = items.front()->obs.size();
  b.obs = Tensor({items.size(), dim});
  b.next_obs = Tensor({items.size(), dim});
  for (std::size_t i = 0; i < items.size(); ++i) {
    const Transition& t = *items[i];
    std::copy(t.obs.begin(), t.obs.end(), b.obs.row(i).begin());
    std::copy(t.next_obs.begin(), t.next_obs.end(), b.next_obs.row(i).begin());
    b.actions.push_back(t.action);
    b.rewards.push_back(t.reward);
    b.dones.push_back(t.done ? 1 : 0);
  }
  return b;
}

double RateLimiter::deviation() const {
  return options_.samples_per_insert *
             (static_cast<double>(inserts_) - static_cast<double>(options_.min_size_to_sample)) -
         static_cast<double>(samples_);
}

bool RateLimiter::can_insert() const {
  if (!enabled() || !warmed_up()) return true;
  const double spi = options_.samples_per_insert;
  return deviation() + spi <= std::max(static_cast<double>(options_.batch_size), spi);
}

bool RateLimiter::can_sample(std::uint64_t /*batch*/) const {
  if (!warmed_up()) return false;
  return !enabled() || deviation() >= 0.0;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, RateLimiterOptions limiter)
    : capacity_(capacity), limiter_(limiter) {
  if (capacity == 0) throw DomainError("replay capacity must be positive");
  items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[next_] = std::move(t);
    next_ = (next_ + 1) % capacity_;
  }
  limiter_.record_insert();
}

// Warm-up (min_size_to_sample) is the size gate; draws are with replacement,
// so a batch larger than the store is legal.
bool ReplayBuffer::sample_ready(std::size_t batch_size) const {
  return !items_.empty() && limiter_.can_sample(batch_size);
}

void ReplayBuffer::insert(Transition t) {
  std::unique_lock lock(mu_);
  insert_cv_.wait(lock, [&] { return closed_ || limiter_.can_insert(); });
  if (closed_) throw ChannelClosed();
  push(std::move(t));
  lock.unlock();
  sample_cv_.notify_all();
}

bool ReplayBuffer::try_insert(Transition& t) {
  {
    std::lock_guard lock(mu_);
    if (closed_) throw ChannelClosed();
    if (!limiter_.can_insert()) return false;
    push(std::move(t));
  }
  sample_cv_.notify_all();
  return true;
}

TransitionBatch ReplayBuffer::draw(std::size_t batch_size, Rng& rng) {
  std::vector<const Transition*> picks(batch_size);
  for (auto& p : picks) p = &items_[rng.below(items_.size())];
  TransitionBatch b = make_batch(picks);
  limiter_.record_sample(batch_size);
  return b;
}

TransitionBatch ReplayBuffer::sample(std::size_t batch_size, Rng& rng) {
  std::unique_lock lock(mu_);
  sample_cv_.wait(lock, [&] { return closed_ || sample_ready(batch_size); });
  if (closed_) throw ChannelClosed();
  TransitionBatch b = draw(batch_size, rng);
  lock.unlock();
  insert_cv_.notify_all();
  return b;
}

bool ReplayBuffer::try_sample(std::size_t batch_size, Rng& rng, TransitionBatch& out) {
  {
    std::lock_guard lock(mu_);
    if (closed_) throw ChannelClosed();
    if (!sample_ready(batch_size)) return false;
    out = draw(batch_size, rng);
  }
  insert_cv_.notify_all();
  return true;
}

bool ReplayBuffer::can_insert() const {
  std::lock_guard lock(mu_);
  return limiter_.can_insert();
}

bool ReplayBuffer::can_sample(std::size_t batch_size) const {
  std::lock_guard lock(mu_);
  return sample_ready(batch_size);
}

void ReplayBuffer::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  insert_cv_.notify_all();
  sample_cv_.notify_all();
}

bool ReplayBuffer::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

std::size_t ReplayBuffer::size() const {
  std::lock_guard lock(mu_);
  return items_.size();
}

std::uint64_t ReplayBuffer::inserts() const {
  std::lock_guard lock(mu_);
  return limiter_.inserts();
}

std::uint64_t ReplayBuffer::samples() const {
  std::lock_guard lock(mu_);
  return limiter_.samples();
}

double ReplayBuffer::deviation() const {
  std::lock_guard lock(mu_);
  return limiter_.deviation();
}

}  // namespace actorq::replay
