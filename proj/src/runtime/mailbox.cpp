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

#include "actorq/runtime/mailbox.hpp"

#include "actorq/common/error.hpp"

namespace actorq::runtime {

void Mailbox::publish(PacketPtr packet) {
  {
    std::lock_guard lock(mu_);
    if (closed_) return;
    value_ = std::move(packet);
    ++published_;
  }
  cv_.notify_all();
}

PacketPtr Mailbox::latest() const {
  std::lock_guard lock(mu_);
  return value_;
}

PacketPtr Mailbox::wait_newer(std::uint64_t seen) const {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return closed_ || (value_ && value_->version > seen); });
  if (closed_) throw ChannelClosed();
  return value_;
}

PacketPtr Mailbox::wait_any() const {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return closed_ || value_ != nullptr; });
  if (closed_) throw ChannelClosed();
  return value_;
}

void Mailbox::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool Mailbox::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

std::uint64_t Mailbox::published() const {
  std::lock_guard lock(mu_);
  return published_;
}

double RunClock::seconds() const {
  std::lock_guard lock(mu_);
  auto elapsed = (is_paused_ ? pause_start_ : Clock::now()) - start_ - paused_;
  return std::chrono::duration<double>(elapsed).count();
}

void RunClock::pause() {
  std::lock_guard lock(mu_);
  if (is_paused_) return;
  is_paused_ = true;
  pause_start_ = Clock::now();
}

void RunClock::resume() {
  std::lock_guard lock(mu_);
  if (!is_paused_) return;
  is_paused_ = false;
  paused_ += Clock::now() - pause_start_;
}

void PauseGate::hold() {
  std::lock_guard lock(mu_);
  if (!disabled_) held_ = true;
}

void PauseGate::release() {
  {
    std::lock_guard lock(mu_);
    held_ = false;
  }
  cv_.notify_all();
}

void PauseGate::checkpoint() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return !held_ || disabled_; });
}

void PauseGate::open_forever() {
  {
    std::lock_guard lock(mu_);
    disabled_ = true;
    held_ = false;
  }
  cv_.notify_all();
}

}  // namespace actorq::runtime
