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

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <vector>

namespace actorq::runtime {

// Serialized model plus the version it carries.
struct Packet {
  std::uint64_t version = 0;
  std::vector<std::uint8_t> bytes;
};

using PacketPtr = std::shared_ptr<const Packet>;

// Single-slot, overwrite-on-publish channel. Publishing never blocks;
// readers always see the newest value.
class Mailbox {
 public:
  void publish(PacketPtr packet);
  // Newest packet, or null when nothing has been published yet.
  PacketPtr latest() const;
  // Blocks until a packet newer than `seen` exists. Throws ChannelClosed
  // once closed.
  PacketPtr wait_newer(std::uint64_t seen) const;
  // Blocks until any packet exists.
  PacketPtr wait_any() const;
  void close();
  bool closed() const;
  std::uint64_t published() const;

 private:
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  PacketPtr value_;
  std::uint64_t published_ = 0;
  bool closed_ = false;
};

// Wall clock that excludes explicitly paused intervals.
class RunClock {
 public:
  using Clock = std::chrono::steady_clock;

  RunClock() : start_(Clock::now()) {}
  double seconds() const;
  void pause();
  void resume();

 private:
  mutable std::mutex mu_;
  Clock::time_point start_;
  Clock::time_point pause_start_{};
  Clock::duration paused_{};
  bool is_paused_ = false;
};

// Stop-the-world barrier: workers call checkpoint() between units of work
// and block there while the gate is held.
class PauseGate {
 public:
  void hold();
  void release();
  void checkpoint();
  // Unblocks and disables the gate for shutdown.
  void open_forever();

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  bool held_ = false;
  bool disabled_ = false;
};

}  // namespace actorq::runtime
