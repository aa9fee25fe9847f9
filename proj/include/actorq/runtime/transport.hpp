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

#include <memory>
#include <thread>
#include <vector>

#include "actorq/runtime/mailbox.hpp"

namespace actorq::runtime {

// Actor-side synchronous pull of the newest broadcast model.
class ModelChannel {
 public:
  virtual ~ModelChannel() = default;
  // Blocks until a model exists; returns a private copy of its bytes.
  // Throws ChannelClosed on shutdown.
  virtual Packet pull() = 0;
  virtual void close() = 0;
};

// Copies the newest packet straight out of the mailbox.
class InProcessChannel final : public ModelChannel {
 public:
  explicit InProcessChannel(const Mailbox& box) : box_(box) {}
  Packet pull() override;
  void close() override {}

 private:
  const Mailbox& box_;
};

// Same bytes over a local stream socket pair. A server thread answers each
// one-byte request with a frame: version u64, length u64, bytes (little-endian).
class SocketChannel final : public ModelChannel {
 public:
  explicit SocketChannel(const Mailbox& box);
  ~SocketChannel() override;
  Packet pull() override;
  void close() override;

 private:
  void serve();

  const Mailbox& box_;
  int client_fd_ = -1;
  int server_fd_ = -1;
  std::thread server_;
};

enum class Transport { kInProcess, kSocket };

std::unique_ptr<ModelChannel> make_channel(Transport transport, const Mailbox& box);

}  // namespace actorq::runtime
