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

#include "actorq/runtime/transport.hpp"

#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <stdexcept>
#include <string>

#include "actorq/common/error.hpp"

namespace actorq::runtime {

namespace {

// Returns false on orderly shutdown or error.
bool write_all(int fd, const void* data, std::size_t n) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  while (n > 0) {
    const ssize_t k = ::send(fd, p, n, MSG_NOSIGNAL);
    if (k < 0 && errno == EINTR) continue;
    if (k <= 0) return false;
    p += k;
    n -= static_cast<std::size_t>(k);
  }
  return true;
}

bool read_all(int fd, void* data, std::size_t n) {
  auto* p = static_cast<std::uint8_t*>(data);
  while (n > 0) {
    const ssize_t k = ::recv(fd, p, n, 0);
    if (k < 0 && errno == EINTR) continue;
    if (k <= 0) return false;
    p += k;
    n -= static_cast<std::size_t>(k);
  }
  return true;
}

void put_u64(std::uint8_t* out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::uint64_t get_u64(const std::uint8_t* in) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{in[i]} << (8 * i);
  return v;
}

}  // namespace

Packet InProcessChannel::pull() { return *box_.wait_any(); }

SocketChannel::SocketChannel(const Mailbox& box) : box_(box) {
  int fds[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0) {
    throw std::runtime_error(std::string("socketpair failed: ") + std::strerror(errno));
  }
  client_fd_ = fds[0];
  server_fd_ = fds[1];
  server_ = std::thread([this] { serve(); });
}

SocketChannel::~SocketChannel() {
  close();
  if (server_.joinable()) server_.join();
  if (client_fd_ >= 0) ::close(client_fd_);
  if (server_fd_ >= 0) ::close(server_fd_);
}

void SocketChannel::close() {
  if (client_fd_ >= 0) ::shutdown(client_fd_, SHUT_RDWR);
  if (server_fd_ >= 0) ::shutdown(server_fd_, SHUT_RDWR);
}

void SocketChannel::serve() {
  for (;;) {
    std::uint8_t req;
    if (!read_all(server_fd_, &req, 1)) return;
    PacketPtr p;
    try {
      p = box_.wait_any();
    } catch (const ChannelClosed&) {
      ::shutdown(server_fd_, SHUT_RDWR);
      return;
    }
    std::uint8_t header[16];
    put_u64(header, p->version);
    put_u64(header + 8, p->bytes.size());
    if (!write_all(server_fd_, header, sizeof header)) return;
    if (!write_all(server_fd_, p->bytes.data(), p->bytes.size())) return;
  }
}

Packet SocketChannel::pull() {
  const std::uint8_t req = 1;
  if (!write_all(client_fd_, &req, 1)) throw ChannelClosed();
  std::uint8_t header[16];
  if (!read_all(client_fd_, header, sizeof header)) throw ChannelClosed();
  Packet p;
  p.version = get_u64(header);
  p.bytes.resize(get_u64(header + 8));
  if (!read_all(client_fd_, p.bytes.data(), p.bytes.size())) throw ChannelClosed();
  return p;
}

std::unique_ptr<ModelChannel> make_channel(Transport transport, const Mailbox& box) {
  if (transport == Transport::kSocket) return std::make_unique<SocketChannel>(box);
  return std::make_unique<InProcessChannel>(box);
}

}  // namespace actorq::runtime
