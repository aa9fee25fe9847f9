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

#include <cstddef>
#include <stdexcept>
#include <string>

namespace actorq {

// Invalid argument values: empty tensors, bad ranks, out-of-range actions.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// API misuse: calling backward without a forward cache, stepping a finished
// episode, and similar ordering mistakes.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Requested execution precision has no integer kernel.
class UnsupportedPrecision : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite values surfaced during optimization.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed wire bytes or text files. Carries the byte offset (wire format)
// or line number (CSV) where decoding stopped.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t position)
      : std::runtime_error(what), position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

// A blocking call was interrupted because its channel shut down.
class ChannelClosed : public std::runtime_error {
 public:
  ChannelClosed() : std::runtime_error("channel closed") {}
};

}  // namespace actorq
