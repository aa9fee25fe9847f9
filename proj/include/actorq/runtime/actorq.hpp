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

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "actorq/common/rng.hpp"
#include "actorq/dqn/dqn.hpp"
#include "actorq/envs/environment.hpp"
#include "actorq/nn/quantized_mlp.hpp"
#include "actorq/replay/replay_buffer.hpp"
#include "actorq/runtime/mailbox.hpp"
#include "actorq/runtime/transport.hpp"
#include "actorq/runtime/wire.hpp"

namespace actorq::runtime {

// Actor inference precision (8, 16 or 32) and broadcast precision
// (2..16 or 32).
struct QuantizationConfig {
  int q_compute = 32;
  int q_comm = 32;

  void validate() const;
};

struct ActorConfig {
  int actor_id = 0;
  std::int64_t pull_freq = 1000;  // env steps between model pulls
  std::int64_t step_budget = 0;
  std::uint64_t env_seed = 0;
};

// Seconds accumulated over one reporting window of an actor.
struct TimingBreakdown {
  int actor_id = 0;
  std::int64_t window_end_step = 0;
  double step_time = 0.0;
  double pull_time = 0.0;
  double deserialize_time = 0.0;
  double load_time = 0.0;
  double window_wall = 0.0;

  double accounted() const { return step_time + pull_time + deserialize_time + load_time; }
};

struct EpisodeRecord {
  double wall_time_s = 0.0;
  int actor_id = 0;
  std::int64_t episode_index = 0;
  std::int64_t steps = 0;
  double episode_return = 0.0;
  std::uint64_t model_version = 0;
};

struct EvalRecord {
  double wall_time_s = 0.0;
  std::int64_t learner_step = 0;
  double mean_return = 0.0;
  int q_compute = 32;
  int q_comm = 32;
};

// Thread-safe sinks for run records; each optionally mirrors rows to a CSV.
class RunLog {
 public:
  RunLog() = default;
  // Opens episodes.csv, timing.csv and eval.csv under dir.
  explicit RunLog(const std::filesystem::path& dir);

  void add(const EpisodeRecord& r);
  void add(const TimingBreakdown& r);
  void add(const EvalRecord& r);
  void flush();

  std::vector<EpisodeRecord> episodes() const;
  std::vector<TimingBreakdown> timings() const;
  std::vector<EvalRecord> evals() const;

 private:
  mutable std::mutex mu_;
  std::vector<EpisodeRecord> episodes_;
  std::vector<TimingBreakdown> timings_;
  std::vector<EvalRecord> evals_;
  std::ofstream episodes_csv_, timing_csv_, eval_csv_;
};

// Runs one actor: pulls every pull_freq steps, acts epsilon-greedily with the
// installed network and inserts transitions into the replay buffer.
class Actor {
 public:
  Actor(ActorConfig config, QuantizationConfig qc, std::unique_ptr<envs::Environment> env,
        dqn::DqnConfig schedule, ModelChannel& channel, replay::ReplayBuffer& buffer,
        std::atomic<std::int64_t>& global_steps, RunLog& log, const RunClock& clock);

  bool done() const { return steps_ >= config_.step_budget; }
  // Pull (when due) plus one environment step and insert. Returns false
  // once the budget is spent. `blocking_insert` selects insert vs
  // try_insert; the non-blocking form must only be used when the limiter
  // admits an insert.
  bool step_once(bool blocking_insert = true);
  // Loops step_once until the budget is spent or a channel closes.
  void run(PauseGate* gate = nullptr);

  std::int64_t steps() const { return steps_; }
  std::int64_t pulls() const { return pulls_; }
  std::uint64_t model_version() const { return version_; }
  const std::vector<std::uint64_t>& observed_versions() const { return observed_; }

 private:
  void pull();
  int act(std::span<const float> obs);
  void close_window();

  ActorConfig config_;
  QuantizationConfig qc_;
  std::unique_ptr<envs::Environment> env_;
  dqn::DqnConfig schedule_;
  ModelChannel& channel_;
  replay::ReplayBuffer& buffer_;
  std::atomic<std::int64_t>& global_steps_;
  RunLog& log_;
  const RunClock& clock_;

  Rng rng_;
  nn::MlpPolicy f32_net_;
  nn::QuantizedMlp q_net_;
  std::uint64_t version_ = 0;
  std::vector<std::uint64_t> observed_;
  std::int64_t steps_ = 0;
  std::int64_t pulls_ = 0;
  std::int64_t episode_ = 0;
  std::int64_t episode_steps_ = 0;
  double episode_return_ = 0.0;
  envs::Observation obs_;
  TimingBreakdown window_;
  RunClock::Clock::time_point window_start_;
};

// Parameter quantizer: turns full-precision learner bytes into the broadcast
// encoding at q_comm and publishes to every actor mailbox.
class Quantizer {
 public:
  Quantizer(int q_comm, std::vector<Mailbox*> outboxes);
  // Handles one inbound packet; malformed packets are skipped (returns false).
  bool process(const Packet& packet);
  // Runs until the inbox closes.
  void run(const Mailbox& inbox);
  std::uint64_t processed() const { return processed_; }
  std::uint64_t skipped() const { return skipped_; }

 private:
  int q_comm_;
  std::vector<Mailbox*> outboxes_;
  std::uint64_t processed_ = 0;
  std::uint64_t skipped_ = 0;
};

struct RunConfig {
  std::string env = "cartpole";
  int actors = 4;
  QuantizationConfig quant{8, 8};
  std::int64_t pull_freq = 1000;
  double spi = 16.0;
  std::int64_t steps = 60000;  // env steps summed over actors
  std::uint64_t seed = 0;
  std::vector<std::size_t> hidden = {64, 64};
  dqn::DqnConfig dqn;
  std::size_t buffer_capacity = 10000;
  std::uint64_t warmup = 1000;
  std::int64_t publish_every = 25;  // learner steps
  std::int64_t eval_every = 25;     // learner steps
  int eval_episodes = 5;
  bool lockstep = false;
  Transport transport = Transport::kInProcess;
  std::filesystem::path out_dir;  // empty: keep records in memory only
  // Optional external stop request (signal handler, tests).
  const std::atomic<bool>* stop = nullptr;

  void validate() const;
};

struct RunResult {
  nn::MlpPolicy final_model;
  std::vector<EpisodeRecord> episodes;
  std::vector<TimingBreakdown> timings;
  std::vector<EvalRecord> evals;
  std::vector<std::vector<std::uint64_t>> actor_versions;
  std::vector<std::int64_t> actor_pulls;
  std::int64_t learner_steps = 0;
  std::uint64_t inserts = 0;
  std::uint64_t samples = 0;
  double wall_time_s = 0.0;
  bool interrupted = false;
};

// Full ActorQ run: one learner, one quantizer and N actors. Writes
// episodes.csv, timing.csv, eval.csv and model.aqmd when out_dir is set.
RunResult train_actorq(const RunConfig& config);

}  // namespace actorq::runtime
