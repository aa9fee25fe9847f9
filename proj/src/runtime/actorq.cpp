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

#include "actorq/runtime/actorq.hpp"

#include <cinttypes>
#include <cstdio>
#include <exception>
#include <iostream>
#include <thread>

#include "actorq/common/error.hpp"
#include "actorq/common/fpenv.hpp"

namespace actorq::runtime {

namespace {

using Clock = RunClock::Clock;

double since(Clock::time_point t0, Clock::time_point t1) {
  return std::chrono::duration<double>(t1 - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::ofstream open_csv(const std::filesystem::path& path, const char* header) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << header << '\n';
  return f;
}

}  // namespace

void QuantizationConfig::validate() const {
  if (q_compute != 8 && q_compute != 16 && q_compute != 32) {
    throw UnsupportedPrecision("compute precision must be 8, 16 or 32, got " +
                               std::to_string(q_compute));
  }
  check_comm_bits(q_comm);
}

// ------------------------------------------------------------------ RunLog

RunLog::RunLog(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  episodes_csv_ = open_csv(dir / "episodes.csv",
                           "wall_time_s,actor_id,episode_index,steps,return,model_version");
  timing_csv_ = open_csv(dir / "timing.csv",
                         "actor_id,window_end_step,step_time_s,pull_time_s,deserialize_time_s,"
                         "load_time_s,window_wall_s");
  eval_csv_ = open_csv(dir / "eval.csv", "wall_time_s,learner_step,mean_return,q_compute,q_comm");
}

void RunLog::add(const EpisodeRecord& r) {
  std::lock_guard lock(mu_);
  episodes_.push_back(r);
  if (episodes_csv_.is_open()) {
    episodes_csv_ << fmt("%.6f,%d,%" PRId64 ",%" PRId64 ",%.9g,%" PRIu64 "\n", r.wall_time_s,
                         r.actor_id, r.episode_index, r.steps, r.episode_return, r.model_version);
  }
}

void RunLog::add(const TimingBreakdown& r) {
  std::lock_guard lock(mu_);
  timings_.push_back(r);
  if (timing_csv_.is_open()) {
    timing_csv_ << fmt("%d,%" PRId64 ",%.9g,%.9g,%.9g,%.9g,%.9g\n", r.actor_id, r.window_end_step,
                       r.step_time, r.pull_time, r.deserialize_time, r.load_time, r.window_wall);
  }
}

void RunLog::add(const EvalRecord& r) {
  std::lock_guard lock(mu_);
  evals_.push_back(r);
  if (eval_csv_.is_open()) {
    eval_csv_ << fmt("%.6f,%" PRId64 ",%.9g,%d,%d\n", r.wall_time_s, r.learner_step, r.mean_return,
                     r.q_compute, r.q_comm);
    eval_csv_.flush();
  }
}

void RunLog::flush() {
  std::lock_guard lock(mu_);
  for (auto* f : {&episodes_csv_, &timing_csv_, &eval_csv_}) {
    if (f->is_open()) f->flush();
  }
}

std::vector<EpisodeRecord> RunLog::episodes() const {
  std::lock_guard lock(mu_);
  return episodes_;
}

std::vector<TimingBreakdown> RunLog::timings() const {
  std::lock_guard lock(mu_);
  return timings_;
}

std::vector<EvalRecord> RunLog::evals() const {
  std::lock_guard lock(mu_);
  return evals_;
}

// ------------------------------------------------------------------- Actor

Actor::Actor(ActorConfig config, QuantizationConfig qc, std::unique_ptr<envs::Environment> env,
             dqn::DqnConfig schedule, ModelChannel& channel, replay::ReplayBuffer& buffer,
             std::atomic<std::int64_t>& global_steps, RunLog& log, const RunClock& clock)
    : config_(config),
      qc_(qc),
      env_(std::move(env)),
      schedule_(schedule),
      channel_(channel),
      buffer_(buffer),
      global_steps_(global_steps),
      log_(log),
      clock_(clock),
      rng_(derive_seed(config.env_seed, 0xAC7)) {
  if (config_.pull_freq < 1) throw DomainError("pull_freq must be at least 1");
  qc_.validate();
  window_.actor_id = config_.actor_id;
  window_start_ = Clock::now();
}

void Actor::pull() {
  const auto t0 = Clock::now();
  const Packet packet = channel_.pull();
  const auto t1 = Clock::now();
  const ModelMessage msg = deserialize_model(packet.bytes);
  const auto t2 = Clock::now();
  if (qc_.q_compute == 32) {
    f32_net_ = message_to_policy(msg);
  } else {
    q_net_ = message_to_quantized(msg, qc_.q_compute);
  }
  const auto t3 = Clock::now();
  window_.pull_time += since(t0, t1);
  window_.deserialize_time += since(t1, t2);
  window_.load_time += since(t2, t3);
  version_ = msg.model_version;
  observed_.push_back(version_);
  ++pulls_;
}

int Actor::act(std::span<const float> obs) {
  if (qc_.q_compute == 32) return nn::argmax(nn::forward_f32(f32_net_, obs).data());
  return nn::argmax(q_net_.forward(obs).data());
}

void Actor::close_window() {
  const auto now = Clock::now();
  window_.window_end_step = steps_;
  window_.window_wall = since(window_start_, now);
  log_.add(window_);
  window_ = TimingBreakdown{};
  window_.actor_id = config_.actor_id;
  window_start_ = now;
}

bool Actor::step_once(bool blocking_insert) {
  if (done()) return false;
  if (steps_ % config_.pull_freq == 0) pull();

  const auto t0 = Clock::now();
  if (obs_.empty()) {
    obs_ = env_->reset(derive_seed(config_.env_seed, static_cast<std::uint64_t>(episode_)));
  }
  const double eps = dqn::epsilon(global_steps_.fetch_add(1), schedule_);
  int action;
  if (rng_.uniform() < eps) {
    action = static_cast<int>(rng_.below(static_cast<std::uint64_t>(env_->spec().action_count)));
  } else {
    action = act(obs_);
  }
  envs::StepResult r = env_->step(action);
  window_.step_time += since(t0, Clock::now());

  replay::Transition t{obs_, action, r.reward, r.observation, r.terminated};
  if (blocking_insert) {
    buffer_.insert(std::move(t));
  } else if (!buffer_.try_insert(t)) {
    throw UsageError("non-blocking insert refused by the rate limiter");
  }

  episode_return_ += r.reward;
  ++episode_steps_;
  if (r.done()) {
    log_.add(EpisodeRecord{clock_.seconds(), config_.actor_id, episode_, episode_steps_,
                           episode_return_, version_});
    ++episode_;
    episode_steps_ = 0;
    episode_return_ = 0.0;
    obs_.clear();
  } else {
    obs_ = std::move(r.observation);
  }
  ++steps_;
  if (steps_ % config_.pull_freq == 0 || done()) close_window();
  return true;
}

void Actor::run(PauseGate* gate) {
  while (!done()) {
    if (gate) gate->checkpoint();
    step_once(true);
  }
}

// --------------------------------------------------------------- Quantizer

Quantizer::Quantizer(int q_comm, std::vector<Mailbox*> outboxes)
    : q_comm_(q_comm), outboxes_(std::move(outboxes)) {
  check_comm_bits(q_comm_);
}

bool Quantizer::process(const Packet& packet) {
  PacketPtr out;
  try {
    const ModelMessage msg = deserialize_model(packet.bytes);
    if (q_comm_ == 32) {
      out = std::make_shared<Packet>(Packet{msg.model_version, packet.bytes});
    } else {
      out = std::make_shared<Packet>(
          Packet{msg.model_version, serialize_model(quantize_message(msg, q_comm_))});
    }
  } catch (const std::exception& e) {
    std::cerr << "quantizer: skipping malformed model: " << e.what() << '\n';
    ++skipped_;
    return false;
  }
  for (Mailbox* box : outboxes_) box->publish(out);
  ++processed_;
  return true;
}

void Quantizer::run(const Mailbox& inbox) {
  std::optional<std::uint64_t> last;
  try {
    for (;;) {
      const PacketPtr p = last ? inbox.wait_newer(*last) : inbox.wait_any();
      last = p->version;
      process(*p);
    }
  } catch (const ChannelClosed&) {
  }
}

// --------------------------------------------------------------- Training

void RunConfig::validate() const {
  envs::make_env(env);
  if (actors < 1) throw DomainError("at least one actor is required");
  quant.validate();
  if (pull_freq < 1) throw DomainError("pull_freq must be at least 1");
  if (steps < actors) throw DomainError("step budget must cover every actor");
  if (publish_every < 1 || eval_every < 1) throw DomainError("cadences must be positive");
  if (eval_episodes < 1) throw DomainError("eval_episodes must be positive");
  if (lockstep && !(spi > 0.0)) throw DomainError("lockstep mode needs a positive spi");
  if (buffer_capacity == 0) throw DomainError("buffer capacity must be positive");
  dqn.validate();
}

namespace {

PacketPtr learner_packet(const nn::MlpPolicy& net, std::uint64_t version) {
  return std::make_shared<Packet>(Packet{version, serialize_model(policy_to_message(net, version))});
}

// Records the first failure and tears every channel down.
class Shutdown {
 public:
  Shutdown(replay::ReplayBuffer& buffer, Mailbox& inbox, std::vector<Mailbox>& boxes,
           std::vector<std::unique_ptr<ModelChannel>>& channels, PauseGate& gate)
      : buffer_(buffer), inbox_(inbox), boxes_(boxes), channels_(channels), gate_(gate) {}

  void fail(std::exception_ptr e) {
    {
      std::lock_guard lock(mu_);
      if (!error_) error_ = e;
    }
    stop_all();
  }

  void stop_all() {
    aborted_ = true;
    gate_.open_forever();
    buffer_.close();
    inbox_.close();
    for (auto& b : boxes_) b.close();
    for (auto& c : channels_) c->close();
  }

  bool aborted() const { return aborted_; }
  std::exception_ptr error() {
    std::lock_guard lock(mu_);
    return error_;
  }

 private:
  replay::ReplayBuffer& buffer_;
  Mailbox& inbox_;
  std::vector<Mailbox>& boxes_;
  std::vector<std::unique_ptr<ModelChannel>>& channels_;
  PauseGate& gate_;
  std::mutex mu_;
  std::exception_ptr error_;
  std::atomic<bool> aborted_{false};
};

}  // namespace

RunResult train_actorq(const RunConfig& config) {
  config.validate();
  const FlushDenormals ftz;
  const envs::EnvSpec spec = envs::make_env(config.env)->spec();
  std::vector<std::size_t> dims{spec.observation_dim};
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(static_cast<std::size_t>(spec.action_count));

  RunLog log = config.out_dir.empty() ? RunLog() : RunLog(config.out_dir);
  RunClock clock;
  PauseGate gate;
  replay::ReplayBuffer buffer(config.buffer_capacity,
                              {.samples_per_insert = config.spi,
                               .min_size_to_sample = config.warmup,
                               .batch_size = config.dqn.batch_size});
  dqn::Learner learner(nn::MlpPolicy::init(dims, derive_seed(config.seed, 1)), config.dqn,
                       derive_seed(config.seed, 2));
  auto eval_env = envs::make_env(config.env);
  const std::uint64_t eval_seed = derive_seed(config.seed, 0xE7A1);

  Mailbox inbox;
  std::vector<Mailbox> boxes(static_cast<std::size_t>(config.actors));
  std::vector<Mailbox*> box_ptrs;
  std::vector<std::unique_ptr<ModelChannel>> channels;
  for (auto& b : boxes) {
    box_ptrs.push_back(&b);
    channels.push_back(make_channel(config.transport, b));
  }
  Quantizer quantizer(config.quant.q_comm, box_ptrs);
  std::atomic<std::int64_t> global_steps{0};
  // Exploration anneals over this run's env steps.
  dqn::DqnConfig schedule = config.dqn;
  schedule.total_steps = config.steps;

  std::vector<std::unique_ptr<Actor>> actors;
  for (int i = 0; i < config.actors; ++i) {
    ActorConfig ac;
    ac.actor_id = i;
    ac.pull_freq = config.pull_freq;
    ac.step_budget = config.steps / config.actors + (i < config.steps % config.actors ? 1 : 0);
    ac.env_seed = derive_seed(config.seed, 1000 + static_cast<std::uint64_t>(i));
    actors.push_back(std::make_unique<Actor>(ac, config.quant, envs::make_env(config.env),
                                             schedule, *channels[static_cast<std::size_t>(i)],
                                             buffer, global_steps, log, clock));
  }

  nn::MlpPolicy best_model = learner.online();
  double best_return = -std::numeric_limits<double>::infinity();
  auto evaluate_now = [&] {
    clock.pause();
    const auto returns = dqn::evaluate(dqn::greedy_policy(learner.online()), *eval_env,
                                       config.eval_episodes, eval_seed);
    clock.resume();
    const double m = dqn::mean(returns);
    if (m > best_return) {
      best_return = m;
      best_model = learner.online();
    }
    log.add(EvalRecord{clock.seconds(), learner.steps(), m, config.quant.q_compute,
                       config.quant.q_comm});
  };
  auto after_learner_step = [&](auto&& publish) {
    const std::int64_t s = learner.steps();
    if (s % config.publish_every == 0) {
      publish(learner_packet(learner.online(), static_cast<std::uint64_t>(s)));
    }
    if (s % config.eval_every == 0) {
      gate.hold();
      evaluate_now();
      gate.release();
    }
  };
  auto stop_requested = [&] { return config.stop && config.stop->load(); };

  Shutdown shutdown(buffer, inbox, boxes, channels, gate);
  bool interrupted = false;

  if (config.lockstep) {
    auto publish = [&](PacketPtr p) { quantizer.process(*p); };
    publish(learner_packet(learner.online(), 0));
    auto train_once = [&] {
      learner.step(buffer);
      after_learner_step(publish);
    };
    for (bool progressed = true; progressed;) {
      progressed = false;
      for (auto& a : actors) {
        if (a->done()) continue;
        if (stop_requested()) break;
        while (!buffer.can_insert()) train_once();
        a->step_once(false);
        progressed = true;
        while (buffer.can_sample(config.dqn.batch_size)) train_once();
      }
      if (stop_requested()) {
        interrupted = true;
        break;
      }
    }
  } else {
    auto publish = [&](PacketPtr p) { inbox.publish(std::move(p)); };
    std::thread quantizer_thread([&] {
      const FlushDenormals thread_ftz;
      try {
        quantizer.run(inbox);
      } catch (...) {
        shutdown.fail(std::current_exception());
      }
    });
    publish(learner_packet(learner.online(), 0));
    std::thread learner_thread([&] {
      const FlushDenormals thread_ftz;
      try {
        for (;;) {
          learner.step(buffer);
          after_learner_step(publish);
        }
      } catch (const ChannelClosed&) {
      } catch (...) {
        shutdown.fail(std::current_exception());
      }
    });
    std::vector<std::thread> actor_threads;
    for (auto& a : actors) {
      actor_threads.emplace_back([&, actor = a.get()] {
        const FlushDenormals thread_ftz;
        try {
          while (!actor->done() && !shutdown.aborted()) {
            if (stop_requested()) {
              shutdown.stop_all();
              break;
            }
            gate.checkpoint();
            actor->step_once(true);
          }
        } catch (const ChannelClosed&) {
        } catch (...) {
          shutdown.fail(std::current_exception());
        }
      });
    }
    for (auto& t : actor_threads) t.join();
    interrupted = stop_requested();
    buffer.close();
    learner_thread.join();
    inbox.close();
    for (auto& b : boxes) b.close();
    quantizer_thread.join();
  }
  for (auto& c : channels) c->close();

  if (!shutdown.error() && !interrupted) evaluate_now();
  log.flush();

  RunResult result;
  result.final_model = learner.online();
  result.episodes = log.episodes();
  result.timings = log.timings();
  result.evals = log.evals();
  for (const auto& a : actors) {
    result.actor_versions.push_back(a->observed_versions());
    result.actor_pulls.push_back(a->pulls());
  }
  result.learner_steps = learner.steps();
  result.inserts = buffer.inserts();
  result.samples = buffer.samples();
  result.wall_time_s = clock.seconds();
  result.interrupted = interrupted;
  if (!config.out_dir.empty()) {
    save_model(config.out_dir / "model.aqmd",
               policy_to_message(best_model, static_cast<std::uint64_t>(learner.steps())));
    save_model(config.out_dir / "model_final.aqmd",
               policy_to_message(result.final_model, static_cast<std::uint64_t>(learner.steps())));
  }
  if (auto e = shutdown.error()) std::rethrow_exception(e);
  return result;
}

}  // namespace actorq::runtime
