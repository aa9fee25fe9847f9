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

// actorq: train, quantize, benchmark and report.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "actorq/common/error.hpp"
#include "actorq/dqn/dqn.hpp"
#include "actorq/envs/environment.hpp"
#include "actorq/metrics/metrics.hpp"
#include "actorq/runtime/actorq.hpp"
#include "actorq/runtime/wire.hpp"

namespace fs = std::filesystem;
using namespace actorq;

namespace {

constexpr int kOk = 0;
constexpr int kRuntimeFailure = 1;
constexpr int kUsageError = 2;

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop.store(true); }

// Thrown for flag combinations CLI11 cannot check on its own.
struct BadUsage : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// key=value lines become --key=value tokens placed before the real
// arguments, so explicit flags win.
std::vector<std::string> config_file_args(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw BadUsage("cannot read config file " + path.string());
  std::vector<std::string> args;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw BadUsage(path.string() + ":" + std::to_string(n) + ": expected key=value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    args.push_back("--" + key + "=" + value);
  }
  return args;
}

// Canonical echo of every option of a subcommand, one key=value per line.
std::string config_echo(const CLI::App& cmd) {
  std::ostringstream out;
  out << "# actorq " << cmd.get_name() << '\n';
  for (const CLI::Option* o : cmd.get_options()) {
    if (o->get_lnames().empty()) continue;
    const std::string& name = o->get_lnames()[0];
    if (name == "help" || name == "help-all" || name == "config") continue;
    std::string value;
    if (o->count() > 0) {
      for (std::size_t i = 0; i < o->results().size(); ++i) {
        value += (i ? "," : "") + o->results()[i];
      }
    } else if (o->get_expected_min() == 0) {
      value = "false";
    } else {
      value = o->get_default_str();
      if (value.size() >= 2 && value.front() == '[' && value.back() == ']') {
        value = value.substr(1, value.size() - 2);
      }
    }
    if (value.empty()) continue;  // unset optional value; its default applies
    out << name << '=' << value << '\n';
  }
  return out.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

std::string csv_number(double v) {
  if (std::isinf(v)) return "not reached";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// ------------------------------------------------------------------ train

struct TrainArgs {
  runtime::RunConfig run;
  int q = 8;
  int q_comm = -1;  // default: same as q
  std::string transport = "inproc";
  std::string out = "run";
};

void add_dqn_flags(CLI::App* cmd, dqn::DqnConfig& d) {
  cmd->add_option("--lr", d.lr, "Adam learning rate")->capture_default_str();
  cmd->add_option("--gamma", d.gamma, "discount")->capture_default_str();
  cmd->add_option("--batch", d.batch_size, "learner batch size")->capture_default_str();
  cmd->add_option("--target-update", d.target_update_every, "learner steps between target syncs")
      ->capture_default_str();
  cmd->add_option("--eps-final", d.eps_final)->capture_default_str();
  cmd->add_option("--eps-fraction", d.eps_fraction, "share of steps spent annealing epsilon")
      ->capture_default_str();
  cmd->add_option("--max-grad-norm", d.max_grad_norm)->capture_default_str();
}

CLI::App* add_train(CLI::App& app, TrainArgs& a) {
  auto* cmd = app.add_subcommand("train", "Run ActorQ: quantized actors, full-precision learner");
  auto& r = a.run;
  cmd->add_option("--env", r.env)->capture_default_str()->check(CLI::IsMember(envs::env_names()));
  cmd->add_option("--actors", r.actors)->capture_default_str();
  cmd->add_option("--q", a.q, "actor execution precision (8, 16, 32)")->capture_default_str();
  cmd->add_option("--q-comm", a.q_comm, "broadcast precision (2..16, 32); defaults to --q");
  cmd->add_option("--pull-freq", r.pull_freq, "actor steps between model pulls")
      ->capture_default_str();
  cmd->add_option("--spi", r.spi, "samples per insert; 0 disables the limiter")
      ->capture_default_str();
  cmd->add_option("--steps", r.steps, "env steps summed over actors")->capture_default_str();
  cmd->add_option("--seed", r.seed)->capture_default_str();
  cmd->add_option("--hidden", r.hidden)->delimiter(',')->capture_default_str();
  cmd->add_option("--buffer", r.buffer_capacity)->capture_default_str();
  cmd->add_option("--warmup", r.warmup)->capture_default_str();
  cmd->add_option("--publish-every", r.publish_every, "learner steps")->capture_default_str();
  cmd->add_option("--eval-every", r.eval_every, "learner steps")->capture_default_str();
  cmd->add_option("--eval-episodes", r.eval_episodes)->capture_default_str();
  cmd->add_flag("--lockstep", r.lockstep, "deterministic single-thread schedule");
  cmd->add_option("--transport", a.transport)
      ->capture_default_str()
      ->check(CLI::IsMember({"inproc", "socket"}));
  cmd->add_option("--out", a.out, "output directory")->capture_default_str();
  add_dqn_flags(cmd, r.dqn);
  return cmd;
}

int run_train(TrainArgs& a, const std::string& echo) {
  auto& r = a.run;
  r.quant = {a.q, a.q_comm < 0 ? (a.q == 32 ? 32 : a.q) : a.q_comm};
  r.transport = a.transport == "socket" ? runtime::Transport::kSocket
                                        : runtime::Transport::kInProcess;
  r.out_dir = a.out;
  r.dqn.total_steps = r.steps;
  r.stop = &g_stop;
  try {
    r.validate();
  } catch (const std::exception& e) {
    throw BadUsage(e.what());
  }
  fs::create_directories(r.out_dir);
  write_text(r.out_dir / "config.txt", echo);
  const runtime::RunResult res = runtime::train_actorq(r);
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& e : res.evals) best = std::max(best, e.mean_return);
  std::printf("learner_steps=%lld inserts=%llu best_eval=%.1f wall_s=%.1f%s\n",
              static_cast<long long>(res.learner_steps),
              static_cast<unsigned long long>(res.inserts), best, res.wall_time_s,
              res.interrupted ? " (interrupted)" : "");
  std::printf("artifacts in %s\n", r.out_dir.string().c_str());
  return kOk;
}

// ------------------------------------------------------------------ ptq

struct PtqArgs {
  std::string model;
  std::string env = "cartpole";
  std::vector<std::string> bits;
  bool weight_only = false;
  int episodes = 10;
  std::uint64_t seed = 0;
  std::string out;
};

CLI::App* add_ptq(CLI::App& app, PtqArgs& a) {
  auto* cmd = app.add_subcommand("ptq", "Post-training quantization sweep of a saved policy");
  cmd->add_option("--model", a.model, "model file (.aqmd)")->required();
  cmd->add_option("--env", a.env)->capture_default_str()->check(CLI::IsMember(envs::env_names()));
  cmd->add_option("--bits", a.bits, "precisions: 2..16, 32, fp16 (default: all)")->delimiter(',');
  cmd->add_flag("--weight-only", a.weight_only, "quantize weights only, keep f32 activations");
  cmd->add_option("--episodes", a.episodes)->capture_default_str();
  cmd->add_option("--seed", a.seed)->capture_default_str();
  cmd->add_option("--out", a.out, "directory for ptq.csv and config.txt");
  return cmd;
}

int run_ptq(const PtqArgs& a, const std::string& echo) {
  std::vector<metrics::Precision> precisions;
  try {
    if (a.bits.empty()) {
      precisions = metrics::default_ptq_precisions();
    } else {
      for (const auto& b : a.bits) precisions.push_back(metrics::Precision::parse(b));
    }
    if (a.episodes < 1) throw DomainError("--episodes must be positive");
  } catch (const std::exception& e) {
    throw BadUsage(e.what());
  }
  const nn::MlpPolicy policy = runtime::message_to_policy(runtime::load_model(a.model));
  metrics::PtqOptions opt{.episodes = a.episodes,
                          .seed = a.seed,
                          .include_weight_only = true,
                          .include_full = !a.weight_only};
  std::ostringstream csv;
  csv << "precision,variant,mean_return,std_return\n";
  for (const auto& row : metrics::ptq_sweep(policy, a.env, precisions, opt)) {
    csv << row.precision.label() << ',' << (row.weight_only ? "weight_only" : "full") << ','
        << csv_number(row.mean_return) << ',' << csv_number(row.std_return) << '\n';
  }
  std::cout << csv.str();
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    write_text(fs::path(a.out) / "ptq.csv", csv.str());
    write_text(fs::path(a.out) / "config.txt", echo);
  }
  return kOk;
}

// ------------------------------------------------------------------ qat

struct QatArgs {
  dqn::TrainOptions train;
  int bits = 8;
  std::int64_t quant_delay = -1;  // default: steps / 2
  std::int64_t steps = 60000;
  int final_episodes = 10;
  std::string out = "qat";
};

CLI::App* add_qat(CLI::App& app, QatArgs& a) {
  auto* cmd = app.add_subcommand("qat", "Train a DQN with fake-quant nodes (QAT)");
  auto& t = a.train;
  cmd->add_option("--env", t.env)->capture_default_str()->check(CLI::IsMember(envs::env_names()));
  cmd->add_option("--bits", a.bits, "fake-quant precision (2..16)")->capture_default_str();
  cmd->add_option("--quant-delay", a.quant_delay, "env steps before fake-quant turns on (default steps/2)");
  cmd->add_option("--steps", a.steps)->capture_default_str();
  cmd->add_option("--seed", t.seed)->capture_default_str();
  cmd->add_option("--hidden", t.hidden)->delimiter(',')->capture_default_str();
  cmd->add_option("--buffer", t.buffer_capacity)->capture_default_str();
  cmd->add_option("--warmup", t.warmup)->capture_default_str();
  cmd->add_option("--train-every", t.train_every, "env steps per learner step")->capture_default_str();
  cmd->add_option("--eval-every", t.eval_every, "env steps")->capture_default_str();
  cmd->add_option("--eval-episodes", t.eval_episodes)->capture_default_str();
  cmd->add_option("--final-episodes", a.final_episodes)->capture_default_str();
  cmd->add_option("--out", a.out, "output directory")->capture_default_str();
  add_dqn_flags(cmd, t.dqn);
  return cmd;
}

int run_qat(QatArgs& a, const std::string& echo) {
  auto& t = a.train;
  try {
    if (a.bits < 2 || a.bits > 16) {
      throw UnsupportedPrecision("--bits must be in 2..16, got " + std::to_string(a.bits));
    }
    if (a.steps < 1) throw DomainError("--steps must be positive");
    t.dqn.total_steps = a.steps;
    t.dqn.validate();
    envs::make_env(t.env);
  } catch (const std::exception& e) {
    throw BadUsage(e.what());
  }
  nn::FakeQuantConfig fq;
  fq.bits = a.bits;
  fq.quant_delay = a.quant_delay < 0 ? a.steps / 2 : a.quant_delay;
  t.qat = fq;

  const fs::path out(a.out);
  fs::create_directories(out);
  write_text(out / "config.txt", echo);
  const dqn::TrainResult res = dqn::train_dqn(t);

  std::ostringstream curve;
  curve << "env_step,learner_step,wall_time_s,mean_return\n";
  for (const auto& p : res.curve) {
    curve << p.env_step << ',' << p.learner_step << ',' << csv_number(p.wall_time_s) << ','
          << csv_number(p.mean_return) << '\n';
  }
  write_text(out / "curve.csv", curve.str());
  runtime::save_model(out / "model.aqmd", runtime::policy_to_message(res.model, 0));

  // The saved weights are f32; evaluate them the way they were trained.
  nn::MlpPolicy net = res.model;
  nn::FakeQuantConfig eval_fq = fq;
  eval_fq.quant_delay = fq.quant_delay < a.steps ? 0 : fq.quant_delay;
  net.set_fake_quant(eval_fq);
  auto env = envs::make_env(t.env);
  const auto returns = dqn::evaluate(dqn::greedy_policy(net), *env, a.final_episodes,
                                     derive_seed(t.seed, 0xF1));
  std::printf("best_eval=%.1f final_return=%.1f std=%.1f\n", res.best_eval, dqn::mean(returns),
              dqn::stddev(returns));
  return kOk;
}

// ------------------------------------------------------------------ bench

struct BenchArgs {
  std::vector<std::size_t> widths = {256, 2048};
  std::vector<int> bits = {8, 16, 32};
  std::size_t reps = 1000;
  std::size_t warmup = 50;
  std::string out;
};

CLI::App* add_bench(CLI::App& app, BenchArgs& a) {
  auto* cmd = app.add_subcommand("bench", "Median MLP inference latency per width and precision");
  cmd->add_option("--widths", a.widths)->delimiter(',')->capture_default_str();
  cmd->add_option("--bits", a.bits)->delimiter(',')->capture_default_str();
  cmd->add_option("--reps", a.reps)->capture_default_str();
  cmd->add_option("--warmup", a.warmup)->capture_default_str();
  cmd->add_option("--out", a.out, "directory for bench.csv and config.txt");
  return cmd;
}

int run_bench(const BenchArgs& a, const std::string& echo) {
  try {
    if (a.reps < 100) throw DomainError("--reps must be at least 100");
    for (int b : a.bits) {
      if (b != 32) nn::check_execution_bits(b);
    }
  } catch (const std::exception& e) {
    throw BadUsage(e.what());
  }
  const auto rows = metrics::bench_kernel(a.widths, a.bits, {.reps = a.reps, .warmup = a.warmup});
  std::ostringstream csv;
  csv << "width,bits,median_ns,speedup_vs_f32\n";
  for (const auto& r : rows) {
    double f32 = 0.0;
    for (const auto& o : rows) {
      if (o.width == r.width && o.bits == 32) f32 = o.median_ns;
    }
    csv << r.width << ',' << r.bits << ',' << csv_number(r.median_ns) << ','
        << (f32 > 0 ? csv_number(f32 / r.median_ns) : "") << '\n';
  }
  std::cout << csv.str();
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    write_text(fs::path(a.out) / "bench.csv", csv.str());
    write_text(fs::path(a.out) / "config.txt", echo);
  }
  return kOk;
}

// ------------------------------------------------------------------ report

struct ReportArgs {
  std::string dir;
  std::string baseline;
  double threshold = std::numeric_limits<double>::quiet_NaN();
};

CLI::App* add_report(CLI::App& app, ReportArgs& a) {
  auto* cmd = app.add_subcommand("report", "Runtime breakdown and time-to-reward of a finished run");
  cmd->add_option("--dir", a.dir, "run directory")->required();
  cmd->add_option("--baseline", a.baseline, "run directory to compute speedup against");
  cmd->add_option("--threshold", a.threshold,
                  "reward level (default: 95% of the best smoothed baseline return)");
  return cmd;
}

void print_totals(std::ostream& out, const std::string& who, const metrics::TimingTotals& t) {
  const auto f = t.fractions();
  out << who << ',' << t.windows << ',' << csv_number(t.step) << ',' << csv_number(t.pull) << ','
      << csv_number(t.deserialize) << ',' << csv_number(t.load) << ',' << csv_number(f[0]) << ','
      << csv_number(f[1]) << ',' << csv_number(f[2]) << ',' << csv_number(f[3]) << '\n';
}

int run_report(const ReportArgs& a) {
  const fs::path dir(a.dir);
  const metrics::RunSummary run = metrics::summarize_run(dir);
  if (run.reward_vs_time.empty()) throw std::runtime_error("eval.csv in " + a.dir + " has no rows");

  std::ostringstream bd;
  bd << "actor,windows,step_s,pull_s,deserialize_s,load_s,step_frac,pull_frac,deserialize_frac,"
        "load_frac\n";
  if (fs::exists(dir / "timing.csv")) {
    const auto report = metrics::breakdown_report({dir / "timing.csv"});
    for (const auto& [id, t] : report.per_actor) print_totals(bd, std::to_string(id), t);
    print_totals(bd, "all", report.aggregate);
  }
  write_text(dir / "breakdown.csv", bd.str());

  std::ostringstream curve;
  // The header names the running-mean window.
  curve << "wall_time_s,learner_step,return_running_mean_w" << metrics::kSmoothingWindow << '\n';
  for (std::size_t i = 0; i < run.reward_vs_time.size(); ++i) {
    curve << csv_number(run.reward_vs_time[i].x) << ',' << csv_number(run.reward_vs_steps[i].x)
          << ',' << csv_number(run.reward_vs_time[i].value) << '\n';
  }
  write_text(dir / "curve.csv", curve.str());

  std::optional<metrics::RunSummary> base;
  if (!a.baseline.empty()) base = metrics::summarize_run(a.baseline);
  const double threshold =
      !std::isnan(a.threshold)
          ? a.threshold
          : metrics::reward_threshold({base ? base->reward_vs_time : run.reward_vs_time});

  std::cout << "breakdown\n" << bd.str();
  const double t_run = metrics::time_to_reward(run.reward_vs_time, threshold);
  std::cout << "threshold=" << csv_number(threshold) << '\n';
  std::cout << "time_to_reward_s=" << csv_number(t_run) << '\n';
  if (base) {
    const double t_base = metrics::time_to_reward(base->reward_vs_time, threshold);
    std::cout << "baseline_time_to_reward_s=" << csv_number(t_base) << '\n';
    std::cout << "speedup=" << csv_number(metrics::speedup(t_base, t_run)) << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ActorQ: quantized actor-learner reinforcement learning"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  std::string config_path;
  TrainArgs train;
  PtqArgs ptq;
  QatArgs qat;
  BenchArgs bench;
  ReportArgs report;
  std::vector<CLI::App*> cmds{add_train(app, train), add_ptq(app, ptq), add_qat(app, qat),
                              add_bench(app, bench), add_report(app, report)};
  std::string config_flag;  // consumed before parsing; declared for --help
  for (auto* c : cmds) {
    c->add_option("--config", config_flag, "newline-delimited key=value defaults");
  }

  try {
    // Find --config before the full parse so its keys can be spliced in.
    std::vector<std::string> args(argv + 1, argv + argc);
    std::vector<std::string> merged;
    for (std::size_t i = 0; i < args.size(); ++i) {
      std::string path;
      if (args[i] == "--config" && i + 1 < args.size()) {
        path = args[++i];
      } else if (args[i].starts_with("--config=")) {
        path = args[i].substr(9);
      } else {
        merged.push_back(args[i]);
        continue;
      }
      config_path = path;
    }
    if (!config_path.empty()) {
      auto key_of = [](const std::string& a) { return a.substr(0, a.find('=')); };
      std::vector<std::string> extra;
      for (const auto& kv : config_file_args(config_path)) {
        const bool explicit_flag = std::any_of(merged.begin(), merged.end(), [&](const auto& a) {
          return a.starts_with("--") && key_of(a) == key_of(kv);
        });
        if (!explicit_flag) extra.push_back(kv);
      }
      // Right after the subcommand name.
      merged.insert(merged.empty() ? merged.end() : merged.begin() + 1, extra.begin(), extra.end());
    }
    std::reverse(merged.begin(), merged.end());  // CLI11 consumes from the back
    app.parse(merged);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsageError;
  } catch (const BadUsage& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsageError;
  }

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  try {
    for (auto* c : cmds) {
      if (!c->parsed()) continue;
      const std::string echo = config_echo(*c);
      if (c->get_name() == "train") return run_train(train, echo);
      if (c->get_name() == "ptq") return run_ptq(ptq, echo);
      if (c->get_name() == "qat") return run_qat(qat, echo);
      if (c->get_name() == "bench") return run_bench(bench, echo);
      if (c->get_name() == "report") return run_report(report);
    }
  } catch (const BadUsage& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
  return kUsageError;
}
