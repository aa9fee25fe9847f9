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

#include "actorq/metrics/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "actorq/common/error.hpp"
#include "actorq/common/rng.hpp"
#include "actorq/dqn/dqn.hpp"
#include "actorq/envs/environment.hpp"
#include "actorq/nn/quantized_mlp.hpp"

namespace actorq::metrics {

std::vector<double> running_mean(std::span<const double> values, std::size_t window) {
  if (window == 0) throw DomainError("smoothing window must be positive");
  std::vector<double> out(values.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    sum += values[i];
    if (i >= window) sum -= values[i - window];
    out[i] = sum / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

namespace {

std::vector<double> smoothed_values(std::span<const CurvePoint> curve, std::size_t window) {
  std::vector<double> v;
  v.reserve(curve.size());
  for (const auto& p : curve) v.push_back(p.value);
  return running_mean(v, window);
}

}  // namespace

double time_to_reward(std::span<const CurvePoint> curve, double threshold, std::size_t window) {
  if (curve.empty()) throw DomainError("time_to_reward needs a non-empty curve");
  const auto s = smoothed_values(curve, window);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] >= threshold) return curve[i].x;
  }
  return kNotReached;
}

double reward_threshold(const std::vector<std::vector<CurvePoint>>& baseline_runs, double fraction,
                        std::size_t window) {
  std::vector<double> peaks;
  for (const auto& run : baseline_runs) {
    if (run.empty()) continue;
    const auto values = smoothed_values(run, window);
    peaks.push_back(*std::max_element(values.begin(), values.end()));
  }
  if (peaks.empty()) throw DomainError("reward_threshold needs at least one non-empty run");
  const double best = median(std::move(peaks));
  return best - (1.0 - fraction) * std::abs(best);
}

double speedup(double baseline_time, double fast_time) {
  if (!std::isfinite(fast_time)) return kNotReached;
  if (!std::isfinite(baseline_time)) return 0.0;
  return baseline_time / fast_time;
}

double median(std::vector<double> values) {
  if (values.empty()) throw DomainError("median of an empty set");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double hi = values[mid];
  if (values.size() % 2 == 1) return hi;
  const double lo = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------- PTQ

Precision Precision::parse(const std::string& text) {
  if (text == "fp16") return {Kind::kFp16, 16};
  if (text == "fp32" || text == "32") return {Kind::kFp32, 32};
  std::size_t used = 0;
  int bits = 0;
  try {
    bits = std::stoi(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || used == 0) throw DomainError("unknown precision '" + text + "'");
  if (bits < 2 || bits > 16) {
    throw UnsupportedPrecision("precision must be 2..16, 32 or fp16, got " + text);
  }
  return {Kind::kAffine, bits};
}

std::string Precision::label() const {
  switch (kind) {
    case Kind::kFp32: return "32";
    case Kind::kFp16: return "fp16";
    case Kind::kAffine: break;
  }
  return std::to_string(bits);
}

std::vector<Precision> default_ptq_precisions() {
  std::vector<Precision> p;
  for (int b = 2; b <= 16; ++b) p.push_back({Precision::Kind::kAffine, b});
  p.push_back({Precision::Kind::kFp32, 32});
  p.push_back({Precision::Kind::kFp16, 16});
  return p;
}

std::vector<PtqRow> ptq_sweep(const nn::MlpPolicy& policy, const std::string& env_name,
                              const std::vector<Precision>& precisions, const PtqOptions& options) {
  auto env = envs::make_env(env_name);
  if (env->spec().observation_dim != policy.input_dim() ||
      static_cast<std::size_t>(env->spec().action_count) != policy.output_dim()) {
    throw DomainError("policy shape " + std::to_string(policy.input_dim()) + "->" +
                      std::to_string(policy.output_dim()) + " does not fit env " + env_name);
  }
  std::vector<bool> variants;
  if (options.include_full) variants.push_back(false);
  if (options.include_weight_only) variants.push_back(true);

  std::vector<PtqRow> rows;
  for (const Precision& p : precisions) {
    for (bool weight_only : variants) {
      nn::MlpPolicy net = policy;
      if (p.kind == Precision::Kind::kFp32) {
        net.set_fake_quant(std::nullopt);
      } else {
        nn::FakeQuantConfig fq;
        fq.kind = p.kind == Precision::Kind::kFp16 ? nn::FakeQuantConfig::Kind::kFp16
                                                   : nn::FakeQuantConfig::Kind::kAffine;
        fq.bits = p.bits;
        fq.quantize_activations = !weight_only;
        fq.quant_delay = 0;
        net.set_fake_quant(fq);
      }
      const auto returns =
          dqn::evaluate(dqn::greedy_policy(net), *env, options.episodes, options.seed);
      rows.push_back({p, weight_only, dqn::mean(returns), dqn::stddev(returns)});
    }
  }
  return rows;
}

// ---------------------------------------------------------------- kernels

std::vector<BenchRow> bench_kernel(const std::vector<std::size_t>& widths,
                                   const std::vector<int>& bits, const BenchOptions& options) {
  if (options.reps < 100) throw DomainError("bench_kernel needs at least 100 reps");
  using Clock = std::chrono::steady_clock;
  std::vector<BenchRow> rows;
  for (std::size_t width : widths) {
    if (width == 0) throw DomainError("width must be positive");
    const nn::MlpPolicy net = nn::MlpPolicy::init(
        {options.input_dim, width, width, width, options.output_dim}, derive_seed(options.seed, width));
    Rng rng(derive_seed(options.seed, 0xBE));
    std::vector<float> x(options.input_dim);
    for (float& v : x) v = static_cast<float>(rng.normal());

    for (int b : bits) {
      std::function<float()> run;
      nn::QuantizedMlp q;
      if (b == 32) {
        run = [&] { return forward_f32(net, x)[0]; };
      } else {
        nn::check_execution_bits(b);
        q = nn::QuantizedMlp::from_policy(net, b);
        run = [&] { return q.forward(x)[0]; };
      }
      volatile float sink = 0.0f;
      for (std::size_t i = 0; i < options.warmup; ++i) sink = run();
      std::vector<double> ns(options.reps);
      for (std::size_t i = 0; i < options.reps; ++i) {
        const auto t0 = Clock::now();
        sink = run();
        ns[i] = std::chrono::duration<double, std::nano>(Clock::now() - t0).count();
      }
      (void)sink;
      rows.push_back({width, b, median(std::move(ns))});
    }
  }
  return rows;
}

// ---------------------------------------------------------------- runs

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw FormatError("missing column '" + name + "'", 1);
  return static_cast<std::size_t>(it - header.begin());
}

double CsvTable::number(std::size_t row, std::size_t col) const {
  const std::string& s = rows.at(row).at(col);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) {
    throw FormatError("line " + std::to_string(lines[row]) + ": '" + s + "' is not a number",
                      lines[row]);
  }
  return v;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();

  CsvTable table;
  std::vector<std::string> record;
  std::string field;
  std::size_t line = 1, record_line = 1;
  bool quoted = false, any = false;
  auto end_record = [&] {
    record.push_back(std::move(field));
    field.clear();
    if (table.header.empty()) {
      table.header = std::move(record);
    } else if (!(record.size() == 1 && record[0].empty())) {
      if (record.size() != table.header.size()) {
        throw FormatError(path.string() + " line " + std::to_string(record_line) + ": expected " +
                              std::to_string(table.header.size()) + " fields, got " +
                              std::to_string(record.size()),
                          record_line);
      }
      table.rows.push_back(std::move(record));
      table.lines.push_back(record_line);
    }
    record.clear();
    any = false;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (!any) record_line = line;
    any = true;
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      record.push_back(std::move(field));
      field.clear();
    } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      // CRLF; the newline ends the record.
    } else if (c == '\n') {
      end_record();
      ++line;
    } else {
      field += c;
    }
  }
  if (quoted) throw FormatError(path.string() + ": unterminated quote", record_line);
  if (any) end_record();
  if (table.header.empty()) throw FormatError(path.string() + ": empty file", 1);
  return table;
}

std::vector<double> TimingTotals::fractions() const {
  const double t = total();
  if (t <= 0.0) return {0.0, 0.0, 0.0, 0.0};
  return {step / t, pull / t, deserialize / t, load / t};
}

TimingTotals& TimingTotals::operator+=(const TimingTotals& o) {
  step += o.step;
  pull += o.pull;
  deserialize += o.deserialize;
  load += o.load;
  windows += o.windows;
  return *this;
}

BreakdownReport breakdown_report(const std::vector<std::filesystem::path>& timing_csvs) {
  BreakdownReport report;
  for (const auto& path : timing_csvs) {
    const CsvTable t = read_csv(path);
    const std::size_t actor = t.column("actor_id"), step = t.column("step_time_s"),
                      pull = t.column("pull_time_s"), deser = t.column("deserialize_time_s"),
                      load = t.column("load_time_s");
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      TimingTotals w;
      w.step = t.number(r, step);
      w.pull = t.number(r, pull);
      w.deserialize = t.number(r, deser);
      w.load = t.number(r, load);
      w.windows = 1;
      report.per_actor[static_cast<int>(t.number(r, actor))] += w;
      // Row order, so the aggregate equals a plain column sum bit for bit.
      report.aggregate += w;
    }
  }
  return report;
}

RunSummary summarize_run(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "eval.csv")) {
    throw std::runtime_error("no eval.csv in " + dir.string());
  }
  RunSummary s;
  if (std::ifstream cfg(dir / "config.txt"); cfg) {
    std::stringstream ss;
    ss << cfg.rdbuf();
    s.config_echo = ss.str();
  }
  const CsvTable eval = read_csv(dir / "eval.csv");
  const std::size_t wall = eval.column("wall_time_s"), step = eval.column("learner_step"),
                    ret = eval.column("mean_return");
  std::vector<double> returns;
  for (std::size_t r = 0; r < eval.rows.size(); ++r) returns.push_back(eval.number(r, ret));
  const auto smooth = running_mean(returns);
  for (std::size_t r = 0; r < eval.rows.size(); ++r) {
    s.reward_vs_time.push_back({eval.number(r, wall), smooth[r]});
    s.reward_vs_steps.push_back({eval.number(r, step), smooth[r]});
  }
  if (std::filesystem::exists(dir / "timing.csv")) {
    s.timing = breakdown_report({dir / "timing.csv"}).aggregate;
  }
  return s;
}

}  // namespace actorq::metrics
