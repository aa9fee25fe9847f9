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
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "actorq/nn/mlp.hpp"

namespace actorq::metrics {

inline constexpr double kNotReached = std::numeric_limits<double>::infinity();
inline constexpr std::size_t kSmoothingWindow = 10;

struct CurvePoint {
  double x = 0.0;  // wall seconds or learner steps
  double value = 0.0;
};

// Trailing running mean; the first window-1 points average what exists so far.
std::vector<double> running_mean(std::span<const double> values,
                                 std::size_t window = kSmoothingWindow);

// First x at which the smoothed curve reaches threshold, kNotReached otherwise.
double time_to_reward(std::span<const CurvePoint> curve, double threshold,
                      std::size_t window = kSmoothingWindow);

// Reward level for the time-to-reward protocol: `fraction` of the peak
// smoothed return, measured from below for negative returns. With several
// baseline runs the peak is the median of the per-run peaks, so most
// baseline runs reach the level themselves.
double reward_threshold(const std::vector<std::vector<CurvePoint>>& baseline_runs,
                        double fraction = 0.95, std::size_t window = kSmoothingWindow);

// baseline_time / fast_time. kNotReached if the fast run never got there,
// 0 if only the baseline failed.
double speedup(double baseline_time, double fast_time);

double median(std::vector<double> values);

// ---------------------------------------------------------------- PTQ

struct Precision {
  enum class Kind { kFp32, kFp16, kAffine };
  Kind kind = Kind::kFp32;
  int bits = 32;

  static Precision parse(const std::string& text);  // "2".."16", "32", "fp16"
  std::string label() const;
};

std::vector<Precision> default_ptq_precisions();

struct PtqRow {
  Precision precision;
  bool weight_only = false;
  double mean_return = 0.0;
  double std_return = 0.0;
};

struct PtqOptions {
  int episodes = 10;
  std::uint64_t seed = 0;
  bool include_weight_only = true;
  bool include_full = true;  // weights and activations
};

std::vector<PtqRow> ptq_sweep(const nn::MlpPolicy& policy, const std::string& env,
                              const std::vector<Precision>& precisions,
                              const PtqOptions& options = {});

// ---------------------------------------------------------------- kernels

struct BenchRow {
  std::size_t width = 0;
  int bits = 32;
  double median_ns = 0.0;
};

struct BenchOptions {
  std::size_t reps = 1000;
  std::size_t warmup = 50;
  std::size_t input_dim = 4;
  std::size_t output_dim = 2;
  std::uint64_t seed = 0;
};

// Median latency of one forward pass through a 3-hidden-layer MLP.
std::vector<BenchRow> bench_kernel(const std::vector<std::size_t>& widths,
                                   const std::vector<int>& bits, const BenchOptions& options = {});

// ---------------------------------------------------------------- runs

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;  // 1-based source line of each row

  std::size_t column(const std::string& name) const;
  double number(std::size_t row, std::size_t col) const;
};

// Minimal RFC 4180 reader: quoted fields, doubled quotes, CRLF. Ragged rows
// raise FormatError carrying the line number.
CsvTable read_csv(const std::filesystem::path& path);

struct TimingTotals {
  double step = 0.0;
  double pull = 0.0;
  double deserialize = 0.0;
  double load = 0.0;
  std::size_t windows = 0;

  double total() const { return step + pull + deserialize + load; }
  // step, pull, deserialize, load shares of total(); all 0 when total is 0.
  std::vector<double> fractions() const;
  TimingTotals& operator+=(const TimingTotals& o);
};

struct BreakdownReport {
  std::map<int, TimingTotals> per_actor;
  TimingTotals aggregate;
};

BreakdownReport breakdown_report(const std::vector<std::filesystem::path>& timing_csvs);

struct RunSummary {
  std::string config_echo;
  std::vector<CurvePoint> reward_vs_time;   // smoothed
  std::vector<CurvePoint> reward_vs_steps;  // smoothed
  TimingTotals timing;
};

// Reads eval.csv, timing.csv and config.txt from a run directory.
RunSummary summarize_run(const std::filesystem::path& dir);

}  // namespace actorq::metrics
