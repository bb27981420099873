#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "epplan/query.hpp"
#include "epplan/trace.hpp"

namespace epplan {

enum class Regime { frequent_easy, frequent_hard, rare_hard };

const char* to_string(Regime regime);
std::optional<Regime> parse_regime(std::string_view text);

/// `count` objects of `class_label` present on every frame of [start, end).
/// Overlapping segments add up.
struct Segment {
  FrameId start = 0;
  FrameId end = 0;
  std::string class_label;
  int count = 1;
  double difficulty = 0.0;
};

/// Event that the filter and specialized-model fields are noisy views of.
struct TargetEvent {
  std::string class_label;
  int min_count = 1;
};

struct ScenarioSpec {
  std::string name = "synthetic";
  FrameId frame_count = 12800;
  std::vector<Segment> segments;
  std::map<Depth, double> ep_miss_rate;   // per depth; oracle forced to 0
  std::map<Depth, double> ep_false_rate;  // per depth; oracle forced to 0
  int feature_dim = 8;
  double feature_noise = 0.1;
  std::uint64_t seed = 42;
  std::vector<double> ep_costs = default_ep_costs();
  double filter_cost = 0.1;
  double specialized_cost = 0.06;
  std::optional<TargetEvent> target;

  int depth_count() const { return static_cast<int>(ep_costs.size()); }
  void validate() const;
};

/// Per-depth false-negative ratios of the published early-exit model.
std::map<Depth, double> default_miss_rates();
/// 1 - true-positive ratio per depth, used as the spurious-detection rate.
std::map<Depth, double> default_false_rates();

/// Probability that depth `k` drops an object of the given difficulty:
/// miss_rate[k] * 2 * difficulty, clamped to [0, 1]. Difficulty 0.5 gives the
/// nominal rate.
double effective_miss_rate(const ScenarioSpec& spec, Depth k, double difficulty);

ScenarioSpec preset(Regime regime, FrameId frame_count = 12800, std::uint64_t seed = 42);

/// The four benchmark workloads: frequent/easy cars, frequent/hard trucks,
/// rare/hard buses, and rare/hard cars on a second camera.
struct WorkloadPreset {
  std::string key;  // q1..q4
  Regime regime;
  ScenarioSpec spec;
  std::string query;
};

std::vector<WorkloadPreset> workload_presets(FrameId frame_count = 12800, std::uint64_t seed = 42);
std::optional<WorkloadPreset> find_workload(std::string_view key, FrameId frame_count = 12800,
                                            std::uint64_t seed = 42);

/// Randomized scenario for property tests: random length, segments, classes
/// and difficulties. The target is a Count(...) >= t event over one of them.
ScenarioSpec random_spec(std::uint64_t seed);
/// Query matching a spec's target, reading from the spec's name.
std::string target_query(const ScenarioSpec& spec);

TraceStore generate(const ScenarioSpec& spec);

struct Census {
  FrameId frames = 0;
  FrameId positives = 0;
  double positive_fraction = 0.0;
};

/// Oracle-positive frames for `query`; pure lookup.
Census census(const TraceStore& store, const Query& query);

}  // namespace epplan
