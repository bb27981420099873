#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "epplan/estimator.hpp"
#include "epplan/executor.hpp"
#include "epplan/planner.hpp"

namespace epplan {

enum class CascadeAggregate { min, mean };

/// Knobs for every system; defaults reproduce the reference configuration.
struct SystemOptions {
  PlannerConfig planner;
  double coarse_sample_frac = 0.1;
  double filter_pass_threshold = 0.5;
  double specialized_holdout_frac = 0.02;
  double specialized_f1_floor = 0.7;
  double cascade_threshold = 0.8;
  double cascade_switch_cost = 0.0;
  CascadeAggregate cascade_aggregate = CascadeAggregate::min;
  bool optimal_allow_skip = true;
  std::size_t train_size = 200;
  TrainOptions train;
  std::uint64_t seed = 42;
};

/// Names accepted by run_system, in display order.
const std::vector<std::string>& system_names();
bool is_system(std::string_view name);

RunReport run_naive(const TraceStore& store, const Query& query);

/// One exit point for the whole video, chosen from a uniform stride sample.
/// Planning and execution do not share results.
RunReport run_coarse(const TraceStore& store, const Query& query, double sample_frac = 0.1,
                     const PlannerConfig& config = {});

/// Filter model on every frame; frames scoring >= pass_threshold go to the
/// oracle. extras["reduction_rate"] is the realized fraction filtered out.
RunReport run_filter(const TraceStore& store, const Query& query, double pass_threshold);

/// Answers with the specialized model when its holdout F1 reaches f1_floor,
/// otherwise runs the oracle everywhere while still paying for the
/// specialized model. extras: holdout_f1, fallback (0/1).
RunReport run_specialized(const TraceStore& store, const Query& query, double holdout_frac, double f1_floor);

struct CascadeRun {
  RunReport report;
  std::vector<Depth> stop_depth;  // per frame
};

/// Separate models of increasing depth evaluated per frame until the frame's
/// aggregated confidence reaches `threshold` (frames without detections have
/// confidence 0). Costs accumulate across stages.
CascadeRun run_cascade(const TraceStore& store, const Query& query, double threshold, double switch_cost = 0.0,
                       CascadeAggregate aggregate = CascadeAggregate::min);

/// Executes a per-frame plan using exit point stop_depth[f] on frame f.
RunReport run_matched_ei(const TraceStore& store, const Query& query, const std::vector<Depth>& stop_depth);

/// Cheapest correct action per frame, adjacent equal actions merged. Without
/// skipping, oracle-negative frames take the cheapest exit point that also
/// answers false.
Plan optimal_plan(const TraceStore& store, const Query& query, bool allow_skip = true);
RunReport run_optimal(const TraceStore& store, const Query& query, bool allow_skip = true);

/// Fine-grained planner followed by execution on the shared cache.
RunReport run_planned(const TraceStore& store, const Query& query, const PlannerConfig& config,
                      const EPEstimator* estimator, std::string system);

RunReport run_thia_ei(const TraceStore& store, const Query& query, const SystemOptions& options);
/// Trains a per-query estimator and plans in estimate mode.
RunReport run_thia(const TraceStore& store, const Query& query, const SystemOptions& options);
/// Planner restricted to the oracle: chunk skipping without early exits.
RunReport run_thia_single(const TraceStore& store, const Query& query, const SystemOptions& options);

/// Dispatch by name; throws std::invalid_argument for unknown systems.
RunReport run_system(std::string_view name, const TraceStore& store, const Query& query,
                     const SystemOptions& options);

}  // namespace epplan
