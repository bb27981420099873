#pragma once

#include <string>
#include <vector>

#include "epplan/inference.hpp"
#include "epplan/query.hpp"
#include "epplan/trace.hpp"

namespace epplan {

class EPEstimator;

/// Half-open frame range [start, end).
struct Chunk {
  FrameId start = 0;
  FrameId end = 0;
  FrameId length() const { return end - start; }
  bool operator==(const Chunk&) const = default;
};

struct PlanAction {
  enum class Kind { skip, use_ep };
  Kind kind = Kind::skip;
  Depth depth = 0;

  static PlanAction Skip() { return {Kind::skip, 0}; }
  static PlanAction UseEP(Depth k) { return {Kind::use_ep, k}; }
  bool is_skip() const { return kind == Kind::skip; }
  bool operator==(const PlanAction&) const = default;
};

/// "skip" or "ep:<k>".
std::string to_string(PlanAction action);
PlanAction parse_action(std::string_view text);

struct Assignment {
  Chunk chunk;
  PlanAction action;
  bool operator==(const Assignment&) const = default;
};

struct Plan {
  std::vector<Assignment> assignments;
  bool operator==(const Plan&) const = default;
};

/// Throws std::invalid_argument unless the plan tiles [0, frame_count) and every
/// action is valid for `depth_count` exit points.
void validate_plan(const Plan& plan, FrameId frame_count, int depth_count);

std::string plan_to_json(const Plan& plan);
Plan plan_from_json(std::string_view text);

enum class SelectionMode { evaluate, estimate };

struct PlannerConfig {
  double precision_min = 0.8;
  double recall_min = 0.8;
  FrameId min_chunk = 100;
  double max_final_rate = 0.1;
  double posi_sufficient = 0.05;
  int branching = 2;
  SelectionMode selection_mode = SelectionMode::evaluate;
  /// Snap radius used while refining; negative means floor(stride / reuse_divisor).
  int reuse_radius = -1;
  int reuse_divisor = 4;
  /// Priced per estimator prediction in estimate mode.
  double estimator_cost = 0.01;
  /// Exit points the planner may choose from; empty means all. The oracle is
  /// always available.
  std::vector<Depth> allowed_depths;

  void validate() const;
};

struct EPCounts {
  std::int64_t tp = 0, fp = 0, fn = 0;
  double precision = 1.0;
  double recall = 1.0;
};

struct EPMetrics {
  std::vector<EPCounts> per_depth;  // index depth - 1; unevaluated depths stay default
  double posi_ratio = 0.0;
  std::int64_t samples = 0;
};

/// precision = tp/(tp+fp) and recall = tp/(tp+fn), each 1 when its denominator is 0.
EPCounts make_counts(std::int64_t tp, std::int64_t fp, std::int64_t fn);

struct BestEP {
  Depth best = 0;
  EPMetrics metrics;
};

struct SamplingBound {
  double rate = 0;
  int max_depth = 0;
};

/// rate * 2^max_depth <= max_final_rate with max_depth = ceil(log2(N / min_chunk)).
SamplingBound initial_sampling_rate(FrameId frame_count, const PlannerConfig& config = {});

/// chunk.start, chunk.start + s, ... with s = max(1, round(1 / rate)).
std::vector<FrameId> sample_positions(Chunk chunk, double rate);

int stride_for(double rate);

/// Evaluates every allowed exit point against the oracle on the sampled frames.
BestEP pick_best_ep(const TraceStore& store, InferenceCache& cache, const Query& query, Chunk chunk,
                    double rate, const PlannerConfig& config, int reuse_radius = 0);

/// Lowest allowed depth meeting both constraints; the oracle always qualifies.
Depth choose_depth(const EPMetrics& metrics, const PlannerConfig& config, int depth_count);

struct PlanningReport {
  double opt_cost = 0;
  std::int64_t inference_calls = 0;
  std::int64_t samples_evaluated = 0;
  int recursion_depth_max = 0;
  int max_depth_bound = 0;
  double initial_rate = 0;
  double max_rate_used = 0;
  std::int64_t estimator_calls = 0;
  double estimator_cost = 0;
  std::int64_t chunks_examined = 0;
};

/// Recursive fine-grained planning of `chunk`. Appends assignments in frame
/// order to `out`; `report` (optional) accumulates sampling statistics.
void get_query_plan(const TraceStore& store, InferenceCache& cache, const Query& query, Chunk chunk,
                    double rate, const PlannerConfig& config, int depth, Plan& out,
                    PlanningReport* report = nullptr, const EPEstimator* estimator = nullptr);

struct PlanResult {
  Plan plan;
  PlanningReport report;
};

/// Plans the whole trace with a cold cache.
PlanResult plan(const TraceStore& store, const Query& query, const PlannerConfig& config,
                const EPEstimator* estimator = nullptr);
/// Plans the whole trace reusing `cache`; report.opt_cost counts only what this
/// call added in the planning phase plus estimator charges.
PlanResult plan(const TraceStore& store, InferenceCache& cache, const Query& query,
                const PlannerConfig& config, const EPEstimator* estimator = nullptr);

}  // namespace epplan
