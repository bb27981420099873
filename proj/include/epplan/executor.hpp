#pragma once

#include <map>
#include <string>
#include <vector>

#include "epplan/inference.hpp"
#include "epplan/planner.hpp"

namespace epplan {

struct Scores {
  double precision = 1.0;
  double recall = 1.0;
  double f1 = 1.0;
};

/// Set precision/recall against `truth`. An empty result has precision 1, an
/// empty truth has recall 1, and f1 is 0 when both are 0. Inputs are sorted.
Scores score(const std::vector<FrameId>& result, const std::vector<FrameId>& truth);

/// Oracle predicate on every frame, read straight from the trace (uncosted).
std::vector<FrameId> oracle_result(const TraceStore& store, const Query& query);

struct ChunkCost {
  Chunk chunk;
  PlanAction action;
  double cost = 0;  // execution-phase cost spent inside this chunk
};

struct Execution {
  std::vector<FrameId> result_frames;  // sorted
  double exec_cost = 0;
  std::map<std::string, FrameId> ep_usage;  // "skip" / "ep:k" -> frames
  std::vector<ChunkCost> chunks;
};

/// Runs `plan` in the execution phase. Frames already computed during planning
/// are read from `cache` for free.
Execution execute(const TraceStore& store, InferenceCache& cache, const Plan& plan, const Query& query);

struct RunReport {
  std::string system;
  std::vector<FrameId> result_frames;
  double opt_cost = 0;
  double exec_cost = 0;
  double total_cost = 0;
  std::map<std::string, FrameId> ep_usage;
  Scores metrics;
  double speedup_vs_naive = 0;
  std::int64_t inference_calls = 0;
  std::vector<ChunkCost> chunks;
  /// Free-form extras (realized reduction rate, fallback flag, ...).
  std::map<std::string, double> extras;
  /// Effective configuration echoed into the serialized report.
  std::map<std::string, std::string> config;
};

/// Fills metrics, totals and speedup from the pieces of a run.
RunReport make_report(const TraceStore& store, const Query& query, std::string system, double opt_cost,
                      Execution execution, std::int64_t inference_calls);

std::string report_to_json(const RunReport& report, bool include_frames = true);
std::string report_csv_header();
std::string report_csv_row(const RunReport& report);

}  // namespace epplan
