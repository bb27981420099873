#include "epplan/executor.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace epplan {

using nlohmann::json;

Scores score(const std::vector<FrameId>& result, const std::vector<FrameId>& truth) {
  std::vector<FrameId> both;
  std::set_intersection(result.begin(), result.end(), truth.begin(), truth.end(), std::back_inserter(both));
  const auto tp = static_cast<double>(both.size());
  Scores s;
  if (!result.empty()) s.precision = tp / static_cast<double>(result.size());
  if (!truth.empty()) s.recall = tp / static_cast<double>(truth.size());
  s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

std::vector<FrameId> oracle_result(const TraceStore& store, const Query& query) {
  std::vector<FrameId> out;
  if (store.frame_count == 0) return out;
  const Depth oracle = store.oracle_depth();
  for (FrameId f = 0; f < store.frame_count; ++f)
    if (eval_predicate(query, detections(store, oracle, f))) out.push_back(f);
  return out;
}

Execution execute(const TraceStore& store, InferenceCache& cache, const Plan& plan, const Query& query) {
  validate_plan(plan, store.frame_count, store.exit_point_count());
  Execution ex;
  const double before = cache.cost(Phase::execution);
  for (const auto& a : plan.assignments) {
    ex.ep_usage[to_string(a.action)] += a.chunk.length();
    const double chunk_before = cache.cost(Phase::execution);
    if (!a.action.is_skip()) {
      for (FrameId f = a.chunk.start; f < a.chunk.end; ++f)
        if (predicate_at(store, cache, query, a.action.depth, f, Phase::execution)) ex.result_frames.push_back(f);
    }
    ex.chunks.push_back({a.chunk, a.action, cache.cost(Phase::execution) - chunk_before});
  }
  ex.exec_cost = cache.cost(Phase::execution) - before;
  return ex;
}

RunReport make_report(const TraceStore& store, const Query& query, std::string system, double opt_cost,
                      Execution execution, std::int64_t inference_calls) {
  RunReport r;
  r.system = std::move(system);
  r.opt_cost = opt_cost;
  r.exec_cost = execution.exec_cost;
  r.total_cost = opt_cost + execution.exec_cost;
  r.ep_usage = std::move(execution.ep_usage);
  r.chunks = std::move(execution.chunks);
  r.result_frames = std::move(execution.result_frames);
  r.metrics = score(r.result_frames, oracle_result(store, query));
  const double naive = store.frame_count * store.oracle_cost();
  r.speedup_vs_naive = r.total_cost > 0 ? naive / r.total_cost : 0.0;
  r.inference_calls = inference_calls;
  return r;
}

std::string report_to_json(const RunReport& r, bool include_frames) {
  json j;
  j["system"] = r.system;
  j["opt_cost"] = r.opt_cost;
  j["exec_cost"] = r.exec_cost;
  j["total_cost"] = r.total_cost;
  j["precision"] = r.metrics.precision;
  j["recall"] = r.metrics.recall;
  j["f1"] = r.metrics.f1;
  j["speedup_vs_naive"] = r.speedup_vs_naive;
  j["inference_calls"] = r.inference_calls;
  j["ep_usage"] = r.ep_usage;
  j["extras"] = r.extras;
  j["config"] = r.config;
  json chunks = json::array();
  for (const auto& c : r.chunks)
    chunks.push_back({{"start", c.chunk.start}, {"end", c.chunk.end}, {"action", to_string(c.action)}, {"cost", c.cost}});
  j["chunks"] = std::move(chunks);
  j["result_count"] = r.result_frames.size();
  if (include_frames) j["result_frames"] = r.result_frames;
  return j.dump(2);
}

std::string report_csv_header() {
  return "system,opt_cost,exec_cost,total_cost,precision,recall,f1,speedup_vs_naive,inference_calls";
}

std::string report_csv_row(const RunReport& r) {
  std::ostringstream os;
  os << std::setprecision(10) << r.system << ',' << r.opt_cost << ',' << r.exec_cost << ',' << r.total_cost << ','
     << r.metrics.precision << ',' << r.metrics.recall << ',' << r.metrics.f1 << ',' << r.speedup_vs_naive << ','
     << r.inference_calls;
  return os.str();
}

}  // namespace epplan
