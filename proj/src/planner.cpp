#include "epplan/planner.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "epplan/estimator.hpp"

namespace epplan {

using nlohmann::json;

std::string to_string(PlanAction action) {
  return action.is_skip() ? "skip" : "ep:" + std::to_string(action.depth);
}

PlanAction parse_action(std::string_view text) {
  if (text == "skip") return PlanAction::Skip();
  if (text.starts_with("ep:")) {
    const std::string digits(text.substr(3));
    if (!digits.empty() && std::all_of(digits.begin(), digits.end(), ::isdigit))
      return PlanAction::UseEP(std::stoi(digits));
  }
  throw std::invalid_argument("bad plan action '" + std::string(text) + "'");
}

void validate_plan(const Plan& plan, FrameId frame_count, int depth_count) {
  FrameId cursor = 0;
  for (const auto& a : plan.assignments) {
    if (a.chunk.start != cursor)
      throw std::invalid_argument("plan does not tile: chunk starts at " + std::to_string(a.chunk.start) +
                                  ", expected " + std::to_string(cursor));
    if (a.chunk.end <= a.chunk.start) throw std::invalid_argument("empty chunk in plan");
    if (!a.action.is_skip() && (a.action.depth < 1 || a.action.depth > depth_count))
      throw std::invalid_argument("plan uses unknown exit point " + std::to_string(a.action.depth));
    cursor = a.chunk.end;
  }
  if (cursor != frame_count)
    throw std::invalid_argument("plan covers [0, " + std::to_string(cursor) + ") instead of [0, " +
                                std::to_string(frame_count) + ")");
}

std::string plan_to_json(const Plan& plan) {
  json out = json::array();
  for (const auto& a : plan.assignments)
    out.push_back({{"start", a.chunk.start}, {"end", a.chunk.end}, {"action", to_string(a.action)}});
  return out.dump();
}

Plan plan_from_json(std::string_view text) {
  Plan plan;
  try {
    for (const auto& j : json::parse(text))
      plan.assignments.push_back({{j.at("start").get<FrameId>(), j.at("end").get<FrameId>()},
                                  parse_action(j.at("action").get<std::string>())});
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed plan: ") + e.what());
  }
  return plan;
}

void PlannerConfig::validate() const {
  if (!(max_final_rate > 0.0 && max_final_rate <= 1.0))
    throw std::invalid_argument("max_final_rate must be in (0, 1]");
  if (branching < 2) throw std::invalid_argument("branching must be >= 2");
  if (!(posi_sufficient >= 0.0 && posi_sufficient <= 1.0))
    throw std::invalid_argument("posi_sufficient must be in [0, 1]");
  if (min_chunk < 1) throw std::invalid_argument("min_chunk must be >= 1");
  if (reuse_divisor < 1) throw std::invalid_argument("reuse_divisor must be >= 1");
  if (estimator_cost < 0.0) throw std::invalid_argument("estimator_cost must be >= 0");
}

EPCounts make_counts(std::int64_t tp, std::int64_t fp, std::int64_t fn) {
  EPCounts c{tp, fp, fn, 1.0, 1.0};
  if (tp + fp > 0) c.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) c.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return c;
}

SamplingBound initial_sampling_rate(FrameId frame_count, const PlannerConfig& config) {
  if (frame_count < 1) throw std::invalid_argument("frame_count must be >= 1");
  int depth = 0;
  // Smallest depth with min_chunk * 2^depth >= N, i.e. ceil(log2(N / min_chunk)),
  // computed in integers to stay exact at powers of two.
  while (static_cast<std::int64_t>(config.min_chunk) << depth < frame_count) ++depth;
  return {config.max_final_rate / std::ldexp(1.0, depth), depth};
}

int stride_for(double rate) {
  if (!(rate > 0.0 && rate <= 1.0)) throw std::invalid_argument("sampling rate must be in (0, 1]");
  return std::max(1, static_cast<int>(std::lround(1.0 / rate)));
}

std::vector<FrameId> sample_positions(Chunk chunk, double rate) {
  const int stride = stride_for(rate);
  std::vector<FrameId> out;
  for (std::int64_t f = chunk.start; f < chunk.end; f += stride) out.push_back(static_cast<FrameId>(f));
  return out;
}

namespace {

bool allowed(const PlannerConfig& config, Depth d, int depth_count) {
  if (d == depth_count || config.allowed_depths.empty()) return true;
  return std::find(config.allowed_depths.begin(), config.allowed_depths.end(), d) !=
         config.allowed_depths.end();
}

}  // namespace

Depth choose_depth(const EPMetrics& metrics, const PlannerConfig& config, int depth_count) {
  for (Depth k = 1; k < depth_count; ++k) {
    if (!allowed(config, k, depth_count)) continue;
    const auto& c = metrics.per_depth[static_cast<std::size_t>(k - 1)];
    if (c.precision >= config.precision_min && c.recall >= config.recall_min) return k;
  }
  return depth_count;
}

BestEP pick_best_ep(const TraceStore& store, InferenceCache& cache, const Query& query, Chunk chunk,
                    double rate, const PlannerConfig& config, int reuse_radius) {
  const int k_max = store.exit_point_count();
  const auto samples = sample_positions(chunk, std::min(rate, 1.0));

  std::vector<std::int64_t> tp(k_max, 0), fp(k_max, 0), fn(k_max, 0);
  std::int64_t positives = 0;
  for (FrameId f : samples) {
    const bool truth = predicate_at(store, cache, query, k_max, f, Phase::planning, reuse_radius);
    positives += truth;
    for (Depth k = 1; k < k_max; ++k) {
      if (!allowed(config, k, k_max)) continue;
      const bool got = predicate_at(store, cache, query, k, f, Phase::planning, reuse_radius);
      const auto i = static_cast<std::size_t>(k - 1);
      tp[i] += got && truth;
      fp[i] += got && !truth;
      fn[i] += !got && truth;
    }
  }

  BestEP out;
  out.metrics.samples = static_cast<std::int64_t>(samples.size());
  out.metrics.posi_ratio =
      samples.empty() ? 0.0 : static_cast<double>(positives) / static_cast<double>(samples.size());
  out.metrics.per_depth.resize(static_cast<std::size_t>(k_max));
  for (Depth k = 1; k < k_max; ++k) {
    const auto i = static_cast<std::size_t>(k - 1);
    out.metrics.per_depth[i] = make_counts(tp[i], fp[i], fn[i]);
  }
  out.metrics.per_depth.back() = make_counts(positives, 0, 0);
  out.best = choose_depth(out.metrics, config, k_max);
  return out;
}

void get_query_plan(const TraceStore& store, InferenceCache& cache, const Query& query, Chunk chunk,
                    double rate, const PlannerConfig& config, int depth, Plan& out,
                    PlanningReport* report, const EPEstimator* estimator) {
  if (chunk.start < 0 || chunk.end > store.frame_count || chunk.length() < 1)
    throw std::invalid_argument("invalid chunk");
  const double level_rate = std::min(rate, 1.0);
  const int radius =
      config.reuse_radius >= 0 ? config.reuse_radius : (depth == 0 ? 0 : stride_for(level_rate) / config.reuse_divisor);

  BestEP picked;
  if (config.selection_mode == SelectionMode::estimate) {
    if (!estimator) throw std::invalid_argument("estimate mode requires a trained estimator");
    picked = pick_best_ep_estimated(store, cache, *estimator, query, chunk, level_rate, config, radius, report);
  } else {
    picked = pick_best_ep(store, cache, query, chunk, level_rate, config, radius);
  }

  if (report) {
    report->samples_evaluated += picked.metrics.samples;
    report->recursion_depth_max = std::max(report->recursion_depth_max, depth);
    report->max_rate_used = std::max(report->max_rate_used, level_rate);
    ++report->chunks_examined;
  }

  const bool sufficient = picked.metrics.posi_ratio >= config.posi_sufficient;
  if ((sufficient && picked.best == 1) || chunk.length() <= config.min_chunk) {
    out.assignments.push_back({chunk, PlanAction::UseEP(picked.best)});
  } else if (!sufficient) {
    out.assignments.push_back({chunk, PlanAction::Skip()});
  } else {
    const FrameId len = chunk.length();
    const FrameId parts = std::min<FrameId>(config.branching, len);
    const FrameId base = len / parts;
    const FrameId extra = len % parts;
    FrameId start = chunk.start;
    for (FrameId i = 0; i < parts; ++i) {
      const FrameId end = start + base + (i < extra ? 1 : 0);
      get_query_plan(store, cache, query, {start, end}, rate * 2.0, config, depth + 1, out, report,
                     estimator);
      start = end;
    }
  }
}

PlanResult plan(const TraceStore& store, InferenceCache& cache, const Query& query,
                const PlannerConfig& config, const EPEstimator* estimator) {
  config.validate();
  const auto bound = initial_sampling_rate(store.frame_count, config);
  const double before = cache.cost(Phase::planning);
  const auto calls_before = cache.calls();

  PlanResult result;
  result.report.initial_rate = bound.rate;
  result.report.max_depth_bound = bound.max_depth;
  get_query_plan(store, cache, query, {0, store.frame_count}, bound.rate, config, 0, result.plan,
                 &result.report, estimator);
  result.report.inference_calls = cache.calls() - calls_before;
  result.report.opt_cost = cache.cost(Phase::planning) - before + result.report.estimator_cost;
  return result;
}

PlanResult plan(const TraceStore& store, const Query& query, const PlannerConfig& config,
                const EPEstimator* estimator) {
  InferenceCache cache(store);
  return plan(store, cache, query, config, estimator);
}

}  // namespace epplan
