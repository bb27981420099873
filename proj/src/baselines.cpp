#include "epplan/baselines.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace epplan {

namespace {

Plan single_action_plan(FrameId n, PlanAction action) {
  Plan p;
  if (n > 0) p.assignments.push_back({{0, n}, action});
  return p;
}

/// Merges per-frame actions into maximal runs.
Plan plan_from_actions(const std::vector<PlanAction>& actions) {
  Plan p;
  for (FrameId f = 0; f < static_cast<FrameId>(actions.size()); ++f) {
    const auto& a = actions[static_cast<std::size_t>(f)];
    if (!p.assignments.empty() && p.assignments.back().action == a) {
      p.assignments.back().chunk.end = f + 1;
    } else {
      p.assignments.push_back({{f, f + 1}, a});
    }
  }
  return p;
}

const ModelProfile& require_kind(const TraceStore& store, ModelKind kind) {
  const auto* m = store.find_kind(kind);
  if (!m) throw std::invalid_argument(std::string("trace has no ") + to_string(kind) + " model");
  return *m;
}

double aggregate_confidence(const std::vector<Detection>& dets, CascadeAggregate aggregate) {
  if (dets.empty()) return 0.0;
  if (aggregate == CascadeAggregate::min) {
    double m = dets.front().confidence;
    for (const auto& d : dets) m = std::min(m, d.confidence);
    return m;
  }
  double sum = 0.0;
  for (const auto& d : dets) sum += d.confidence;
  return sum / static_cast<double>(dets.size());
}

}  // namespace

const std::vector<std::string>& system_names() {
  static const std::vector<std::string> names{"naive",  "coarse",      "filter",  "specialized", "cascade",
                                              "thia_single", "thia_ei", "thia", "optimal"};
  return names;
}

bool is_system(std::string_view name) {
  const auto& n = system_names();
  return std::find(n.begin(), n.end(), name) != n.end();
}

RunReport run_naive(const TraceStore& store, const Query& query) {
  InferenceCache cache(store);
  auto ex = execute(store, cache, single_action_plan(store.frame_count, PlanAction::UseEP(store.oracle_depth())), query);
  return make_report(store, query, "naive", 0.0, std::move(ex), cache.calls());
}

RunReport run_coarse(const TraceStore& store, const Query& query, double sample_frac, const PlannerConfig& config) {
  if (!(sample_frac > 0.0 && sample_frac <= 1.0)) throw std::invalid_argument("sample_frac must be in (0, 1]");
  InferenceCache planning(store);
  const auto picked = pick_best_ep(store, planning, query, {0, store.frame_count}, sample_frac, config);
  InferenceCache execution(store);
  auto ex = execute(store, execution, single_action_plan(store.frame_count, PlanAction::UseEP(picked.best)), query);
  auto r = make_report(store, query, "coarse", planning.cost(Phase::planning), std::move(ex),
                       planning.calls() + execution.calls());
  r.extras["chosen_ep"] = picked.best;
  return r;
}

RunReport run_filter(const TraceStore& store, const Query& query, double pass_threshold) {
  const double filter_cost = require_kind(store, ModelKind::filter).cost_per_frame;
  InferenceCache cache(store);
  const Depth oracle = store.oracle_depth();
  Execution ex;
  FrameId passed = 0;
  for (FrameId f = 0; f < store.frame_count; ++f) {
    const auto& rec = store.frame(f);
    if (!rec.filter_score) throw TraceError("filter_score missing", f);
    if (*rec.filter_score < pass_threshold) continue;
    ++passed;
    if (predicate_at(store, cache, query, oracle, f, Phase::execution)) ex.result_frames.push_back(f);
  }
  ex.exec_cost = store.frame_count * filter_cost + cache.cost(Phase::execution);
  ex.ep_usage["skip"] = store.frame_count - passed;
  ex.ep_usage[to_string(PlanAction::UseEP(oracle))] = passed;
  auto r = make_report(store, query, "filter", 0.0, std::move(ex), cache.calls() + store.frame_count);
  r.extras["reduction_rate"] =
      store.frame_count ? 1.0 - static_cast<double>(passed) / static_cast<double>(store.frame_count) : 0.0;
  r.extras["cost_ratio"] = filter_cost / store.oracle_cost();
  return r;
}

RunReport run_specialized(const TraceStore& store, const Query& query, double holdout_frac, double f1_floor) {
  if (!(holdout_frac > 0.0 && holdout_frac <= 1.0)) throw std::invalid_argument("holdout_frac must be in (0, 1]");
  const double model_cost = require_kind(store, ModelKind::specialized).cost_per_frame;
  const Depth oracle = store.oracle_depth();
  InferenceCache cache(store);

  auto answer = [&](FrameId f) {
    const auto& rec = store.frame(f);
    if (!rec.specialized_answer) throw TraceError("specialized_answer missing", f);
    return *rec.specialized_answer;
  };

  std::vector<FrameId> holdout_answer, holdout_truth;
  for (FrameId f : sample_positions({0, store.frame_count}, holdout_frac)) {
    if (answer(f)) holdout_answer.push_back(f);
    if (predicate_at(store, cache, query, oracle, f, Phase::planning)) holdout_truth.push_back(f);
  }
  const double holdout_f1 = score(holdout_answer, holdout_truth).f1;
  const bool fallback = holdout_f1 < f1_floor;

  Execution ex;
  for (FrameId f = 0; f < store.frame_count; ++f) {
    const bool got = fallback ? predicate_at(store, cache, query, oracle, f, Phase::execution) : answer(f);
    if (got) ex.result_frames.push_back(f);
  }
  ex.exec_cost = store.frame_count * model_cost + cache.cost(Phase::execution);
  ex.ep_usage[fallback ? to_string(PlanAction::UseEP(oracle)) : "specialized"] = store.frame_count;
  auto r = make_report(store, query, "specialized", cache.cost(Phase::planning), std::move(ex),
                       cache.calls() + store.frame_count);
  r.extras["holdout_f1"] = holdout_f1;
  r.extras["fallback"] = fallback ? 1.0 : 0.0;
  return r;
}

CascadeRun run_cascade(const TraceStore& store, const Query& query, double threshold, double switch_cost,
                       CascadeAggregate aggregate) {
  if (switch_cost < 0.0) throw std::invalid_argument("switch_cost must be >= 0");
  const int k_max = store.exit_point_count();
  CascadeRun run;
  Execution ex;
  std::int64_t calls = 0;
  run.stop_depth.reserve(static_cast<std::size_t>(store.frame_count));
  for (FrameId f = 0; f < store.frame_count; ++f) {
    Depth k = 1;
    double cost = 0.0;
    for (;; ++k) {
      cost += store.ep_cost(k);
      ++calls;
      if (k == k_max || aggregate_confidence(detections(store, k, f), aggregate) >= threshold) break;
      cost += switch_cost;
    }
    ex.exec_cost += cost;
    run.stop_depth.push_back(k);
    ++ex.ep_usage[to_string(PlanAction::UseEP(k))];
    if (eval_predicate(query, detections(store, k, f))) ex.result_frames.push_back(f);
  }
  run.report = make_report(store, query, "cascade", 0.0, std::move(ex), calls);
  return run;
}

RunReport run_matched_ei(const TraceStore& store, const Query& query, const std::vector<Depth>& stop_depth) {
  if (static_cast<FrameId>(stop_depth.size()) != store.frame_count)
    throw std::invalid_argument("one stopping depth per frame is required");
  std::vector<PlanAction> actions;
  actions.reserve(stop_depth.size());
  for (Depth k : stop_depth) actions.push_back(PlanAction::UseEP(k));
  InferenceCache cache(store);
  auto ex = execute(store, cache, plan_from_actions(actions), query);
  return make_report(store, query, "matched_ei", 0.0, std::move(ex), cache.calls());
}

Plan optimal_plan(const TraceStore& store, const Query& query, bool allow_skip) {
  const int k_max = store.exit_point_count();
  std::vector<PlanAction> actions;
  actions.reserve(static_cast<std::size_t>(store.frame_count));
  for (FrameId f = 0; f < store.frame_count; ++f) {
    const bool truth = eval_predicate(query, detections(store, k_max, f));
    if (!truth && allow_skip) {
      actions.push_back(PlanAction::Skip());
      continue;
    }
    // Depth costs increase, so the shallowest agreeing exit point is the cheapest.
    Depth k = 1;
    while (k < k_max && eval_predicate(query, detections(store, k, f)) != truth) ++k;
    actions.push_back(PlanAction::UseEP(k));
  }
  return plan_from_actions(actions);
}

RunReport run_optimal(const TraceStore& store, const Query& query, bool allow_skip) {
  InferenceCache cache(store);
  auto ex = execute(store, cache, optimal_plan(store, query, allow_skip), query);
  return make_report(store, query, "optimal", 0.0, std::move(ex), cache.calls());
}

RunReport run_planned(const TraceStore& store, const Query& query, const PlannerConfig& config,
                      const EPEstimator* estimator, std::string system) {
  InferenceCache cache(store);
  auto planned = plan(store, cache, query, config, estimator);
  auto ex = execute(store, cache, planned.plan, query);
  auto r = make_report(store, query, std::move(system), planned.report.opt_cost, std::move(ex), cache.calls());
  r.extras["planning_inference_calls"] = static_cast<double>(planned.report.inference_calls);
  r.extras["samples_evaluated"] = static_cast<double>(planned.report.samples_evaluated);
  r.extras["estimator_calls"] = static_cast<double>(planned.report.estimator_calls);
  r.extras["recursion_depth_max"] = planned.report.recursion_depth_max;
  r.extras["max_rate_used"] = planned.report.max_rate_used;
  r.extras["chunks"] = static_cast<double>(planned.plan.assignments.size());
  return r;
}

RunReport run_thia_ei(const TraceStore& store, const Query& query, const SystemOptions& options) {
  PlannerConfig config = options.planner;
  config.selection_mode = SelectionMode::evaluate;
  return run_planned(store, query, config, nullptr, "thia_ei");
}

RunReport run_thia(const TraceStore& store, const Query& query, const SystemOptions& options) {
  const auto data = balanced_training_set(store, query, options.train_size, options.seed);
  if (data.empty()) throw std::invalid_argument("no frames to train the exit point estimator on");
  const auto est = train(data, store.exit_point_count(), options.train);
  PlannerConfig config = options.planner;
  config.selection_mode = SelectionMode::estimate;
  auto r = run_planned(store, query, config, &est, "thia");
  r.extras["estimator_train_accuracy"] = accuracy(est, data);
  return r;
}

RunReport run_thia_single(const TraceStore& store, const Query& query, const SystemOptions& options) {
  PlannerConfig config = options.planner;
  config.selection_mode = SelectionMode::evaluate;
  config.allowed_depths = {store.oracle_depth()};
  return run_planned(store, query, config, nullptr, "thia_single");
}

RunReport run_system(std::string_view name, const TraceStore& store, const Query& query,
                     const SystemOptions& options) {
  if (name == "naive") return run_naive(store, query);
  if (name == "coarse") return run_coarse(store, query, options.coarse_sample_frac, options.planner);
  if (name == "filter") return run_filter(store, query, options.filter_pass_threshold);
  if (name == "specialized")
    return run_specialized(store, query, options.specialized_holdout_frac, options.specialized_f1_floor);
  if (name == "cascade")
    return run_cascade(store, query, options.cascade_threshold, options.cascade_switch_cost,
                       options.cascade_aggregate)
        .report;
  if (name == "optimal") return run_optimal(store, query, options.optimal_allow_skip);
  if (name == "thia_ei") return run_thia_ei(store, query, options);
  if (name == "thia") return run_thia(store, query, options);
  if (name == "thia_single") return run_thia_single(store, query, options);
  throw std::invalid_argument("unknown system '" + std::string(name) + "'");
}

}  // namespace epplan
