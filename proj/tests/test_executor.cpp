#include <doctest.h>

#include "epplan/executor.hpp"
#include "epplan/synthgen.hpp"
#include "support.hpp"

using namespace epplan;
using namespace epplan::testing;

TEST_CASE("set scoring") {
  auto s = score({1, 2, 3}, {1, 2, 3});
  CHECK((s.precision == 1.0 && s.recall == 1.0 && s.f1 == 1.0));
  s = score({1, 2}, {2, 3});
  CHECK(s.precision == 0.5);
  CHECK(s.recall == 0.5);
  CHECK(s.f1 == 0.5);
  s = score({}, {1});
  CHECK(s.precision == 1.0);
  CHECK(s.recall == 0.0);
  CHECK(s.f1 == 0.0);
  s = score({4}, {});
  CHECK(s.precision == 0.0);
  CHECK(s.recall == 1.0);
}

TEST_CASE("skip-only plan costs nothing") {
  const auto store = generate(random_spec(1));
  const auto q = parse_query(target_query(random_spec(1)));
  InferenceCache cache(store);
  const auto ex = execute(store, cache, Plan{{{{0, store.frame_count}, PlanAction::Skip()}}}, q);
  CHECK(ex.result_frames.empty());
  CHECK(ex.exec_cost == 0.0);
  CHECK(ex.ep_usage.at("skip") == store.frame_count);
}

TEST_CASE("oracle plan reproduces the oracle result on random traces") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto spec = random_spec(seed);
    const auto store = generate(spec);
    const auto q = parse_query(target_query(spec));
    InferenceCache cache(store);
    // Pre-pay a few oracle frames as planning would.
    for (FrameId f = 0; f < store.frame_count; f += 97) infer(store, cache, 5, f, Phase::planning);
    const auto ex = execute(store, cache, Plan{{{{0, store.frame_count}, PlanAction::UseEP(5)}}}, q);
    CHECK(ex.result_frames == oracle_result(store, q));
    CHECK(ex.exec_cost <= store.frame_count * 1.0);
    CHECK(ex.exec_cost + cache.cost(Phase::planning) == doctest::Approx(store.frame_count * 1.0));
    CHECK(score(ex.result_frames, oracle_result(store, q)).f1 == 1.0);
  }
}

TEST_CASE("mixed plan cost arithmetic") {
  const auto store = generate(preset(Regime::frequent_hard, 500, 3));
  const auto q = parse_query("SELECT frameID FROM v WHERE Count(Truck) >= 1;");
  const Plan p{{{{0, 100}, PlanAction::Skip()}, {{100, 300}, PlanAction::UseEP(1)}, {{300, 500}, PlanAction::UseEP(3)}}};
  const auto c = default_ep_costs();

  InferenceCache cold(store);
  const auto ex = execute(store, cold, p, q);
  CHECK(ex.exec_cost == doctest::Approx(200 * c[0] + 200 * c[2]));
  CHECK(ex.ep_usage.at("skip") == 100);
  CHECK(ex.ep_usage.at("ep:1") == 200);
  CHECK(ex.ep_usage.at("ep:3") == 200);
  REQUIRE(ex.chunks.size() == 3);
  CHECK(ex.chunks[0].cost == 0.0);
  CHECK(ex.chunks[1].cost == doctest::Approx(200 * c[0]));

  InferenceCache warm(store);
  for (FrameId f = 100; f < 300; f += 10) infer(store, warm, 1, f, Phase::planning);
  CHECK(execute(store, warm, p, q).exec_cost == doctest::Approx(180 * c[0] + 200 * c[2]));
}

TEST_CASE("report totals and usage partition") {
  const auto w = *find_workload("q3", 3000, 1);
  const auto store = generate(w.spec);
  const auto q = parse_query(w.query);
  InferenceCache cache(store);
  const auto planned = plan(store, cache, q, {});
  auto r = make_report(store, q, "x", planned.report.opt_cost, execute(store, cache, planned.plan, q), cache.calls());
  CHECK(r.total_cost == doctest::Approx(r.opt_cost + r.exec_cost));
  FrameId sum = 0;
  for (const auto& [k, v] : r.ep_usage) sum += v;
  CHECK(sum == store.frame_count);
  CHECK(r.speedup_vs_naive == doctest::Approx(3000.0 / r.total_cost));

  const auto json = report_to_json(r);
  CHECK(json.find("\"ep_usage\"") != std::string::npos);
  CHECK(json.find("\"chunks\"") != std::string::npos);
  CHECK(report_csv_row(r).rfind("x,", 0) == 0);
  const auto header = report_csv_header();
  const auto row = report_csv_row(r);
  CHECK(std::count(header.begin(), header.end(), ',') == std::count(row.begin(), row.end(), ','));
}

TEST_CASE("invalid plans are rejected before execution") {
  const auto store = generate(random_spec(2));
  const auto q = parse_query(target_query(random_spec(2)));
  InferenceCache cache(store);
  CHECK_THROWS(execute(store, cache, Plan{{{{0, 5}, PlanAction::UseEP(1)}}}, q));
  CHECK(cache.calls() == 0);
}
