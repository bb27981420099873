#include <doctest.h>

#include "epplan/planner.hpp"
#include "epplan/synthgen.hpp"
#include "support.hpp"

using namespace epplan;
using epplan::testing::cars;
using epplan::testing::interval_store;
using epplan::testing::make_store;

namespace {

const Query kCarQuery = parse_query("SELECT frameID FROM v WHERE Count(Car) >= 4;");

bool tiles(const Plan& p, FrameId n) {
  try {
    validate_plan(p, n, 5);
    return true;
  } catch (const std::invalid_argument&) {
    return false;
  }
}

}  // namespace

TEST_CASE("initial sampling rate") {
  auto check = [](FrameId n, int depth, double rate) {
    const auto b = initial_sampling_rate(n);
    CHECK(b.max_depth == depth);
    CHECK(b.rate == doctest::Approx(rate).epsilon(1e-15));
  };
  check(100, 0, 0.1);
  check(800, 3, 0.0125);
  check(1000, 4, 0.00625);
  check(1, 0, 0.1);
  check(101, 1, 0.05);
  CHECK_THROWS(initial_sampling_rate(0));
}

TEST_CASE("sample positions") {
  CHECK(sample_positions({0, 10}, 0.5) == std::vector<FrameId>{0, 2, 4, 6, 8});
  CHECK(sample_positions({0, 10}, 1.0).size() == 10);
  CHECK(sample_positions({7, 8}, 0.01) == std::vector<FrameId>{7});
  CHECK(sample_positions({5, 30}, 0.1) == std::vector<FrameId>{5, 15, 25});
}

TEST_CASE("best exit point from hand-computed confusion counts") {
  // oracle [T,T,F,F], EP-1 [T,F,F,F], EP-2 [T,T,F,F]
  const auto store = make_store(4, 3, [](Depth k, FrameId f) {
    const bool oracle = f < 2;
    const bool got = k == 1 ? f == 0 : oracle;
    return cars(got ? 4 : 0);
  });
  InferenceCache cache(store);
  const auto r = pick_best_ep(store, cache, kCarQuery, {0, 4}, 1.0, {});
  CHECK(r.metrics.per_depth[0].recall == 0.5);
  CHECK(r.metrics.per_depth[0].precision == 1.0);
  CHECK(r.metrics.per_depth[1].precision == 1.0);
  CHECK(r.metrics.per_depth[1].recall == 1.0);
  CHECK(r.best == 2);
  CHECK(r.metrics.posi_ratio == 0.5);
  CHECK(cache.calls() == 12);
}

TEST_CASE("perfect shallow exit point and all-negative samples") {
  const auto easy = interval_store(200, [](FrameId) { return true; }, [](Depth, FrameId) { return true; });
  InferenceCache c1(easy);
  CHECK(pick_best_ep(easy, c1, kCarQuery, {0, 200}, 0.1, {}).best == 1);

  const auto empty = interval_store(200, [](FrameId) { return false; }, [](Depth, FrameId) { return true; });
  InferenceCache c2(empty);
  const auto r = pick_best_ep(empty, c2, kCarQuery, {0, 200}, 0.1, {});
  CHECK(r.metrics.posi_ratio == 0.0);
  for (const auto& c : r.metrics.per_depth) {
    CHECK(c.precision == 1.0);
    CHECK(c.recall == 1.0);
  }
}

TEST_CASE("allowed depths restrict the choice") {
  EPMetrics m;
  m.per_depth.assign(5, make_counts(1, 0, 0));
  PlannerConfig c;
  CHECK(choose_depth(m, c, 5) == 1);
  c.allowed_depths = {3};
  CHECK(choose_depth(m, c, 5) == 3);
  m.per_depth[2] = make_counts(1, 3, 0);
  CHECK(choose_depth(m, c, 5) == 5);
}

TEST_CASE("whole-video plans for uniform traces") {
  const auto empty = interval_store(4000, [](FrameId) { return false; }, [](Depth, FrameId) { return true; });
  const auto r = plan(empty, kCarQuery, {});
  REQUIRE(r.plan.assignments.size() == 1);
  CHECK(r.plan.assignments[0] == Assignment{{0, 4000}, PlanAction::Skip()});
  // One sampled position per 10 / 0.1 * 2^6 frames, every depth evaluated.
  const auto samples = sample_positions({0, 4000}, initial_sampling_rate(4000).rate).size();
  CHECK(r.report.opt_cost <= samples * 2.4409 + 1e-9);

  const auto easy = interval_store(4000, [](FrameId) { return true; }, [](Depth, FrameId) { return true; });
  const auto e = plan(easy, kCarQuery, {});
  REQUIRE(e.plan.assignments.size() == 1);
  CHECK(e.plan.assignments[0].action == PlanAction::UseEP(1));
}

TEST_CASE("positive first half, noisy shallow exits on the empty half") {
  const auto store = make_store(400, 5, [](Depth k, FrameId f) {
    if (f < 200) return cars(4);
    return k < 5 ? cars(4) : cars(0);  // shallow false positives
  });
  const auto r = plan(store, kCarQuery, {});
  const std::vector<Assignment> expected{{{0, 200}, PlanAction::UseEP(1)}, {{200, 400}, PlanAction::Skip()}};
  CHECK(r.plan.assignments == expected);
  CHECK(r.report.recursion_depth_max == 1);
}

TEST_CASE("one-chunk video yields one assignment") {
  const auto store = generate(preset(Regime::frequent_hard, 100, 1));
  const auto r = plan(store, parse_query("SELECT frameID FROM v WHERE Count(Truck) >= 1;"), {});
  CHECK(r.plan.assignments.size() == 1);
}

TEST_CASE("odd chunk lengths give the first child the extra frame") {
  const auto store = make_store(401, 5, [](Depth k, FrameId f) {
    if (f < 200) return cars(4);
    return k < 5 ? cars(4) : cars(0);
  });
  const auto r = plan(store, kCarQuery, {});
  REQUIRE(r.plan.assignments.size() >= 2);
  CHECK(r.plan.assignments[0].chunk.end == 201);
}

TEST_CASE("random traces: tiling, bounded sampling, determinism") {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    const auto spec = random_spec(seed);
    const auto store = generate(spec);
    const auto q = parse_query(target_query(spec));
    const auto a = plan(store, q, {});
    const auto b = plan(store, q, {});
    CHECK(tiles(a.plan, store.frame_count));
    CHECK(a.plan == b.plan);
    CHECK(a.report.opt_cost == b.report.opt_cost);
    CHECK(a.report.max_rate_used <= 0.1);
    CHECK(a.report.recursion_depth_max <= a.report.max_depth_bound);
    CHECK(a.report.initial_rate * std::ldexp(1.0, a.report.max_depth_bound) <= 0.1);
  }
}

TEST_CASE("memoization: pre-warmed caches do not change radius-0 plans") {
  PlannerConfig exact;
  exact.reuse_radius = 0;
  for (std::uint64_t seed = 20; seed < 30; ++seed) {
    const auto spec = random_spec(seed);
    const auto store = generate(spec);
    const auto q = parse_query(target_query(spec));
    InferenceCache warm(store);
    std::mt19937_64 rng(seed);
    for (int i = 0; i < 500; ++i)
      infer(store, warm, 1 + static_cast<int>(rng() % 5), static_cast<FrameId>(rng() % store.frame_count),
            Phase::planning);
    const auto cold = plan(store, q, exact);
    const auto hot = plan(store, warm, q, exact);
    CHECK(cold.plan == hot.plan);
    CHECK(hot.report.opt_cost <= cold.report.opt_cost + 1e-9);
  }
}

TEST_CASE("shallow recall is monotone in depth without spurious detections") {
  for (std::uint64_t seed = 40; seed < 50; ++seed) {
    auto spec = random_spec(seed);
    for (auto& [k, r] : spec.ep_false_rate) r = 0.0;
    const auto store = generate(spec);
    const auto q = parse_query(target_query(spec));
    InferenceCache cache(store);
    const auto r = pick_best_ep(store, cache, q, {0, store.frame_count}, 0.05, {});
    for (Depth k = 2; k <= 5; ++k)
      CHECK(r.metrics.per_depth[static_cast<std::size_t>(k - 1)].recall >=
            r.metrics.per_depth[static_cast<std::size_t>(k - 2)].recall);
  }
}

TEST_CASE("plan serialization and validation") {
  Plan p{{{{0, 100}, PlanAction::Skip()}, {{100, 300}, PlanAction::UseEP(1)}, {{300, 500}, PlanAction::UseEP(3)}}};
  CHECK(plan_from_json(plan_to_json(p)) == p);
  CHECK(plan_to_json(p).find("\"ep:3\"") != std::string::npos);
  CHECK_NOTHROW(validate_plan(p, 500, 5));
  CHECK_THROWS(validate_plan(p, 600, 5));
  CHECK_THROWS(validate_plan(p, 500, 2));
  Plan gap{{{{0, 100}, PlanAction::Skip()}, {{150, 500}, PlanAction::UseEP(1)}}};
  CHECK_THROWS(validate_plan(gap, 500, 5));
  CHECK_THROWS(parse_action("ep:"));
  CHECK_THROWS(parse_action("stop"));
  CHECK_THROWS(plan_from_json("[{\"start\": 0}]"));
}

TEST_CASE("config validation") {
  PlannerConfig c;
  c.branching = 1;
  CHECK_THROWS(c.validate());
  c = {};
  c.max_final_rate = 0;
  CHECK_THROWS(c.validate());
  c = {};
  c.posi_sufficient = 1.5;
  CHECK_THROWS(c.validate());
}
