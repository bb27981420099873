#include <doctest.h>
#include <numeric>

#include "epplan/estimator.hpp"
#include "epplan/synthgen.hpp"
#include "support.hpp"

using namespace epplan;
using namespace epplan::testing;

namespace {

Batch random_batch(int n, int d, int k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Batch b;
  b.features.resize(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) b.features(i, j) = normal(rng);
    b.labels.push_back(static_cast<int>(rng() % static_cast<std::uint64_t>(k)));
  }
  return b;
}

EPEstimator random_estimator(int d, int k, int hidden, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.5);
  EPEstimator est(d, k, hidden);
  for (Eigen::Index i = 0; i < est.weights().size(); ++i) est.weights().data()[i] = normal(rng);
  for (Eigen::Index i = 0; i < est.hidden().size(); ++i) est.hidden().data()[i] = normal(rng);
  return est;
}

}  // namespace

TEST_CASE("optimal exit point labels are the first agreeing depth") {
  // EP results [F,F,T,T,T] against a positive oracle.
  const auto store = make_store(3, 5, [](Depth k, FrameId f) {
    if (f == 0) return cars(4);               // everyone agrees
    if (f == 1) return cars(k == 5 ? 4 : 1);  // only the oracle
    return cars(k >= 3 ? 4 : 2);
  });
  const auto q = parse_query("SELECT frameID FROM v WHERE Count(Car) >= 4;");
  const std::vector<FrameId> frames{0, 1, 2};
  const auto labels = label_optimal_eps(store, q, frames);
  CHECK(labels[0].optimal_ep == 1);
  CHECK(labels[1].optimal_ep == 5);
  CHECK(labels[2].optimal_ep == 3);
}

TEST_CASE("balanced training set draws labels round-robin") {
  const auto w = *find_workload("q2", 3000, 4);
  const auto store = generate(w.spec);
  const auto q = parse_query(w.query);
  const auto data = balanced_training_set(store, q, 200, 1);
  CHECK(data.size() == 200);
  std::vector<FrameId> all(3000);
  std::iota(all.begin(), all.end(), 0);
  std::map<Depth, int> counts, available;
  for (const auto& l : data) ++counts[l.optimal_ep];
  for (const auto& l : label_optimal_eps(store, q, all)) ++available[l.optimal_ep];
  int most = 0;
  for (auto [k, c] : counts) most = std::max(most, c);
  CHECK(counts.size() >= 2);
  // Each label either reaches the largest share or is exhausted.
  for (auto [k, c] : available) CHECK((counts[k] >= most - 1 || counts[k] == c));
  CHECK(balanced_training_set(store, q, 200, 1).front().frame_id == data.front().frame_id);
}

TEST_CASE("analytic gradient matches central differences") {
  for (int hidden : {0, 4}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto batch = random_batch(5, 3, 4, seed);
      const auto est = random_estimator(3, 4, hidden, seed + 100);
      CHECK(max_gradient_error(est, batch) <= 1e-6);
    }
  }
}

TEST_CASE("separable classes are learned in 20 epochs") {
  std::vector<LabeledFrame> data;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> noise(0.0, 0.3);
  for (int i = 0; i < 40; ++i) {
    data.push_back({i, {2.0 + noise(rng), noise(rng)}, 1});
    data.push_back({i, {-2.0 + noise(rng), noise(rng)}, 2});
  }
  const auto est = train(data, 2);
  CHECK(est.epochs_trained() == 20);
  CHECK(accuracy(est, data) == 1.0);
}

TEST_CASE("single-class data predicts that class") {
  std::vector<LabeledFrame> data;
  for (int i = 0; i < 10; ++i) data.push_back({i, {double(i), -double(i)}, 3});
  const auto est = train(data, 5);
  CHECK(est.predict(std::vector<double>{100.0, 7.0}) == 3);
  CHECK(est.predict(std::vector<double>{-4.0, 0.0}) == 3);
}

TEST_CASE("training is deterministic") {
  const auto data = gaussian_blobs(5, 20, 8, 1.0, 9);
  CHECK(train(data, 5) == train(data, 5));
  TrainOptions h;
  h.hidden_width = 16;
  CHECK(train(data, 5, h) == train(data, 5, h));
}

TEST_CASE("prediction tie-break and hand-built weights") {
  EPEstimator zero(3, 5);
  CHECK(zero.predict(std::vector<double>{1, 2, 3}) == 1);

  EPEstimator favour(3, 5);
  favour.weights()(4, 0) = 1.0;  // class K on e1
  CHECK(favour.predict(std::vector<double>{1, 0, 0}) == 5);

  // Same bias added to every class leaves the argmax unchanged.
  EPEstimator shifted = favour;
  shifted.weights().col(3).array() += 2.5;
  for (auto x : {std::vector<double>{1, 0, 0}, std::vector<double>{-1, 2, 0}, std::vector<double>{0, 0, 0}})
    CHECK(shifted.predict(x) == favour.predict(x));
  CHECK_THROWS(favour.predict(std::vector<double>{1, 0}));
}

TEST_CASE("serialization round trip") {
  const auto data = gaussian_blobs(5, 10, 4, 1.0, 1);
  TrainOptions h;
  h.hidden_width = 3;
  for (const auto& est : {train(data, 5), train(data, 5, h)}) {
    const auto back = EPEstimator::from_json(est.to_json());
    CHECK(back == est);
  }
  CHECK_THROWS(EPEstimator::from_json("{\"feature_dim\": 2}"));
  CHECK_THROWS(EPEstimator::from_json(R"({"feature_dim":1,"depth_count":2,"epochs_trained":0,"weights":[1]})"));
}

TEST_CASE("training rejects inconsistent data") {
  std::vector<LabeledFrame> bad{{0, {1.0, 2.0}, 1}, {1, {1.0}, 2}};
  CHECK_THROWS(train(bad, 2));
  CHECK_THROWS(train(std::vector<LabeledFrame>{}, 2));
  std::vector<LabeledFrame> out_of_range{{0, {1.0}, 7}};
  CHECK_THROWS(train(out_of_range, 5));
}

TEST_CASE("extrapolation examples") {
  const std::vector<EstimatedSample> s{{true, 2}, {true, 4}, {false, 3}};
  auto c3 = extrapolate_metrics(s, 3);
  CHECK(c3.tp == 1);
  CHECK(c3.fn == 1);
  CHECK(c3.fp == 0);
  CHECK(c3.precision == 1.0);
  CHECK(c3.recall == 0.5);
  auto c1 = extrapolate_metrics(s, 1);
  CHECK(c1.precision == 0.0);
  CHECK(c1.recall == 0.0);
  auto c5 = extrapolate_metrics(s, 5);
  CHECK(c5.precision == 1.0);
  CHECK(c5.recall == 1.0);

  EPMetrics m;
  for (Depth k = 1; k <= 5; ++k) m.per_depth.push_back(extrapolate_metrics(s, k));
  CHECK(choose_depth(m, {}, 5) == 4);
}

TEST_CASE("extrapolation matches the indicator sums and is monotone") {
  int visited = 0;
  for_each_sample_multiset(6, 3, [&](const std::vector<EstimatedSample>& s) {
    ++visited;
    double prev_recall = -1;
    std::int64_t prev_tp = -1, prev_fn = 1 << 30;
    for (Depth k = 1; k <= 5; ++k) {
      const auto got = extrapolate_metrics(s, k);
      const auto want = brute_force_extrapolation(s, k);
      CHECK(got.tp == want.tp);
      CHECK(got.fp == want.fp);
      CHECK(got.fn == want.fn);
      CHECK(got.precision == want.precision);
      CHECK(got.recall == want.recall);
      CHECK(got.tp >= prev_tp);
      CHECK(got.fn <= prev_fn);
      CHECK(got.recall >= prev_recall);
      prev_tp = got.tp, prev_fn = got.fn, prev_recall = got.recall;
    }
    const auto top = extrapolate_metrics(s, 5);
    CHECK((top.precision == 1.0 && top.recall == 1.0));
  });
  CHECK(visited == 924);
}

TEST_CASE("estimate-mode selection runs only the oracle") {
  const auto w = *find_workload("q2", 2000, 8);
  const auto store = generate(w.spec);
  const auto q = parse_query(w.query);
  const auto est = train(balanced_training_set(store, q, 200, 1), 5);
  InferenceCache cache(store);
  PlanningReport report;
  PlannerConfig config;
  const auto r = pick_best_ep_estimated(store, cache, est, q, {0, 2000}, 0.05, config, 0, &report);
  CHECK(cache.calls() == r.metrics.samples);
  CHECK(cache.cost(Phase::planning) == doctest::Approx(r.metrics.samples * 1.0));
  CHECK(report.estimator_calls == r.metrics.samples);
  CHECK(report.estimator_cost == doctest::Approx(0.01 * r.metrics.samples));

  InferenceCache full(store);
  pick_best_ep(store, full, q, {0, 2000}, 0.05, config);
  CHECK(cache.cost(Phase::planning) + report.estimator_cost < full.cost(Phase::planning));
}

TEST_CASE("all samples predicted shallow and positive pick the first exit") {
  const auto store = interval_store(100, [](FrameId) { return true; }, [](Depth, FrameId) { return true; });
  const auto q = parse_query("SELECT frameID FROM v WHERE Count(Car) >= 4;");
  EPEstimator zero(1, 5);
  InferenceCache cache(store);
  const auto r = pick_best_ep_estimated(store, cache, zero, q, {0, 100}, 0.1, {});
  CHECK(r.best == 1);
  for (const auto& c : r.metrics.per_depth) CHECK((c.precision == 1.0 && c.recall == 1.0));
}
