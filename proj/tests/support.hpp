#pragma once

// Small hand-built traces and test-only reference implementations.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "epplan/baselines.hpp"
#include "epplan/estimator.hpp"
#include "epplan/trace.hpp"

namespace epplan::testing {

inline std::vector<Detection> cars(int n, double conf = 0.9, const std::string& cls = "Car") {
  std::vector<Detection> out;
  for (int i = 0; i < n; ++i) out.push_back({cls, conf, {0.1, 0.1, 0.2, 0.2}});
  return out;
}

/// Trace with K exit points at the default costs (K <= 5 takes a suffix so the
/// oracle still costs 1). `dets(k, f)` supplies the detections.
inline TraceStore make_store(FrameId n, int k_max,
                             const std::function<std::vector<Detection>(Depth, FrameId)>& dets,
                             int feature_dim = 1) {
  TraceStore s;
  s.name = "v";
  s.frame_count = n;
  s.feature_dim = feature_dim;
  const auto costs = default_ep_costs();
  for (int k = 1; k <= k_max; ++k) {
    const double cost = k_max <= 5 ? costs[static_cast<std::size_t>(5 - k_max + k - 1)] : k;
    s.models.push_back({ep_model_id(k), ModelKind::exit_point, k, cost});
  }
  for (FrameId f = 0; f < n; ++f) {
    FrameRecord r;
    r.frame_id = f;
    for (int k = 1; k <= k_max; ++k) r.detections.push_back(dets(k, f));
    r.feature.assign(static_cast<std::size_t>(feature_dim), 0.0);
    s.frames.push_back(std::move(r));
  }
  s.validate();
  return s;
}

/// Counting predicate on the oracle for every frame of `positive` ranges;
/// shallower depths agree where `correct(k, f)` holds and answer empty otherwise.
inline TraceStore interval_store(FrameId n, const std::function<bool(FrameId)>& positive,
                                 const std::function<bool(Depth, FrameId)>& correct, int k_max = 5) {
  return make_store(n, k_max, [&](Depth k, FrameId f) {
    if (!positive(f)) return std::vector<Detection>{};
    if (k == k_max || correct(k, f)) return cars(4);
    return cars(1);
  });
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("epplan_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

// ---- reference implementations ---------------------------------------------

/// Indicator sums written out per set, one loop per quantity.
inline EPCounts brute_force_extrapolation(const std::vector<EstimatedSample>& samples, Depth k) {
  std::vector<Depth> positives, negatives;
  for (const auto& s : samples) (s.is_positive ? positives : negatives).push_back(s.predicted_opt);
  std::int64_t tp = 0, fp = 0, fn = 0;
  for (Depth opt : positives) tp += (k >= opt) ? 1 : 0;
  for (Depth opt : negatives) fp += (k < opt) ? 1 : 0;
  for (Depth opt : positives) fn += (k < opt) ? 1 : 0;
  EPCounts c{tp, fp, fn, 1.0, 1.0};
  if (tp + fp != 0) c.precision = double(tp) / double(tp + fp);
  if (tp + fn != 0) c.recall = double(tp) / double(tp + fn);
  return c;
}

/// Every multiset of size <= max_size over the sample kinds
/// {positive, negative} x {1..max_opt}, visited once.
inline void for_each_sample_multiset(int max_size, int max_opt,
                                     const std::function<void(const std::vector<EstimatedSample>&)>& visit) {
  std::vector<EstimatedSample> kinds;
  for (bool pos : {true, false})
    for (Depth o = 1; o <= max_opt; ++o) kinds.push_back({pos, o});
  std::vector<EstimatedSample> current;
  std::function<void(std::size_t)> rec = [&](std::size_t first) {
    visit(current);
    if (static_cast<int>(current.size()) == max_size) return;
    for (std::size_t i = first; i < kinds.size(); ++i) {
      current.push_back(kinds[i]);
      rec(i);
      current.pop_back();
    }
  };
  rec(0);
}

/// Central finite differences of the mean cross-entropy with respect to every
/// parameter; returns the largest deviation from the analytic gradient.
inline double max_gradient_error(const EPEstimator& est, const Batch& batch, double h = 1e-5) {
  Gradients analytic;
  cross_entropy(est, batch, &analytic);
  double worst = 0.0;
  auto probe = [&](auto select, const Eigen::MatrixXd& grad) {
    EPEstimator e = est;
    Eigen::MatrixXd& m = select(e);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const double keep = m(r, c);
        m(r, c) = keep + h;
        const double up = cross_entropy(e, batch);
        m(r, c) = keep - h;
        const double down = cross_entropy(e, batch);
        m(r, c) = keep;
        worst = std::max(worst, std::abs((up - down) / (2 * h) - grad(r, c)));
      }
    }
  };
  probe([](EPEstimator& e) -> Eigen::MatrixXd& { return e.weights(); }, analytic.weights);
  if (est.hidden_width() > 0) probe([](EPEstimator& e) -> Eigen::MatrixXd& { return e.hidden(); }, analytic.hidden);
  return worst;
}

/// Per-frame minimum execution cost of a correct answer: 0 for oracle-negative
/// frames, otherwise the cost of the shallowest agreeing exit point.
inline double per_frame_optimal_cost(const TraceStore& store, const Query& query) {
  const int k_max = store.exit_point_count();
  double total = 0.0;
  for (FrameId f = 0; f < store.frame_count; ++f) {
    const bool truth = eval_predicate(query, detections(store, k_max, f));
    if (!truth) continue;
    double best = store.ep_cost(k_max);
    for (Depth k = 1; k < k_max; ++k)
      if (eval_predicate(query, detections(store, k, f)) == truth) best = std::min(best, store.ep_cost(k));
    total += best;
  }
  return total;
}

/// Gaussian blobs in `dim` dimensions, one well-separated centre per class.
inline std::vector<LabeledFrame> gaussian_blobs(int classes, int per_class, int dim, double spread,
                                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, spread);
  std::vector<LabeledFrame> out;
  for (int i = 0; i < per_class; ++i) {
    for (int c = 0; c < classes; ++c) {
      LabeledFrame l;
      l.frame_id = static_cast<FrameId>(out.size());
      l.optimal_ep = c + 1;
      for (int j = 0; j < dim; ++j) l.feature.push_back((j == c % dim ? 3.0 * (1 + c / dim) : 0.0) + noise(rng));
      out.push_back(std::move(l));
    }
  }
  return out;
}

}  // namespace epplan::testing
