#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "epplan/planner.hpp"

namespace epplan {

struct LabeledFrame {
  FrameId frame_id = 0;
  std::vector<double> feature;
  Depth optimal_ep = 1;
};

/// Softmax scorer mapping a feature vector to the fastest exit point that
/// agrees with the oracle.
///
/// Linear form: scores = weights * [x; 1], weights is K x (d + 1).
/// With a hidden layer: scores = weights * [tanh(hidden * [x; 1]); 1], where
/// hidden is H x (d + 1) and weights is K x (H + 1).
class EPEstimator {
 public:
  EPEstimator() = default;
  EPEstimator(int feature_dim, int depth_count, int hidden_width = 0);

  int feature_dim() const { return feature_dim_; }
  int depth_count() const { return depth_count_; }
  int hidden_width() const { return static_cast<int>(hidden_.rows()); }
  int epochs_trained() const { return epochs_trained_; }

  Eigen::MatrixXd& weights() { return weights_; }
  const Eigen::MatrixXd& weights() const { return weights_; }
  Eigen::MatrixXd& hidden() { return hidden_; }
  const Eigen::MatrixXd& hidden() const { return hidden_; }
  void set_epochs_trained(int epochs) { epochs_trained_ = epochs; }

  Eigen::VectorXd scores(const Eigen::Ref<const Eigen::VectorXd>& feature) const;
  /// Argmax over class scores, ties to the smaller depth.
  Depth predict(std::span<const double> feature) const;

  std::string to_json() const;
  static EPEstimator from_json(std::string_view text);

  bool operator==(const EPEstimator& other) const;

 private:
  int feature_dim_ = 0;
  int depth_count_ = 0;
  int epochs_trained_ = 0;
  Eigen::MatrixXd weights_;
  Eigen::MatrixXd hidden_;
};

/// Per frame, the smallest depth whose predicate result equals the oracle's.
/// Direct trace lookups, no cost.
std::vector<LabeledFrame> label_optimal_eps(const TraceStore& store, const Query& query,
                                            std::span<const FrameId> frames);

/// Draws up to `size` frames with labels balanced across depths as far as the
/// trace allows. Deterministic in `seed`.
std::vector<LabeledFrame> balanced_training_set(const TraceStore& store, const Query& query,
                                                std::size_t size = 200, std::uint64_t seed = 0);

struct TrainOptions {
  int epochs = 20;
  double learning_rate = 1.0;
  int hidden_width = 0;
  std::uint64_t init_seed = 7;  // hidden layer only; the linear model starts at zero
};

/// Design matrix (n x d) and 0-based class indices.
struct Batch {
  Eigen::MatrixXd features;
  std::vector<int> labels;
};

Batch make_batch(std::span<const LabeledFrame> data);

struct Gradients {
  Eigen::MatrixXd weights;
  Eigen::MatrixXd hidden;
};

/// Mean multi-class cross-entropy of the estimator on `batch`; fills `grad`
/// with the analytic gradient when non-null.
double cross_entropy(const EPEstimator& est, const Batch& batch, Gradients* grad = nullptr);

/// Full-batch gradient descent on standardized features; the standardization
/// is folded back into the weights so the result scores raw features.
EPEstimator train(std::span<const LabeledFrame> data, int depth_count, const TrainOptions& options = {});

double accuracy(const EPEstimator& est, std::span<const LabeledFrame> data);

struct EstimatedSample {
  bool is_positive = false;
  Depth predicted_opt = 1;
};

/// TP_k = #{positives with k >= opt}, FN_k = #{positives with k < opt},
/// FP_k = #{negatives with k < opt}.
EPCounts extrapolate_metrics(std::span<const EstimatedSample> samples, Depth k);

/// Estimate-mode selection: only the oracle runs on the samples; every other
/// depth's precision/recall is extrapolated from predicted optimal exit points.
BestEP pick_best_ep_estimated(const TraceStore& store, InferenceCache& cache, const EPEstimator& est,
                              const Query& query, Chunk chunk, double rate,
                              const PlannerConfig& config, int reuse_radius = 0,
                              PlanningReport* report = nullptr);

}  // namespace epplan
