#include "epplan/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace epplan {

using nlohmann::json;

namespace {

Eigen::VectorXd augmented(const Eigen::Ref<const Eigen::VectorXd>& x) {
  Eigen::VectorXd out(x.size() + 1);
  out << x, 1.0;
  return out;
}

Eigen::MatrixXd augmented_rows(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd out(x.rows(), x.cols() + 1);
  out << x, Eigen::VectorXd::Ones(x.rows());
  return out;
}

void softmax_rows(Eigen::MatrixXd& z) {
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    z.row(i).array() -= z.row(i).maxCoeff();
    z.row(i) = z.row(i).array().exp().matrix();
    z.row(i) /= z.row(i).sum();
  }
}

std::vector<double> flatten(const Eigen::MatrixXd& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  return out;
}

Eigen::MatrixXd unflatten(const json& j, Eigen::Index rows, Eigen::Index cols) {
  const auto v = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(v.size()) != rows * cols)
    throw std::invalid_argument("estimator weight count mismatch");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = v[static_cast<std::size_t>(r * cols + c)];
  return m;
}

}  // namespace

EPEstimator::EPEstimator(int feature_dim, int depth_count, int hidden_width)
    : feature_dim_(feature_dim), depth_count_(depth_count) {
  if (feature_dim < 1 || depth_count < 1 || hidden_width < 0)
    throw std::invalid_argument("invalid estimator shape");
  if (hidden_width > 0) {
    hidden_ = Eigen::MatrixXd::Zero(hidden_width, feature_dim + 1);
    weights_ = Eigen::MatrixXd::Zero(depth_count, hidden_width + 1);
  } else {
    weights_ = Eigen::MatrixXd::Zero(depth_count, feature_dim + 1);
  }
}

Eigen::VectorXd EPEstimator::scores(const Eigen::Ref<const Eigen::VectorXd>& feature) const {
  if (feature.size() != feature_dim_) throw std::invalid_argument("feature dimension mismatch");
  if (hidden_.size() == 0) return weights_ * augmented(feature);
  const Eigen::VectorXd h = (hidden_ * augmented(feature)).array().tanh().matrix();
  return weights_ * augmented(h);
}

Depth EPEstimator::predict(std::span<const double> feature) const {
  const Eigen::Map<const Eigen::VectorXd> x(feature.data(), static_cast<Eigen::Index>(feature.size()));
  const Eigen::VectorXd s = scores(x);
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < s.size(); ++i)
    if (s(i) > s(best)) best = i;
  return static_cast<Depth>(best + 1);
}

bool EPEstimator::operator==(const EPEstimator& other) const {
  return feature_dim_ == other.feature_dim_ && depth_count_ == other.depth_count_ &&
         epochs_trained_ == other.epochs_trained_ && weights_ == other.weights_ &&
         hidden_.rows() == other.hidden_.rows() && hidden_.cols() == other.hidden_.cols() &&
         hidden_ == other.hidden_;
}

std::string EPEstimator::to_json() const {
  json j{{"feature_dim", feature_dim_},
         {"depth_count", depth_count_},
         {"epochs_trained", epochs_trained_},
         {"weights", flatten(weights_)}};
  if (hidden_.size() > 0) {
    j["hidden_width"] = hidden_.rows();
    j["hidden"] = flatten(hidden_);
  }
  return j.dump();
}

EPEstimator EPEstimator::from_json(std::string_view text) {
  try {
    const auto j = json::parse(text);
    const int hidden = j.value("hidden_width", 0);
    EPEstimator est(j.at("feature_dim").get<int>(), j.at("depth_count").get<int>(), hidden);
    est.epochs_trained_ = j.at("epochs_trained").get<int>();
    est.weights_ = unflatten(j.at("weights"), est.weights_.rows(), est.weights_.cols());
    if (hidden > 0) est.hidden_ = unflatten(j.at("hidden"), est.hidden_.rows(), est.hidden_.cols());
    if (!est.weights_.allFinite() || !est.hidden_.allFinite())
      throw std::invalid_argument("estimator weights must be finite");
    return est;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed estimator: ") + e.what());
  }
}

std::vector<LabeledFrame> label_optimal_eps(const TraceStore& store, const Query& query,
                                            std::span<const FrameId> frames) {
  const int k_max = store.exit_point_count();
  std::vector<LabeledFrame> out;
  out.reserve(frames.size());
  for (FrameId f : frames) {
    const bool truth = eval_predicate(query, detections(store, k_max, f));
    Depth label = k_max;
    for (Depth k = 1; k < k_max; ++k) {
      if (eval_predicate(query, detections(store, k, f)) == truth) {
        label = k;
        break;
      }
    }
    out.push_back({f, store.frame(f).feature, label});
  }
  return out;
}

std::vector<LabeledFrame> balanced_training_set(const TraceStore& store, const Query& query,
                                                std::size_t size, std::uint64_t seed) {
  std::vector<FrameId> all(static_cast<std::size_t>(store.frame_count));
  for (FrameId i = 0; i < store.frame_count; ++i) all[static_cast<std::size_t>(i)] = i;
  auto labeled = label_optimal_eps(store, query, all);

  std::vector<std::vector<LabeledFrame>> by_label(static_cast<std::size_t>(store.exit_point_count()));
  for (auto& l : labeled) by_label[static_cast<std::size_t>(l.optimal_ep - 1)].push_back(std::move(l));
  std::mt19937_64 rng(seed);
  for (auto& group : by_label) std::shuffle(group.begin(), group.end(), rng);

  std::vector<LabeledFrame> out;
  std::vector<std::size_t> next(by_label.size(), 0);
  bool progress = true;
  while (out.size() < size && progress) {
    progress = false;
    for (std::size_t g = 0; g < by_label.size() && out.size() < size; ++g) {
      if (next[g] < by_label[g].size()) {
        out.push_back(by_label[g][next[g]++]);
        progress = true;
      }
    }
  }
  return out;
}

Batch make_batch(std::span<const LabeledFrame> data) {
  if (data.empty()) throw std::invalid_argument("empty training data");
  const auto d = static_cast<Eigen::Index>(data.front().feature.size());
  Batch b;
  b.features.resize(static_cast<Eigen::Index>(data.size()), d);
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (static_cast<Eigen::Index>(data[i].feature.size()) != d)
      throw std::invalid_argument("feature dimension mismatch in training data");
    for (Eigen::Index c = 0; c < d; ++c) b.features(static_cast<Eigen::Index>(i), c) = data[i].feature[static_cast<std::size_t>(c)];
    b.labels.push_back(data[i].optimal_ep - 1);
  }
  return b;
}

double cross_entropy(const EPEstimator& est, const Batch& batch, Gradients* grad) {
  const auto n = batch.features.rows();
  if (n == 0) throw std::invalid_argument("empty batch");
  if (batch.features.cols() != est.feature_dim()) throw std::invalid_argument("feature dimension mismatch");
  const int k = est.depth_count();
  for (int label : batch.labels)
    if (label < 0 || label >= k) throw std::invalid_argument("label outside 1..K");

  const Eigen::MatrixXd x = augmented_rows(batch.features);
  const bool has_hidden = est.hidden().size() > 0;
  Eigen::MatrixXd h;
  Eigen::MatrixXd h_aug;
  Eigen::MatrixXd p;
  if (has_hidden) {
    h = (x * est.hidden().transpose()).array().tanh().matrix();
    h_aug = augmented_rows(h);
    p = h_aug * est.weights().transpose();
  } else {
    p = x * est.weights().transpose();
  }
  softmax_rows(p);

  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    loss -= std::log(std::max(p(i, batch.labels[static_cast<std::size_t>(i)]), 1e-300));
  loss /= static_cast<double>(n);

  if (grad) {
    Eigen::MatrixXd dz = p;
    for (Eigen::Index i = 0; i < n; ++i) dz(i, batch.labels[static_cast<std::size_t>(i)]) -= 1.0;
    dz /= static_cast<double>(n);
    if (has_hidden) {
      grad->weights = dz.transpose() * h_aug;
      const Eigen::MatrixXd dh = dz * est.weights().leftCols(h.cols());
      const Eigen::MatrixXd da = (dh.array() * (1.0 - h.array().square())).matrix();
      grad->hidden = da.transpose() * x;
    } else {
      grad->weights = dz.transpose() * x;
      grad->hidden.resize(0, 0);
    }
  }
  return loss;
}

EPEstimator train(std::span<const LabeledFrame> data, int depth_count, const TrainOptions& options) {
  Batch batch = make_batch(data);
  const auto d = batch.features.cols();
  const Eigen::RowVectorXd mean = batch.features.colwise().mean();
  Eigen::RowVectorXd scale =
      ((batch.features.rowwise() - mean).array().square().colwise().mean()).sqrt().matrix();
  for (Eigen::Index c = 0; c < d; ++c)
    if (!(scale(c) > 1e-12)) scale(c) = 1.0;
  batch.features = ((batch.features.rowwise() - mean).array().rowwise() / scale.array()).matrix();

  EPEstimator est(static_cast<int>(d), depth_count, options.hidden_width);
  if (options.hidden_width > 0) {
    std::mt19937_64 rng(options.init_seed);
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(d + 1)));
    for (Eigen::Index r = 0; r < est.hidden().rows(); ++r)
      for (Eigen::Index c = 0; c < est.hidden().cols(); ++c) est.hidden()(r, c) = normal(rng);
  }

  Gradients g;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    cross_entropy(est, batch, &g);
    est.weights() -= options.learning_rate * g.weights;
    if (options.hidden_width > 0) est.hidden() -= options.learning_rate * g.hidden;
  }
  est.set_epochs_trained(options.epochs);

  // Fold (x - mean) / scale into the first layer so the estimator takes raw features.
  Eigen::MatrixXd& first = options.hidden_width > 0 ? est.hidden() : est.weights();
  const Eigen::MatrixXd w = first.leftCols(d);
  const Eigen::MatrixXd w_raw = (w.array().rowwise() / scale.array()).matrix();
  first.col(d) -= w_raw * mean.transpose();
  first.leftCols(d) = w_raw;
  return est;
}

double accuracy(const EPEstimator& est, std::span<const LabeledFrame> data) {
  if (data.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& l : data) hits += est.predict(l.feature) == l.optimal_ep;
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

EPCounts extrapolate_metrics(std::span<const EstimatedSample> samples, Depth k) {
  std::int64_t tp = 0, fp = 0, fn = 0;
  for (const auto& s : samples) {
    if (s.is_positive) {
      if (k >= s.predicted_opt) ++tp;
      else ++fn;
    } else if (k < s.predicted_opt) {
      ++fp;
    }
  }
  return make_counts(tp, fp, fn);
}

BestEP pick_best_ep_estimated(const TraceStore& store, InferenceCache& cache, const EPEstimator& est,
                              const Query& query, Chunk chunk, double rate,
                              const PlannerConfig& config, int reuse_radius, PlanningReport* report) {
  const int k_max = store.exit_point_count();
  if (est.depth_count() != k_max) throw std::invalid_argument("estimator depth count does not match trace");
  const auto positions = sample_positions(chunk, std::min(rate, 1.0));

  std::vector<EstimatedSample> samples;
  samples.reserve(positions.size());
  std::int64_t positives = 0;
  for (FrameId f : positions) {
    const bool truth = predicate_at(store, cache, query, k_max, f, Phase::planning, reuse_radius);
    positives += truth;
    samples.push_back({truth, est.predict(store.frame(f).feature)});
  }
  if (report) {
    report->estimator_calls += static_cast<std::int64_t>(positions.size());
    report->estimator_cost += config.estimator_cost * static_cast<double>(positions.size());
  }

  BestEP out;
  out.metrics.samples = static_cast<std::int64_t>(positions.size());
  out.metrics.posi_ratio =
      positions.empty() ? 0.0 : static_cast<double>(positives) / static_cast<double>(positions.size());
  for (Depth k = 1; k <= k_max; ++k) out.metrics.per_depth.push_back(extrapolate_metrics(samples, k));
  out.best = choose_depth(out.metrics, config, k_max);
  return out;
}

}  // namespace epplan
