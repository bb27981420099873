#include "epplan/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

#include <Eigen/Dense>

namespace epplan {

namespace {

constexpr std::uint64_t kEmbeddingSalt = 0x9E3779B97F4A7C15ULL;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

/// `count` bursts totalling `total` frames, spread over [0, n) with random gaps.
std::vector<std::pair<FrameId, FrameId>> layout_bursts(std::mt19937_64& rng, FrameId n, FrameId total,
                                                       int count) {
  std::uniform_real_distribution<double> jitter(0.5, 1.5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  total = std::min(total, n);
  count = std::max(1, std::min<int>(count, total));

  std::vector<double> w(static_cast<std::size_t>(count));
  for (auto& x : w) x = jitter(rng);
  const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
  std::vector<FrameId> lengths;
  FrameId assigned = 0;
  for (int i = 0; i < count; ++i) {
    FrameId len = i + 1 == count ? total - assigned
                                 : std::max<FrameId>(1, static_cast<FrameId>(std::lround(total * w[static_cast<std::size_t>(i)] / wsum)));
    len = std::min(len, total - assigned - (count - 1 - i));
    lengths.push_back(len);
    assigned += len;
  }

  std::vector<double> g(static_cast<std::size_t>(count + 1));
  for (auto& x : g) x = unit(rng);
  const double gsum = std::accumulate(g.begin(), g.end(), 0.0) + 1e-12;
  const FrameId free = n - total;
  std::vector<FrameId> gaps;
  FrameId used = 0;
  for (int i = 0; i <= count; ++i) {
    FrameId gap = i == count ? free - used : static_cast<FrameId>(std::floor(free * g[static_cast<std::size_t>(i)] / gsum));
    gap = std::clamp<FrameId>(gap, 0, free - used);
    gaps.push_back(gap);
    used += gap;
  }

  std::vector<std::pair<FrameId, FrameId>> out;
  FrameId cursor = 0;
  for (int i = 0; i < count; ++i) {
    cursor += gaps[static_cast<std::size_t>(i)];
    out.emplace_back(cursor, cursor + lengths[static_cast<std::size_t>(i)]);
    cursor += lengths[static_cast<std::size_t>(i)];
  }
  return out;
}

struct Object {
  std::string class_label;
  double difficulty;
  BBox bbox;
  double confidence;
  double drop_draw;
};

BBox random_box(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> size(0.04, 0.2);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  BBox b;
  b.w = size(rng);
  b.h = size(rng);
  b.x = unit(rng) * (1.0 - b.w);
  b.y = unit(rng) * (1.0 - b.h);
  return b;
}

}  // namespace

const char* to_string(Regime regime) {
  switch (regime) {
    case Regime::frequent_easy: return "frequent_easy";
    case Regime::frequent_hard: return "frequent_hard";
    case Regime::rare_hard: return "rare_hard";
  }
  return "?";
}

std::optional<Regime> parse_regime(std::string_view text) {
  if (text == "frequent_easy") return Regime::frequent_easy;
  if (text == "frequent_hard") return Regime::frequent_hard;
  if (text == "rare_hard") return Regime::rare_hard;
  return std::nullopt;
}

std::map<Depth, double> default_miss_rates() {
  return {{1, 0.4270}, {2, 0.2695}, {3, 0.1622}, {4, 0.0656}, {5, 0.0}};
}

std::map<Depth, double> default_false_rates() {
  return {{1, 1.0 - 0.8799}, {2, 1.0 - 0.9165}, {3, 1.0 - 0.9552}, {4, 1.0 - 0.9817}, {5, 0.0}};
}

void ScenarioSpec::validate() const {
  if (frame_count < 1) throw std::invalid_argument("frame_count must be >= 1");
  if (feature_dim < 1) throw std::invalid_argument("feature_dim must be >= 1");
  if (feature_noise < 0.0) throw std::invalid_argument("feature_noise must be >= 0");
  if (ep_costs.size() < 2) throw std::invalid_argument("at least two exit points are required");
  for (std::size_t i = 1; i < ep_costs.size(); ++i)
    if (!(ep_costs[i] > ep_costs[i - 1])) throw std::invalid_argument("ep costs must increase with depth");
  for (const auto& s : segments) {
    if (s.start < 0 || s.end > frame_count || s.start >= s.end)
      throw std::invalid_argument("segment outside [0, frame_count)");
    if (s.class_label.empty() || s.count < 0) throw std::invalid_argument("invalid segment");
    if (!(s.difficulty >= 0.0 && s.difficulty <= 1.0))
      throw std::invalid_argument("segment difficulty outside [0, 1]");
  }
  for (const auto* rates : {&ep_miss_rate, &ep_false_rate}) {
    for (const auto& [k, r] : *rates) {
      if (k < 1 || k > depth_count()) throw std::invalid_argument("rate for unknown depth");
      if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("rate outside [0, 1]");
      if (k == depth_count() && r != 0.0) throw std::invalid_argument("oracle rates must be 0");
    }
  }
}

double effective_miss_rate(const ScenarioSpec& spec, Depth k, double difficulty) {
  if (k >= spec.depth_count()) return 0.0;
  const auto it = spec.ep_miss_rate.find(k);
  const double base = it == spec.ep_miss_rate.end() ? 0.0 : it->second;
  return clamp01(base * 2.0 * difficulty);
}

ScenarioSpec preset(Regime regime, FrameId frame_count, std::uint64_t seed) {
  ScenarioSpec spec;
  spec.frame_count = frame_count;
  spec.seed = seed;
  spec.ep_miss_rate = default_miss_rates();
  spec.ep_false_rate = default_false_rates();
  std::mt19937_64 rng(seed ^ 0x5EEDULL);
  const FrameId n = frame_count;

  switch (regime) {
    case Regime::frequent_easy: {
      spec.name = "UA-DeTrac";
      spec.segments.push_back({0, n, "Car", 1, 0.1});
      for (auto [s, e] : layout_bursts(rng, n, static_cast<FrameId>(0.75 * n), 12))
        spec.segments.push_back({s, e, "Car", 5, 0.1});
      spec.target = TargetEvent{"Car", 4};
      break;
    }
    case Regime::frequent_hard: {
      spec.name = "UA-DeTrac";
      spec.segments.push_back({0, n, "Car", 2, 0.2});
      int i = 0;
      for (auto [s, e] : layout_bursts(rng, n, static_cast<FrameId>(0.75 * n), 12))
        spec.segments.push_back({s, e, "Truck", 1 + (i++ % 2), 0.8});
      spec.target = TargetEvent{"Truck", 1};
      break;
    }
    case Regime::rare_hard: {
      spec.name = "UA-DeTrac";
      spec.segments.push_back({0, n, "Car", 3, 0.2});
      for (auto [s, e] : layout_bursts(rng, n, n / 10, 1)) spec.segments.push_back({s, e, "Bus", 4, 0.8});
      spec.target = TargetEvent{"Bus", 4};
      break;
    }
  }
  return spec;
}

std::vector<WorkloadPreset> workload_presets(FrameId frame_count, std::uint64_t seed) {
  std::vector<WorkloadPreset> out;
  out.push_back({"q1", Regime::frequent_easy, preset(Regime::frequent_easy, frame_count, seed),
                 "SELECT frameID FROM UA-DeTrac WHERE Count(Car) >= 4;"});
  out.push_back({"q2", Regime::frequent_hard, preset(Regime::frequent_hard, frame_count, seed),
                 "SELECT frameID FROM UA-DeTrac WHERE Count(Truck) >= 1;"});
  out.push_back({"q3", Regime::rare_hard, preset(Regime::rare_hard, frame_count, seed),
                 "SELECT frameID FROM UA-DeTrac WHERE Count(Bus) >= 4;"});

  ScenarioSpec q4 = preset(Regime::rare_hard, frame_count, seed);
  q4.name = "Jackson-Town";
  q4.segments.clear();
  std::mt19937_64 rng(seed ^ 0x4A54ULL);
  q4.segments.push_back({0, frame_count, "Car", 1, 0.3});
  for (auto [s, e] : layout_bursts(rng, frame_count, frame_count / 10, 1))
    q4.segments.push_back({s, e, "Car", 3, 0.8});
  q4.target = TargetEvent{"Car", 4};
  out.push_back({"q4", Regime::rare_hard, std::move(q4),
                 "SELECT frameID FROM Jackson-Town WHERE Count(Car) >= 4;"});
  return out;
}

std::optional<WorkloadPreset> find_workload(std::string_view key, FrameId frame_count, std::uint64_t seed) {
  for (auto& w : workload_presets(frame_count, seed))
    if (w.key == key) return w;
  return std::nullopt;
}

ScenarioSpec random_spec(std::uint64_t seed) {
  std::mt19937_64 rng(seed * 0x2545F4914F6CDD1DULL + 1);
  std::uniform_int_distribution<FrameId> length(400, 12000);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::vector<std::string> classes{"Bus", "Car", "Truck"};

  ScenarioSpec spec;
  spec.name = "random";
  spec.seed = seed;
  spec.frame_count = length(rng);
  spec.ep_miss_rate = default_miss_rates();
  spec.ep_false_rate = default_false_rates();
  const FrameId n = spec.frame_count;

  const std::string target = classes[static_cast<std::size_t>(rng() % classes.size())];
  const int threshold = 1 + static_cast<int>(rng() % 4);
  const int bursts = 1 + static_cast<int>(rng() % 8);
  const double coverage = 0.05 + 0.85 * unit(rng);
  const double difficulty = unit(rng);
  for (auto [s, e] : layout_bursts(rng, n, std::max<FrameId>(1, static_cast<FrameId>(coverage * n)), bursts)) {
    const int count = threshold + static_cast<int>(rng() % 3);
    const double d = std::clamp(difficulty + 0.3 * (unit(rng) - 0.5), 0.0, 1.0);
    spec.segments.push_back({s, e, target, count, d});
  }
  const int clutter = static_cast<int>(rng() % 3);
  for (int i = 0; i < clutter; ++i) {
    const std::string cls = classes[static_cast<std::size_t>(rng() % classes.size())];
    const FrameId a = static_cast<FrameId>(rng() % static_cast<std::uint64_t>(n));
    const FrameId b = static_cast<FrameId>(rng() % static_cast<std::uint64_t>(n));
    if (a == b) continue;
    spec.segments.push_back({std::min(a, b), std::max(a, b), cls, 1 + static_cast<int>(rng() % 2), unit(rng)});
  }
  spec.target = TargetEvent{target, threshold};
  return spec;
}

std::string target_query(const ScenarioSpec& spec) {
  if (!spec.target) throw std::invalid_argument("scenario has no target event");
  return "SELECT frameID FROM " + spec.name + " WHERE Count(" + spec.target->class_label +
         ") >= " + std::to_string(spec.target->min_count) + ";";
}

TraceStore generate(const ScenarioSpec& spec) {
  spec.validate();
  const int k_max = spec.depth_count();

  TraceStore store;
  store.name = spec.name;
  store.frame_count = spec.frame_count;
  store.feature_dim = spec.feature_dim;
  for (int k = 1; k <= k_max; ++k)
    store.models.push_back({ep_model_id(k), ModelKind::exit_point, k, spec.ep_costs[static_cast<std::size_t>(k - 1)]});
  if (spec.target) {
    store.models.push_back({"filter", ModelKind::filter, 0, spec.filter_cost});
    store.models.push_back({"specialized", ModelKind::specialized, 0, spec.specialized_cost});
  }

  std::set<std::string> class_set;
  for (const auto& s : spec.segments) class_set.insert(s.class_label);
  const std::vector<std::string> classes(class_set.begin(), class_set.end());
  const auto n_classes = static_cast<Eigen::Index>(classes.size());

  // Fixed linear embedding of (per-class counts, mean difficulty).
  std::mt19937_64 embed_rng(spec.seed ^ kEmbeddingSalt);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd embedding(spec.feature_dim, n_classes + 1);
  for (Eigen::Index r = 0; r < embedding.rows(); ++r)
    for (Eigen::Index c = 0; c < embedding.cols(); ++c) embedding(r, c) = normal(embed_rng);

  std::vector<double> false_rate(static_cast<std::size_t>(k_max), 0.0);
  for (const auto& [k, r] : spec.ep_false_rate)
    if (k < k_max) false_rate[static_cast<std::size_t>(k - 1)] = r;

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> oracle_conf(0.8, 0.99);
  std::uniform_real_distribution<double> spurious_conf(0.5, 0.75);

  store.frames.resize(static_cast<std::size_t>(spec.frame_count));
  std::vector<Object> objects;
  for (FrameId f = 0; f < spec.frame_count; ++f) {
    objects.clear();
    Eigen::VectorXd latent = Eigen::VectorXd::Zero(n_classes + 1);
    double difficulty_sum = 0.0;
    int target_count = 0;
    double target_difficulty = 0.0;
    for (const auto& s : spec.segments) {
      if (f < s.start || f >= s.end) continue;
      const auto cls = static_cast<Eigen::Index>(
          std::lower_bound(classes.begin(), classes.end(), s.class_label) - classes.begin());
      for (int i = 0; i < s.count; ++i) {
        BBox box = random_box(rng);
        const double conf = oracle_conf(rng);
        const double drop = unit(rng);
        objects.push_back({s.class_label, s.difficulty, box, conf, drop});
        latent(cls) += 1.0;
        difficulty_sum += s.difficulty;
      }
      if (spec.target && s.class_label == spec.target->class_label) {
        target_count += s.count;
        target_difficulty = std::max(target_difficulty, s.difficulty);
      }
    }
    const double mean_difficulty = objects.empty() ? 0.0 : difficulty_sum / static_cast<double>(objects.size());
    latent(n_classes) = mean_difficulty;

    // Spurious detection draws happen on every frame to keep the stream aligned.
    const double spurious_draw = unit(rng);
    const BBox spurious_box = random_box(rng);
    const double spurious_c = spurious_conf(rng);
    const std::size_t spurious_class = classes.empty() ? 0 : static_cast<std::size_t>(rng() % classes.size());

    auto& rec = store.frames[static_cast<std::size_t>(f)];
    rec.frame_id = f;
    rec.detections.resize(static_cast<std::size_t>(k_max));
    for (Depth k = 1; k <= k_max; ++k) {
      auto& dets = rec.detections[static_cast<std::size_t>(k - 1)];
      const double shallowness = static_cast<double>(k_max - k) / static_cast<double>(k_max - 1);
      for (const auto& o : objects) {
        if (o.drop_draw < effective_miss_rate(spec, k, o.difficulty)) continue;
        const double conf = std::clamp(o.confidence - 0.45 * o.difficulty * shallowness, 0.01, 1.0);
        dets.push_back({o.class_label, conf, o.bbox});
      }
      if (!classes.empty() && spurious_draw < false_rate[static_cast<std::size_t>(k - 1)])
        dets.push_back({classes[spurious_class], spurious_c, spurious_box});
    }

    Eigen::VectorXd feature = embedding * latent;
    for (Eigen::Index i = 0; i < feature.size(); ++i) feature(i) += spec.feature_noise * normal(rng);
    rec.feature.assign(feature.data(), feature.data() + feature.size());

    const double filter_noise = normal(rng);
    const double answer_draw = unit(rng);
    if (spec.target) {
      const bool positive = target_count >= spec.target->min_count;
      if (positive) {
        rec.filter_score = clamp01(0.75 + (0.1 + 0.15 * target_difficulty) * filter_noise);
        rec.specialized_answer = answer_draw < 1.0 - (0.25 + 0.6 * target_difficulty);
      } else {
        rec.filter_score = clamp01(0.25 + 0.1 * filter_noise);
        rec.specialized_answer = answer_draw < 0.01 + 0.05 * mean_difficulty;
      }
    }
  }
  store.validate();
  return store;
}

Census census(const TraceStore& store, const Query& query) {
  Census c;
  c.frames = store.frame_count;
  for (FrameId f = 0; f < store.frame_count; ++f)
    c.positives += eval_predicate(query, detections(store, store.oracle_depth(), f));
  c.positive_fraction = static_cast<double>(c.positives) / static_cast<double>(c.frames);
  return c;
}

}  // namespace epplan
