#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace epplan {

using FrameId = std::int32_t;

/// Rank of an exit point; 1 is the shallowest, K is the oracle.
using Depth = int;

struct BBox {
  double x = 0, y = 0, w = 0, h = 0;
  bool operator==(const BBox&) const = default;
};

struct Detection {
  std::string class_label;
  double confidence = 0;
  BBox bbox;
  bool operator==(const Detection&) const = default;
};

enum class ModelKind { exit_point, filter, specialized };

const char* to_string(ModelKind kind);
std::optional<ModelKind> parse_model_kind(std::string_view text);

struct ModelProfile {
  std::string model_id;
  ModelKind kind = ModelKind::exit_point;
  Depth depth_rank = 0;  // exit points only
  double cost_per_frame = 0;
  bool operator==(const ModelProfile&) const = default;
};

struct FrameRecord {
  FrameId frame_id = 0;
  /// Indexed by depth_rank - 1; one list per exit point.
  std::vector<std::vector<Detection>> detections;
  std::vector<double> feature;
  std::optional<double> filter_score;
  std::optional<bool> specialized_answer;
  bool operator==(const FrameRecord&) const = default;
};

/// Reported for malformed or inconsistent traces. `line` is 0 for manifest
/// level problems, otherwise the 1-based line in the frames file.
class TraceError : public std::runtime_error {
 public:
  TraceError(const std::string& what, std::int64_t frame = -1, std::int64_t line = 0);
  std::int64_t frame() const { return frame_; }
  std::int64_t line() const { return line_; }

 private:
  std::int64_t frame_;
  std::int64_t line_;
};

/// The simulated video plus its models. Immutable once validated.
struct TraceStore {
  std::string name;
  FrameId frame_count = 0;
  int feature_dim = 1;
  std::vector<ModelProfile> models;
  std::vector<FrameRecord> frames;

  bool operator==(const TraceStore&) const = default;

  /// Throws TraceError when any invariant is broken.
  void validate() const;

  int exit_point_count() const;
  Depth oracle_depth() const { return exit_point_count(); }
  const ModelProfile& exit_point(Depth depth) const;
  double ep_cost(Depth depth) const { return exit_point(depth).cost_per_frame; }
  double oracle_cost() const { return ep_cost(oracle_depth()); }

  /// Looks up a model of any kind. Throws std::out_of_range if unknown.
  const ModelProfile& model(std::string_view model_id) const;
  const ModelProfile* find_model(std::string_view model_id) const;
  const ModelProfile* find_kind(ModelKind kind) const;

  /// Exit-point depth of `model_id`; throws std::out_of_range for unknown ids
  /// or models without detections.
  Depth depth_of(std::string_view model_id) const;

  const FrameRecord& frame(FrameId id) const;
};

/// Reciprocals of the published early-exit speedups (6.90x .. 1.00x).
std::vector<double> default_ep_costs();
std::vector<ModelProfile> default_models(double filter_cost = 0.1,
                                         double specialized_cost = 0.06);
std::string ep_model_id(Depth depth);

const std::vector<Detection>& detections(const TraceStore& store, std::string_view model_id,
                                         FrameId frame);
const std::vector<Detection>& detections(const TraceStore& store, Depth depth, FrameId frame);

/// Writes to `<path>.tmp` and renames over `path`.
void write_atomically(const std::filesystem::path& path, const std::string& contents);

TraceStore load_trace(const std::filesystem::path& manifest_path);

/// Writes `<dir>/<stem>.json` and `<dir>/<stem>.frames.jsonl`; returns the
/// manifest path.
std::filesystem::path write_trace(const TraceStore& store, const std::filesystem::path& manifest_path);

}  // namespace epplan
