#pragma once

#include <array>
#include <set>
#include <unordered_map>
#include <vector>

#include "epplan/query.hpp"
#include "epplan/trace.hpp"

namespace epplan {

enum class Phase { planning = 0, execution = 1 };

const char* to_string(Phase phase);

/// Memoized exit-point results for one query run.
///
/// Entries point into the TraceStore, which must outlive the cache. Cost is
/// charged once per distinct (depth, frame) pair, to the phase that first
/// computed it.
class InferenceCache {
 public:
  InferenceCache() = default;
  explicit InferenceCache(const TraceStore& store);

  std::int64_t calls() const { return calls_; }
  double cost(Phase phase) const { return cost_[static_cast<int>(phase)]; }
  double total_cost() const { return cost_[0] + cost_[1]; }

  bool contains(Depth depth, FrameId frame) const;
  /// Nearest cached frame for `depth` within `radius` of `frame`; ties go to
  /// the lower frame id. Returns -1 when none.
  FrameId nearest(Depth depth, FrameId frame, int radius) const;

  /// Phase that first computed the entry; only valid when contains().
  Phase phase_of(Depth depth, FrameId frame) const;

  const std::vector<Detection>* lookup(Depth depth, FrameId frame) const;
  const std::vector<Detection>& insert(const TraceStore& store, Depth depth, FrameId frame, Phase phase);

  /// Union with another cache over the same store. Entries present in both
  /// keep this cache's phase; cost and call counts of new entries are added.
  void merge(const InferenceCache& other, const TraceStore& store);

 private:
  struct Entry {
    const std::vector<Detection>* dets;
    Phase phase;
  };
  std::vector<std::unordered_map<FrameId, Entry>> entries_;  // per depth - 1
  std::vector<std::set<FrameId>> frames_;                    // per depth - 1
  std::int64_t calls_ = 0;
  std::array<double, 2> cost_{0.0, 0.0};

  void ensure_depth(Depth depth);
};

const std::vector<Detection>& infer(const TraceStore& store, InferenceCache& cache, Depth depth,
                                    FrameId frame, Phase phase);
const std::vector<Detection>& infer(const TraceStore& store, InferenceCache& cache,
                                    std::string_view model_id, FrameId frame, Phase phase);

struct SnappedResult {
  const std::vector<Detection>& detections;
  FrameId used_frame;
};

SnappedResult infer_snapped(const TraceStore& store, InferenceCache& cache, Depth depth,
                            FrameId frame, int reuse_radius, Phase phase);

bool predicate_at(const TraceStore& store, InferenceCache& cache, const Query& query, Depth depth,
                  FrameId frame, Phase phase, int reuse_radius = 0);

}  // namespace epplan
