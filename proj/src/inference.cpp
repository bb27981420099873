#include "epplan/inference.hpp"

#include <cstdlib>
#include <stdexcept>

namespace epplan {

const char* to_string(Phase phase) {
  return phase == Phase::planning ? "planning" : "execution";
}

InferenceCache::InferenceCache(const TraceStore& store) {
  const auto k = static_cast<std::size_t>(store.exit_point_count());
  entries_.resize(k);
  frames_.resize(k);
}

void InferenceCache::ensure_depth(Depth depth) {
  if (depth < 1) throw std::out_of_range("invalid depth " + std::to_string(depth));
  const auto need = static_cast<std::size_t>(depth);
  if (entries_.size() < need) {
    entries_.resize(need);
    frames_.resize(need);
  }
}

bool InferenceCache::contains(Depth depth, FrameId frame) const { return lookup(depth, frame) != nullptr; }

const std::vector<Detection>* InferenceCache::lookup(Depth depth, FrameId frame) const {
  if (depth < 1 || static_cast<std::size_t>(depth) > entries_.size()) return nullptr;
  const auto& m = entries_[static_cast<std::size_t>(depth - 1)];
  auto it = m.find(frame);
  return it == m.end() ? nullptr : it->second.dets;
}

Phase InferenceCache::phase_of(Depth depth, FrameId frame) const {
  return entries_.at(static_cast<std::size_t>(depth - 1)).at(frame).phase;
}

FrameId InferenceCache::nearest(Depth depth, FrameId frame, int radius) const {
  if (depth < 1 || static_cast<std::size_t>(depth) > frames_.size() || radius < 0) return -1;
  const auto& s = frames_[static_cast<std::size_t>(depth - 1)];
  if (s.empty()) return -1;
  auto hi = s.lower_bound(frame);
  FrameId best = -1;
  if (hi != s.end() && *hi - frame <= radius) best = *hi;
  if (hi != s.begin()) {
    const FrameId lo = *std::prev(hi);
    if (frame - lo <= radius && (best < 0 || frame - lo <= best - frame)) best = lo;
  }
  return best;
}

const std::vector<Detection>& InferenceCache::insert(const TraceStore& store, Depth depth, FrameId frame,
                                                     Phase phase) {
  ensure_depth(depth);
  auto& m = entries_[static_cast<std::size_t>(depth - 1)];
  if (auto it = m.find(frame); it != m.end()) return *it->second.dets;
  const auto& dets = detections(store, depth, frame);
  m.emplace(frame, Entry{&dets, phase});
  frames_[static_cast<std::size_t>(depth - 1)].insert(frame);
  ++calls_;
  cost_[static_cast<int>(phase)] += store.ep_cost(depth);
  return dets;
}

void InferenceCache::merge(const InferenceCache& other, const TraceStore& store) {
  for (std::size_t i = 0; i < other.entries_.size(); ++i) {
    // Sorted order keeps the floating-point cost sum independent of hashing.
    for (FrameId f : other.frames_[i]) {
      const Depth depth = static_cast<Depth>(i + 1);
      if (!contains(depth, f)) insert(store, depth, f, other.entries_[i].at(f).phase);
    }
  }
}

const std::vector<Detection>& infer(const TraceStore& store, InferenceCache& cache, Depth depth,
                                    FrameId frame, Phase phase) {
  if (const auto* hit = cache.lookup(depth, frame)) return *hit;
  return cache.insert(store, depth, frame, phase);
}

const std::vector<Detection>& infer(const TraceStore& store, InferenceCache& cache,
                                    std::string_view model_id, FrameId frame, Phase phase) {
  return infer(store, cache, store.depth_of(model_id), frame, phase);
}

SnappedResult infer_snapped(const TraceStore& store, InferenceCache& cache, Depth depth,
                            FrameId frame, int reuse_radius, Phase phase) {
  if (reuse_radius < 0) throw std::invalid_argument("reuse_radius must be >= 0");
  store.frame(frame);  // range check before consulting neighbours
  if (depth < 1 || depth > store.exit_point_count())
    throw std::out_of_range("unknown exit point depth " + std::to_string(depth));
  const FrameId near = cache.nearest(depth, frame, reuse_radius);
  if (near >= 0) return {*cache.lookup(depth, near), near};
  return {infer(store, cache, depth, frame, phase), frame};
}

bool predicate_at(const TraceStore& store, InferenceCache& cache, const Query& query, Depth depth,
                  FrameId frame, Phase phase, int reuse_radius) {
  const auto r = infer_snapped(store, cache, depth, frame, reuse_radius, phase);
  return eval_predicate(query, r.detections);
}

}  // namespace epplan
