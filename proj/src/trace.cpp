#include "epplan/trace.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace epplan {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string located(const std::string& what, std::int64_t frame, std::int64_t line) {
  std::ostringstream out;
  if (line > 0) out << "line " << line << ": ";
  if (frame >= 0) out << "frame " << frame << ": ";
  out << what;
  return out.str();
}

void check_detection(const Detection& d, const std::string& model_id, FrameId frame,
                     std::int64_t line) {
  auto fail = [&](const std::string& why) {
    throw TraceError("model " + model_id + ": " + why, frame, line);
  };
  if (d.class_label.empty()) fail("empty class label");
  if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) fail("confidence outside [0,1]");
  const auto& b = d.bbox;
  constexpr double eps = 1e-9;
  if (!(b.w > 0.0 && b.h > 0.0)) fail("bbox has non-positive extent");
  if (!(b.x >= 0.0 && b.y >= 0.0)) fail("bbox origin negative");
  if (b.x + b.w > 1.0 + eps || b.y + b.h > 1.0 + eps) fail("bbox exceeds frame");
}

void check_models(const std::vector<ModelProfile>& models) {
  std::vector<const ModelProfile*> eps;
  for (std::size_t i = 0; i < models.size(); ++i) {
    const auto& m = models[i];
    if (m.model_id.empty()) throw TraceError("model with empty model_id");
    for (std::size_t j = 0; j < i; ++j)
      if (models[j].model_id == m.model_id) throw TraceError("duplicate model_id " + m.model_id);
    if (!(m.cost_per_frame >= 0.0)) throw TraceError("negative cost for model " + m.model_id);
    if (m.kind == ModelKind::exit_point) eps.push_back(&m);
  }
  const int k = static_cast<int>(eps.size());
  if (k < 2) throw TraceError("at least two exit points are required");
  std::sort(eps.begin(), eps.end(),
            [](const auto* a, const auto* b) { return a->depth_rank < b->depth_rank; });
  for (int i = 0; i < k; ++i) {
    if (eps[i]->depth_rank != i + 1)
      throw TraceError("exit point depth ranks must be exactly 1.." + std::to_string(k));
    if (i > 0 && !(eps[i]->cost_per_frame > eps[i - 1]->cost_per_frame))
      throw TraceError("cost not increasing in depth: " + eps[i]->model_id + " <= " +
                       eps[i - 1]->model_id);
  }
}

json detections_to_json(const std::vector<Detection>& list) {
  json out = json::array();
  for (const auto& d : list)
    out.push_back({d.class_label, d.confidence, d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h});
  return out;
}

std::vector<Detection> detections_from_json(const json& arr, const std::string& model_id,
                                            FrameId frame, std::int64_t line) {
  if (!arr.is_array()) throw TraceError("detections for " + model_id + " must be a list", frame, line);
  std::vector<Detection> out;
  out.reserve(arr.size());
  for (const auto& row : arr) {
    if (!row.is_array() || row.size() != 6 || !row[0].is_string())
      throw TraceError("malformed detection for " + model_id +
                           " (expected [class, confidence, x, y, w, h])",
                       frame, line);
    for (int i = 1; i < 6; ++i)
      if (!row[i].is_number())
        throw TraceError("non-numeric detection field for " + model_id, frame, line);
    Detection d{row[0].get<std::string>(), row[1].get<double>(),
                {row[2].get<double>(), row[3].get<double>(), row[4].get<double>(),
                 row[5].get<double>()}};
    check_detection(d, model_id, frame, line);
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace

void write_atomically(const fs::path& path, const std::string& contents) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

TraceError::TraceError(const std::string& what, std::int64_t frame, std::int64_t line)
    : std::runtime_error(located(what, frame, line)), frame_(frame), line_(line) {}

const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::exit_point: return "exit_point";
    case ModelKind::filter: return "filter";
    case ModelKind::specialized: return "specialized";
  }
  return "?";
}

std::optional<ModelKind> parse_model_kind(std::string_view text) {
  if (text == "exit_point") return ModelKind::exit_point;
  if (text == "filter") return ModelKind::filter;
  if (text == "specialized") return ModelKind::specialized;
  return std::nullopt;
}

std::vector<double> default_ep_costs() {
  return {1.0 / 6.90, 1.0 / 2.62, 1.0 / 2.46, 1.0 / 1.97, 1.0};
}

std::string ep_model_id(Depth depth) { return "EP-" + std::to_string(depth); }

std::vector<ModelProfile> default_models(double filter_cost, double specialized_cost) {
  std::vector<ModelProfile> models;
  const auto costs = default_ep_costs();
  for (std::size_t i = 0; i < costs.size(); ++i)
    models.push_back({ep_model_id(static_cast<Depth>(i + 1)), ModelKind::exit_point,
                      static_cast<Depth>(i + 1), costs[i]});
  models.push_back({"filter", ModelKind::filter, 0, filter_cost});
  models.push_back({"specialized", ModelKind::specialized, 0, specialized_cost});
  return models;
}

int TraceStore::exit_point_count() const {
  return static_cast<int>(std::count_if(models.begin(), models.end(), [](const auto& m) {
    return m.kind == ModelKind::exit_point;
  }));
}

const ModelProfile& TraceStore::exit_point(Depth depth) const {
  for (const auto& m : models)
    if (m.kind == ModelKind::exit_point && m.depth_rank == depth) return m;
  throw std::out_of_range("no exit point with depth " + std::to_string(depth));
}

const ModelProfile* TraceStore::find_model(std::string_view model_id) const {
  for (const auto& m : models)
    if (m.model_id == model_id) return &m;
  return nullptr;
}

const ModelProfile* TraceStore::find_kind(ModelKind kind) const {
  for (const auto& m : models)
    if (m.kind == kind) return &m;
  return nullptr;
}

const ModelProfile& TraceStore::model(std::string_view model_id) const {
  if (const auto* m = find_model(model_id)) return *m;
  throw std::out_of_range("unknown model " + std::string(model_id));
}

Depth TraceStore::depth_of(std::string_view model_id) const {
  const auto& m = model(model_id);
  if (m.kind != ModelKind::exit_point)
    throw std::out_of_range("model " + m.model_id + " has no detections");
  return m.depth_rank;
}

const FrameRecord& TraceStore::frame(FrameId id) const {
  if (id < 0 || id >= frame_count)
    throw std::out_of_range("frame " + std::to_string(id) + " out of range [0, " +
                            std::to_string(frame_count) + ")");
  return frames[static_cast<std::size_t>(id)];
}

void TraceStore::validate() const {
  if (frame_count < 1) throw TraceError("frame_count must be >= 1");
  if (feature_dim < 1) throw TraceError("feature_dim must be >= 1");
  check_models(models);
  if (frames.size() != static_cast<std::size_t>(frame_count))
    throw TraceError("expected " + std::to_string(frame_count) + " frames, found " +
                     std::to_string(frames.size()));
  const int k = exit_point_count();
  for (FrameId i = 0; i < frame_count; ++i) {
    const auto& f = frames[static_cast<std::size_t>(i)];
    if (f.frame_id != i) throw TraceError("frame ids must be dense and ascending", i);
    if (static_cast<int>(f.detections.size()) != k)
      throw TraceError("missing detections for " +
                           ep_model_id(static_cast<Depth>(f.detections.size()) + 1),
                       i);
    for (Depth d = 1; d <= k; ++d)
      for (const auto& det : f.detections[static_cast<std::size_t>(d - 1)])
        check_detection(det, exit_point(d).model_id, i, 0);
    if (static_cast<int>(f.feature.size()) != feature_dim)
      throw TraceError("feature_dim mismatch: expected " + std::to_string(feature_dim) +
                           ", got " + std::to_string(f.feature.size()),
                       i);
    if (f.filter_score && !(*f.filter_score >= 0.0 && *f.filter_score <= 1.0))
      throw TraceError("filter_score outside [0,1]", i);
  }
}

const std::vector<Detection>& detections(const TraceStore& store, Depth depth, FrameId frame) {
  const auto& rec = store.frame(frame);
  if (depth < 1 || depth > static_cast<Depth>(rec.detections.size()))
    throw std::out_of_range("unknown exit point depth " + std::to_string(depth));
  return rec.detections[static_cast<std::size_t>(depth - 1)];
}

const std::vector<Detection>& detections(const TraceStore& store, std::string_view model_id,
                                         FrameId frame) {
  return detections(store, store.depth_of(model_id), frame);
}

TraceStore load_trace(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw TraceError("cannot open manifest " + manifest_path.string());

  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::parse_error& e) {
    throw TraceError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }

  TraceStore store;
  std::string frames_file;
  try {
    store.name = manifest.at("name").get<std::string>();
    store.frame_count = manifest.at("frame_count").get<FrameId>();
    store.feature_dim = manifest.at("feature_dim").get<int>();
    frames_file = manifest.at("frames_file").get<std::string>();
    for (const auto& m : manifest.at("models")) {
      ModelProfile p;
      p.model_id = m.at("model_id").get<std::string>();
      const auto kind = parse_model_kind(m.at("kind").get<std::string>());
      if (!kind) throw TraceError("unknown model kind for " + p.model_id);
      p.kind = *kind;
      if (p.kind == ModelKind::exit_point) p.depth_rank = m.at("depth_rank").get<Depth>();
      p.cost_per_frame = m.at("cost_per_frame").get<double>();
      store.models.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    throw TraceError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  if (store.frame_count < 1) throw TraceError("frame_count must be >= 1");
  if (store.feature_dim < 1) throw TraceError("feature_dim must be >= 1");
  check_models(store.models);
  const int k = store.exit_point_count();

  const fs::path frames_path = manifest_path.parent_path() / frames_file;
  std::ifstream frames_in(frames_path);
  if (!frames_in) throw TraceError("cannot open frames file " + frames_path.string());

  store.frames.reserve(static_cast<std::size_t>(store.frame_count));
  std::string text;
  std::int64_t line = 0;
  while (std::getline(frames_in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    const FrameId expected = static_cast<FrameId>(store.frames.size());
    json rec;
    try {
      rec = json::parse(text);
    } catch (const json::parse_error& e) {
      throw TraceError(std::string("malformed record: ") + e.what(), expected, line);
    }
    if (!rec.is_object() || !rec.contains("frame_id") || !rec["frame_id"].is_number_integer())
      throw TraceError("malformed record: missing integer frame_id", expected, line);
    FrameRecord f;
    f.frame_id = rec["frame_id"].get<FrameId>();
    if (f.frame_id != expected) {
      throw TraceError(f.frame_id > expected ? "frame gap: expected frame " + std::to_string(expected)
                                             : "frame out of order or duplicated",
                       f.frame_id, line);
    }
    if (f.frame_id >= store.frame_count)
      throw TraceError("more frames than frame_count", f.frame_id, line);

    const auto dets = rec.find("detections");
    if (dets == rec.end() || !dets->is_object())
      throw TraceError("malformed record: missing detections object", f.frame_id, line);
    f.detections.resize(static_cast<std::size_t>(k));
    std::vector<bool> seen(static_cast<std::size_t>(k), false);
    for (const auto& [model_id, list] : dets->items()) {
      const auto* m = store.find_model(model_id);
      if (!m) throw TraceError("unknown model_id " + model_id, f.frame_id, line);
      if (m->kind != ModelKind::exit_point)
        throw TraceError("model " + model_id + " does not produce detections", f.frame_id, line);
      const auto idx = static_cast<std::size_t>(m->depth_rank - 1);
      f.detections[idx] = detections_from_json(list, model_id, f.frame_id, line);
      seen[idx] = true;
    }
    for (Depth d = 1; d <= k; ++d)
      if (!seen[static_cast<std::size_t>(d - 1)])
        throw TraceError("missing detections for model " + store.exit_point(d).model_id,
                         f.frame_id, line);

    const auto feat = rec.find("feature");
    if (feat == rec.end() || !feat->is_array())
      throw TraceError("malformed record: missing feature", f.frame_id, line);
    for (const auto& v : *feat) {
      if (!v.is_number()) throw TraceError("non-numeric feature value", f.frame_id, line);
      f.feature.push_back(v.get<double>());
    }
    if (static_cast<int>(f.feature.size()) != store.feature_dim)
      throw TraceError("feature_dim mismatch: expected " + std::to_string(store.feature_dim) +
                           ", got " + std::to_string(f.feature.size()),
                       f.frame_id, line);
    if (auto it = rec.find("filter_score"); it != rec.end() && !it->is_null()) {
      if (!it->is_number()) throw TraceError("non-numeric filter_score", f.frame_id, line);
      f.filter_score = it->get<double>();
      if (!(*f.filter_score >= 0.0 && *f.filter_score <= 1.0))
        throw TraceError("filter_score outside [0,1]", f.frame_id, line);
    }
    if (auto it = rec.find("specialized_answer"); it != rec.end() && !it->is_null()) {
      if (!it->is_boolean()) throw TraceError("specialized_answer must be boolean", f.frame_id, line);
      f.specialized_answer = it->get<bool>();
    }
    store.frames.push_back(std::move(f));
  }
  if (store.frames.size() != static_cast<std::size_t>(store.frame_count))
    throw TraceError("frame gap: expected " + std::to_string(store.frame_count) +
                         " frames, file ends after " + std::to_string(store.frames.size()),
                     static_cast<std::int64_t>(store.frames.size()), line);
  return store;
}

fs::path write_trace(const TraceStore& store, const fs::path& manifest_path) {
  store.validate();
  fs::path frames_name = manifest_path.stem();
  frames_name += ".frames.jsonl";

  json manifest{{"name", store.name},
                {"frame_count", store.frame_count},
                {"feature_dim", store.feature_dim},
                {"frames_file", frames_name.string()}};
  json models = json::array();
  for (const auto& m : store.models) {
    json j{{"model_id", m.model_id}, {"kind", to_string(m.kind)}, {"cost_per_frame", m.cost_per_frame}};
    if (m.kind == ModelKind::exit_point) j["depth_rank"] = m.depth_rank;
    models.push_back(std::move(j));
  }
  manifest["models"] = std::move(models);

  std::string frames_text;
  for (const auto& f : store.frames) {
    json rec{{"frame_id", f.frame_id}};
    json dets = json::object();
    for (std::size_t i = 0; i < f.detections.size(); ++i)
      dets[store.exit_point(static_cast<Depth>(i + 1)).model_id] = detections_to_json(f.detections[i]);
    rec["detections"] = std::move(dets);
    rec["feature"] = f.feature;
    if (f.filter_score) rec["filter_score"] = *f.filter_score;
    if (f.specialized_answer) rec["specialized_answer"] = *f.specialized_answer;
    frames_text += rec.dump();
    frames_text += '\n';
  }

  if (manifest_path.has_parent_path()) fs::create_directories(manifest_path.parent_path());
  write_atomically(manifest_path.parent_path() / frames_name, frames_text);
  write_atomically(manifest_path, manifest.dump(2) + "\n");
  return manifest_path;
}

}  // namespace epplan
