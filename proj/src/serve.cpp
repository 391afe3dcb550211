#include "paddle/serve.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <json.hpp>

#include "paddle/error.hpp"
#include "paddle/synth.hpp"
#include "paddle/text.hpp"

namespace paddle {

using Json = nlohmann::ordered_json;

void ModelBundle::validate() const {
  for (std::size_t p = 0; p < 3; ++p) {
    const auto& m = models[p];
    if (m.phase != kPhases[p])
      throw Error(ErrorCode::InvalidArgument, "bundle models must be ordered catch, pull, recovery",
                  "serve");
    if (m.registry_digest != registry.digest() || m.num_features != registry.size())
      throw Error(ErrorCode::RegistryMismatch,
                  std::string(to_string(kPhases[p])) + " model was trained on another registry",
                  "serve");
  }
}

ModelBundle ModelBundle::load_dir(const std::string& dir) {
  ModelBundle b;
  std::vector<FeatureKey> keys;
  const auto registry_text = text::read_file(dir + "/registry.txt");
  for (auto line : text::lines(registry_text)) {
    line = text::trim(line);
    if (line.empty()) continue;
    auto k = parse_feature_name(line);
    if (!k)
      throw Error(ErrorCode::InvalidArgument, "unknown feature " + std::string(line), "serve",
                  dir + "/registry.txt");
    keys.push_back(*k);
  }
  b.registry = FeatureRegistry(std::move(keys));
  for (std::size_t p = 0; p < 3; ++p) {
    const auto path = dir + "/" + std::string(to_string(kPhases[p])) + ".model";
    try {
      b.models[p] = load_model(text::read_file(path));
    } catch (const Error& e) {
      throw e.with_stage("serve", path);
    }
  }
  b.validate();
  return b;
}

void ModelBundle::save_dir(const std::string& dir) const {
  validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + dir + ": " + ec.message(), "serve");
  std::string names;
  for (const auto& n : registry.names()) names += n + '\n';
  text::write_file(dir + "/registry.txt", names);
  for (std::size_t p = 0; p < 3; ++p)
    text::write_file(dir + "/" + std::string(to_string(kPhases[p])) + ".model",
                     save_model(models[p]));
}

ModelBundle train_bundle(const std::array<FeatureDataset, 3>& data, ModelKind kind,
                         const HyperParams& hp) {
  ModelBundle b;
  b.registry = data[0].registry;
  for (std::size_t p = 0; p < 3; ++p) {
    if (!(data[p].registry == b.registry))
      throw Error(ErrorCode::RegistryMismatch, "phase datasets use different registries", "train");
    if (data[p].phase != kPhases[p])
      throw Error(ErrorCode::InvalidArgument, "datasets must be ordered catch, pull, recovery",
                  "train");
    b.models[p] = train(kind, data[p], hp);
  }
  return b;
}

std::vector<std::size_t> select_display_strokes(std::span<const StrokeRecord> records) {
  std::size_t best_start = 0, best_len = 0;
  for (std::size_t i = 0; i < records.size();) {
    if (!records[i].accepted()) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < records.size() && records[j].accepted()) ++j;
    if (j - i > best_len) {
      best_start = i;
      best_len = j - i;
    }
    i = j;
  }
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < std::min(best_len, kDisplayStrokeCap); ++k)
    out.push_back(records[best_start + k].index);
  return out;
}

std::vector<double> downsample(std::span<const double> x, std::size_t points) {
  std::vector<double> out(points);
  if (x.empty() || points == 0) return {};
  if (x.size() == 1 || points == 1) {
    std::fill(out.begin(), out.end(), x[0]);
    return out;
  }
  const double span = static_cast<double>(x.size() - 1);
  for (std::size_t i = 0; i < points; ++i) {
    const double pos = span * static_cast<double>(i) / static_cast<double>(points - 1);
    const auto k = std::min(static_cast<std::size_t>(pos), x.size() - 2);
    const double f = pos - static_cast<double>(k);
    out[i] = x[k] + (x[k + 1] - x[k]) * f;
  }
  return out;
}

std::vector<ChannelId> display_channels() {
  return {kLeftQuatW,
          kLeftQuatX,
          {Device::LeftWatch, Sensor::Accelerometer, Axis::X},
          {Device::LeftWatch, Sensor::Accelerometer, Axis::Y},
          {Device::LeftWatch, Sensor::Accelerometer, Axis::Z},
          {Device::RightWatch, Sensor::Accelerometer, Axis::X},
          {Device::RightWatch, Sensor::Accelerometer, Axis::Y},
          {Device::RightWatch, Sensor::Accelerometer, Axis::Z}};
}

namespace {

StrokeTraces traces_of(const ChannelMatrix& m, std::size_t stroke, std::size_t start,
                       std::size_t end) {
  StrokeTraces t;
  t.stroke = stroke;
  for (const auto& id : display_channels()) {
    const auto row = m.find(id);
    if (!row) throw Error(ErrorCode::MissingChannel, channel_name(id), "serve");
    t.channels.push_back(downsample(m.row(*row).subspan(start, end - start), kTracePoints));
  }
  return t;
}

Json traces_json(const StrokeTraces& t) {
  Json ch = Json::object();
  const auto ids = display_channels();
  for (std::size_t i = 0; i < ids.size(); ++i) ch[channel_name(ids[i])] = t.channels[i];
  return Json{{"stroke", t.stroke}, {"channels", std::move(ch)}};
}

Json record_json(const StrokeRecord& r) {
  Json phases = nullptr;
  if (r.phases) {
    phases = Json::array();
    for (const auto& p : *r.phases)
      phases.push_back({{"phase", to_string(p.phase)}, {"start_frame", p.start_frame},
                        {"end_frame", p.end_frame}});
  }
  return Json{{"index", r.index},         {"start_frame", r.start_frame},
              {"end_frame", r.end_frame}, {"phases", std::move(phases)},
              {"status", to_string(r.status)}, {"reason", to_string(r.reason)}};
}

}  // namespace

StrokeTraces stroke_traces(const AlignedSession& s, const StrokeRecord& r) {
  return traces_of(s.data, r.index, r.start_frame, r.end_frame);
}

StrokeTraces builtin_reference_stroke() {
  SynthSpec spec;
  spec.n_strokes = 3;
  spec.noise_sigma = 0;
  spec.jitter = 0;
  GroundTruth gt;
  const auto m = synth_frames(spec, &gt);
  const auto& s = gt.strokes[1];
  return traces_of(m, 1, s.start, s.end);
}

std::string reference_to_json(const StrokeTraces& t) {
  Json j{{"v", 1}, {"points", kTracePoints}};
  j.update(traces_json(t));
  return j.dump(2) + "\n";
}

StrokeTraces reference_from_json(std::string_view text) {
  try {
    const auto j = Json::parse(text);
    StrokeTraces t;
    t.stroke = j.at("stroke").get<std::size_t>();
    for (const auto& id : display_channels()) {
      auto v = j.at("channels").at(channel_name(id)).get<std::vector<double>>();
      if (v.size() != kTracePoints)
        throw Error(ErrorCode::InvalidArgument, "reference trace length", "serve");
      t.channels.push_back(std::move(v));
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed reference: ") + e.what(),
                "serve");
  }
}

std::string GraphPayload::to_json() const {
  Json names = Json::array();
  for (const auto& id : display_channels()) names.push_back(channel_name(id));
  Json strokes_j = Json::array();
  for (const auto& s : strokes) strokes_j.push_back(traces_json(s));
  return Json{{"v", 1},
              {"points", kTracePoints},
              {"channels", std::move(names)},
              {"strokes", std::move(strokes_j)},
              {"reference", traces_json(reference)}}
      .dump();
}

std::string AnalysisResult::to_json() const {
  Json pct = Json::object();
  for (std::size_t p = 0; p < 3; ++p) pct[std::string(to_string(kPhases[p]))] = phase_optimal_pct[p];
  Json st = Json::array();
  for (const auto& s : strokes) {
    Json e{{"stroke", s.stroke}};
    for (std::size_t p = 0; p < 3; ++p)
      e[std::string(to_string(kPhases[p]))] = {{"label", to_string(s.phases[p].label)},
                                              {"score", s.phases[p].score}};
    st.push_back(std::move(e));
  }
  Json recs = Json::array();
  for (const auto& r : records) recs.push_back(record_json(r));
  return Json{{"v", 1},
              {"accepted", strokes.size()},
              {"rejected", records.size() - strokes.size()},
              {"phase_optimal_pct", std::move(pct)},
              {"overall_optimal_pct", overall_optimal_pct},
              {"strokes", std::move(st)},
              {"records", std::move(recs)},
              {"display_strokes", display_strokes},
              {"feedback", feedback ? Json(*feedback) : Json(nullptr)}}
      .dump();
}

SessionAnalysis analyze_session(std::span<const TrialFile> files, const ModelBundle& bundle,
                                const StrokeTraces& reference, const AnalyzeOptions& opts) {
  bundle.validate();
  LoadOptions lo;
  lo.rate_hz = opts.rate_hz;
  const auto loaded = load_trial(files, lo);
  const auto& session = loaded.session;
  auto records = segment_session(session, opts.params);
  const auto accepted = static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [](const auto& r) { return r.accepted(); }));
  if (accepted == 0)
    throw Error(ErrorCode::NoAcceptedStrokes,
                std::to_string(records.size()) + " candidate strokes, none accepted", "segment");
  const auto data = featurize_trial(session, records, bundle.registry, opts.params);

  SessionAnalysis out;
  auto& res = out.result;
  res.strokes.resize(accepted);
  std::size_t total = 0;
  for (std::size_t p = 0; p < 3; ++p) {
    const auto pred = predict(bundle.models[p], data[p]);
    std::size_t optimal = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      res.strokes[i].stroke = data[p].rows[i].stroke;
      res.strokes[i].phases[p] = pred[i];
      optimal += pred[i].label == Label::Optimal;
    }
    total += optimal;
    res.phase_optimal_pct[p] = 100.0 * static_cast<double>(optimal) / static_cast<double>(accepted);
  }
  res.overall_optimal_pct = 100.0 * static_cast<double>(total) / static_cast<double>(3 * accepted);
  res.display_strokes = select_display_strokes(records);
  for (auto idx : res.display_strokes) out.graphs.strokes.push_back(stroke_traces(session, records[idx]));
  out.graphs.reference = reference;
  res.records = std::move(records);
  return out;
}

}  // namespace paddle
