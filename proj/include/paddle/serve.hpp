#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "paddle/features.hpp"
#include "paddle/ingest.hpp"
#include "paddle/models.hpp"
#include "paddle/segment.hpp"

namespace paddle {

// Three per-phase models sharing one feature registry. On disk: a directory
// with registry.txt (one feature name per line) and catch.model,
// pull.model, recovery.model.
struct ModelBundle {
  FeatureRegistry registry;
  std::array<TrainedModel, 3> models;

  // Errors: RegistryMismatch, InvalidArgument (phase slots out of order).
  void validate() const;
  static ModelBundle load_dir(const std::string& dir);
  void save_dir(const std::string& dir) const;
};

ModelBundle train_bundle(const std::array<FeatureDataset, 3>& data, ModelKind kind,
                         const HyperParams& hp);

inline constexpr std::size_t kDisplayStrokeCap = 8;
inline constexpr std::size_t kTracePoints = 32;

// Longest run of consecutive Accepted strokes (earliest on ties), first 8.
std::vector<std::size_t> select_display_strokes(std::span<const StrokeRecord> records);

// Linear resampling of x onto `points` evenly spaced positions.
std::vector<double> downsample(std::span<const double> x, std::size_t points);

// Channels drawn beside the reference stroke.
std::vector<ChannelId> display_channels();

struct StrokeTraces {
  std::size_t stroke = 0;
  std::vector<std::vector<double>> channels;  // parallel to display_channels()
  friend bool operator==(const StrokeTraces&, const StrokeTraces&) = default;
};

struct GraphPayload {
  std::vector<StrokeTraces> strokes;
  StrokeTraces reference;
  std::string to_json() const;
};

StrokeTraces stroke_traces(const AlignedSession& s, const StrokeRecord& r);

// Reference optimal stroke: a noise-free synthetic stroke. The committed
// fixture data/reference_stroke.json holds the same values.
StrokeTraces builtin_reference_stroke();
std::string reference_to_json(const StrokeTraces& t);
StrokeTraces reference_from_json(std::string_view json);

struct StrokePrediction {
  std::size_t stroke = 0;
  std::array<Prediction, 3> phases;
};

struct AnalysisResult {
  std::array<double, 3> phase_optimal_pct{};
  double overall_optimal_pct = 0;
  std::vector<StrokePrediction> strokes;  // accepted strokes only
  std::vector<StrokeRecord> records;      // every candidate stroke
  std::vector<std::size_t> display_strokes;
  std::optional<std::string> feedback;

  std::size_t accepted() const noexcept { return strokes.size(); }
  std::string to_json() const;
};

struct AnalyzeOptions {
  double rate_hz = kDefaultRateHz;
  SegmentationParams params;
};

struct SessionAnalysis {
  AnalysisResult result;
  GraphPayload graphs;
};

// ingest -> segment -> features -> per-phase prediction.
// Errors carry their pipeline stage; NoAcceptedStrokes when nothing survives.
SessionAnalysis analyze_session(std::span<const TrialFile> files, const ModelBundle& bundle,
                                const StrokeTraces& reference, const AnalyzeOptions& opts = {});

// ---- qualitative feedback ----

struct ProviderConfig {
  bool offline = true;
  std::string base_url;  // OpenAI-compatible API root, e.g. https://api.deepseek.com
  std::string api_key;
  std::string model = "deepseek-chat";
  double timeout_s = 30;
};

// POSTs `body` to `url` and returns the response body; throws on failure.
using Transport = std::function<std::string(const std::string& url, const std::string& api_key,
                                            const std::string& body, double timeout_s)>;
Transport http_transport();

struct FeedbackOutcome {
  std::string text;
  bool from_provider = false;
  std::optional<std::string> warning;
};

inline constexpr int kPromptVersion = 1;

std::string offline_feedback(const AnalysisResult& r);
std::string build_prompt(const AnalysisResult& r, const GraphPayload& g);
std::string chat_request_body(const std::string& prompt, const std::string& model);

// Never throws: provider failures fall back to the offline text and log a
// warning.
FeedbackOutcome qualitative_feedback(const AnalysisResult& r, const GraphPayload& g,
                                     const ProviderConfig& cfg,
                                     const Transport& transport = http_transport());

// ---- HTTP service ----

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t max_upload_bytes = 64u << 20;
  ProviderConfig provider;
  std::optional<std::string> session_dir;  // one JSON file per session
  AnalyzeOptions analyze;

  // PADDLEQ_LISTEN (host:port), PADDLEQ_PROVIDER_URL, PADDLEQ_PROVIDER_KEY,
  // PADDLEQ_OFFLINE (1/true), PADDLEQ_SESSION_DIR.
  static ServiceConfig from_env();
};

// Routes (every body carries "v": 1):
//   POST /api/v1/sessions                 multipart upload -> {id, status}
//   GET  /api/v1/sessions/{id}            status record
//   GET  /api/v1/sessions/{id}/analysis   AnalysisResult
//   GET  /api/v1/sessions/{id}/graphs     display traces + reference
//   POST /api/v1/sessions/{id}/feedback   qualitative text
class Service {
 public:
  Service(ModelBundle bundle, ServiceConfig cfg, StrokeTraces reference = builtin_reference_stroke(),
          Transport transport = http_transport());
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds host:port (port 0 picks a free one) and returns the bound port.
  int bind();
  // Serves until stop(); call after bind().
  void run();
  // bind() + run() on a background thread.
  int start();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace paddle
