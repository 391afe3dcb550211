#include <httplib.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <map>
#include <mutex>
#include <random>
#include <shared_mutex>
#include <thread>

#include "paddle/digest.hpp"
#include "paddle/error.hpp"
#include "paddle/serve.hpp"
#include "paddle/text.hpp"

namespace paddle {

using Json = nlohmann::ordered_json;

namespace {

enum class SessionStatus { Processing, Ready, Failed };

std::string_view to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::Processing: return "processing";
    case SessionStatus::Ready: return "ready";
    case SessionStatus::Failed: return "failed";
  }
  return "?";
}

std::optional<SessionStatus> parse_status(std::string_view s) {
  for (auto v : {SessionStatus::Processing, SessionStatus::Ready, SessionStatus::Failed})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string new_session_id() {
  static std::mutex mu;
  static std::mt19937_64 gen{std::random_device{}()};
  std::lock_guard lock(mu);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(gen()),
                static_cast<unsigned long long>(gen()));
  return buf;
}

struct SessionError {
  std::string stage, code, message;
};

Json error_json(const SessionError& e) {
  return Json{{"stage", e.stage}, {"code", e.code}, {"message", e.message}};
}

struct Session {
  std::mutex mu;  // one writer per session
  std::string id;
  std::string created_at;
  SessionStatus status = SessionStatus::Processing;
  std::map<std::string, std::string> file_digests;
  std::optional<SessionError> error;
  AnalysisResult result;
  GraphPayload graphs;
  Json analysis_doc;
  Json graphs_doc;

  Json record_json() const {
    Json files = Json::object();
    for (const auto& [slot, d] : file_digests) files[slot] = d;
    Json j{{"v", 1}, {"id", id}, {"status", to_string(status)}, {"created_at", created_at},
           {"files", std::move(files)}};
    if (status == SessionStatus::Ready) {
      j["accepted"] = analysis_doc.at("accepted");
      j["rejected"] = analysis_doc.at("rejected");
    }
    j["error"] = error ? error_json(*error) : Json(nullptr);
    return j;
  }
};

StrokeTraces traces_from(const Json& j) {
  StrokeTraces t;
  t.stroke = j.at("stroke").get<std::size_t>();
  for (const auto& id : display_channels())
    t.channels.push_back(j.at("channels").at(channel_name(id)).get<std::vector<double>>());
  return t;
}

// Rebuilds what feedback needs from persisted documents.
void restore_results(Session& s) {
  auto& r = s.result;
  for (std::size_t p = 0; p < 3; ++p)
    r.phase_optimal_pct[p] =
        s.analysis_doc.at("phase_optimal_pct").at(std::string(to_string(kPhases[p]))).get<double>();
  r.overall_optimal_pct = s.analysis_doc.at("overall_optimal_pct").get<double>();
  for (const auto& st : s.analysis_doc.at("strokes")) {
    StrokePrediction sp;
    sp.stroke = st.at("stroke").get<std::size_t>();
    for (std::size_t p = 0; p < 3; ++p) {
      const auto& e = st.at(std::string(to_string(kPhases[p])));
      sp.phases[p].label = parse_label(e.at("label").get<std::string>()).value_or(Label::Unlabeled);
      sp.phases[p].score = e.at("score").get<double>();
    }
    r.strokes.push_back(sp);
  }
  r.display_strokes = s.analysis_doc.at("display_strokes").get<std::vector<std::size_t>>();
  if (s.analysis_doc.at("feedback").is_string())
    r.feedback = s.analysis_doc.at("feedback").get<std::string>();
  for (const auto& t : s.graphs_doc.at("strokes")) s.graphs.strokes.push_back(traces_from(t));
  s.graphs.reference = traces_from(s.graphs_doc.at("reference"));
}

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view stage, std::string_view code,
                const std::string& message) {
  send_json(res, status,
            Json{{"v", 1},
                 {"error", error_json({std::string(stage), std::string(code), message})}});
}

bool truthy(const char* v) {
  if (!v) return false;
  const std::string s = v;
  return s == "1" || s == "true" || s == "yes" || s == "on";
}

}  // namespace

ServiceConfig ServiceConfig::from_env() {
  ServiceConfig c;
  if (const char* listen = std::getenv("PADDLEQ_LISTEN")) {
    const std::string s = listen;
    const auto colon = s.rfind(':');
    if (colon == std::string::npos) {
      c.host = s;
    } else {
      if (colon > 0) c.host = s.substr(0, colon);
      const auto port = text::parse_int(s.substr(colon + 1));
      if (!port || *port < 0 || *port > 65535)
        throw Error(ErrorCode::InvalidArgument, "bad PADDLEQ_LISTEN port: " + s, "serve");
      c.port = static_cast<int>(*port);
    }
  }
  if (const char* url = std::getenv("PADDLEQ_PROVIDER_URL")) c.provider.base_url = url;
  if (const char* key = std::getenv("PADDLEQ_PROVIDER_KEY")) c.provider.api_key = key;
  if (const char* model = std::getenv("PADDLEQ_PROVIDER_MODEL")) c.provider.model = model;
  // A configured provider turns online mode on unless PADDLEQ_OFFLINE says otherwise.
  c.provider.offline = c.provider.base_url.empty();
  if (const char* off = std::getenv("PADDLEQ_OFFLINE")) c.provider.offline = truthy(off);
  if (const char* dir = std::getenv("PADDLEQ_SESSION_DIR"); dir && *dir) c.session_dir = dir;
  return c;
}

struct Service::Impl {
  ModelBundle bundle;
  ServiceConfig cfg;
  StrokeTraces reference;
  Transport transport;
  httplib::Server server;
  std::thread worker;
  int port = -1;

  std::shared_mutex store_mu;
  std::map<std::string, std::shared_ptr<Session>> sessions;

  std::shared_ptr<Session> find(const std::string& id) {
    std::shared_lock lock(store_mu);
    const auto it = sessions.find(id);
    return it == sessions.end() ? nullptr : it->second;
  }

  void persist(const Session& s) {
    if (!cfg.session_dir) return;
    Json doc{{"session", s.record_json()},
             {"analysis", s.analysis_doc},
             {"graphs", s.graphs_doc}};
    const auto path = *cfg.session_dir + "/" + s.id + ".json";
    try {
      text::write_file(path + ".tmp", doc.dump());
      std::filesystem::rename(path + ".tmp", path);
    } catch (const std::exception& e) {
      std::clog << "warning: cannot persist session " << s.id << ": " << e.what() << '\n';
    }
  }

  void load_persisted() {
    if (!cfg.session_dir) return;
    std::filesystem::create_directories(*cfg.session_dir);
    for (const auto& entry : std::filesystem::directory_iterator(*cfg.session_dir)) {
      if (entry.path().extension() != ".json") continue;
      try {
        const auto doc = Json::parse(text::read_file(entry.path().string()));
        auto s = std::make_shared<Session>();
        const auto& rec = doc.at("session");
        s->id = rec.at("id").get<std::string>();
        s->created_at = rec.at("created_at").get<std::string>();
        s->status = parse_status(rec.at("status").get<std::string>()).value_or(SessionStatus::Failed);
        for (const auto& [slot, d] : rec.at("files").items()) s->file_digests[slot] = d;
        if (rec.at("error").is_object())
          s->error = SessionError{rec["error"].at("stage"), rec["error"].at("code"),
                                  rec["error"].at("message")};
        // A session that was mid-flight when the process died never finished.
        if (s->status == SessionStatus::Processing) {
          s->status = SessionStatus::Failed;
          s->error = SessionError{"serve", "Interrupted", "service stopped during processing"};
        }
        if (s->status == SessionStatus::Ready) {
          s->analysis_doc = doc.at("analysis");
          s->graphs_doc = doc.at("graphs");
          restore_results(*s);
        }
        sessions[s->id] = std::move(s);
      } catch (const std::exception& e) {
        std::clog << "warning: skipping " << entry.path() << ": " << e.what() << '\n';
      }
    }
  }

  void create_session(const httplib::Request& req, httplib::Response& res) {
    if (!req.is_multipart_form_data())
      return send_error(res, 400, "upload", "InvalidArgument", "expected multipart/form-data");
    std::vector<TrialFile> files;
    for (auto slot : kTrialSlots) {
      const std::string name(to_string(slot));
      if (!req.has_file(name))
        return send_error(res, 400, "upload", "InvalidArgument", "missing field " + name);
      TrialFile f;
      f.slot = slot;
      const auto part = req.get_file_value(name);
      f.bytes = part.content;
      f.name = part.filename.empty() ? name : part.filename;
      if (req.has_file(name + "_format")) {
        const auto fmt = parse_source_format(text::trim(req.get_file_value(name + "_format").content));
        if (!fmt)
          return send_error(res, 400, "upload", "InvalidArgument", "unknown format for " + name);
        f.format = *fmt;
      }
      files.push_back(std::move(f));
    }

    auto s = std::make_shared<Session>();
    s->id = new_session_id();
    s->created_at = utc_now();
    for (const auto& f : files) s->file_digests[std::string(to_string(f.slot))] = sha256_hex(f.bytes);
    {
      std::unique_lock lock(store_mu);
      sessions[s->id] = s;
    }
    {
      std::lock_guard lock(s->mu);
      persist(*s);
    }

    // The pipeline runs without the session lock so status polls see "processing".
    std::optional<SessionAnalysis> out;
    std::optional<SessionError> err;
    try {
      out = analyze_session(files, bundle, reference, cfg.analyze);
    } catch (const Error& e) {
      err = SessionError{e.stage().empty() ? "serve" : e.stage(), std::string(paddle::to_string(e.code())),
                         e.context().empty() ? e.message() : e.context() + ": " + e.message()};
    } catch (const std::exception& e) {
      err = SessionError{"serve", "Internal", e.what()};
    }
    std::lock_guard lock(s->mu);
    if (out) {
      s->analysis_doc = Json::parse(out->result.to_json());
      s->graphs_doc = Json::parse(out->graphs.to_json());
      s->result = std::move(out->result);
      s->graphs = std::move(out->graphs);
      s->status = SessionStatus::Ready;
    } else {
      s->error = std::move(err);
      s->status = SessionStatus::Failed;
    }
    persist(*s);
    send_json(res, 201, Json{{"v", 1}, {"id", s->id}, {"status", to_string(s->status)}});
  }

  // Runs `fn` on a session under its lock; 404 when absent, 409 unless ready.
  template <class Fn>
  void with_ready(const httplib::Request& req, httplib::Response& res, Fn fn) {
    const auto s = find(req.matches[1]);
    if (!s) return send_error(res, 404, "serve", "NotFound", "unknown session");
    std::lock_guard lock(s->mu);
    if (s->status != SessionStatus::Ready) {
      if (s->error)
        return send_json(res, 409, Json{{"v", 1}, {"error", error_json(*s->error)}});
      return send_error(res, 409, "serve", "NotReady", "session is " + std::string(to_string(s->status)));
    }
    fn(*s);
  }

  void routes() {
    server.set_payload_max_length(cfg.max_upload_bytes);
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    server.Options(R"(/api/v1/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });
    server.Post("/api/v1/sessions",
                [this](const httplib::Request& req, httplib::Response& res) { create_session(req, res); });
    server.Get(R"(/api/v1/sessions/([0-9a-f]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const auto s = find(req.matches[1]);
      if (!s) return send_error(res, 404, "serve", "NotFound", "unknown session");
      std::lock_guard lock(s->mu);
      send_json(res, 200, s->record_json());
    });
    server.Get(R"(/api/v1/sessions/([0-9a-f]+)/analysis)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 with_ready(req, res, [&](Session& s) { send_json(res, 200, s.analysis_doc); });
               });
    server.Get(R"(/api/v1/sessions/([0-9a-f]+)/graphs)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 with_ready(req, res, [&](Session& s) { send_json(res, 200, s.graphs_doc); });
               });
    server.Post(R"(/api/v1/sessions/([0-9a-f]+)/feedback)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  with_ready(req, res, [&](Session& s) {
                    const auto fb = qualitative_feedback(s.result, s.graphs, cfg.provider, transport);
                    s.result.feedback = fb.text;
                    s.analysis_doc["feedback"] = fb.text;
                    persist(s);
                    send_json(res, 200,
                              Json{{"v", 1},
                                   {"id", s.id},
                                   {"feedback", fb.text},
                                   {"source", fb.from_provider ? "provider" : "offline"},
                                   {"warning", fb.warning ? Json(*fb.warning) : Json(nullptr)}});
                  });
                });
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      if (res.status == 413)
        send_error(res, 413, "upload", "PayloadTooLarge", "upload exceeds the size cap");
      else if (res.status == 404)
        send_error(res, 404, "serve", "NotFound", "no such route");
      else
        send_error(res, res.status, "serve", "HttpError", httplib::status_message(res.status));
    });
    server.set_exception_handler(
        [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
          std::string what = "unknown";
          try {
            std::rethrow_exception(ep);
          } catch (const std::exception& e) {
            what = e.what();
          } catch (...) {
          }
          send_error(res, 500, "serve", "Internal", what);
        });
  }
};

Service::Service(ModelBundle bundle, ServiceConfig cfg, StrokeTraces reference, Transport transport)
    : impl_(std::make_unique<Impl>()) {
  bundle.validate();
  impl_->bundle = std::move(bundle);
  impl_->cfg = std::move(cfg);
  impl_->reference = std::move(reference);
  impl_->transport = std::move(transport);
  impl_->load_persisted();
  impl_->routes();
}

Service::~Service() { stop(); }

int Service::bind() {
  auto& s = impl_->server;
  const auto& c = impl_->cfg;
  if (c.port == 0) {
    impl_->port = s.bind_to_any_port(c.host);
  } else {
    impl_->port = s.bind_to_port(c.host, c.port) ? c.port : -1;
  }
  if (impl_->port < 0)
    throw Error(ErrorCode::Io, "cannot bind " + c.host + ":" + std::to_string(c.port), "serve");
  return impl_->port;
}

void Service::run() {
  if (!impl_->server.listen_after_bind())
    throw Error(ErrorCode::Io, "server stopped unexpectedly", "serve");
}

int Service::start() {
  const int port = bind();
  impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void Service::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->worker.joinable()) impl_->worker.join();
}

}  // namespace paddle
