#include <doctest.h>

#include <chrono>
#include <future>
#include <httplib.h>
#include <json.hpp>
#include <thread>

#include "paddle/serve.hpp"
#include "support.hpp"

using namespace paddle;
using Json = nlohmann::json;

namespace {

httplib::MultipartFormDataItems upload_items(const std::vector<TrialFile>& files) {
  httplib::MultipartFormDataItems items;
  for (const auto& f : files) {
    const std::string slot(to_string(f.slot));
    items.push_back({slot, f.bytes, slot + ".csv", "text/csv"});
  }
  return items;
}

struct Running {
  explicit Running(ServiceConfig cfg, Transport t = http_transport())
      : service(testing::synth_bundle(), prepare(std::move(cfg)), builtin_reference_stroke(), std::move(t)),
        port(service.start()),
        client("127.0.0.1", port) {
    client.set_read_timeout(60, 0);
  }
  static ServiceConfig prepare(ServiceConfig c) {
    c.host = "127.0.0.1";
    c.port = 0;
    return c;
  }
  Service service;
  int port;
  httplib::Client client;
};

ServiceConfig offline_config() {
  ServiceConfig c;
  c.provider.offline = true;
  return c;
}

Json body_of(const httplib::Result& r) {
  REQUIRE(r);
  return Json::parse(r->body);
}

std::string upload(httplib::Client& cli, const std::vector<TrialFile>& files, int expect = 201) {
  const auto r = cli.Post("/api/v1/sessions", upload_items(files));
  REQUIRE(r);
  CHECK(r->status == expect);
  const auto j = Json::parse(r->body);
  CHECK(j["v"] == 1);
  return j.value("id", "");
}

// Percentages recomputed from the per-stroke labels.
void check_percentages(const Json& a) {
  const auto& strokes = a["strokes"];
  const std::size_t n = strokes.size();
  REQUIRE(n == a["accepted"].get<std::size_t>());
  REQUIRE(n > 0);
  std::size_t total = 0;
  for (const char* ph : {"catch", "pull", "recovery"}) {
    std::size_t opt = 0;
    for (const auto& s : strokes) opt += s[ph]["label"] == "optimal";
    total += opt;
    CHECK(a["phase_optimal_pct"][ph].get<double>() == 100.0 * static_cast<double>(opt) / static_cast<double>(n));
  }
  CHECK(a["overall_optimal_pct"].get<double>() == 100.0 * static_cast<double>(total) / static_cast<double>(3 * n));
}

}  // namespace

TEST_CASE("upload to ready analysis") {
  Running srv(offline_config());
  const auto id = upload(srv.client, testing::synth_files(2001));
  REQUIRE_FALSE(id.empty());

  const auto rec = body_of(srv.client.Get("/api/v1/sessions/" + id));
  CHECK(rec["status"] == "ready");
  CHECK(rec["id"] == id);
  CHECK(rec["error"].is_null());
  CHECK(rec["files"].size() == 5);

  const auto ar = srv.client.Get("/api/v1/sessions/" + id + "/analysis");
  REQUIRE(ar);
  CHECK(ar->status == 200);
  CHECK(ar->get_header_value("Access-Control-Allow-Origin") == "*");
  const auto a = Json::parse(ar->body);
  CHECK(a["v"] == 1);
  CHECK(a["accepted"] == 10);
  check_percentages(a);
  CHECK(a["overall_optimal_pct"].get<double>() >= 90.0);

  const auto g = body_of(srv.client.Get("/api/v1/sessions/" + id + "/graphs"));
  CHECK(g["strokes"].size() == a["display_strokes"].size());
  CHECK(g["strokes"].size() <= 8);
  CHECK(g["reference"]["channels"].size() == display_channels().size());

  const auto fb = body_of(srv.client.Post("/api/v1/sessions/" + id + "/feedback", "", "application/json"));
  CHECK(fb["source"] == "offline");
  CHECK(fb["warning"].is_null());
  CHECK(body_of(srv.client.Get("/api/v1/sessions/" + id + "/analysis"))["feedback"] == fb["feedback"]);
}

TEST_CASE("unknown session and route") {
  Running srv(offline_config());
  for (const char* path : {"/api/v1/sessions/deadbeef", "/api/v1/sessions/deadbeef/analysis",
                           "/api/v1/sessions/deadbeef/graphs"}) {
    const auto r = srv.client.Get(path);
    REQUIRE(r);
    CHECK(r->status == 404);
    const auto j = Json::parse(r->body);
    CHECK(j["v"] == 1);
    CHECK(j["error"]["code"] == "NotFound");
  }
  const auto r = srv.client.Get("/nope");
  REQUIRE(r);
  CHECK(r->status == 404);
  CHECK(Json::parse(r->body)["error"]["code"] == "NotFound");
}

TEST_CASE("malformed uploads are rejected") {
  Running srv(offline_config());
  auto files = testing::synth_files(2002, Label::Optimal, 3);
  auto items = upload_items(files);
  items.pop_back();
  const auto missing = srv.client.Post("/api/v1/sessions", items);
  REQUIRE(missing);
  CHECK(missing->status == 400);
  const auto j = Json::parse(missing->body);
  CHECK(j["error"]["stage"] == "upload");
  CHECK(j["error"]["message"].get<std::string>().find("watch_right") != std::string::npos);

  const auto raw = srv.client.Post("/api/v1/sessions", "hello", "text/plain");
  REQUIRE(raw);
  CHECK(raw->status == 400);

  auto bad_format = upload_items(files);
  bad_format.push_back({"phone_accel_format", "fax", "", ""});
  const auto bf = srv.client.Post("/api/v1/sessions", bad_format);
  REQUIRE(bf);
  CHECK(bf->status == 400);
}

TEST_CASE("oversized upload gets 413") {
  auto cfg = offline_config();
  cfg.max_upload_bytes = 4096;
  Running srv(cfg);
  const auto r = srv.client.Post("/api/v1/sessions", upload_items(testing::synth_files(2003, Label::Optimal, 3)));
  REQUIRE(r);
  CHECK(r->status == 413);
  CHECK(Json::parse(r->body)["error"]["code"] == "PayloadTooLarge");
}

TEST_CASE("pipeline failure yields a failed session") {
  Running srv(offline_config());
  SynthSpec spec;
  spec.n_strokes = 3;
  spec.stroke_period_s = 7.0;
  const auto id = upload(srv.client, generate_trial(spec).files);
  const auto rec = body_of(srv.client.Get("/api/v1/sessions/" + id));
  CHECK(rec["status"] == "failed");
  CHECK(rec["error"]["stage"] == "segment");
  CHECK(rec["error"]["code"] == "NoAcceptedStrokes");
  const auto a = srv.client.Get("/api/v1/sessions/" + id + "/analysis");
  REQUIRE(a);
  CHECK(a->status == 409);
  CHECK(Json::parse(a->body)["error"]["code"] == "NoAcceptedStrokes");

  auto files = testing::synth_files(2004, Label::Optimal, 3);
  files[0].bytes = "time_ns,accel_x\n";
  const auto id2 = upload(srv.client, files);
  const auto rec2 = body_of(srv.client.Get("/api/v1/sessions/" + id2));
  CHECK(rec2["status"] == "failed");
  CHECK(rec2["error"]["stage"] == "ingest");
}

TEST_CASE("parallel uploads stay independent") {
  Running srv(offline_config());
  const auto opt = testing::synth_files(2005);
  const auto sub = testing::synth_files(2006, Label::Suboptimal);
  auto post = [&](const std::vector<TrialFile>& f) {
    httplib::Client c("127.0.0.1", srv.port);
    c.set_read_timeout(60, 0);
    const auto r = c.Post("/api/v1/sessions", upload_items(f));
    return r ? Json::parse(r->body).value("id", "") : std::string();
  };
  auto fa = std::async(std::launch::async, post, std::cref(opt));
  auto fb = std::async(std::launch::async, post, std::cref(sub));
  const auto a = fa.get(), b = fb.get();
  REQUIRE_FALSE(a.empty());
  REQUIRE_FALSE(b.empty());
  CHECK(a != b);
  const auto ja = body_of(srv.client.Get("/api/v1/sessions/" + a + "/analysis"));
  const auto jb = body_of(srv.client.Get("/api/v1/sessions/" + b + "/analysis"));
  check_percentages(ja);
  check_percentages(jb);
  CHECK(ja["overall_optimal_pct"].get<double>() >= 90.0);
  CHECK(jb["overall_optimal_pct"].get<double>() <= 10.0);
  CHECK(ja == Json::parse(analyze_session(opt, testing::synth_bundle(), builtin_reference_stroke()).result.to_json()));
}

TEST_CASE("feedback through a provider endpoint") {
  httplib::Server provider;
  std::string auth;
  provider.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    auth = req.get_header_value("Authorization");
    const auto body = Json::parse(req.body);
    Json reply{{"choices", Json::array({{{"message", {{"content", "coach: " + body["model"].get<std::string>()}}}}})}};
    res.set_content(reply.dump(), "application/json");
  });
  provider.Post("/slow/chat/completions", [](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(1500));
    res.set_content("{}", "application/json");
  });
  const int pport = provider.bind_to_any_port("127.0.0.1");
  std::thread pt([&] { provider.listen_after_bind(); });
  provider.wait_until_ready();

  auto cfg = offline_config();
  cfg.provider.offline = false;
  cfg.provider.base_url = "http://127.0.0.1:" + std::to_string(pport) + "/v1";
  cfg.provider.api_key = "secret";
  cfg.provider.model = "m-test";
  {
    Running srv(cfg);
    const auto id = upload(srv.client, testing::synth_files(2007, Label::Optimal, 4));
    const auto fb = body_of(srv.client.Post("/api/v1/sessions/" + id + "/feedback", "", "application/json"));
    CHECK(fb["source"] == "provider");
    CHECK(fb["feedback"] == "coach: m-test");
    CHECK(auth == "Bearer secret");
  }

  cfg.provider.base_url = "http://127.0.0.1:" + std::to_string(pport) + "/slow";
  cfg.provider.timeout_s = 0.3;
  {
    Running srv(cfg);
    const auto id = upload(srv.client, testing::synth_files(2008, Label::Optimal, 4));
    const auto fb = body_of(srv.client.Post("/api/v1/sessions/" + id + "/feedback", "", "application/json"));
    CHECK(fb["source"] == "offline");
    CHECK(fb["warning"].is_string());
    const auto a = body_of(srv.client.Get("/api/v1/sessions/" + id + "/analysis"));
    CHECK(fb["feedback"].get<std::string>().find("optimal") != std::string::npos);
    CHECK(a["feedback"] == fb["feedback"]);
  }
  provider.stop();
  pt.join();
}

TEST_CASE("sessions persist across restarts") {
  testing::TempDir dir;
  auto cfg = offline_config();
  cfg.session_dir = dir.str();
  std::string id;
  Json first;
  {
    Running srv(cfg);
    id = upload(srv.client, testing::synth_files(2009, Label::Optimal, 5));
    first = body_of(srv.client.Get("/api/v1/sessions/" + id + "/analysis"));
  }
  Running again(cfg);
  const auto rec = body_of(again.client.Get("/api/v1/sessions/" + id));
  CHECK(rec["status"] == "ready");
  CHECK(body_of(again.client.Get("/api/v1/sessions/" + id + "/analysis")) == first);
  CHECK(body_of(again.client.Get("/api/v1/sessions/" + id + "/graphs"))["reference"].is_object());
}

TEST_CASE("CORS preflight") {
  Running srv(offline_config());
  const auto r = srv.client.Options("/api/v1/sessions");
  REQUIRE(r);
  CHECK(r->status == 204);
  CHECK(r->get_header_value("Access-Control-Allow-Origin") == "*");
  CHECK(r->get_header_value("Access-Control-Allow-Methods").find("POST") != std::string::npos);
}
