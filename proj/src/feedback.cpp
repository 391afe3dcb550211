#include <cmath>
#include <cstdio>
#include <httplib.h>
#include <iostream>
#include <json.hpp>

#include "paddle/error.hpp"
#include "paddle/serve.hpp"

namespace paddle {

using Json = nlohmann::ordered_json;

namespace {

// "80" for whole numbers, else one decimal.
std::string percent(double v) {
  char buf[32];
  if (std::abs(v - std::round(v)) < 1e-9) std::snprintf(buf, sizeof buf, "%.0f", v);
  else std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

std::string trace_line(const std::vector<double>& v) {
  std::string out;
  char buf[32];
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s%.3f", i ? " " : "", v[i]);
    out += buf;
  }
  return out;
}

}  // namespace

std::string offline_feedback(const AnalysisResult& r) {
  const auto& p = r.phase_optimal_pct;
  std::string out = "Across " + std::to_string(r.accepted()) + " analysed strokes, " +
                    percent(r.overall_optimal_pct) + "% of stroke phases were classified as optimal (catch " +
                    percent(p[0]) + "%, pull " + percent(p[1]) + "%, recovery " + percent(p[2]) + "%).";
  std::size_t weakest = 0;
  for (std::size_t i = 1; i < 3; ++i)
    if (p[i] < p[weakest]) weakest = i;
  if (p[weakest] < 100.0)
    out += " The " + std::string(to_string(kPhases[weakest])) +
           " phase has the most room for improvement; compare its traces with the reference stroke.";
  else
    out += " Every phase matched the optimal pattern.";
  return out;
}

std::string build_prompt(const AnalysisResult& r, const GraphPayload& g) {
  const auto ids = display_channels();
  std::string out = "[paddle-feedback prompt v" + std::to_string(kPromptVersion) + "]\n";
  out += "You are a paddling coach. A stroke classifier rated the user's strokes per phase.\n";
  out += "Optimal share: overall " + percent(r.overall_optimal_pct) + "%, catch " +
         percent(r.phase_optimal_pct[0]) + "%, pull " + percent(r.phase_optimal_pct[1]) +
         "%, recovery " + percent(r.phase_optimal_pct[2]) + "%.\n";
  out += "Each trace below has " + std::to_string(kTracePoints) +
         " evenly spaced samples over one stroke.\n\nReference optimal stroke:\n";
  for (std::size_t c = 0; c < ids.size(); ++c)
    out += channel_name(ids[c]) + ": " + trace_line(g.reference.channels[c]) + '\n';
  for (const auto& s : g.strokes) {
    out += "\nUser stroke " + std::to_string(s.stroke) + ":\n";
    for (std::size_t c = 0; c < ids.size(); ++c)
      out += channel_name(ids[c]) + ": " + trace_line(s.channels[c]) + '\n';
  }
  out += "\nGive three short, concrete suggestions to make the user's strokes closer to the reference.\n";
  return out;
}

std::string chat_request_body(const std::string& prompt, const std::string& model) {
  return Json{{"model", model},
              {"messages", Json::array({{{"role", "user"}, {"content", prompt}}})},
              {"stream", false}}
      .dump();
}

Transport http_transport() {
  return [](const std::string& url, const std::string& key, const std::string& body,
            double timeout_s) {
    // Split "scheme://host[:port]/path".
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
      throw Error(ErrorCode::InvalidArgument, "provider URL needs a scheme", "feedback");
    const auto path_start = url.find('/', scheme_end + 3);
    const auto origin = url.substr(0, path_start);
    const auto path = path_start == std::string::npos ? "/" : url.substr(path_start);
    httplib::Client cli(origin);
    const auto secs = static_cast<time_t>(timeout_s);
    const auto usecs = static_cast<time_t>((timeout_s - static_cast<double>(secs)) * 1e6);
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);
    auto res = cli.Post(path, headers, body, "application/json");
    if (!res)
      throw Error(ErrorCode::Io, "provider request failed: " + httplib::to_string(res.error()),
                  "feedback");
    if (res->status != 200)
      throw Error(ErrorCode::Io, "provider returned HTTP " + std::to_string(res->status),
                  "feedback");
    return res->body;
  };
}

FeedbackOutcome qualitative_feedback(const AnalysisResult& r, const GraphPayload& g,
                                     const ProviderConfig& cfg, const Transport& transport) {
  FeedbackOutcome out;
  if (cfg.offline || cfg.base_url.empty()) {
    out.text = offline_feedback(r);
    return out;
  }
  try {
    auto base = cfg.base_url;
    while (!base.empty() && base.back() == '/') base.pop_back();
    const auto body =
        transport(base + "/chat/completions", cfg.api_key,
                  chat_request_body(build_prompt(r, g), cfg.model), cfg.timeout_s);
    const auto j = Json::parse(body);
    out.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
    out.from_provider = true;
  } catch (const std::exception& e) {
    out.text = offline_feedback(r);
    out.warning = std::string("feedback provider unavailable, using offline text: ") + e.what();
    std::clog << "warning: " << *out.warning << '\n';
  }
  return out;
}

}  // namespace paddle
