#include <doctest.h>

#include "paddle/eval.hpp"
#include "paddle/report.hpp"

using namespace paddle;

namespace {

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

EvalReport fake_report() {
  EvalReport r;
  r.k = 5;
  for (auto ph : kPhases)
    for (auto kind : {ModelKind::KernelSVC, ModelKind::ExtraTrees, ModelKind::IsolationForest}) {
      EvalCell c;
      c.phase = ph;
      c.kind = kind;
      c.pooled = {12, 0, 1, 9};
      c.metrics = compute_metrics(c.pooled);
      r.cells.push_back(c);
    }
  return r;
}

}  // namespace

TEST_CASE("mean and standard error formatting") {
  CHECK(report::mean_se(Metric{0.954545, 0.04441}) == "0.9545 ± 0.0444");
  CHECK(report::mean_se(std::nullopt) == "n/a");
}

TEST_CASE("tables list every phase and kind") {
  const auto r = fake_report();
  const auto t = report::model_table(r);
  for (const char* s : {"catch", "pull", "recovery", "svc", "extra_trees", "0.9545 ± 0.0444", "0.9600 ± 0.0418"})
    CHECK_MESSAGE(t.find(s) != std::string::npos, s);
  const auto a = report::anomaly_table(r);
  CHECK(a.find("isolation_forest") != std::string::npos);
  CHECK(a.find("extra_trees") == std::string::npos);
}

TEST_CASE("charts draw one bar per entry") {
  const std::vector<report::Bar> bars{{"a", 0.5, 0.1}, {"b", 1.0, 0}, {"c", -0.2, 0}};
  const auto svg = report::bar_chart_svg("t", bars);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(count(svg, "<rect") >= bars.size());
  const auto text = report::bar_chart_text("t", bars, 10);
  CHECK(text.find("b | ########## 1.0000") != std::string::npos);
  CHECK(text.find("a | ##### 0.5000 ± 0.1000") != std::string::npos);
  CHECK(text.find("c | -- -0.2000") != std::string::npos);
}

TEST_CASE("render_all emits tables and charts") {
  const auto files = report::render_all(fake_report());
  std::vector<std::string> names;
  for (const auto& [n, body] : files) {
    names.push_back(n);
    CHECK_FALSE(body.empty());
  }
  CHECK(names == std::vector<std::string>{"tables.txt", "accuracy.svg", "charts.txt"});
  CHECK(report::accuracy_bars(fake_report()).size() == 9);
}
