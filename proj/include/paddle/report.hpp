#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "paddle/eval.hpp"

namespace paddle::report {

// "0.9545 ± 0.0444", or "n/a" for an absent metric.
std::string mean_se(const std::optional<Metric>& m);

// Rows: phase x model kind; columns: the six metrics.
std::string model_table(const EvalReport& r);
// Rows: phase x body site (one kind per site).
std::string device_table(const EvalReport& r);
// Anomaly kinds only.
std::string anomaly_table(const EvalReport& r);
std::string importance_table(const ImportanceResult& r, std::size_t top = 20);

struct Bar {
  std::string label;
  double value = 0;
  double error = 0;  // half-height of the error bar, 0 for none
};

// Static SVG bar chart; values are drawn on a [min(0, v), max(1, v)] axis.
std::string bar_chart_svg(std::string_view title, const std::vector<Bar>& bars);
// Plain-text fallback: one line per bar, '#' scaled to `width`.
std::string bar_chart_text(std::string_view title, const std::vector<Bar>& bars,
                           std::size_t width = 40);

// Accuracy (mean ± SE) per (phase, kind) / (phase, site).
std::vector<Bar> accuracy_bars(const EvalReport& r);
std::vector<Bar> device_bars(const EvalReport& r);
std::vector<Bar> group_bars(const ImportanceResult& r);

// Renders every table and chart: (file name, contents).
std::vector<std::pair<std::string, std::string>> render_all(const EvalReport& r);

}  // namespace paddle::report
