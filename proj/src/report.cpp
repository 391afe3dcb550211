#include "paddle/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace paddle::report {

namespace {

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Code points, not bytes ("±" is two bytes).
std::size_t display_width(std::string_view s) {
  std::size_t cps = 0;
  for (unsigned char c : s) cps += (c & 0xC0) != 0x80;
  return cps;
}

std::string pad(std::string s, std::size_t w) {
  const auto cps = display_width(s);
  if (cps < w) s.append(w - cps, ' ');
  return s;
}

std::string table(const std::vector<std::string>& header,
                  const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> w(header.size(), 0);
  for (std::size_t c = 0; c < header.size(); ++c) w[c] = display_width(header[c]);
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) w[c] = std::max(w[c], display_width(r[c]));
  auto line = [&](const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      out += c == 0 ? "" : "  ";
      out += c + 1 == cells.size() ? cells[c] : pad(cells[c], w[c]);
    }
    return out + '\n';
  };
  std::string out = line(header);
  std::size_t total = 0;
  for (auto x : w) total += x;
  out += std::string(total + 2 * (w.size() - 1), '-') + '\n';
  for (const auto& r : rows) out += line(r);
  return out;
}

std::vector<std::string> metric_cells(const MetricSet& m) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < kMetricNames.size(); ++i) out.push_back(mean_se(metric_at(m, i)));
  return out;
}

std::vector<std::string> metric_header(std::vector<std::string> lead) {
  for (auto n : {"Accuracy", "Sensitivity", "Specificity", "PPV", "NPV", "F-score"})
    lead.emplace_back(n);
  lead.emplace_back("n");
  return lead;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string mean_se(const std::optional<Metric>& m) {
  if (!m) return "n/a";
  return fixed(m->mean) + " ± " + fixed(m->se);
}

std::string model_table(const EvalReport& r) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& c : r.cells) {
    if (!is_supervised(c.kind)) continue;
    auto row = std::vector<std::string>{std::string(to_string(c.phase)),
                                        std::string(to_string(c.kind))};
    for (auto& s : metric_cells(c.metrics)) row.push_back(std::move(s));
    row.push_back(std::to_string(c.metrics.n_evaluated));
    rows.push_back(std::move(row));
  }
  return table(metric_header({"Phase", "Model"}), rows);
}

std::string anomaly_table(const EvalReport& r) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& c : r.cells) {
    if (is_supervised(c.kind)) continue;
    auto row = std::vector<std::string>{std::string(to_string(c.phase)),
                                        std::string(to_string(c.kind))};
    for (auto& s : metric_cells(c.metrics)) row.push_back(std::move(s));
    row.push_back(std::to_string(c.metrics.n_evaluated));
    rows.push_back(std::move(row));
  }
  return table(metric_header({"Phase", "Detector"}), rows);
}

std::string device_table(const EvalReport& r) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& d : r.devices) {
    for (const auto& c : d.cells) {
      auto row = std::vector<std::string>{std::string(to_string(c.phase)),
                                          std::string(to_string(d.site)),
                                          std::string(to_string(c.kind))};
      for (auto& s : metric_cells(c.metrics)) row.push_back(std::move(s));
      row.push_back(std::to_string(c.metrics.n_evaluated));
      rows.push_back(std::move(row));
    }
  }
  return table(metric_header({"Phase", "Device", "Model"}), rows);
}

std::string importance_table(const ImportanceResult& r, std::size_t top) {
  std::vector<std::vector<std::string>> groups, feats;
  for (const auto& g : r.groups)
    groups.push_back({std::string(to_string(g.group)), fixed(g.mean_drop, 5),
                      std::to_string(g.members)});
  for (std::size_t i = 0; i < std::min(top, r.features.size()); ++i)
    feats.push_back({std::to_string(i + 1), r.features[i].feature,
                     fixed(r.features[i].mean_drop, 5), fixed(r.features[i].std_drop, 5)});
  std::string out = "Permutation importance (" + std::string(to_string(r.kind)) + ", " +
                    std::string(to_string(r.phase)) + ", baseline accuracy " +
                    fixed(r.baseline_accuracy) + ", " + std::to_string(r.repeats) +
                    " repeats)\n\n";
  out += table({"Group", "Mean drop", "Features"}, groups);
  out += '\n';
  out += table({"Rank", "Feature", "Mean drop", "Std"}, feats);
  return out;
}

std::vector<Bar> accuracy_bars(const EvalReport& r) {
  std::vector<Bar> out;
  for (const auto& c : r.cells)
    if (c.metrics.accuracy)
      out.push_back({std::string(to_string(c.phase)) + "/" + std::string(to_string(c.kind)),
                     c.metrics.accuracy->mean, c.metrics.accuracy->se});
  return out;
}

std::vector<Bar> device_bars(const EvalReport& r) {
  std::vector<Bar> out;
  for (const auto& d : r.devices)
    for (const auto& c : d.cells)
      if (c.metrics.accuracy)
        out.push_back({std::string(to_string(c.phase)) + "/" + std::string(to_string(d.site)),
                       c.metrics.accuracy->mean, c.metrics.accuracy->se});
  return out;
}

std::vector<Bar> group_bars(const ImportanceResult& r) {
  std::vector<Bar> out;
  for (const auto& g : r.groups) out.push_back({std::string(to_string(g.group)), g.mean_drop, 0});
  return out;
}

std::string bar_chart_svg(std::string_view title, const std::vector<Bar>& bars) {
  const double bar_w = 28, gap = 10, left = 60, top = 40, plot_h = 240, bottom = 150;
  double lo = 0, hi = 1;
  for (const auto& b : bars) {
    lo = std::min(lo, b.value - b.error);
    hi = std::max(hi, b.value + b.error);
  }
  const double width = left + static_cast<double>(bars.size()) * (bar_w + gap) + 20;
  const double height = top + plot_h + bottom;
  auto y_of = [&](double v) { return top + plot_h * (hi - v) / (hi - lo); };

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fixed(width, 0) +
                  "\" height=\"" + fixed(height, 0) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s += "<text x=\"" + fixed(left, 0) + "\" y=\"20\" font-size=\"14\">" + xml_escape(title) +
       "</text>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    const auto y = fixed(y_of(v), 1);
    s += "<line x1=\"" + fixed(left, 0) + "\" x2=\"" + fixed(width - 10, 0) + "\" y1=\"" + y +
         "\" y2=\"" + y + "\" stroke=\"#ddd\"/>\n";
    s += "<text x=\"" + fixed(left - 6, 0) + "\" y=\"" + y +
         "\" text-anchor=\"end\" dominant-baseline=\"middle\">" + fixed(v, 2) + "</text>\n";
  }
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const auto& b = bars[i];
    const double x = left + gap / 2 + static_cast<double>(i) * (bar_w + gap);
    const double y0 = y_of(std::max(0.0, b.value)), y1 = y_of(std::min(0.0, b.value));
    s += "<rect x=\"" + fixed(x, 1) + "\" y=\"" + fixed(y0, 1) + "\" width=\"" + fixed(bar_w, 0) +
         "\" height=\"" + fixed(y1 - y0, 1) + "\" fill=\"#4a7ab5\"/>\n";
    if (b.error > 0) {
      const auto cx = fixed(x + bar_w / 2, 1);
      s += "<line x1=\"" + cx + "\" x2=\"" + cx + "\" y1=\"" + fixed(y_of(b.value + b.error), 1) +
           "\" y2=\"" + fixed(y_of(b.value - b.error), 1) + "\" stroke=\"#222\"/>\n";
    }
    const auto lx = fixed(x + bar_w / 2, 1), ly = fixed(top + plot_h + 8, 1);
    s += "<text x=\"" + lx + "\" y=\"" + ly + "\" transform=\"rotate(60 " + lx + " " + ly +
         ")\">" + xml_escape(b.label) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

std::string bar_chart_text(std::string_view title, const std::vector<Bar>& bars,
                           std::size_t width) {
  std::size_t label_w = 0;
  double hi = 0;
  for (const auto& b : bars) {
    label_w = std::max(label_w, b.label.size());
    hi = std::max(hi, std::abs(b.value));
  }
  std::string out = std::string(title) + '\n';
  for (const auto& b : bars) {
    const auto n = hi > 0 ? static_cast<std::size_t>(std::lround(std::abs(b.value) / hi *
                                                                 static_cast<double>(width)))
                          : 0;
    out += pad(b.label, label_w) + " | " + std::string(n, b.value < 0 ? '-' : '#') + ' ' +
           fixed(b.value) + (b.error > 0 ? " ± " + fixed(b.error) : "") + '\n';
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> render_all(const EvalReport& r) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string tables = "Models (pooled " + std::to_string(r.k) + "-fold, mean ± SE)\n\n" +
                       model_table(r);
  if (std::any_of(r.cells.begin(), r.cells.end(), [](const auto& c) { return !is_supervised(c.kind); }))
    tables += "\nAnomaly detectors\n\n" + anomaly_table(r);
  if (!r.devices.empty()) tables += "\nDevices\n\n" + device_table(r);
  if (r.importance) tables += '\n' + importance_table(*r.importance);
  tables += "\nSE = sqrt(m(1-m)/n) over the pooled out-of-fold predictions.\n";
  out.emplace_back("tables.txt", tables);

  const auto acc = accuracy_bars(r);
  out.emplace_back("accuracy.svg", bar_chart_svg("Accuracy by phase and model", acc));
  std::string text = bar_chart_text("Accuracy by phase and model", acc);
  if (!r.devices.empty()) {
    const auto dev = device_bars(r);
    out.emplace_back("devices.svg", bar_chart_svg("Accuracy by device", dev));
    text += '\n' + bar_chart_text("Accuracy by device", dev);
  }
  if (r.importance) {
    const auto grp = group_bars(*r.importance);
    out.emplace_back("importance.svg", bar_chart_svg("Permutation importance by group", grp));
    text += '\n' + bar_chart_text("Permutation importance by group", grp);
  }
  out.emplace_back("charts.txt", text);
  return out;
}

}  // namespace paddle::report
