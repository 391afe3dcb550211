#include <algorithm>
#include <cmath>

#include "paddle/features.hpp"
#include "paddle/kernels.hpp"

namespace paddle::kernels {

void resample_linear(SeriesView s, const Grid& g, std::span<double> out) {
  const std::size_t n = s.t.size();
  std::size_t i = 0;
  for (std::size_t k = 0; k < g.frames; ++k) {
    const double target = g.offset(k);
    auto rel = [&](std::size_t j) { return static_cast<double>(s.t[j] - g.t0_ns); };
    while (i + 1 < n && rel(i + 1) <= target) ++i;
    const double ti = rel(i);
    if (ti == target || i + 1 >= n || target < ti) {
      out[k] = s.v[i];
      continue;
    }
    const double tj = rel(i + 1);
    const double f = (target - ti) / (tj - ti);
    const double a = s.v[i];
    const double b = s.v[i + 1];
    const double v = a + (b - a) * f;
    out[k] = std::clamp(v, std::min(a, b), std::max(a, b));
  }
}

void summarize_rows_into(const ChannelMatrix& m, std::span<Stats> out) {
  for (std::size_t r = 0; r < m.rows(); ++r) out[r] = summarize_series(m.row(r));
}

void ensemble_mean_into(std::span<const Tree> trees, const FeatureView& x, std::span<double> out) {
  const double nt = static_cast<double>(trees.size());
  for (std::size_t r = 0; r < x.rows; ++r) {
    double acc = 0;
    const auto row = x.row(r);
    for (const auto& t : trees) acc += t.predict(row);
    out[r] = trees.empty() ? 0.0 : acc / nt;
  }
}

void isolation_path_into(std::span<const Tree> trees, const FeatureView& x,
                         std::span<double> out) {
  const double nt = static_cast<double>(trees.size());
  for (std::size_t r = 0; r < x.rows; ++r) {
    double acc = 0;
    const auto row = x.row(r);
    for (const auto& t : trees) {
      const auto leaf = t.find_leaf(row);
      acc += static_cast<double>(leaf.depth) + average_path_length(t.nodes[leaf.index].samples);
    }
    out[r] = trees.empty() ? 0.0 : acc / nt;
  }
}

namespace serial {

void resample_rows(std::span<const SeriesView> series, const Grid& g, ChannelMatrix& out) {
  for (std::size_t r = 0; r < series.size(); ++r) resample_linear(series[r], g, out.row(r));
}

void summarize_batch(std::span<const ChannelMatrix> phases, std::span<std::vector<Stats>> out) {
  for (std::size_t p = 0; p < phases.size(); ++p) {
    out[p].resize(phases[p].rows());
    summarize_rows_into(phases[p], out[p]);
  }
}

void ensemble_mean(std::span<const Tree> trees, const FeatureView& x, std::span<double> out) {
  ensemble_mean_into(trees, x, out);
}

void isolation_path(std::span<const Tree> trees, const FeatureView& x, std::span<double> out) {
  isolation_path_into(trees, x, out);
}

}  // namespace serial

}  // namespace paddle::kernels
