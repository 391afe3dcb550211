#include <omp.h>

#include <atomic>
#include <cstdint>

#include "paddle/features.hpp"
#include "paddle/kernels.hpp"

namespace paddle::kernels {

namespace {
std::atomic<int> g_max_threads{0};

int threads() {
  const int cap = g_max_threads.load(std::memory_order_relaxed);
  return cap > 0 ? cap : omp_get_max_threads();
}

// Row blocks for the per-sample loops; a tree walk per sample is too small a
// unit to schedule individually.
constexpr std::int64_t kRowBlock = 16;
}  // namespace

void set_max_threads(int n) { g_max_threads.store(n, std::memory_order_relaxed); }

namespace omp {

void resample_rows(std::span<const SeriesView> series, const Grid& g, ChannelMatrix& out) {
  const auto n = static_cast<std::int64_t>(series.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads())
  for (std::int64_t r = 0; r < n; ++r) {
    const auto i = static_cast<std::size_t>(r);
    resample_linear(series[i], g, out.row(i));
  }
}

void summarize_batch(std::span<const ChannelMatrix> phases, std::span<std::vector<Stats>> out) {
  for (std::size_t p = 0; p < phases.size(); ++p) out[p].resize(phases[p].rows());
  // Flatten (phase, row) so short batches still spread over threads.
  std::vector<std::pair<std::size_t, std::size_t>> work;
  for (std::size_t p = 0; p < phases.size(); ++p)
    for (std::size_t r = 0; r < phases[p].rows(); ++r) work.emplace_back(p, r);
  const auto n = static_cast<std::int64_t>(work.size());
#pragma omp parallel for schedule(static) num_threads(threads())
  for (std::int64_t w = 0; w < n; ++w) {
    const auto [p, r] = work[static_cast<std::size_t>(w)];
    out[p][r] = summarize_series(phases[p].row(r));
  }
}

void ensemble_mean(std::span<const Tree> trees, const FeatureView& x, std::span<double> out) {
  const auto blocks = (static_cast<std::int64_t>(x.rows) + kRowBlock - 1) / kRowBlock;
#pragma omp parallel for schedule(static) num_threads(threads())
  for (std::int64_t b = 0; b < blocks; ++b) {
    const auto begin = static_cast<std::size_t>(b * kRowBlock);
    const auto end = std::min(x.rows, begin + static_cast<std::size_t>(kRowBlock));
    FeatureView part{x.data + begin * x.cols, end - begin, x.cols};
    ensemble_mean_into(trees, part, out.subspan(begin, end - begin));
  }
}

void isolation_path(std::span<const Tree> trees, const FeatureView& x, std::span<double> out) {
  const auto blocks = (static_cast<std::int64_t>(x.rows) + kRowBlock - 1) / kRowBlock;
#pragma omp parallel for schedule(static) num_threads(threads())
  for (std::int64_t b = 0; b < blocks; ++b) {
    const auto begin = static_cast<std::size_t>(b * kRowBlock);
    const auto end = std::min(x.rows, begin + static_cast<std::size_t>(kRowBlock));
    FeatureView part{x.data + begin * x.cols, end - begin, x.cols};
    isolation_path_into(trees, part, out.subspan(begin, end - begin));
  }
}

}  // namespace omp

void resample_rows(std::span<const SeriesView> series, const Grid& g, ChannelMatrix& out,
                   Exec e) {
  e == Exec::Parallel ? omp::resample_rows(series, g, out) : serial::resample_rows(series, g, out);
}

void summarize_batch(std::span<const ChannelMatrix> phases, std::span<std::vector<Stats>> out,
                     Exec e) {
  e == Exec::Parallel ? omp::summarize_batch(phases, out) : serial::summarize_batch(phases, out);
}

void ensemble_mean(std::span<const Tree> trees, const FeatureView& x, std::span<double> out,
                   Exec e) {
  e == Exec::Parallel ? omp::ensemble_mean(trees, x, out) : serial::ensemble_mean(trees, x, out);
}

void isolation_path(std::span<const Tree> trees, const FeatureView& x, std::span<double> out,
                    Exec e) {
  e == Exec::Parallel ? omp::isolation_path(trees, x, out)
                      : serial::isolation_path(trees, x, out);
}

}  // namespace paddle::kernels
