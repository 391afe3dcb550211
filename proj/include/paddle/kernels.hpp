#pragma once

// Data-parallel inner loops. Every kernel has a serial reference in
// kernels::serial and an OpenMP version in kernels::omp with identical
// results (bit-for-bit: each output element is computed by the same code, only
// the distribution of elements over threads differs). The dispatching
// overloads in kernels:: pick one by Exec.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "paddle/channel.hpp"
#include "paddle/tree.hpp"

namespace paddle::kernels {

enum class Exec { Serial, Parallel };

// Caps the OpenMP thread count used by kernels::omp (0 = runtime default).
void set_max_threads(int n);

struct Grid {
  std::int64_t t0_ns = 0;
  double step_ns = 0;  // 1e9 / rate
  std::size_t frames = 0;

  double offset(std::size_t k) const noexcept { return static_cast<double>(k) * step_ns; }
};

struct SeriesView {
  std::span<const std::int64_t> t;
  std::span<const double> v;
};

// One channel: linear interpolation between the two bracketing samples,
// clamped to their value range; exact sample values on exact hits.
void resample_linear(SeriesView s, const Grid& g, std::span<double> out);

inline constexpr std::size_t kStatCount = 8;
using Stats = std::array<double, kStatCount>;

// Stats of every row; out.size() == m.rows().
void summarize_rows_into(const ChannelMatrix& m, std::span<Stats> out);

// Mean leaf value over trees for every row of x.
void ensemble_mean_into(std::span<const Tree> trees, const FeatureView& x, std::span<double> out);

// Mean isolation path length (depth + c(leaf size)) over trees.
void isolation_path_into(std::span<const Tree> trees, const FeatureView& x,
                         std::span<double> out);

namespace serial {
void resample_rows(std::span<const SeriesView> series, const Grid& g, ChannelMatrix& out);
void summarize_batch(std::span<const ChannelMatrix> phases, std::span<std::vector<Stats>> out);
void ensemble_mean(std::span<const Tree> trees, const FeatureView& x, std::span<double> out);
void isolation_path(std::span<const Tree> trees, const FeatureView& x, std::span<double> out);
}  // namespace serial

namespace omp {
void resample_rows(std::span<const SeriesView> series, const Grid& g, ChannelMatrix& out);
void summarize_batch(std::span<const ChannelMatrix> phases, std::span<std::vector<Stats>> out);
void ensemble_mean(std::span<const Tree> trees, const FeatureView& x, std::span<double> out);
void isolation_path(std::span<const Tree> trees, const FeatureView& x, std::span<double> out);
}  // namespace omp

void resample_rows(std::span<const SeriesView> series, const Grid& g, ChannelMatrix& out,
                   Exec e = Exec::Parallel);
void summarize_batch(std::span<const ChannelMatrix> phases, std::span<std::vector<Stats>> out,
                     Exec e = Exec::Parallel);
void ensemble_mean(std::span<const Tree> trees, const FeatureView& x, std::span<double> out,
                   Exec e = Exec::Parallel);
void isolation_path(std::span<const Tree> trees, const FeatureView& x, std::span<double> out,
                    Exec e = Exec::Parallel);

}  // namespace paddle::kernels
