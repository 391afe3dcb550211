// Serial reference vs OpenMP kernels on session-sized inputs.

#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "paddle/kernels.hpp"
#include "paddle/rng.hpp"
#include "paddle/tree.hpp"

using namespace paddle;

namespace {

constexpr std::size_t kChannels = 45;

struct ResampleInput {
  std::vector<std::vector<std::int64_t>> t;
  std::vector<std::vector<double>> v;
  std::vector<kernels::SeriesView> views;
  kernels::Grid grid;

  explicit ResampleInput(std::size_t samples) {
    Rng rng(1);
    for (std::size_t c = 0; c < kChannels; ++c) {
      std::vector<std::int64_t> ts(samples);
      std::vector<double> vs(samples);
      std::int64_t now = static_cast<std::int64_t>(rng.below(5'000'000));
      for (std::size_t i = 0; i < samples; ++i) {
        now += 8'000'000 + static_cast<std::int64_t>(rng.below(4'000'000));
        ts[i] = now;
        vs[i] = std::sin(static_cast<double>(i) * 0.05) + 0.1 * rng.normal();
      }
      t.push_back(std::move(ts));
      v.push_back(std::move(vs));
    }
    for (std::size_t c = 0; c < kChannels; ++c) views.push_back({t[c], v[c]});
    grid.t0_ns = 20'000'000;
    grid.step_ns = 2e7;
    grid.frames = samples / 2;
  }
};

std::vector<ChannelId> channel_ids() { return canonical_channels(); }

void BM_Resample(benchmark::State& state, kernels::Exec exec) {
  const ResampleInput in(static_cast<std::size_t>(state.range(0)));
  ChannelMatrix out(channel_ids(), in.grid.frames);
  for (auto _ : state) {
    kernels::resample_rows(in.views, in.grid, out, exec);
    benchmark::DoNotOptimize(out.values().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(kChannels * in.grid.frames));
}

void BM_Summarize(benchmark::State& state, kernels::Exec exec) {
  Rng rng(2);
  std::vector<ChannelMatrix> phases;
  for (std::int64_t s = 0; s < state.range(0); ++s) {
    ChannelMatrix m(channel_ids(), 40);
    for (std::size_t r = 0; r < m.rows(); ++r)
      for (auto& x : m.row(r)) x = rng.normal();
    phases.push_back(std::move(m));
  }
  std::vector<std::vector<kernels::Stats>> out(phases.size());
  for (auto _ : state) {
    kernels::summarize_batch(phases, out, exec);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

struct Forest {
  std::vector<double> x;
  FeatureView view;
  std::vector<Tree> trees;

  Forest(std::size_t rows, std::size_t cols, std::size_t n_trees) : x(rows * cols) {
    Rng rng(3);
    for (auto& v : x) v = rng.normal();
    view = {x.data(), rows, cols};
    std::vector<std::size_t> all(rows);
    for (std::size_t i = 0; i < rows; ++i) all[i] = i;
    for (std::size_t t = 0; t < n_trees; ++t) trees.push_back(fit_isolation_tree(view, all, 8, rng));
  }
};

void BM_Isolation(benchmark::State& state, kernels::Exec exec) {
  const Forest f(static_cast<std::size_t>(state.range(0)), 360, 100);
  std::vector<double> out(f.view.rows);
  for (auto _ : state) {
    kernels::isolation_path(f.trees, f.view, out, exec);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_Ensemble(benchmark::State& state, kernels::Exec exec) {
  const Forest f(static_cast<std::size_t>(state.range(0)), 360, 100);
  std::vector<double> out(f.view.rows);
  for (auto _ : state) {
    kernels::ensemble_mean(f.trees, f.view, out, exec);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK_CAPTURE(BM_Resample, serial, kernels::Exec::Serial)->Arg(6'000)->Arg(60'000);
BENCHMARK_CAPTURE(BM_Resample, omp, kernels::Exec::Parallel)->Arg(6'000)->Arg(60'000);
BENCHMARK_CAPTURE(BM_Summarize, serial, kernels::Exec::Serial)->Arg(100)->Arg(1'000);
BENCHMARK_CAPTURE(BM_Summarize, omp, kernels::Exec::Parallel)->Arg(100)->Arg(1'000);
BENCHMARK_CAPTURE(BM_Isolation, serial, kernels::Exec::Serial)->Arg(256)->Arg(4'096);
BENCHMARK_CAPTURE(BM_Isolation, omp, kernels::Exec::Parallel)->Arg(256)->Arg(4'096);
BENCHMARK_CAPTURE(BM_Ensemble, serial, kernels::Exec::Serial)->Arg(256)->Arg(4'096);
BENCHMARK_CAPTURE(BM_Ensemble, omp, kernels::Exec::Parallel)->Arg(256)->Arg(4'096);

BENCHMARK_MAIN();
