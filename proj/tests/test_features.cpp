#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "paddle/error.hpp"
#include "paddle/features.hpp"
#include "paddle/kernels.hpp"
#include "paddle/rng.hpp"
#include "support.hpp"

using namespace paddle;

namespace {

double stat(const kernels::Stats& s, StatKind k) { return s[static_cast<std::size_t>(k)]; }

// Textbook definitions, computed independently of the library.
kernels::Stats oracle_stats(std::vector<double> x) {
  const double n = static_cast<double>(x.size());
  double mean = 0;
  for (double v : x) mean += v / n;
  double m2 = 0, m3 = 0;
  for (double v : x) {
    m2 += (v - mean) * (v - mean) / n;
    m3 += (v - mean) * (v - mean) * (v - mean) / n;
  }
  const double sd = x.size() > 1 ? std::sqrt(m2 * n / (n - 1)) : 0.0;
  double skew = 0;
  if (x.size() >= 3 && m2 > 0) skew = m3 / std::pow(m2, 1.5) * std::sqrt(n * (n - 1)) / (n - 2);
  std::sort(x.begin(), x.end());
  auto q = [&](double p) {
    const double h = (n - 1) * p;
    const auto lo = static_cast<std::size_t>(h);
    const auto hi = std::min(lo + 1, x.size() - 1);
    return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
  };
  return {mean, skew, sd, x.front(), x.back(), x.back() - x.front(), q(0.25), q(0.75)};
}

}  // namespace

TEST_CASE("stats of 1,2,3,4") {
  const std::vector<double> x{1, 2, 3, 4};
  const auto s = summarize_series(x);
  CHECK(stat(s, StatKind::Mean) == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(stat(s, StatKind::StdDev) == doctest::Approx(1.2909944).epsilon(1e-7));
  CHECK(stat(s, StatKind::Min) == 1);
  CHECK(stat(s, StatKind::Max) == 4);
  CHECK(stat(s, StatKind::Range) == 3);
  CHECK(stat(s, StatKind::Q1) == doctest::Approx(1.75).epsilon(1e-12));
  CHECK(stat(s, StatKind::Q3) == doctest::Approx(3.25).epsilon(1e-12));
  CHECK(std::abs(stat(s, StatKind::Skewness)) < 1e-12);
}

TEST_CASE("constant and single-sample series") {
  const std::vector<double> c(17, 3.5);
  const auto s = summarize_series(c);
  for (auto k : {StatKind::Mean, StatKind::Min, StatKind::Max, StatKind::Q1, StatKind::Q3})
    CHECK(stat(s, k) == 3.5);
  CHECK(stat(s, StatKind::StdDev) == 0);
  CHECK(stat(s, StatKind::Range) == 0);
  CHECK(stat(s, StatKind::Skewness) == 0);

  const std::vector<double> one{-2.0};
  const auto t = summarize_series(one);
  for (auto k : {StatKind::Mean, StatKind::Min, StatKind::Max, StatKind::Q1, StatKind::Q3})
    CHECK(stat(t, k) == -2.0);
  CHECK(stat(t, StatKind::StdDev) == 0);
  CHECK(stat(t, StatKind::Skewness) == 0);
}

TEST_CASE("stats agree with the oracle on random series") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(2 + rng.below(60));
    for (auto& v : x) v = rng.normal() * 3 + rng.uniform() * rng.uniform() * 10;
    const auto got = summarize_series(x);
    const auto want = oracle_stats(x);
    for (std::size_t k = 0; k < kernels::kStatCount; ++k)
      CHECK(got[k] == doctest::Approx(want[k]).epsilon(1e-9).scale(1));
  }
}

TEST_CASE("stat ordering invariants") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(1 + rng.below(40));
    for (auto& v : x) v = rng.normal();
    const auto s = summarize_series(x);
    CHECK(stat(s, StatKind::Min) <= stat(s, StatKind::Q1));
    CHECK(stat(s, StatKind::Q1) <= stat(s, StatKind::Q3));
    CHECK(stat(s, StatKind::Q3) <= stat(s, StatKind::Max));
    CHECK(stat(s, StatKind::StdDev) >= 0);
    CHECK(stat(s, StatKind::Range) == stat(s, StatKind::Max) - stat(s, StatKind::Min));
  }
}

TEST_CASE("empty and non-finite input") {
  CHECK_THROWS_AS(summarize_series(std::vector<double>{}), Error);
  const std::vector<double> bad{1.0, NAN};
  try {
    summarize_series(bad);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFinite);
  }
}

TEST_CASE("registry sizes per device") {
  const auto reg = FeatureRegistry::canonical();
  CHECK(reg.size() == 360);
  CHECK(reg.restrict_to(Device::LeftWatch).size() == 144);
  CHECK(reg.restrict_to(Device::RightWatch).size() == 144);
  CHECK(reg.restrict_to(Device::Phone).size() == 72);
  for (const auto& n : reg.names()) {
    const auto k = parse_feature_name(n);
    REQUIRE(k);
    CHECK(feature_name(*k) == n);
  }
  CHECK_FALSE(parse_feature_name("left_watch.accelerometer.y.median"));
  CHECK(reg.digest() == FeatureRegistry::canonical().digest());
  CHECK(reg.digest() != reg.restrict_to(Device::Phone).digest());
}

TEST_CASE("feature table round-trips bit-exactly") {
  SynthSpec spec;
  spec.seed = 4;
  spec.n_strokes = 6;
  const auto s = testing::synth_session(spec);
  const auto recs = segment_session(s, SegmentationParams{});
  const auto ds = featurize_trial(s, recs, FeatureRegistry::canonical());
  REQUIRE(ds[0].size() > 0);
  const auto text = write_feature_table(ds);
  const auto back = read_feature_table(text);
  for (std::size_t p = 0; p < 3; ++p) {
    CHECK(back[p].registry == ds[p].registry);
    CHECK(back[p].rows == ds[p].rows);
    CHECK(ds[p].rows[0].values.size() == 360);
  }
  CHECK(write_feature_table(back) == text);
  CHECK(dataset_digest(back) == dataset_digest(ds));
}

TEST_CASE("phase features equal the stats of the standardized phase") {
  SynthSpec spec;
  spec.seed = 8;
  spec.n_strokes = 4;
  const auto s = testing::synth_session(spec);
  const auto recs = segment_session(s, SegmentationParams{});
  const auto reg = FeatureRegistry::canonical();
  const auto ds = featurize_trial(s, recs, reg);
  const auto& first = *std::find_if(recs.begin(), recs.end(), [](auto& r) { return r.accepted(); });
  const auto phases = standardize(s, first, SegmentationParams{});
  for (std::size_t p = 0; p < 3; ++p) {
    const auto& row = ds[p].rows[0];
    CHECK(row.stroke == first.index);
    for (std::size_t j = 0; j < reg.size(); j += 37) {
      const auto& key = reg.entries()[j];
      const auto ch = phases[p].row(*phases[p].find(key.channel));
      const auto want = oracle_stats({ch.begin(), ch.end()});
      CHECK(row.values[j] == doctest::Approx(want[static_cast<std::size_t>(key.stat)]).epsilon(1e-9).scale(1));
    }
  }
}

TEST_CASE("serial and parallel featurization agree") {
  SynthSpec spec;
  spec.seed = 12;
  const auto s = testing::synth_session(spec);
  const auto recs = segment_session(s, SegmentationParams{});
  const auto reg = FeatureRegistry::canonical();
  const auto a = featurize_trial(s, recs, reg, {}, kernels::Exec::Serial);
  const auto b = featurize_trial(s, recs, reg, {}, kernels::Exec::Parallel);
  for (std::size_t p = 0; p < 3; ++p) CHECK(a[p].rows == b[p].rows);

  Rng rng(1);
  std::vector<ChannelMatrix> batch;
  for (int i = 0; i < 9; ++i) {
    ChannelMatrix m(canonical_channels(), 5 + rng.below(40));
    for (std::size_t r = 0; r < m.rows(); ++r)
      for (auto& v : m.row(r)) v = rng.normal();
    batch.push_back(std::move(m));
  }
  std::vector<std::vector<kernels::Stats>> x(batch.size()), y(batch.size());
  kernels::serial::summarize_batch(batch, x);
  kernels::omp::summarize_batch(batch, y);
  CHECK(x == y);
}

TEST_CASE("missing channel is reported") {
  ChannelMatrix m({kLeftQuatX}, 10);
  try {
    featurize_phase(m, FeatureRegistry::canonical());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingChannel);
  }
}

TEST_CASE("dataset selection reorders columns") {
  SynthSpec spec;
  spec.seed = 2;
  spec.n_strokes = 3;
  const auto s = testing::synth_session(spec);
  const auto ds = featurize_trial(s, segment_session(s, {}), FeatureRegistry::canonical());
  const auto phone = ds[1].registry.restrict_to(Device::Phone);
  const auto sub = ds[1].select(phone);
  const auto idx = ds[1].registry.indices_of(phone);
  REQUIRE(sub.rows.size() == ds[1].rows.size());
  for (std::size_t j = 0; j < idx.size(); ++j) CHECK(sub.rows[0].values[j] == ds[1].rows[0].values[idx[j]]);
}
