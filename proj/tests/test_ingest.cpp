#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "paddle/error.hpp"
#include "paddle/ingest.hpp"
#include "paddle/kernels.hpp"
#include "paddle/text.hpp"
#include "support.hpp"

using namespace paddle;

namespace {

SampleSeries ramp(ChannelId id, std::int64_t t0, std::int64_t t1, std::int64_t step,
                  double slope = 1.0, double offset = 0.0) {
  SampleSeries s{id, {}, {}};
  for (std::int64_t t = t0; t <= t1; t += step) {
    s.timestamps_ns.push_back(t);
    s.values.push_back(offset + slope * static_cast<double>(t) * 1e-9);
  }
  return s;
}

// Counts grid points t0 + k/rate inside [t0, t1] one by one.
std::size_t enumerate_grid(std::int64_t t0, std::int64_t t1, double rate) {
  std::size_t n = 0;
  while (static_cast<double>(t0) + static_cast<double>(n) * 1e9 / rate <= static_cast<double>(t1)) ++n;
  return n;
}

// Linear interpolation by scanning for the bracketing pair.
double interp_oracle(const SampleSeries& s, double t) {
  for (std::size_t i = 0; i + 1 < s.timestamps_ns.size(); ++i) {
    const auto a = static_cast<double>(s.timestamps_ns[i]);
    const auto b = static_cast<double>(s.timestamps_ns[i + 1]);
    if (t >= a && t <= b) {
      if (t == a) return s.values[i];
      if (t == b) return s.values[i + 1];
      return s.values[i] + (s.values[i + 1] - s.values[i]) * (t - a) / (b - a);
    }
  }
  return NAN;
}

}  // namespace

TEST_CASE("time unit thresholds") {
  CHECK(infer_time_unit(1.7e12) == TimeUnit::Milliseconds);
  CHECK(infer_time_unit(9.99e12) == TimeUnit::Milliseconds);
  CHECK(infer_time_unit(1e13) == TimeUnit::Microseconds);
  CHECK(infer_time_unit(1.7e15) == TimeUnit::Microseconds);
  CHECK(infer_time_unit(1e16) == TimeUnit::Nanoseconds);
  CHECK(infer_time_unit(1.7e18) == TimeUnit::Nanoseconds);
}

TEST_CASE("canonical file maps columns directly") {
  ParseOptions o;
  o.device = Device::Phone;
  const auto r = parse_sensor_file("time_ns,accel_x,accel_y,accel_z\n100,1,2,3\n200,4,5,6\n", o);
  REQUIRE(r.series.size() == 3);
  for (const auto& s : r.series) {
    CHECK(s.channel.device == Device::Phone);
    CHECK(s.channel.sensor == Sensor::Accelerometer);
    CHECK(s.timestamps_ns == std::vector<std::int64_t>{100, 200});
  }
  CHECK(r.series[1].values == std::vector<double>{2, 5});
}

TEST_CASE("millisecond phone export is converted to nanoseconds") {
  ParseOptions o;
  o.format = SourceFormat::PhoneLoggerExport;
  o.sensor = Sensor::Gyroscope;
  const auto r = parse_sensor_file("time,x,y,z\n1737700000000,0.1,0.2,0.3\n1737700000020,0,0,0\n"
                                   "1737700000040,1,1,1\n",
                                   o);
  CHECK(r.report.time_unit == TimeUnit::Milliseconds);
  REQUIRE(r.series.size() == 3);
  const std::vector<std::int64_t> expect{1737700000000LL * 1'000'000, 1737700000020LL * 1'000'000,
                                         1737700000040LL * 1'000'000};
  CHECK(r.series[0].timestamps_ns == expect);
  CHECK(r.series[0].channel.sensor == Sensor::Gyroscope);
}

TEST_CASE("header-only and missing-time files are rejected") {
  ParseOptions o;
  try {
    parse_sensor_file("time_ns,accel_x\n", o);
    FAIL("expected EmptyFile");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyFile);
  }
  try {
    parse_sensor_file("t,accel_x\n1,2\n", o);
    FAIL("expected MissingTimeColumn");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingTimeColumn);
  }
}

TEST_CASE("unordered and duplicate timestamps are repaired unless strict") {
  ParseOptions o;
  const std::string body = "time_ns,accel_x\n30,3\n10,1\n20,2\n20,2.5\n";
  const auto r = parse_sensor_file(body, o);
  CHECK(r.series[0].timestamps_ns == std::vector<std::int64_t>{10, 20, 30});
  CHECK(r.series[0].values == std::vector<double>{1, 2.5, 3});
  CHECK(r.report.rows_reordered == 3);
  CHECK(r.report.duplicates_collapsed == 1);
  o.strict_time = true;
  CHECK_THROWS_AS(parse_sensor_file(body, o), Error);
}

TEST_CASE("alignment spans the intersection") {
  const std::int64_t s = 1'000'000'000;
  std::vector<SampleSeries> in{ramp(kLeftQuatW, 0, 10 * s, 8'000'000, 0.0, 1.0),
                               ramp(kLeftQuatX, 2 * s, 12 * s, 25'000'000, 0.0, 0.0)};
  const auto a = align(in, 50.0);
  CHECK(a.t0_ns == 2 * s);
  CHECK(a.t1_ns <= 10 * s);
  CHECK(a.frames() == 401);
  CHECK(a.frames() == enumerate_grid(a.t0_ns, a.t1_ns, 50.0));
  CHECK(a.frames() == grid_frame_count(a.t0_ns, a.t1_ns, 50.0));
}

TEST_CASE("frame count matches enumeration over awkward spans") {
  for (std::int64_t span : {1LL, 19'999'999LL, 20'000'000LL, 20'000'001LL, 8'000'000'000LL, 1'234'567'891LL})
    for (double rate : {50.0, 30.0, 100.0, 7.0})
      CHECK(grid_frame_count(1000, 1000 + span, rate) == enumerate_grid(1000, 1000 + span, rate));
}

TEST_CASE("series sampled on the grid come back unchanged") {
  const std::int64_t step = 20'000'000;
  const ChannelId acc{Device::Phone, Sensor::Accelerometer, Axis::X};
  SampleSeries s{acc, {}, {}};
  for (int k = 0; k < 100; ++k) {
    s.timestamps_ns.push_back(k * step);
    s.values.push_back(std::sin(k * 0.3));
  }
  std::vector<SampleSeries> in{s, ramp(kLeftQuatW, 0, 99 * step, step, 0, 1),
                               ramp(kLeftQuatX, 0, 99 * step, step, 0, 0)};
  const auto a = align(in, 50.0);
  const auto row = a.channel(acc);
  REQUIRE(row.size() == 100);
  CHECK(std::equal(row.begin(), row.end(), s.values.begin()));
}

TEST_CASE("resampling agrees with a scan-based interpolation oracle") {
  paddle::Rng rng(11);
  SampleSeries s{{Device::Phone, Sensor::Gyroscope, Axis::Y}, {}, {}};
  std::int64_t t = 0;
  for (int i = 0; i < 300; ++i) {
    t += 3'000'000 + static_cast<std::int64_t>(rng.below(20'000'000));
    s.timestamps_ns.push_back(t);
    s.values.push_back(rng.normal());
  }
  std::vector<SampleSeries> in{s, ramp(kLeftQuatW, 0, t, 5'000'000, 0, 1),
                               ramp(kLeftQuatX, 0, t, 5'000'000, 0, 0)};
  const auto a = align(in, 50.0);
  const auto row = a.channel(s.channel);
  for (std::size_t k = 0; k < a.frames(); ++k) {
    const double tk = static_cast<double>(a.t0_ns) + static_cast<double>(k) * 2e7;
    CHECK(row[k] == doctest::Approx(interp_oracle(s, tk)).epsilon(1e-12));
  }
}

TEST_CASE("spans without overlap are rejected") {
  const std::int64_t s = 1'000'000'000;
  std::vector<SampleSeries> in{ramp(kLeftQuatW, 0, s, 10'000'000), ramp(kLeftQuatX, 5 * s, 6 * s, 10'000'000)};
  try {
    align(in, 50.0);
    FAIL("expected NoTemporalOverlap");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoTemporalOverlap);
  }
}

TEST_CASE("synthetic trial aligns to the 45-channel registry") {
  const auto trial = generate_trial(SynthSpec{});
  const auto loaded = load_trial(trial.files);
  CHECK(loaded.session.registry().size() == kCanonicalChannelCount);
  CHECK(loaded.session.registry() == canonical_channels());
  CHECK(loaded.reports.size() == 5);
}

TEST_CASE("four files are an arity error") {
  auto trial = generate_trial(testing::quiet_spec(3));
  trial.files.pop_back();
  try {
    load_trial(trial.files);
    FAIL("expected Arity");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Arity);
    CHECK(e.stage() == "ingest");
  }
}

TEST_CASE("malformed rows are dropped and reported") {
  auto trial = generate_trial(testing::quiet_spec(6));
  auto& f = trial.files[0];
  auto lines = text::lines(f.bytes);
  std::string corrupted;
  std::size_t broken = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i > 0 && i % 10 == 5) {
      corrupted += "garbage,row\n";
      ++broken;
    } else {
      corrupted += std::string(lines[i]) + "\n";
    }
  }
  f.bytes = corrupted;
  const auto loaded = load_trial(trial.files);
  CHECK(loaded.reports[0].rows_dropped == broken);
  CHECK(loaded.reports[0].rows_total == lines.size() - 1);
  CHECK(loaded.report_json().find("rows_dropped") != std::string::npos);
}

TEST_CASE("file order does not matter") {
  const auto trial = generate_trial(SynthSpec{});
  auto files = trial.files;
  std::reverse(files.begin(), files.end());
  const auto a = load_trial(trial.files).session;
  const auto b = load_trial(files).session;
  CHECK(a.data == b.data);
  CHECK(a.t0_ns == b.t0_ns);
}

TEST_CASE("aligning an aligned session reproduces it") {
  const auto trial = generate_trial(SynthSpec{});
  const auto a = load_trial(trial.files).session;
  const auto series = session_series(a);
  const auto b = align(series, a.rate_hz);
  CHECK(b.frames() == a.frames());
  CHECK(b.data == a.data);
}

TEST_CASE("half rate hits the shared timestamps exactly") {
  const auto trial = generate_trial(SynthSpec{});
  LoadOptions full, half;
  half.rate_hz = 25.0;
  const auto a = load_trial(trial.files, full).session;
  const auto b = load_trial(trial.files, half).session;
  REQUIRE(b.frames() == (a.frames() - 1) / 2 + 1);
  for (std::size_t r = 0; r < a.data.rows(); ++r) {
    const auto ra = a.data.row(r), rb = b.data.row(r);
    for (std::size_t k = 0; k < b.frames(); ++k) CHECK(rb[k] == ra[2 * k]);
  }
}

TEST_CASE("watch export goes through the column map") {
  const auto& map = WatchColumnMap::builtin();
  CHECK(map.columns.size() == kWatchChannelCount);
  const auto json = text::read_file(std::string(PADDLEQ_SOURCE_DIR) + "/config/watch_columns.v1.json");
  const auto from_file = WatchColumnMap::from_json(json);
  CHECK(from_file.time_column == map.time_column);
  CHECK(from_file.columns == map.columns);
}

TEST_CASE("serial and parallel resampling are bit-identical") {
  const auto trial = generate_trial(SynthSpec{});
  const auto session = load_trial(trial.files).session;
  const auto series = session_series(session);
  std::vector<kernels::SeriesView> views;
  for (const auto& s : series) views.push_back({s.timestamps_ns, s.values});
  kernels::Grid g{session.t0_ns + 3'000'000, 1e9 / 43.0, 200};
  ChannelMatrix a(session.registry(), g.frames), b(session.registry(), g.frames);
  kernels::serial::resample_rows(views, g, a);
  kernels::omp::resample_rows(views, g, b);
  CHECK(a == b);
}
