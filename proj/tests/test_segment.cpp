#include <doctest.h>

#include <cmath>

#include "paddle/error.hpp"
#include "paddle/segment.hpp"
#include "paddle/rng.hpp"
#include "support.hpp"

using namespace paddle;

namespace {

AlignedSession two_channel_session(const std::vector<double>& qx, const std::vector<double>& qw) {
  AlignedSession s;
  s.rate_hz = 50;
  s.t1_ns = static_cast<std::int64_t>((qx.size() - 1) * 20'000'000);
  s.data = ChannelMatrix({kLeftQuatX, kLeftQuatW}, qx.size());
  const auto rx = *s.data.find(kLeftQuatX), rw = *s.data.find(kLeftQuatW);
  std::copy(qx.begin(), qx.end(), s.data.row(rx).begin());
  std::copy(qw.begin(), qw.end(), s.data.row(rw).begin());
  return s;
}

std::vector<double> naive_smooth(const std::vector<double>& x, std::size_t w) {
  std::vector<double> out(x.size());
  const auto h = static_cast<std::ptrdiff_t>(w / 2);
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(x.size()); ++i) {
    double sum = 0;
    int n = 0;
    for (std::ptrdiff_t j = i - h; j <= i + h; ++j)
      if (j >= 0 && j < static_cast<std::ptrdiff_t>(x.size())) {
        sum += x[static_cast<std::size_t>(j)];
        ++n;
      }
    out[static_cast<std::size_t>(i)] = sum / n;
  }
  return out;
}

// V at 15 then a parabola peaking at 60, over 100 frames.
std::vector<double> phase_fixture() {
  std::vector<double> qw(100);
  for (int k = 0; k < 100; ++k) {
    if (k <= 15) qw[k] = 15 - k;
    else if (k <= 60) qw[k] = k - 15;
    else qw[k] = 45 - 0.5 * (k - 60) * (k - 60);
  }
  return qw;
}

}  // namespace

TEST_CASE("smoothing matches a shrinking-window oracle") {
  paddle::Rng rng(5);
  std::vector<double> x(37);
  for (auto& v : x) v = rng.normal();
  for (std::size_t w : {1u, 3u, 5u, 9u}) {
    const auto got = smooth(x, w);
    const auto want = naive_smooth(x, w);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
}

TEST_CASE("square-wave gaps split the trial into three strokes") {
  std::vector<double> qx(300, 0.0), qw(300, 0.7);
  for (int k = 100; k < 120; ++k) qx[k] = 1.0;
  for (int k = 220; k < 240; ++k) qx[k] = 1.0;
  const auto recs = segment_strokes(two_channel_session(qx, qw), SegmentationParams{});
  REQUIRE(recs.size() == 3);
  // Smoothing widens each gap by one frame on either side.
  CHECK(recs[0].start_frame == 0);
  CHECK(recs[0].end_frame == doctest::Approx(100).epsilon(0.011));
  CHECK(recs[1].start_frame == doctest::Approx(120).epsilon(0.011));
  CHECK(recs[1].end_frame == doctest::Approx(220).epsilon(0.005));
  CHECK(recs[2].start_frame == doctest::Approx(240).epsilon(0.005));
  CHECK(recs[2].end_frame == 300);
  for (const auto& r : recs) CHECK(r.accepted());
}

TEST_CASE("constant quaternion X yields one run") {
  SegmentationParams p;
  const auto fits = segment_strokes(two_channel_session(std::vector<double>(100, 0.3), std::vector<double>(100, 0.7)), p);
  REQUIRE(fits.size() == 1);
  CHECK(fits[0].start_frame == 0);
  CHECK(fits[0].end_frame == 100);
  CHECK(fits[0].accepted());

  const auto too_long = segment_strokes(two_channel_session(std::vector<double>(300, 0.3), std::vector<double>(300, 0.7)), p);
  REQUIRE(too_long.size() == 1);
  CHECK_FALSE(too_long[0].accepted());
  CHECK(too_long[0].reason == RejectReason::TooLong);
}

TEST_CASE("phase boundaries sit at the smoothed extrema") {
  const auto qw = phase_fixture();
  const auto s = two_channel_session(std::vector<double>(100, 0.1), qw);
  StrokeRecord stroke{0, 0, 100, std::nullopt, StrokeStatus::Accepted, RejectReason::None};
  const auto r = segment_phases(s, stroke, SegmentationParams{});
  REQUIRE(r.accepted());
  REQUIRE(r.phases);
  CHECK((*r.phases)[0] == PhaseSpan{Phase::Catch, 0, 15});
  CHECK((*r.phases)[1] == PhaseSpan{Phase::Pull, 15, 60});
  CHECK((*r.phases)[2] == PhaseSpan{Phase::Recovery, 60, 100});

  // Brute force over the smoothed series.
  const auto sm = smooth(qw, 5);
  std::size_t amin = 0;
  for (std::size_t k = 0; k < 60; ++k)
    if (sm[k] < sm[amin]) amin = k;
  std::size_t amax = amin + 1;
  for (std::size_t k = amin + 1; k < 100; ++k)
    if (sm[k] > sm[amax]) amax = k;
  CHECK(amin == 15);
  CHECK(amax == 60);
}

TEST_CASE("monotone quaternion W has no catch phase") {
  std::vector<double> qw(100);
  for (int k = 0; k < 100; ++k) qw[k] = 0.01 * k;
  const auto s = two_channel_session(std::vector<double>(100, 0.1), qw);
  StrokeRecord stroke{0, 0, 100, std::nullopt, StrokeStatus::Accepted, RejectReason::None};
  const auto r = segment_phases(s, stroke, SegmentationParams{});
  CHECK_FALSE(r.accepted());
  CHECK(r.reason == RejectReason::PhaseNotFound);
}

TEST_CASE("short phases are rejected") {
  std::vector<double> qw(100);
  for (int k = 0; k < 100; ++k) qw[k] = k <= 4 ? 4 - k : (k <= 60 ? k - 4 : 56 - (k - 60));
  const auto s = two_channel_session(std::vector<double>(100, 0.1), qw);
  StrokeRecord stroke{0, 0, 100, std::nullopt, StrokeStatus::Accepted, RejectReason::None};
  const auto r = segment_phases(s, stroke, SegmentationParams{});
  CHECK_FALSE(r.accepted());
  CHECK(r.reason == RejectReason::PhaseTooShort);
}

TEST_CASE("standardize keeps the first T frames") {
  std::vector<double> qx(107), qw(107);
  for (std::size_t k = 0; k < 107; ++k) {
    qx[k] = static_cast<double>(k);
    qw[k] = -static_cast<double>(k);
  }
  const auto s = two_channel_session(qx, qw);
  StrokeRecord r{0, 0, 107,
                 std::array<PhaseSpan, 3>{PhaseSpan{Phase::Catch, 0, 55}, PhaseSpan{Phase::Pull, 55, 67},
                                          PhaseSpan{Phase::Recovery, 67, 107}},
                 StrokeStatus::Accepted, RejectReason::None};
  const auto ph = standardize(s, r, SegmentationParams{});
  CHECK(ph[0].frames() == 40);
  CHECK(ph[0] == s.data.slice(0, 40));
  CHECK(ph[1].frames() == 12);
  CHECK(ph[1] == s.data.slice(55, 67));
  CHECK(ph[2].frames() == 40);
  CHECK(ph[2] == s.data.slice(67, 107));
}

TEST_CASE("raw tensor export pads with the last frame") {
  ChannelMatrix m({kLeftQuatX}, 12);
  for (std::size_t k = 0; k < 12; ++k) m.row(0)[k] = static_cast<double>(k);
  const auto t = export_raw_tensor(m, 40);
  REQUIRE(t.frames() == 40);
  for (std::size_t k = 0; k < 40; ++k) CHECK(t.row(0)[k] == static_cast<double>(std::min<std::size_t>(k, 11)));
  ChannelMatrix full({kLeftQuatX}, 40);
  CHECK(export_raw_tensor(full, 40) == full);
  CHECK_THROWS_AS(export_raw_tensor(ChannelMatrix({kLeftQuatX}, 0), 40), Error);
}

TEST_CASE("noiseless synth boundaries are recovered exactly") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto spec = testing::quiet_spec(8);
    spec.seed = seed;
    GroundTruth gt;
    const auto s = testing::synth_session(spec, &gt);
    const auto recs = segment_session(s, SegmentationParams{});
    REQUIRE(recs.size() == gt.strokes.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
      REQUIRE(recs[i].accepted());
      CHECK(recs[i].start_frame == gt.strokes[i].start);
      CHECK(recs[i].end_frame == gt.strokes[i].end);
      CHECK((*recs[i].phases)[1].start_frame == gt.strokes[i].catch_end);
      CHECK((*recs[i].phases)[2].start_frame == gt.strokes[i].pull_end);
    }
  }
}

TEST_CASE("noisy synth boundaries land within five frames") {
  std::size_t total = 0, close = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SynthSpec spec;
    spec.seed = seed;
    GroundTruth gt;
    const auto s = testing::synth_session(spec, &gt);
    const auto recs = segment_session(s, SegmentationParams{});
    CHECK(recs.size() == gt.strokes.size());
    for (std::size_t i = 0; i < std::min(recs.size(), gt.strokes.size()); ++i) {
      const auto near = [](std::size_t a, std::size_t b) { return (a > b ? a - b : b - a) <= 5; };
      total += 2;
      close += near(recs[i].start_frame, gt.strokes[i].start) + near(recs[i].end_frame, gt.strokes[i].end);
      if (recs[i].phases) {
        total += 2;
        close += near((*recs[i].phases)[1].start_frame, gt.strokes[i].catch_end) +
                 near((*recs[i].phases)[2].start_frame, gt.strokes[i].pull_end);
      }
    }
  }
  CHECK(static_cast<double>(close) >= 0.95 * static_cast<double>(total));
}

TEST_CASE("records are consistent, deterministic and survive CSV") {
  SynthSpec spec;
  spec.seed = 9;
  spec.n_strokes = 12;
  const auto s = testing::synth_session(spec);
  SegmentationParams p;
  const auto a = segment_session(s, p);
  const auto b = segment_session(s, p);
  CHECK(a == b);
  for (const auto& r : a) CHECK(record_is_consistent(r, p));
  CHECK(segments_from_csv(segments_to_csv(a)) == a);
}

TEST_CASE("invalid parameters are rejected") {
  SegmentationParams p;
  p.smooth_window_frames = 4;
  CHECK_THROWS_AS(p.validate(), Error);
  p = {};
  p.catch_search_fraction = 1.5;
  CHECK_THROWS_AS(p.validate(), Error);
  p = {};
  p.min_stroke_s = 6;
  CHECK_THROWS_AS(p.validate(), Error);
}
