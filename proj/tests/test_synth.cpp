#include <doctest.h>

#include <cmath>

#include "paddle/segment.hpp"
#include "paddle/synth.hpp"
#include "paddle/text.hpp"
#include "support.hpp"

using namespace paddle;
using testing::error_code;

TEST_CASE("same seed, same bytes") {
  SynthSpec spec;
  spec.seed = 3;
  spec.n_strokes = 4;
  const auto a = generate_trial(spec), b = generate_trial(spec);
  REQUIRE(a.files.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(a.files[i].bytes == b.files[i].bytes);
  CHECK(a.truth.strokes == b.truth.strokes);
  spec.seed = 4;
  CHECK(generate_trial(spec).files[0].bytes != a.files[0].bytes);
}

TEST_CASE("golden trial is reproduced byte for byte") {
  const std::string dir = std::string(PADDLEQ_SOURCE_DIR) + "/data/golden/trial_seed42";
  SynthSpec spec;
  spec.seed = 42;
  spec.n_strokes = 6;
  const auto t = generate_trial(spec);
  for (const auto& f : t.files)
    CHECK_MESSAGE(f.bytes == text::read_file(dir + "/" + std::string(to_string(f.slot)) + ".csv"),
                  to_string(f.slot));
  CHECK(ground_truth_csv(t.truth) == text::read_file(dir + "/ground_truth.csv"));
}

TEST_CASE("noise-free quaternions have unit norm") {
  SynthSpec spec;
  spec.seed = 6;
  GroundTruth gt;
  const auto m = synth_frames(spec, &gt);
  CHECK(m.frames() == gt.frames);
  for (auto dev : {Device::LeftWatch, Device::RightWatch}) {
    const auto w = m.row(*m.find({dev, Sensor::Quaternion, Axis::W}));
    const auto x = m.row(*m.find({dev, Sensor::Quaternion, Axis::X}));
    const auto y = m.row(*m.find({dev, Sensor::Quaternion, Axis::Y}));
    const auto z = m.row(*m.find({dev, Sensor::Quaternion, Axis::Z}));
    for (std::size_t k = 0; k < m.frames(); ++k)
      CHECK(w[k] * w[k] + x[k] * x[k] + y[k] * y[k] + z[k] * z[k] == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("ground truth is sorted and matches the phase proportions") {
  SynthSpec spec;
  spec.seed = 1;
  spec.n_strokes = 12;
  GroundTruth gt;
  const auto m = synth_frames(spec, &gt);
  REQUIRE(gt.strokes.size() == 12);
  std::size_t prev_end = 0;
  for (const auto& s : gt.strokes) {
    CHECK(s.start >= prev_end);
    CHECK(s.start < s.catch_end);
    CHECK(s.catch_end < s.pull_end);
    CHECK(s.pull_end < s.end);
    CHECK(s.end <= gt.frames);
    const double len = static_cast<double>(s.end - s.start);
    CHECK(std::abs(static_cast<double>(s.catch_end - s.start) - 0.25 * len) <= 1.0);
    CHECK(std::abs(static_cast<double>(s.pull_end - s.catch_end) - 0.45 * len) <= 1.0);
    prev_end = s.end;
  }

  // Gap plateau of quaternion X clears the in-stroke mean by more than 2 sigma.
  const auto qx = m.row(*m.find(kLeftQuatX));
  double sum = 0, sq = 0, n = 0;
  for (const auto& s : gt.strokes)
    for (std::size_t k = s.start; k < s.end; ++k) {
      sum += qx[k];
      sq += qx[k] * qx[k];
      n += 1;
    }
  const double mu = sum / n, sd = std::sqrt(std::max(0.0, sq / n - mu * mu));
  for (std::size_t i = 0; i + 1 < gt.strokes.size(); ++i) {
    const auto mid = (gt.strokes[i].end + gt.strokes[i + 1].start) / 2;
    CHECK(qx[mid] > mu + 2 * sd);
  }
}

TEST_CASE("default trial segments into ten accepted strokes") {
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    SynthSpec spec;
    spec.seed = seed;
    GroundTruth gt;
    const auto s = testing::synth_session(spec, &gt);
    const auto recs = segment_session(s, SegmentationParams{});
    CHECK(std::count_if(recs.begin(), recs.end(), [](auto& r) { return r.accepted(); }) == 10);
  }
}

TEST_CASE("zero separation makes the classes identical before noise") {
  SynthSpec spec;
  spec.seed = 5;
  spec.class_separation = 0;
  spec.form = Label::Optimal;
  const auto a = synth_frames(spec);
  spec.form = Label::Suboptimal;
  const auto b = synth_frames(spec);
  CHECK(a == b);
  spec.class_separation = 1.0;
  CHECK_FALSE(synth_frames(spec) == a);
}

TEST_CASE("suboptimal form only moves the designated channels") {
  SynthSpec spec;
  spec.seed = 5;
  spec.designated = {ChannelId{Device::LeftWatch, Sensor::Accelerometer, Axis::Y}};
  const auto a = synth_frames(spec);
  spec.form = Label::Suboptimal;
  const auto b = synth_frames(spec);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const bool same = std::equal(a.row(r).begin(), a.row(r).end(), b.row(r).begin());
    CHECK(same == (a.channels()[r] != spec.designated[0]));
  }
}

TEST_CASE("dataset generation keeps exactly n per class") {
  SynthSpec spec;
  const auto a = generate_dataset(7, spec, 11);
  const auto b = generate_dataset(7, spec, 11);
  for (const auto& ds : a.phases) {
    CHECK(ds.size() == 14);
    CHECK(ds.count(Label::Optimal) == 7);
    CHECK(ds.count(Label::Suboptimal) == 7);
  }
  CHECK(dataset_digest(a.phases) == dataset_digest(b.phases));
  CHECK(dataset_digest(a.phases) != dataset_digest(generate_dataset(7, spec, 12).phases));
  CHECK(error_code([&] { generate_dataset(0, spec, 1); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("invalid specs are refused") {
  SynthSpec spec;
  spec.n_strokes = 0;
  CHECK(error_code([&] { spec.validate(); }) == ErrorCode::InvalidArgument);
  spec = {};
  spec.jitter = 1.0;
  CHECK(error_code([&] { spec.validate(); }) == ErrorCode::InvalidArgument);
  spec = {};
  spec.class_separation = -1;
  CHECK(error_code([&] { generate_trial(spec); }) == ErrorCode::InvalidArgument);
}
