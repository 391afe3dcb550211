#include "paddle/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <json.hpp>
#include <numbers>

#include "paddle/error.hpp"
#include "paddle/rng.hpp"
#include "paddle/segment.hpp"
#include "paddle/text.hpp"

namespace paddle {

namespace {

constexpr std::int64_t kEpochNs = 1'737'700'000'000'000'000;

// qx plateaus and qw shape.
constexpr double kQxStroke = 0.1;
constexpr double kQxGap = 0.6;
constexpr double kQwRest = 0.7;
constexpr double kQwCatch = 0.1;
constexpr double kQwPull = 0.9;
constexpr double kQwDrop = 0.6;  // recovery falls from kQwPull by this much
constexpr double kCatchFraction = 0.25;
constexpr double kPullEndFraction = 0.70;

struct ChannelShape {
  double base = 0;
  double amp = 1;
  double harmonic = 1;
  double phase = 0;
};

ChannelShape shape_of(const ChannelId& c, std::size_t index) {
  ChannelShape s;
  const auto axis = static_cast<std::size_t>(c.axis);
  s.harmonic = 1.0 + static_cast<double>(axis % 3);
  s.phase = 0.9 * static_cast<double>(index);
  switch (c.sensor) {
    case Sensor::Accelerometer: s.amp = 2.0; break;
    case Sensor::RotationRate:
    case Sensor::Gyroscope: s.amp = 1.5; break;
    case Sensor::Orientation: s.amp = 0.8; break;
    case Sensor::Gravity:
      s.base = axis == 0 ? 0.0 : (axis == 1 ? -5.0 : -8.0);
      s.amp = 1.0;
      break;
    case Sensor::UserAcceleration:
      s.base = 0.5;
      s.amp = 1.0;
      break;
    case Sensor::Magnetometer:
      s.base = axis == 0 ? 20.0 : (axis == 1 ? -15.0 : 40.0);
      s.amp = 3.0;
      break;
    case Sensor::Quaternion: break;
  }
  return s;
}

std::size_t frames_of(double seconds, double rate) {
  return static_cast<std::size_t>(std::llround(seconds * rate));
}

// Time of half-step sample j after `start`, rounded up to whole ns.
std::int64_t sample_time(std::int64_t start, double rate_hz, std::int64_t j) {
  return start + static_cast<std::int64_t>(std::ceil(static_cast<double>(j) * 1e9 / (2.0 * rate_hz)));
}

}  // namespace

// Every channel except the quaternions, which drive segmentation.
std::vector<ChannelId> SynthSpec::default_designated() {
  std::vector<ChannelId> out;
  for (const auto& c : canonical_channels())
    if (c.sensor != Sensor::Quaternion) out.push_back(c);
  return out;
}

void SynthSpec::validate() const {
  auto fail = [](const char* what) { throw Error(ErrorCode::InvalidArgument, what, "synth"); };
  if (n_strokes == 0) fail("n_strokes must be positive");
  if (!(rate_hz > 0) || !std::isfinite(rate_hz)) fail("rate_hz must be positive");
  if (!(stroke_period_s > 0) || !(gap_s > 0) || !(rest_s > 0)) fail("durations must be positive");
  if (!(jitter >= 0) || jitter >= 1) fail("jitter must lie in [0, 1)");
  if (!(class_separation >= 0) || !std::isfinite(class_separation))
    fail("class_separation must be finite and non-negative");
  if (!(noise_sigma >= 0) || !std::isfinite(noise_sigma)) fail("noise_sigma must be finite");
  if (form == Label::Unlabeled) fail("form must be optimal or suboptimal");
  if (frames_of(gap_s, rate_hz) < 2 || frames_of(rest_s, rate_hz) < 2)
    fail("gap and rest must span at least two frames");
  for (const auto& c : designated)
    if (!is_valid(c) || c.sensor == Sensor::Quaternion)
      fail("designated channels must be valid, non-quaternion channels");
}

ChannelMatrix synth_frames(const SynthSpec& spec, GroundTruth* truth) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, {0x5717}));
  const std::size_t rest = frames_of(spec.rest_s, spec.rate_hz);
  const std::size_t gap = frames_of(spec.gap_s, spec.rate_hz);

  std::vector<StrokeTruth> strokes;
  std::size_t cursor = rest;
  for (std::size_t i = 0; i < spec.n_strokes; ++i) {
    const double scale = 1.0 + spec.jitter * rng.uniform(-1.0, 1.0);
    const std::size_t len =
        std::max<std::size_t>(4, frames_of(spec.stroke_period_s * scale, spec.rate_hz));
    StrokeTruth s;
    s.start = cursor;
    s.end = cursor + len;
    s.catch_end = s.start + static_cast<std::size_t>(std::llround(kCatchFraction * static_cast<double>(len)));
    s.pull_end = s.start + static_cast<std::size_t>(std::llround(kPullEndFraction * static_cast<double>(len)));
    strokes.push_back(s);
    cursor = s.end + (i + 1 < spec.n_strokes ? gap : rest);
  }
  const std::size_t frames = cursor;

  const auto channels = canonical_channels();
  ChannelMatrix m(channels, frames);

  // Quaternion: qx plateaus mark gaps, qw carries the phase shape.
  std::vector<double> qx(frames, kQxGap), qw(frames, kQwRest);
  for (std::size_t i = 0; i < strokes.size(); ++i) {
    const auto& s = strokes[i];
    std::fill(qx.begin() + static_cast<std::ptrdiff_t>(s.start),
              qx.begin() + static_cast<std::ptrdiff_t>(s.end), kQxStroke);
    // Gap frames touching a stroke sit halfway between the plateaus.
    const double mid = (kQxStroke + kQxGap) / 2.0;
    qx[s.start - 1] = mid;
    if (s.end < frames) qx[s.end] = mid;
    for (std::size_t k = s.start; k <= s.catch_end; ++k)
      qw[k] = kQwRest + (kQwCatch - kQwRest) * static_cast<double>(k - s.start) /
                            static_cast<double>(s.catch_end - s.start);
    for (std::size_t k = s.catch_end; k <= s.pull_end; ++k)
      qw[k] = kQwCatch + (kQwPull - kQwCatch) * static_cast<double>(k - s.catch_end) /
                             static_cast<double>(s.pull_end - s.catch_end);
    for (std::size_t k = s.pull_end; k < s.end; ++k) {
      const double u = static_cast<double>(k - s.pull_end) / static_cast<double>(s.end - s.pull_end);
      qw[k] = kQwPull - kQwDrop * (0.75 * u + 0.25 * u * u);
    }
    // Back to rest across the following gap.
    const std::size_t next = i + 1 < strokes.size() ? strokes[i + 1].start : frames;
    const double from = kQwPull - kQwDrop;
    for (std::size_t k = s.end; k < next; ++k)
      qw[k] = std::min(kQwRest, from + (kQwRest - from) * static_cast<double>(k - s.end + 1) /
                                           static_cast<double>(std::max<std::size_t>(1, next - s.end - 1)));
  }

  for (const auto dev : {Device::LeftWatch, Device::RightWatch}) {
    const auto row = [&](Axis a) { return m.row(*m.find({dev, Sensor::Quaternion, a})); };
    auto w = row(Axis::W), x = row(Axis::X), y = row(Axis::Y), z = row(Axis::Z);
    for (std::size_t k = 0; k < frames; ++k) {
      const double r = std::sqrt(std::max(0.0, 1.0 - qw[k] * qw[k] - qx[k] * qx[k]));
      w[k] = qw[k];
      x[k] = qx[k];
      y[k] = r * std::cos(0.6);
      z[k] = r * std::sin(0.6);
    }
  }

  // Per-stroke latents shared by all generic channels.
  std::vector<double> amp(strokes.size()), phi(strokes.size());
  for (std::size_t i = 0; i < strokes.size(); ++i) {
    amp[i] = 1.0 + 0.15 * rng.normal();
    phi[i] = 0.3 * rng.normal();
  }
  for (std::size_t c = 0; c < channels.size(); ++c) {
    const auto& id = channels[c];
    if (id.sensor == Sensor::Quaternion) continue;
    const auto sh = shape_of(id, c);
    const bool shifted =
        spec.form == Label::Suboptimal &&
        std::find(spec.designated.begin(), spec.designated.end(), id) != spec.designated.end();
    const double shift =
        shifted ? spec.class_separation *
                      std::sqrt(sh.amp * sh.amp / 2.0 + spec.noise_sigma * spec.noise_sigma)
                : 0.0;
    auto r = m.row(c);
    std::fill(r.begin(), r.end(), sh.base);
    for (std::size_t i = 0; i < strokes.size(); ++i) {
      const auto& s = strokes[i];
      for (std::size_t k = s.start; k < s.end; ++k) {
        const double u = static_cast<double>(k - s.start) / static_cast<double>(s.end - s.start);
        r[k] = sh.base + shift +
               sh.amp * amp[i] * std::sin(2.0 * std::numbers::pi * sh.harmonic * u + sh.phase + phi[i]);
      }
    }
  }

  if (truth) {
    truth->strokes = std::move(strokes);
    truth->form = spec.form;
    truth->signal_channels = spec.form == Label::Suboptimal ? spec.designated : std::vector<ChannelId>{};
    truth->frames = frames;
  }
  return m;
}

SynthTrial generate_trial(const SynthSpec& spec) {
  SynthTrial out;
  const auto m = synth_frames(spec, &out.truth);
  const std::size_t frames = m.frames();
  const double step_ns = 1e9 / spec.rate_hz;

  struct Plan {
    TrialSlot slot;
    Device device;
    std::optional<Sensor> sensor;
    std::int64_t offset_ns;  // first sample relative to frame 0
  };
  // The left watch starts last and stops first, so the session is its span.
  const std::array<Plan, 5> plans{{
      {TrialSlot::PhoneAccel, Device::Phone, Sensor::Accelerometer, -37'000'000},
      {TrialSlot::PhoneGyro, Device::Phone, Sensor::Gyroscope, -41'000'000},
      {TrialSlot::PhoneMag, Device::Phone, Sensor::Magnetometer, -29'000'000},
      {TrialSlot::WatchLeft, Device::LeftWatch, std::nullopt, 0},
      {TrialSlot::WatchRight, Device::RightWatch, std::nullopt, -23'000'000},
  }};
  const std::int64_t end_ns = sample_time(kEpochNs, spec.rate_hz, 2 * static_cast<std::int64_t>(frames - 1));

  for (const auto& p : plans) {
    std::vector<std::size_t> rows;
    std::string header = "time_ns";
    for (std::size_t c = 0; c < m.rows(); ++c) {
      const auto& id = m.channels()[c];
      if (id.device != p.device || (p.sensor && id.sensor != *p.sensor)) continue;
      rows.push_back(c);
      header += ',' + column_token(id.sensor, id.axis);
    }
    Rng noise(derive_seed(spec.seed, {0x7015E, static_cast<std::uint64_t>(p.slot)}));
    const std::int64_t start = kEpochNs + p.offset_ns;
    const std::int64_t stop = p.offset_ns == 0 ? end_ns : end_ns + 31'000'000;
    std::string csv = header + '\n';
    for (std::int64_t j = 0;; ++j) {
      const std::int64_t t = sample_time(start, spec.rate_hz, j);
      if (t > stop) break;
      const double pos = std::clamp(static_cast<double>(t - kEpochNs) / step_ns, 0.0,
                                    static_cast<double>(frames - 1));
      const auto k0 = static_cast<std::size_t>(std::floor(pos));
      const std::size_t k1 = std::min(k0 + 1, frames - 1);
      const double frac = pos - static_cast<double>(k0);
      csv += std::to_string(t);
      for (auto c : rows) {
        const auto r = m.row(c);
        double v = frac == 0.0 ? r[k0] : r[k0] + (r[k1] - r[k0]) * frac;
        if (spec.noise_sigma > 0) v += spec.noise_sigma * noise.normal();
        csv += ',';
        csv += text::format_real(v);
      }
      csv += '\n';
    }
    out.files.push_back({p.slot, SourceFormat::Canonical, std::move(csv),
                         std::string(to_string(p.slot)) + ".csv"});
  }
  return out;
}

std::string ground_truth_csv(const GroundTruth& t) {
  std::string out = "stroke,start,end,catch_end,pull_end\n";
  for (std::size_t i = 0; i < t.strokes.size(); ++i) {
    const auto& s = t.strokes[i];
    out += std::to_string(i) + ',' + std::to_string(s.start) + ',' + std::to_string(s.end) + ',' +
           std::to_string(s.catch_end) + ',' + std::to_string(s.pull_end) + '\n';
  }
  return out;
}

void write_trial_dir(const SynthTrial& trial, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + dir + ": " + ec.message(), "synth");
  nlohmann::ordered_json formats = nlohmann::ordered_json::object();
  for (const auto& f : trial.files) {
    text::write_file(dir + "/" + std::string(to_string(f.slot)) + ".csv", f.bytes);
    formats[std::string(to_string(f.slot))] = to_string(f.format);
  }
  nlohmann::ordered_json meta{{"label", to_string(trial.truth.form)},
                              {"format", formats},
                              {"strokes", trial.truth.strokes.size()},
                              {"frames", trial.truth.frames}};
  text::write_file(dir + "/trial.json", meta.dump(2) + "\n");
  text::write_file(dir + "/ground_truth.csv", ground_truth_csv(trial.truth));
}

SynthDataset generate_dataset(std::size_t n_per_class, const SynthSpec& spec, std::uint64_t seed,
                              const FeatureRegistry& registry) {
  if (n_per_class == 0) throw Error(ErrorCode::InvalidArgument, "n_per_class must be positive", "synth");
  SynthDataset out;
  for (std::size_t p = 0; p < 3; ++p) out.phases[p] = FeatureDataset{registry, kPhases[p], {}};
  constexpr std::size_t kMaxTrials = 1000;
  std::size_t next_stroke = 0;
  for (const auto cls : {Label::Optimal, Label::Suboptimal}) {
    std::size_t have = 0;
    for (std::size_t t = 0; have < n_per_class; ++t) {
      if (t == kMaxTrials)
        throw Error(ErrorCode::NoAcceptedStrokes, "synthetic trials yield no accepted strokes", "synth");
      SynthSpec s = spec;
      s.form = cls;
      s.seed = derive_seed(seed, {static_cast<std::uint64_t>(cls), t});
      auto trial = generate_trial(s);
      LoadOptions lo;
      lo.rate_hz = s.rate_hz;
      lo.label = cls;
      const auto loaded = load_trial(trial.files, lo);
      const auto records = segment_session(loaded.session, SegmentationParams{});
      auto ds = featurize_trial(loaded.session, records, registry);
      out.truths.push_back(std::move(trial.truth));
      const std::size_t take = std::min(ds[0].size(), n_per_class - have);
      for (std::size_t i = 0; i < take; ++i) {
        for (std::size_t p = 0; p < 3; ++p) {
          auto v = std::move(ds[p].rows[i]);
          v.stroke = next_stroke;
          out.phases[p].rows.push_back(std::move(v));
        }
        ++next_stroke;
      }
      have += take;
    }
  }
  return out;
}

}  // namespace paddle
