#include "paddle/segment.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "paddle/error.hpp"
#include "paddle/text.hpp"

namespace paddle {

void SegmentationParams::validate() const {
  auto fail = [](const char* what) { throw Error(ErrorCode::InvalidArgument, what, "segment"); };
  if (smooth_window_frames == 0 || smooth_window_frames % 2 == 0)
    fail("smooth_window_frames must be odd and positive");
  if (!(gap_threshold_sigma > 0)) fail("gap_threshold_sigma must be positive");
  if (min_gap_frames == 0) fail("min_gap_frames must be positive");
  if (!(min_stroke_s > 0) || !(max_stroke_s > 0)) fail("stroke duration bounds must be positive");
  if (!(min_stroke_s < max_stroke_s)) fail("min_stroke_s must be below max_stroke_s");
  if (!(catch_search_fraction > 0) || catch_search_fraction > 1)
    fail("catch_search_fraction must lie in (0, 1]");
  if (min_phase_frames == 0) fail("min_phase_frames must be positive");
  if (standard_frames < min_phase_frames) fail("standard_frames must be >= min_phase_frames");
}

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::Catch: return "catch";
    case Phase::Pull: return "pull";
    case Phase::Recovery: return "recovery";
  }
  return "?";
}

std::optional<Phase> parse_phase(std::string_view s) {
  for (auto p : kPhases)
    if (to_string(p) == s) return p;
  return std::nullopt;
}

std::string_view to_string(StrokeStatus s) {
  return s == StrokeStatus::Accepted ? "accepted" : "rejected";
}

std::string_view to_string(RejectReason r) {
  switch (r) {
    case RejectReason::None: return "none";
    case RejectReason::TooShort: return "too_short";
    case RejectReason::TooLong: return "too_long";
    case RejectReason::PhaseTooShort: return "phase_too_short";
    case RejectReason::PhaseNotFound: return "phase_not_found";
    case RejectReason::NonFinite: return "non_finite";
  }
  return "?";
}

std::vector<double> smooth(std::span<const double> x, std::size_t window) {
  const std::size_t n = x.size();
  std::vector<double> out(n);
  const std::size_t half = window / 2;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n, i + half + 1);
    double acc = 0;
    for (std::size_t j = lo; j < hi; ++j) acc += x[j];
    out[i] = acc / static_cast<double>(hi - lo);
  }
  return out;
}

namespace {

std::span<const double> required(const AlignedSession& s, const ChannelId& id) {
  auto r = s.data.find(id);
  if (!r) throw Error(ErrorCode::MissingRequiredChannel, channel_name(id), "segment");
  return s.data.row(*r);
}

StrokeRecord phases_from_smoothed(std::span<const double> qw_smooth, const StrokeRecord& stroke,
                                  const SegmentationParams& p) {
  StrokeRecord out = stroke;
  out.phases.reset();
  if (!stroke.accepted()) return out;
  auto reject = [&](RejectReason why) {
    out.status = StrokeStatus::Rejected;
    out.reason = why;
    return out;
  };
  const auto seg = qw_smooth.subspan(stroke.start_frame, stroke.length());
  if (!std::all_of(seg.begin(), seg.end(), [](double v) { return std::isfinite(v); }))
    return reject(RejectReason::NonFinite);

  const std::size_t len = seg.size();
  const auto search = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(p.catch_search_fraction * static_cast<double>(len))));
  // min_element / max_element return the first extremum: earliest-frame ties.
  const auto catch_end =
      static_cast<std::size_t>(std::min_element(seg.begin(), seg.begin() + search) - seg.begin());
  if (catch_end == 0 || catch_end + 1 >= len) return reject(RejectReason::PhaseNotFound);
  const auto pull_end = static_cast<std::size_t>(
      std::max_element(seg.begin() + catch_end + 1, seg.end()) - seg.begin());

  const std::size_t s0 = stroke.start_frame;
  out.phases = std::array<PhaseSpan, 3>{{
      {Phase::Catch, s0, s0 + catch_end},
      {Phase::Pull, s0 + catch_end, s0 + pull_end},
      {Phase::Recovery, s0 + pull_end, stroke.end_frame},
  }};
  for (const auto& ph : *out.phases)
    if (ph.length() < p.min_phase_frames) return reject(RejectReason::PhaseTooShort);
  return out;
}

}  // namespace

std::vector<StrokeRecord> segment_strokes(const AlignedSession& s, const SegmentationParams& p) {
  p.validate();
  const auto qx = smooth(required(s, kLeftQuatX), p.smooth_window_frames);
  const std::size_t n = qx.size();
  std::vector<StrokeRecord> out;
  if (n == 0) return out;

  // Population mean / standard deviation of the smoothed signal.
  const double mean = std::accumulate(qx.begin(), qx.end(), 0.0) / static_cast<double>(n);
  double ss = 0;
  for (double v : qx) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n));
  const double threshold = mean + p.gap_threshold_sigma * sd;

  // A flat signal has no gaps; rounding in the mean must not invent some.
  const auto [lo, hi] = std::minmax_element(qx.begin(), qx.end());
  const bool flat = *hi - *lo <= 1e-12 * std::max(1.0, std::abs(mean));
  std::vector<char> gap(n);
  for (std::size_t i = 0; i < n; ++i) gap[i] = !flat && qx[i] > threshold;

  // Erase gap runs shorter than min_gap_frames.
  for (std::size_t i = 0; i < n;) {
    if (!gap[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && gap[j]) ++j;
    if (j - i < p.min_gap_frames) std::fill(gap.begin() + i, gap.begin() + j, 0);
    i = j;
  }

  for (std::size_t i = 0; i < n;) {
    if (gap[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && !gap[j]) ++j;
    StrokeRecord r;
    r.index = out.size();
    r.start_frame = i;
    r.end_frame = j;
    const double dur = static_cast<double>(j - i) / s.rate_hz;
    if (dur < p.min_stroke_s) {
      r.status = StrokeStatus::Rejected;
      r.reason = RejectReason::TooShort;
    } else if (dur > p.max_stroke_s) {
      r.status = StrokeStatus::Rejected;
      r.reason = RejectReason::TooLong;
    }
    out.push_back(r);
    i = j;
  }
  return out;
}

StrokeRecord segment_phases(const AlignedSession& s, const StrokeRecord& stroke,
                            const SegmentationParams& p) {
  p.validate();
  if (stroke.end_frame > s.frames() || stroke.start_frame >= stroke.end_frame)
    throw Error(ErrorCode::InvalidArgument, "stroke span outside session", "segment");
  const auto qw = smooth(required(s, kLeftQuatW), p.smooth_window_frames);
  return phases_from_smoothed(qw, stroke, p);
}

std::vector<StrokeRecord> segment_session(const AlignedSession& s, const SegmentationParams& p) {
  auto strokes = segment_strokes(s, p);
  const auto qw = smooth(required(s, kLeftQuatW), p.smooth_window_frames);
  const auto n = static_cast<std::int64_t>(strokes.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t i = 0; i < n; ++i) {
    auto& r = strokes[static_cast<std::size_t>(i)];
    r = phases_from_smoothed(qw, r, p);
  }
  return strokes;
}

bool record_is_consistent(const StrokeRecord& r, const SegmentationParams& p) {
  if (r.start_frame >= r.end_frame) return false;
  if (r.accepted() != (r.reason == RejectReason::None)) return false;
  if (r.phases) {
    const auto& ph = *r.phases;
    if (ph[0].phase != Phase::Catch || ph[1].phase != Phase::Pull || ph[2].phase != Phase::Recovery)
      return false;
    if (ph[0].start_frame != r.start_frame || ph[2].end_frame != r.end_frame) return false;
    if (ph[0].end_frame != ph[1].start_frame || ph[1].end_frame != ph[2].start_frame) return false;
    for (const auto& x : ph)
      if (x.start_frame >= x.end_frame) return false;
  }
  if (r.accepted()) {
    if (!r.phases) return false;
    for (const auto& x : *r.phases)
      if (x.length() < p.min_phase_frames) return false;
  }
  return true;
}

std::array<ChannelMatrix, 3> standardize(const AlignedSession& s, const StrokeRecord& stroke,
                                         const SegmentationParams& p) {
  if (!stroke.accepted() || !stroke.phases)
    throw Error(ErrorCode::InvalidArgument, "standardize needs an accepted stroke", "segment");
  std::array<ChannelMatrix, 3> out;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& ph = (*stroke.phases)[i];
    const std::size_t len = std::min(ph.length(), p.standard_frames);
    out[i] = s.data.slice(ph.start_frame, ph.start_frame + len);
  }
  return out;
}

ChannelMatrix export_raw_tensor(const ChannelMatrix& phase, std::size_t standard_frames) {
  if (phase.frames() == 0) throw Error(ErrorCode::EmptyPhase, "phase has no frames", "segment");
  ChannelMatrix out(phase.channels(), standard_frames);
  for (std::size_t r = 0; r < phase.rows(); ++r) {
    auto src = phase.row(r);
    auto dst = out.row(r);
    for (std::size_t k = 0; k < standard_frames; ++k) dst[k] = src[std::min(k, src.size() - 1)];
  }
  return out;
}

std::string segments_to_csv(std::span<const StrokeRecord> records) {
  std::string out =
      "index,start_frame,end_frame,catch_start,pull_start,recovery_start,recovery_end,status,reason\n";
  for (const auto& r : records) {
    out += std::to_string(r.index) + ',' + std::to_string(r.start_frame) + ',' +
           std::to_string(r.end_frame) + ',';
    if (r.phases) {
      const auto& ph = *r.phases;
      out += std::to_string(ph[0].start_frame) + ',' + std::to_string(ph[1].start_frame) + ',' +
             std::to_string(ph[2].start_frame) + ',' + std::to_string(ph[2].end_frame) + ',';
    } else {
      out += ",,,,";
    }
    out += std::string(to_string(r.status)) + ',' + std::string(to_string(r.reason)) + '\n';
  }
  return out;
}

std::vector<StrokeRecord> segments_from_csv(std::string_view csv) {
  std::vector<StrokeRecord> out;
  auto ls = text::lines(csv);
  auto bad = [](std::size_t line) {
    return Error(ErrorCode::InvalidArgument, "malformed segment row " + std::to_string(line),
                 "segment");
  };
  for (std::size_t l = 1; l < ls.size(); ++l) {
    if (text::trim(ls[l]).empty()) continue;
    auto c = text::split(ls[l]);
    if (c.size() != 9) throw bad(l);
    auto num = [&](std::size_t i) {
      auto v = text::parse_int(c[i]);
      if (!v || *v < 0) throw bad(l);
      return static_cast<std::size_t>(*v);
    };
    StrokeRecord r;
    r.index = num(0);
    r.start_frame = num(1);
    r.end_frame = num(2);
    if (!c[3].empty()) {
      const auto a = num(3), b = num(4), d = num(5), e = num(6);
      r.phases = std::array<PhaseSpan, 3>{
          {{Phase::Catch, a, b}, {Phase::Pull, b, d}, {Phase::Recovery, d, e}}};
    }
    r.status = c[7] == "accepted" ? StrokeStatus::Accepted : StrokeStatus::Rejected;
    r.reason = RejectReason::None;
    for (auto why : {RejectReason::TooShort, RejectReason::TooLong, RejectReason::PhaseTooShort,
                     RejectReason::PhaseNotFound, RejectReason::NonFinite})
      if (c[8] == to_string(why)) r.reason = why;
    out.push_back(r);
  }
  return out;
}

}  // namespace paddle
