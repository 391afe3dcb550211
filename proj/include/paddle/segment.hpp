#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "paddle/ingest.hpp"

namespace paddle {

struct SegmentationParams {
  std::size_t smooth_window_frames = 5;  // odd
  double gap_threshold_sigma = 0.5;
  std::size_t min_gap_frames = 10;
  double min_stroke_s = 0.5;
  double max_stroke_s = 5.0;
  double catch_search_fraction = 0.6;
  std::size_t min_phase_frames = 8;
  std::size_t standard_frames = 40;

  // Throws InvalidArgument naming the first violated constraint.
  void validate() const;
};

enum class Phase : std::uint8_t { Catch, Pull, Recovery };
inline constexpr std::array<Phase, 3> kPhases{Phase::Catch, Phase::Pull, Phase::Recovery};
std::string_view to_string(Phase p);
std::optional<Phase> parse_phase(std::string_view s);

// Half-open session frame range.
struct PhaseSpan {
  Phase phase = Phase::Catch;
  std::size_t start_frame = 0;
  std::size_t end_frame = 0;

  std::size_t length() const noexcept { return end_frame - start_frame; }
  friend bool operator==(const PhaseSpan&, const PhaseSpan&) = default;
};

enum class StrokeStatus : std::uint8_t { Accepted, Rejected };
// TooShort/TooLong: run duration outside [min_stroke_s, max_stroke_s].
enum class RejectReason : std::uint8_t { None, TooShort, TooLong, PhaseTooShort, PhaseNotFound, NonFinite };
std::string_view to_string(StrokeStatus s);
std::string_view to_string(RejectReason r);

struct StrokeRecord {
  std::size_t index = 0;
  std::size_t start_frame = 0;
  std::size_t end_frame = 0;
  std::optional<std::array<PhaseSpan, 3>> phases;
  StrokeStatus status = StrokeStatus::Accepted;
  RejectReason reason = RejectReason::None;

  std::size_t length() const noexcept { return end_frame - start_frame; }
  bool accepted() const noexcept { return status == StrokeStatus::Accepted; }
  friend bool operator==(const StrokeRecord&, const StrokeRecord&) = default;
};

// Centered moving average; the window shrinks at the edges.
std::vector<double> smooth(std::span<const double> x, std::size_t window);

// Candidate strokes from left-watch quaternion X (phases absent).
// Accepted here means "duration within bounds", pending phase segmentation.
std::vector<StrokeRecord> segment_strokes(const AlignedSession& s, const SegmentationParams& p);

// Populates phases from left-watch quaternion W; may reject.
StrokeRecord segment_phases(const AlignedSession& s, const StrokeRecord& stroke,
                            const SegmentationParams& p);

// Both steps for every stroke. Phase segmentation of distinct strokes is
// independent and runs in parallel.
std::vector<StrokeRecord> segment_session(const AlignedSession& s, const SegmentationParams& p);

// Record-level invariants (phase contiguity, Accepted => guards hold).
bool record_is_consistent(const StrokeRecord& r, const SegmentationParams& p);

// Each phase truncated to its first T frames (no padding). Requires Accepted.
std::array<ChannelMatrix, 3> standardize(const AlignedSession& s, const StrokeRecord& stroke,
                                         const SegmentationParams& p);

// Fixed [channels x T]; short phases are right-padded with their final frame.
ChannelMatrix export_raw_tensor(const ChannelMatrix& phase, std::size_t standard_frames);

// One row per stroke: index,start_frame,end_frame,catch_start,pull_start,
// recovery_start,recovery_end,status,reason (phase columns empty when absent).
std::string segments_to_csv(std::span<const StrokeRecord> records);
std::vector<StrokeRecord> segments_from_csv(std::string_view csv);

}  // namespace paddle
