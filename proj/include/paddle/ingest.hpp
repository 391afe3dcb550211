#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "paddle/channel.hpp"

namespace paddle {

struct SampleSeries {
  ChannelId channel;
  std::vector<std::int64_t> timestamps_ns;
  std::vector<double> values;
};

enum class SourceFormat : std::uint8_t { Canonical, PhoneLoggerExport, WatchLoggerExport };
std::string_view to_string(SourceFormat f);
std::optional<SourceFormat> parse_source_format(std::string_view s);

enum class TimeUnit : std::uint8_t { Nanoseconds, Microseconds, Milliseconds };
std::string_view to_string(TimeUnit u);

// values < 1e13 => ms, < 1e16 => us, else ns.
TimeUnit infer_time_unit(double magnitude);

// Column-name -> channel mapping for the watch logger's wide export.
// Shipped as a versioned JSON file (config/watch_columns.v1.json); the same
// table is compiled in as the default.
struct WatchColumnMap {
  int version = 1;
  std::string time_column = "time";
  std::map<std::string, SensorAxis, std::less<>> columns;

  static const WatchColumnMap& builtin();
  static WatchColumnMap from_json(std::string_view json_text);
};

// Counts only, never payload data.
struct ParseReport {
  std::string source;
  std::size_t rows_total = 0;
  std::size_t rows_dropped = 0;
  std::size_t rows_reordered = 0;
  std::size_t duplicates_collapsed = 0;
  std::vector<std::string> ignored_columns;
  TimeUnit time_unit = TimeUnit::Nanoseconds;

  std::string to_json() const;
};

struct ParseOptions {
  SourceFormat format = SourceFormat::Canonical;
  Device device = Device::Phone;
  // Required for PhoneLoggerExport, whose columns are bare x/y/z.
  std::optional<Sensor> sensor;
  const WatchColumnMap* watch_map = nullptr;  // builtin when null
  // Reject out-of-order or duplicate timestamps instead of repairing them.
  bool strict_time = false;
  std::string source_name;
};

struct ParseResult {
  std::vector<SampleSeries> series;
  ParseReport report;
};

// Errors: MissingTimeColumn, EmptyFile, NonMonotonicTime (strict mode only).
ParseResult parse_sensor_file(std::string_view bytes, const ParseOptions& opts);

struct AlignedSession {
  double rate_hz = 50.0;
  std::int64_t t0_ns = 0;
  std::int64_t t1_ns = 0;
  ChannelMatrix data;
  Label label = Label::Unlabeled;

  std::size_t frames() const noexcept { return data.frames(); }
  const std::vector<ChannelId>& registry() const noexcept { return data.channels(); }
  std::span<const double> channel(const ChannelId& id) const;  // throws MissingChannel
};

inline constexpr double kDefaultRateHz = 50.0;

std::size_t grid_frame_count(std::int64_t t0_ns, std::int64_t t1_ns, double rate_hz);

// Intersects all spans, resamples every channel by linear interpolation onto
// the uniform grid, renormalizes quaternion rows per frame.
// Errors: NoTemporalOverlap, MissingRequiredChannel, DuplicateChannel.
AlignedSession align(std::span<const SampleSeries> series, double rate_hz = kDefaultRateHz);

// Turns an aligned session back into per-channel series (timestamps on the
// grid), e.g. to re-align it.
std::vector<SampleSeries> session_series(const AlignedSession& s);

enum class TrialSlot : std::uint8_t { PhoneAccel, PhoneGyro, PhoneMag, WatchLeft, WatchRight };
inline constexpr std::array<TrialSlot, 5> kTrialSlots{TrialSlot::PhoneAccel, TrialSlot::PhoneGyro,
                                                      TrialSlot::PhoneMag, TrialSlot::WatchLeft,
                                                      TrialSlot::WatchRight};
// Multipart field / file stem: phone_accel, phone_gyro, phone_mag, watch_left, watch_right.
std::string_view to_string(TrialSlot s);
std::optional<TrialSlot> parse_trial_slot(std::string_view s);

struct TrialFile {
  TrialSlot slot = TrialSlot::PhoneAccel;
  SourceFormat format = SourceFormat::Canonical;
  std::string bytes;
  std::string name;  // for diagnostics; defaults to the slot name
};

struct LoadOptions {
  double rate_hz = kDefaultRateHz;
  Label label = Label::Unlabeled;
  const WatchColumnMap* watch_map = nullptr;
  bool strict_time = false;
};

struct LoadedTrial {
  AlignedSession session;
  std::vector<ParseReport> reports;  // slot order

  std::string report_json() const;
};

// Exactly the five slots, each once. Errors carry stage "ingest" and the
// offending file as context.
LoadedTrial load_trial(std::span<const TrialFile> files, const LoadOptions& opts = {});

// Reads <dir>/<slot>.csv for every slot plus an optional <dir>/trial.json
// ({"label": "optimal", "format": {"watch_left": "canonical", ...}}).
LoadedTrial load_trial_dir(const std::string& dir, LoadOptions opts = {});

// Canonical session CSV: time_ns,<full channel name>...
std::string session_to_csv(const AlignedSession& s);

}  // namespace paddle
