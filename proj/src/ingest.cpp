#include "paddle/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

#include <json.hpp>

#include "paddle/error.hpp"
#include "paddle/kernels.hpp"
#include "paddle/text.hpp"

namespace paddle {

using nlohmann::json;

std::string_view to_string(SourceFormat f) {
  switch (f) {
    case SourceFormat::Canonical: return "canonical";
    case SourceFormat::PhoneLoggerExport: return "phone_logger";
    case SourceFormat::WatchLoggerExport: return "watch_logger";
  }
  return "?";
}

std::optional<SourceFormat> parse_source_format(std::string_view s) {
  for (auto f : {SourceFormat::Canonical, SourceFormat::PhoneLoggerExport,
                 SourceFormat::WatchLoggerExport})
    if (to_string(f) == s) return f;
  return std::nullopt;
}

std::string_view to_string(TimeUnit u) {
  switch (u) {
    case TimeUnit::Nanoseconds: return "ns";
    case TimeUnit::Microseconds: return "us";
    case TimeUnit::Milliseconds: return "ms";
  }
  return "?";
}

TimeUnit infer_time_unit(double magnitude) {
  magnitude = std::abs(magnitude);
  if (magnitude < 1e13) return TimeUnit::Milliseconds;
  if (magnitude < 1e16) return TimeUnit::Microseconds;
  return TimeUnit::Nanoseconds;
}

// ---------------------------------------------------------------------------
// Watch column map

const WatchColumnMap& WatchColumnMap::builtin() {
  static const WatchColumnMap map = [] {
    WatchColumnMap m;
    auto add = [&](const char* col, Sensor s, Axis a) { m.columns.emplace(col, SensorAxis{s, a}); };
    add("accelerationX", Sensor::Accelerometer, Axis::X);
    add("accelerationY", Sensor::Accelerometer, Axis::Y);
    add("accelerationZ", Sensor::Accelerometer, Axis::Z);
    add("rotationRateX", Sensor::RotationRate, Axis::X);
    add("rotationRateY", Sensor::RotationRate, Axis::Y);
    add("rotationRateZ", Sensor::RotationRate, Axis::Z);
    add("roll", Sensor::Orientation, Axis::Roll);
    add("pitch", Sensor::Orientation, Axis::Pitch);
    add("yaw", Sensor::Orientation, Axis::Yaw);
    add("gravityX", Sensor::Gravity, Axis::X);
    add("gravityY", Sensor::Gravity, Axis::Y);
    add("gravityZ", Sensor::Gravity, Axis::Z);
    add("quaternionX", Sensor::Quaternion, Axis::X);
    add("quaternionY", Sensor::Quaternion, Axis::Y);
    add("quaternionZ", Sensor::Quaternion, Axis::Z);
    add("quaternionW", Sensor::Quaternion, Axis::W);
    add("userAccelerationHorizontal", Sensor::UserAcceleration, Axis::X);
    add("userAccelerationVertical", Sensor::UserAcceleration, Axis::Y);
    return m;
  }();
  return map;
}

WatchColumnMap WatchColumnMap::from_json(std::string_view json_text) {
  WatchColumnMap m;
  try {
    const json j = json::parse(json_text);
    m.version = j.at("version").get<int>();
    if (m.version != 1)
      throw Error(ErrorCode::VersionUnsupported, "watch column map version " +
                                                     std::to_string(m.version));
    m.time_column = j.value("time_column", std::string("time"));
    for (const auto& [col, target] : j.at("columns").items()) {
      auto sa = parse_column_token(target.get<std::string>());
      if (!sa) throw Error(ErrorCode::InvalidArgument, "bad channel mapping for " + col);
      m.columns.emplace(col, *sa);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("watch column map: ") + e.what());
  }
  return m;
}

std::string ParseReport::to_json() const {
  json j;
  j["source"] = source;
  j["rows_total"] = rows_total;
  j["rows_dropped"] = rows_dropped;
  j["rows_reordered"] = rows_reordered;
  j["duplicates_collapsed"] = duplicates_collapsed;
  j["ignored_columns"] = ignored_columns;
  j["time_unit"] = std::string(to_string(time_unit));
  return j.dump();
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

// A timestamp cell kept exact until the unit is known.
struct RawTime {
  bool negative = false;
  std::int64_t whole = 0;
  std::int64_t frac = 0;  // fractional digits as an integer
  int frac_digits = 0;
  std::optional<double> real;  // exponent notation falls back to double

  double magnitude() const { return real ? std::abs(*real) : static_cast<double>(whole); }
};

std::optional<RawTime> parse_raw_time(std::string_view s) {
  s = text::trim(s);
  if (s.empty()) return std::nullopt;
  if (s.find_first_of("eE") != std::string_view::npos) {
    auto v = text::parse_real(s);
    if (!v || !std::isfinite(*v)) return std::nullopt;
    RawTime t;
    t.real = *v;
    return t;
  }
  RawTime t;
  if (s.front() == '-') {
    t.negative = true;
    s.remove_prefix(1);
  }
  const auto dot = s.find('.');
  auto whole = s.substr(0, dot);
  if (whole.empty()) whole = "0";
  auto w = text::parse_int(whole);
  if (!w || *w < 0) return std::nullopt;
  t.whole = *w;
  if (dot != std::string_view::npos) {
    auto frac = s.substr(dot + 1);
    if (frac.size() > 18) frac = frac.substr(0, 18);
    if (!frac.empty()) {
      auto f = text::parse_int(frac);
      if (!f || *f < 0) return std::nullopt;
      t.frac = *f;
      t.frac_digits = static_cast<int>(frac.size());
    }
  }
  return t;
}

std::int64_t unit_multiplier(TimeUnit u) {
  switch (u) {
    case TimeUnit::Milliseconds: return 1'000'000;
    case TimeUnit::Microseconds: return 1'000;
    case TimeUnit::Nanoseconds: return 1;
  }
  return 1;
}

std::optional<std::int64_t> to_ns(const RawTime& t, TimeUnit u) {
  const auto mult = unit_multiplier(u);
  if (t.real) {
    const long double v = static_cast<long double>(*t.real) * mult;
    if (std::abs(v) > 9.2e18L) return std::nullopt;
    return static_cast<std::int64_t>(std::llround(v));
  }
  if (t.whole > INT64_MAX / mult) return std::nullopt;
  std::int64_t ns = t.whole * mult;
  if (t.frac_digits > 0) {
    const long double frac = static_cast<long double>(t.frac) /
                             std::pow(10.0L, static_cast<long double>(t.frac_digits));
    ns += static_cast<std::int64_t>(std::llround(frac * mult));
  }
  return t.negative ? -ns : ns;
}

struct ColumnTarget {
  std::size_t index;
  ChannelId channel;
};

}  // namespace

ParseResult parse_sensor_file(std::string_view bytes, const ParseOptions& opts) {
  ParseResult result;
  auto& report = result.report;
  report.source = opts.source_name;

  auto all = text::lines(bytes);
  std::size_t first = 0;
  while (first < all.size() && text::trim(all[first]).empty()) ++first;
  if (first == all.size()) throw Error(ErrorCode::EmptyFile, "no header row", "parse", opts.source_name);

  const auto header = text::split(all[first]);
  std::string_view time_name;
  switch (opts.format) {
    case SourceFormat::Canonical: time_name = "time_ns"; break;
    case SourceFormat::PhoneLoggerExport: time_name = "time"; break;
    case SourceFormat::WatchLoggerExport: {
      const auto& map = opts.watch_map ? *opts.watch_map : WatchColumnMap::builtin();
      time_name = map.time_column;
      break;
    }
  }
  std::optional<std::size_t> time_col;
  std::vector<ColumnTarget> targets;
  std::set<ChannelId> seen;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto name = header[c];
    if (name == time_name) {
      time_col = c;
      continue;
    }
    std::optional<SensorAxis> sa;
    switch (opts.format) {
      case SourceFormat::Canonical:
        sa = parse_column_token(name);
        break;
      case SourceFormat::PhoneLoggerExport:
        if (!opts.sensor)
          throw Error(ErrorCode::InvalidArgument, "phone export needs a sensor hint", "parse",
                      opts.source_name);
        if (auto ax = parse_axis(name);
            ax && (*ax == Axis::X || *ax == Axis::Y || *ax == Axis::Z))
          sa = SensorAxis{*opts.sensor, *ax};
        break;
      case SourceFormat::WatchLoggerExport: {
        const auto& map = opts.watch_map ? *opts.watch_map : WatchColumnMap::builtin();
        if (auto it = map.columns.find(name); it != map.columns.end()) sa = it->second;
        break;
      }
    }
    ChannelId id{opts.device, sa ? sa->sensor : Sensor{}, sa ? sa->axis : Axis{}};
    const bool wanted = sa && is_valid(id) && (!opts.sensor || sa->sensor == *opts.sensor) &&
                        !seen.contains(id);
    if (!wanted) {
      report.ignored_columns.emplace_back(name);
      continue;
    }
    seen.insert(id);
    targets.push_back({c, id});
  }
  if (!time_col)
    throw Error(ErrorCode::MissingTimeColumn, "expected column '" + std::string(time_name) + "'",
                "parse", opts.source_name);

  struct Row {
    RawTime time;
    std::vector<double> values;
  };
  std::vector<Row> rows;
  for (std::size_t l = first + 1; l < all.size(); ++l) {
    if (text::trim(all[l]).empty()) continue;
    ++report.rows_total;
    const auto cells = text::split(all[l]);
    if (cells.size() != header.size()) {
      ++report.rows_dropped;
      continue;
    }
    auto t = parse_raw_time(cells[*time_col]);
    Row row;
    bool ok = t.has_value();
    row.values.reserve(targets.size());
    for (std::size_t k = 0; ok && k < targets.size(); ++k) {
      auto v = text::parse_real(cells[targets[k].index]);
      if (!v || !std::isfinite(*v)) ok = false;
      else row.values.push_back(*v);
    }
    if (!ok) {
      ++report.rows_dropped;
      continue;
    }
    row.time = *t;
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorCode::EmptyFile, "no data rows", "parse", opts.source_name);

  report.time_unit = opts.format == SourceFormat::Canonical
                         ? TimeUnit::Nanoseconds
                         : infer_time_unit(rows.front().time.magnitude());

  std::vector<std::pair<std::int64_t, std::size_t>> order;  // (ns, row)
  order.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto ns = to_ns(rows[i].time, report.time_unit);
    if (!ns) {
      ++report.rows_dropped;
      continue;
    }
    order.emplace_back(*ns, i);
  }
  if (order.empty()) throw Error(ErrorCode::EmptyFile, "no data rows", "parse", opts.source_name);

  std::int64_t running_max = order.front().first;
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (order[i].first < running_max) ++report.rows_reordered;
    running_max = std::max(running_max, order[i].first);
  }
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  // Keep the last occurrence of each duplicate timestamp.
  std::vector<std::pair<std::int64_t, std::size_t>> kept;
  kept.reserve(order.size());
  for (const auto& e : order) {
    if (!kept.empty() && kept.back().first == e.first) {
      kept.back() = e;
      ++report.duplicates_collapsed;
    } else {
      kept.push_back(e);
    }
  }
  if (opts.strict_time && (report.rows_reordered > 0 || report.duplicates_collapsed > 0))
    throw Error(ErrorCode::NonMonotonicTime,
                std::to_string(report.rows_reordered) + " out-of-order, " +
                    std::to_string(report.duplicates_collapsed) + " duplicate timestamps",
                "parse", opts.source_name);

  for (std::size_t k = 0; k < targets.size(); ++k) {
    SampleSeries s;
    s.channel = targets[k].channel;
    s.timestamps_ns.reserve(kept.size());
    s.values.reserve(kept.size());
    for (const auto& [ns, i] : kept) {
      s.timestamps_ns.push_back(ns);
      s.values.push_back(rows[i].values[k]);
    }
    result.series.push_back(std::move(s));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Alignment

std::span<const double> AlignedSession::channel(const ChannelId& id) const {
  auto r = data.find(id);
  if (!r) throw Error(ErrorCode::MissingChannel, channel_name(id));
  return data.row(*r);
}

std::size_t grid_frame_count(std::int64_t t0_ns, std::int64_t t1_ns, double rate_hz) {
  const long double span = static_cast<long double>(t1_ns - t0_ns);
  return static_cast<std::size_t>(std::floor(span * rate_hz / 1e9L)) + 1;
}

namespace {

void renormalize_quaternions(ChannelMatrix& m) {
  for (Device d : {Device::LeftWatch, Device::RightWatch}) {
    std::array<std::optional<std::size_t>, 4> rows{
        m.find({d, Sensor::Quaternion, Axis::W}), m.find({d, Sensor::Quaternion, Axis::X}),
        m.find({d, Sensor::Quaternion, Axis::Y}), m.find({d, Sensor::Quaternion, Axis::Z})};
    if (!std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.has_value(); }))
      continue;
    for (std::size_t f = 0; f < m.frames(); ++f) {
      double n2 = 0;
      for (const auto& r : rows) n2 += m.row(*r)[f] * m.row(*r)[f];
      // Rows that are already unit length are left bit-identical.
      if (n2 <= 0 || std::abs(n2 - 1.0) <= 1e-12) continue;
      const double inv = 1.0 / std::sqrt(n2);
      for (const auto& r : rows) m.row(*r)[f] *= inv;
    }
  }
}

}  // namespace

AlignedSession align(std::span<const SampleSeries> series, double rate_hz) {
  if (!(rate_hz > 0) || !std::isfinite(rate_hz))
    throw Error(ErrorCode::InvalidArgument, "rate_hz must be positive", "align");
  if (series.empty()) throw Error(ErrorCode::InvalidArgument, "no series", "align");

  std::vector<std::size_t> order(series.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](auto a, auto b) { return series[a].channel < series[b].channel; });

  std::int64_t t0 = INT64_MIN;
  std::int64_t t1 = INT64_MAX;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& s = series[order[i]];
    if (s.timestamps_ns.empty() || s.timestamps_ns.size() != s.values.size())
      throw Error(ErrorCode::InvalidArgument, "empty or ragged series", "align",
                  channel_name(s.channel));
    if (i > 0 && series[order[i - 1]].channel == s.channel)
      throw Error(ErrorCode::DuplicateChannel, "channel supplied twice", "align",
                  channel_name(s.channel));
    t0 = std::max(t0, s.timestamps_ns.front());
    t1 = std::min(t1, s.timestamps_ns.back());
  }
  if (t1 <= t0)
    throw Error(ErrorCode::NoTemporalOverlap, "series time spans do not intersect", "align");

  std::vector<ChannelId> registry;
  for (auto i : order) registry.push_back(series[i].channel);
  for (const auto& req : {kLeftQuatX, kLeftQuatW})
    if (!std::binary_search(registry.begin(), registry.end(), req))
      throw Error(ErrorCode::MissingRequiredChannel, channel_name(req), "align");

  kernels::Grid grid{t0, 1e9 / rate_hz, grid_frame_count(t0, t1, rate_hz)};
  std::vector<kernels::SeriesView> views;
  views.reserve(order.size());
  for (auto i : order) views.push_back({series[i].timestamps_ns, series[i].values});

  AlignedSession s;
  s.rate_hz = rate_hz;
  s.t0_ns = t0;
  s.t1_ns = t1;
  s.data = ChannelMatrix(std::move(registry), grid.frames);
  kernels::resample_rows(views, grid, s.data);
  renormalize_quaternions(s.data);
  for (double v : s.data.values())
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "non-finite resampled value", "align");
  return s;
}

std::vector<SampleSeries> session_series(const AlignedSession& s) {
  std::vector<SampleSeries> out;
  const double step = 1e9 / s.rate_hz;
  std::vector<std::int64_t> times(s.frames());
  for (std::size_t k = 0; k < s.frames(); ++k)
    times[k] = s.t0_ns + static_cast<std::int64_t>(std::llround(static_cast<double>(k) * step));
  for (std::size_t r = 0; r < s.data.rows(); ++r) {
    auto row = s.data.row(r);
    out.push_back({s.data.channels()[r], times, std::vector<double>(row.begin(), row.end())});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trials

std::string_view to_string(TrialSlot s) {
  switch (s) {
    case TrialSlot::PhoneAccel: return "phone_accel";
    case TrialSlot::PhoneGyro: return "phone_gyro";
    case TrialSlot::PhoneMag: return "phone_mag";
    case TrialSlot::WatchLeft: return "watch_left";
    case TrialSlot::WatchRight: return "watch_right";
  }
  return "?";
}

std::optional<TrialSlot> parse_trial_slot(std::string_view s) {
  for (auto slot : kTrialSlots)
    if (to_string(slot) == s) return slot;
  return std::nullopt;
}

std::string LoadedTrial::report_json() const {
  json j = json::array();
  for (const auto& r : reports) j.push_back(json::parse(r.to_json()));
  return j.dump(2);
}

LoadedTrial load_trial(std::span<const TrialFile> files, const LoadOptions& opts) {
  if (files.size() != kTrialSlots.size())
    throw Error(ErrorCode::Arity,
                "expected 5 files (phone_accel, phone_gyro, phone_mag, watch_left, watch_right), got " +
                    std::to_string(files.size()),
                "ingest");
  std::array<const TrialFile*, 5> by_slot{};
  for (const auto& f : files) {
    auto& slot = by_slot[static_cast<std::size_t>(f.slot)];
    if (slot)
      throw Error(ErrorCode::Arity, "slot given twice", "ingest", std::string(to_string(f.slot)));
    slot = &f;
  }

  LoadedTrial out;
  std::vector<SampleSeries> all;
  for (auto slot : kTrialSlots) {
    const TrialFile& f = *by_slot[static_cast<std::size_t>(slot)];
    ParseOptions po;
    po.format = f.format;
    po.watch_map = opts.watch_map;
    po.strict_time = opts.strict_time;
    po.source_name = f.name.empty() ? std::string(to_string(slot)) : f.name;
    switch (slot) {
      case TrialSlot::PhoneAccel: po.device = Device::Phone; po.sensor = Sensor::Accelerometer; break;
      case TrialSlot::PhoneGyro: po.device = Device::Phone; po.sensor = Sensor::Gyroscope; break;
      case TrialSlot::PhoneMag: po.device = Device::Phone; po.sensor = Sensor::Magnetometer; break;
      case TrialSlot::WatchLeft: po.device = Device::LeftWatch; break;
      case TrialSlot::WatchRight: po.device = Device::RightWatch; break;
    }
    try {
      auto parsed = parse_sensor_file(f.bytes, po);
      out.reports.push_back(std::move(parsed.report));
      for (auto& s : parsed.series) all.push_back(std::move(s));
    } catch (const Error& e) {
      throw e.with_stage("ingest", po.source_name);
    }
  }
  try {
    out.session = align(all, opts.rate_hz);
  } catch (const Error& e) {
    throw e.with_stage("ingest");
  }
  out.session.label = opts.label;
  return out;
}

LoadedTrial load_trial_dir(const std::string& dir, LoadOptions opts) {
  namespace fs = std::filesystem;
  std::map<TrialSlot, SourceFormat> formats;
  const fs::path meta = fs::path(dir) / "trial.json";
  if (fs::exists(meta)) {
    try {
      const json j = json::parse(text::read_file(meta.string()));
      if (j.contains("label")) {
        auto l = parse_label(j["label"].get<std::string>());
        if (!l) throw Error(ErrorCode::InvalidArgument, "bad label in trial.json", "ingest", dir);
        opts.label = *l;
      }
      if (j.contains("format"))
        for (const auto& [k, v] : j["format"].items()) {
          auto slot = parse_trial_slot(k);
          auto fmt = parse_source_format(v.get<std::string>());
          if (!slot || !fmt)
            throw Error(ErrorCode::InvalidArgument, "bad format entry '" + k + "'", "ingest", dir);
          formats[*slot] = *fmt;
        }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::InvalidArgument, e.what(), "ingest", meta.string());
    }
  }
  std::vector<TrialFile> files;
  for (auto slot : kTrialSlots) {
    const fs::path p = fs::path(dir) / (std::string(to_string(slot)) + ".csv");
    if (!fs::exists(p))
      throw Error(ErrorCode::Arity, "missing file", "ingest", p.string());
    TrialFile f;
    f.slot = slot;
    f.format = formats.contains(slot) ? formats[slot] : SourceFormat::Canonical;
    f.bytes = text::read_file(p.string());
    f.name = p.string();
    files.push_back(std::move(f));
  }
  return load_trial(files, opts);
}

std::string session_to_csv(const AlignedSession& s) {
  std::string out = "time_ns";
  for (const auto& c : s.registry()) out += "," + channel_name(c);
  out += '\n';
  const double step = 1e9 / s.rate_hz;
  for (std::size_t k = 0; k < s.frames(); ++k) {
    out += std::to_string(s.t0_ns + std::llround(static_cast<double>(k) * step));
    for (std::size_t r = 0; r < s.data.rows(); ++r) {
      out += ',';
      out += text::format_real(s.data.row(r)[k]);
    }
    out += '\n';
  }
  return out;
}

}  // namespace paddle
