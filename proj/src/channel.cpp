#include "paddle/channel.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>
#include <utility>

namespace paddle {

namespace {

constexpr std::array<std::pair<Device, std::string_view>, 3> kDeviceNames{{
    {Device::LeftWatch, "left_watch"},
    {Device::RightWatch, "right_watch"},
    {Device::Phone, "phone"},
}};

constexpr std::array<std::pair<Sensor, std::string_view>, 8> kSensorNames{{
    {Sensor::Accelerometer, "accelerometer"},
    {Sensor::RotationRate, "rotation_rate"},
    {Sensor::Orientation, "orientation"},
    {Sensor::Gravity, "gravity"},
    {Sensor::Quaternion, "quaternion"},
    {Sensor::UserAcceleration, "user_acceleration"},
    {Sensor::Magnetometer, "magnetometer"},
    {Sensor::Gyroscope, "gyroscope"},
}};

// Short per-file column prefixes.
constexpr std::array<std::pair<Sensor, std::string_view>, 8> kSensorTokens{{
    {Sensor::Accelerometer, "accel"},
    {Sensor::RotationRate, "rotation"},
    {Sensor::Orientation, "orientation"},
    {Sensor::Gravity, "gravity"},
    {Sensor::Quaternion, "quat"},
    {Sensor::UserAcceleration, "user_accel"},
    {Sensor::Magnetometer, "mag"},
    {Sensor::Gyroscope, "gyro"},
}};

constexpr std::array<std::pair<Axis, std::string_view>, 7> kAxisNames{{
    {Axis::X, "x"},
    {Axis::Y, "y"},
    {Axis::Z, "z"},
    {Axis::W, "w"},
    {Axis::Roll, "roll"},
    {Axis::Pitch, "pitch"},
    {Axis::Yaw, "yaw"},
}};

constexpr std::array<std::pair<Label, std::string_view>, 3> kLabelNames{{
    {Label::Optimal, "optimal"},
    {Label::Suboptimal, "suboptimal"},
    {Label::Unlabeled, "unlabeled"},
}};

template <typename E, std::size_t N>
std::string_view name_of(const std::array<std::pair<E, std::string_view>, N>& table, E e) {
  for (const auto& [k, v] : table)
    if (k == e) return v;
  return "?";
}

template <typename E, std::size_t N>
std::optional<E> value_of(const std::array<std::pair<E, std::string_view>, N>& table,
                          std::string_view s) {
  for (const auto& [k, v] : table)
    if (v == s) return k;
  return std::nullopt;
}

bool watch_only(Sensor s) {
  switch (s) {
    case Sensor::RotationRate:
    case Sensor::Orientation:
    case Sensor::Gravity:
    case Sensor::Quaternion:
    case Sensor::UserAcceleration:
      return true;
    default:
      return false;
  }
}

}  // namespace

bool is_valid(const ChannelId& id) noexcept {
  const bool xyz = id.axis == Axis::X || id.axis == Axis::Y || id.axis == Axis::Z;
  bool axis_ok = false;
  switch (id.sensor) {
    case Sensor::Quaternion:
      axis_ok = xyz || id.axis == Axis::W;
      break;
    case Sensor::Orientation:
      axis_ok = id.axis == Axis::Roll || id.axis == Axis::Pitch || id.axis == Axis::Yaw;
      break;
    default:
      axis_ok = xyz;
  }
  if (!axis_ok) return false;
  const bool phone = id.device == Device::Phone;
  if ((id.sensor == Sensor::Magnetometer || id.sensor == Sensor::Gyroscope) && !phone)
    return false;
  if (watch_only(id.sensor) && phone) return false;
  return true;
}

std::string_view to_string(Device d) { return name_of(kDeviceNames, d); }
std::string_view to_string(Sensor s) { return name_of(kSensorNames, s); }
std::string_view to_string(Axis a) { return name_of(kAxisNames, a); }
std::string_view to_string(Label l) { return name_of(kLabelNames, l); }

std::optional<Device> parse_device(std::string_view s) { return value_of(kDeviceNames, s); }
std::optional<Sensor> parse_sensor(std::string_view s) { return value_of(kSensorNames, s); }
std::optional<Axis> parse_axis(std::string_view s) { return value_of(kAxisNames, s); }
std::optional<Label> parse_label(std::string_view s) { return value_of(kLabelNames, s); }

std::string channel_name(const ChannelId& id) {
  std::string out(to_string(id.device));
  out += '.';
  out += to_string(id.sensor);
  out += '.';
  out += to_string(id.axis);
  return out;
}

std::optional<ChannelId> parse_channel_name(std::string_view name) {
  const auto d1 = name.find('.');
  if (d1 == std::string_view::npos) return std::nullopt;
  const auto d2 = name.find('.', d1 + 1);
  if (d2 == std::string_view::npos) return std::nullopt;
  auto dev = parse_device(name.substr(0, d1));
  auto sen = parse_sensor(name.substr(d1 + 1, d2 - d1 - 1));
  auto ax = parse_axis(name.substr(d2 + 1));
  if (!dev || !sen || !ax) return std::nullopt;
  ChannelId id{*dev, *sen, *ax};
  if (!is_valid(id)) return std::nullopt;
  return id;
}

std::string column_token(Sensor s, Axis a) {
  if (s == Sensor::Orientation) return std::string(to_string(a));
  std::string out(name_of(kSensorTokens, s));
  out += '_';
  out += to_string(a);
  return out;
}

std::optional<SensorAxis> parse_column_token(std::string_view token) {
  if (auto ax = parse_axis(token);
      ax && (*ax == Axis::Roll || *ax == Axis::Pitch || *ax == Axis::Yaw))
    return SensorAxis{Sensor::Orientation, *ax};
  // Long form "sensor.axis" is accepted as well.
  if (auto dot = token.find('.'); dot != std::string_view::npos) {
    auto sen = parse_sensor(token.substr(0, dot));
    auto ax = parse_axis(token.substr(dot + 1));
    if (sen && ax) return SensorAxis{*sen, *ax};
    return std::nullopt;
  }
  const auto us = token.rfind('_');
  if (us == std::string_view::npos) return std::nullopt;
  auto sen = value_of(kSensorTokens, token.substr(0, us));
  auto ax = parse_axis(token.substr(us + 1));
  if (!sen || !ax) return std::nullopt;
  return SensorAxis{*sen, *ax};
}

std::vector<ChannelId> canonical_channels(Device d) {
  std::vector<ChannelId> out;
  auto add = [&](Sensor s, std::initializer_list<Axis> axes) {
    for (Axis a : axes) out.push_back({d, s, a});
  };
  if (d == Device::Phone) {
    add(Sensor::Accelerometer, {Axis::X, Axis::Y, Axis::Z});
    add(Sensor::Magnetometer, {Axis::X, Axis::Y, Axis::Z});
    add(Sensor::Gyroscope, {Axis::X, Axis::Y, Axis::Z});
  } else {
    add(Sensor::Accelerometer, {Axis::X, Axis::Y, Axis::Z});
    add(Sensor::RotationRate, {Axis::X, Axis::Y, Axis::Z});
    add(Sensor::Orientation, {Axis::Roll, Axis::Pitch, Axis::Yaw});
    add(Sensor::Gravity, {Axis::X, Axis::Y, Axis::Z});
    add(Sensor::Quaternion, {Axis::X, Axis::Y, Axis::Z, Axis::W});
    add(Sensor::UserAcceleration, {Axis::X, Axis::Y});
  }
  return out;
}

std::vector<ChannelId> canonical_channels() {
  std::vector<ChannelId> out;
  for (Device d : {Device::LeftWatch, Device::RightWatch, Device::Phone}) {
    auto part = canonical_channels(d);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

std::optional<ChannelGroup> group_of(const ChannelId& id) {
  switch (id.sensor) {
    case Sensor::Accelerometer:
      switch (id.device) {
        case Device::Phone: return ChannelGroup::PhoneAccelerometer;
        case Device::LeftWatch: return ChannelGroup::LeftWatchAccelerometer;
        case Device::RightWatch: return ChannelGroup::RightWatchAccelerometer;
      }
      break;
    case Sensor::RotationRate:
      return id.device == Device::LeftWatch ? ChannelGroup::LeftWatchRotation
                                            : ChannelGroup::RightWatchRotation;
    case Sensor::Gyroscope: return ChannelGroup::PhoneGyroscope;
    case Sensor::Magnetometer: return ChannelGroup::PhoneMagnetometer;
    default: break;
  }
  return std::nullopt;
}

std::string_view to_string(ChannelGroup g) {
  switch (g) {
    case ChannelGroup::PhoneAccelerometer: return "phone_accelerometer";
    case ChannelGroup::LeftWatchAccelerometer: return "left_watch_accelerometer";
    case ChannelGroup::RightWatchAccelerometer: return "right_watch_accelerometer";
    case ChannelGroup::PhoneGyroscope: return "phone_gyroscope";
    case ChannelGroup::LeftWatchRotation: return "left_watch_rotation";
    case ChannelGroup::RightWatchRotation: return "right_watch_rotation";
    case ChannelGroup::PhoneMagnetometer: return "phone_magnetometer";
  }
  return "?";
}

ChannelMatrix::ChannelMatrix(std::vector<ChannelId> channels, std::size_t frames)
    : channels_(std::move(channels)), frames_(frames), values_(channels_.size() * frames, 0.0) {}

std::optional<std::size_t> ChannelMatrix::find(const ChannelId& id) const noexcept {
  auto it = std::find(channels_.begin(), channels_.end(), id);
  if (it == channels_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - channels_.begin());
}

ChannelMatrix ChannelMatrix::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > frames_) throw std::out_of_range("ChannelMatrix::slice");
  ChannelMatrix out(channels_, end - begin);
  for (std::size_t r = 0; r < rows(); ++r) {
    auto src = row(r).subspan(begin, end - begin);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

}  // namespace paddle
