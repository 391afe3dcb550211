#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace paddle {

enum class Device : std::uint8_t { LeftWatch, RightWatch, Phone };

enum class Sensor : std::uint8_t {
  Accelerometer,
  RotationRate,
  Orientation,
  Gravity,
  Quaternion,
  UserAcceleration,
  Magnetometer,
  Gyroscope,
};

enum class Axis : std::uint8_t { X, Y, Z, W, Roll, Pitch, Yaw };

enum class Label : std::uint8_t { Optimal, Suboptimal, Unlabeled };

// One physical signal: (device, sensor, axis). Ordering is the canonical
// registry order (device, then sensor, then axis enum order).
struct ChannelId {
  Device device{};
  Sensor sensor{};
  Axis axis{};

  friend auto operator<=>(const ChannelId&, const ChannelId&) = default;
};

// Quaternion admits W/X/Y/Z, Orientation admits Roll/Pitch/Yaw, everything
// else X/Y/Z. Magnetometer and Gyroscope are phone-only; Quaternion,
// Orientation, Gravity, UserAcceleration and RotationRate are watch-only.
bool is_valid(const ChannelId& id) noexcept;

std::string_view to_string(Device d);
std::string_view to_string(Sensor s);
std::string_view to_string(Axis a);
std::string_view to_string(Label l);

std::optional<Device> parse_device(std::string_view s);
std::optional<Sensor> parse_sensor(std::string_view s);
std::optional<Axis> parse_axis(std::string_view s);
std::optional<Label> parse_label(std::string_view s);

// "left_watch.quaternion.x"
std::string channel_name(const ChannelId& id);
std::optional<ChannelId> parse_channel_name(std::string_view name);

// Per-file column token used by the canonical CSV ("accel_x", "quat_w",
// "roll", ...). The device comes from the file, not the column.
std::string column_token(Sensor s, Axis a);
struct SensorAxis {
  Sensor sensor;
  Axis axis;
  friend bool operator==(const SensorAxis&, const SensorAxis&) = default;
};
std::optional<SensorAxis> parse_column_token(std::string_view token);

// The 45-channel canonical registry: per watch accelerometer(3),
// rotation rate(3), orientation(3), gravity(3), quaternion(4) and processed
// user acceleration(2: X = horizontal magnitude, Y = vertical component);
// phone accelerometer(3), magnetometer(3), gyroscope(3).
std::vector<ChannelId> canonical_channels();
std::vector<ChannelId> canonical_channels(Device d);

inline constexpr std::size_t kCanonicalChannelCount = 45;
inline constexpr std::size_t kWatchChannelCount = 18;
inline constexpr std::size_t kPhoneChannelCount = 9;

inline constexpr ChannelId kLeftQuatX{Device::LeftWatch, Sensor::Quaternion, Axis::X};
inline constexpr ChannelId kLeftQuatW{Device::LeftWatch, Sensor::Quaternion, Axis::W};

// Importance groups (device x sensor) used for the grouped view.
enum class ChannelGroup : std::uint8_t {
  PhoneAccelerometer,
  LeftWatchAccelerometer,
  RightWatchAccelerometer,
  PhoneGyroscope,
  LeftWatchRotation,
  RightWatchRotation,
  PhoneMagnetometer,
};
inline constexpr std::size_t kChannelGroupCount = 7;
std::optional<ChannelGroup> group_of(const ChannelId& id);
std::string_view to_string(ChannelGroup g);

// Row-major [channels x frames] matrix with a channel registry.
class ChannelMatrix {
 public:
  ChannelMatrix() = default;
  ChannelMatrix(std::vector<ChannelId> channels, std::size_t frames);

  const std::vector<ChannelId>& channels() const noexcept { return channels_; }
  std::size_t rows() const noexcept { return channels_.size(); }
  std::size_t frames() const noexcept { return frames_; }

  std::span<double> row(std::size_t i) noexcept {
    return {values_.data() + i * frames_, frames_};
  }
  std::span<const double> row(std::size_t i) const noexcept {
    return {values_.data() + i * frames_, frames_};
  }
  std::optional<std::size_t> find(const ChannelId& id) const noexcept;

  // Copy of frames [begin, end) for every row.
  ChannelMatrix slice(std::size_t begin, std::size_t end) const;

  std::span<const double> values() const noexcept { return values_; }

  friend bool operator==(const ChannelMatrix&, const ChannelMatrix&) = default;

 private:
  std::vector<ChannelId> channels_;
  std::size_t frames_ = 0;
  std::vector<double> values_;
};

}  // namespace paddle
