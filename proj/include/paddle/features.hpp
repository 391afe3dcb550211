#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "paddle/channel.hpp"
#include "paddle/ingest.hpp"
#include "paddle/kernels.hpp"
#include "paddle/segment.hpp"

namespace paddle {

enum class StatKind : std::uint8_t { Mean, Skewness, StdDev, Min, Max, Range, Q1, Q3 };
inline constexpr std::array<StatKind, 8> kStatKinds{StatKind::Mean, StatKind::Skewness,
                                                    StatKind::StdDev, StatKind::Min,
                                                    StatKind::Max, StatKind::Range,
                                                    StatKind::Q1, StatKind::Q3};
std::string_view to_string(StatKind k);
std::optional<StatKind> parse_stat(std::string_view s);

// The 8 statistics in canonical order:
//   mean; adjusted Fisher-Pearson skewness g1 * sqrt(n(n-1)) / (n-2), 0 when
//   n < 3 or the series is constant; sample standard deviation (n-1, 0 when
//   n == 1); min; max; range; Q1/Q3 by linear interpolation at (n-1) q.
// Errors: EmptyInput, NonFinite.
kernels::Stats summarize_series(std::span<const double> x);

struct FeatureKey {
  ChannelId channel;
  StatKind stat;
  friend bool operator==(const FeatureKey&, const FeatureKey&) = default;
};

// "left_watch.accelerometer.y.q3"
std::string feature_name(const FeatureKey& k);
std::optional<FeatureKey> parse_feature_name(std::string_view name);

class FeatureRegistry {
 public:
  FeatureRegistry() = default;
  // Throws InvalidArgument on duplicate entries.
  explicit FeatureRegistry(std::vector<FeatureKey> entries);

  // channels x all 8 stats, channel-major, stats in canonical order.
  static FeatureRegistry full(std::span<const ChannelId> channels);
  static FeatureRegistry canonical();

  // Entries whose channel belongs to `d`. Throws MissingChannel when none do.
  FeatureRegistry restrict_to(Device d) const;

  const std::vector<FeatureKey>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  const std::string& digest() const noexcept { return digest_; }
  std::vector<std::string> names() const;
  // Column indices of `sub`'s entries within this registry.
  std::vector<std::size_t> indices_of(const FeatureRegistry& sub) const;

  friend bool operator==(const FeatureRegistry& a, const FeatureRegistry& b) {
    return a.entries_ == b.entries_;
  }

 private:
  std::vector<FeatureKey> entries_;
  std::string digest_;
};

struct FeatureVector {
  std::size_t stroke = 0;
  Phase phase = Phase::Catch;
  std::vector<double> values;
  Label label = Label::Unlabeled;

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

// Vectors of one phase sharing one registry.
struct FeatureDataset {
  FeatureRegistry registry;
  Phase phase = Phase::Catch;
  std::vector<FeatureVector> rows;

  std::size_t size() const noexcept { return rows.size(); }
  // Row-major copy of the values, for the learners.
  std::vector<double> matrix() const;
  // Same rows restricted (and reordered) to `sub`.
  FeatureDataset select(const FeatureRegistry& sub) const;
  std::size_t count(Label l) const;
};

// Errors: MissingChannel.
FeatureVector featurize_phase(const ChannelMatrix& phase, const FeatureRegistry& registry);

// Only accepted strokes contribute; labels come from the session.
std::array<FeatureDataset, 3> featurize_trial(const AlignedSession& session,
                                              std::span<const StrokeRecord> records,
                                              const FeatureRegistry& registry,
                                              const SegmentationParams& params = {},
                                              kernels::Exec exec = kernels::Exec::Parallel);

// Delimited table: stroke,phase,label,<feature names>. Values use the
// shortest round-trip representation, so read(write(x)) is bit-exact.
std::string write_feature_table(std::span<const FeatureDataset> datasets);
// Returns catch/pull/recovery datasets (empty when a phase has no rows).
std::array<FeatureDataset, 3> read_feature_table(std::string_view text);

// Appends `more` to `into` (registries must match).
void append_rows(std::array<FeatureDataset, 3>& into, const std::array<FeatureDataset, 3>& more);

std::string dataset_digest(std::span<const FeatureDataset> datasets);

}  // namespace paddle
