#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "paddle/features.hpp"
#include "paddle/models.hpp"

namespace paddle {

// Positive class = Optimal.
struct ConfusionMatrix {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::uint64_t n() const noexcept { return tp + fp + fn + tn; }
  void add(Label truth, Label predicted);
  ConfusionMatrix& operator+=(const ConfusionMatrix& o) noexcept;
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

struct Metric {
  double mean = 0;
  double se = 0;
  friend bool operator==(const Metric&, const Metric&) = default;
};

// Undefined ratios (zero denominator) are absent, never 0.
struct MetricSet {
  std::optional<Metric> accuracy, sensitivity, specificity, ppv, npv, f_score;
  std::uint64_t n_evaluated = 0;
  friend bool operator==(const MetricSet&, const MetricSet&) = default;
};

inline constexpr std::array<std::string_view, 6> kMetricNames{
    "accuracy", "sensitivity", "specificity", "ppv", "npv", "f_score"};
// Access by position in kMetricNames.
const std::optional<Metric>& metric_at(const MetricSet& m, std::size_t i);

// sqrt(m (1 - m) / n)
double binomial_se(double m, std::uint64_t n);

// Every metric's SE uses n = total evaluated samples. Errors: InvalidArgument (n == 0).
MetricSet compute_metrics(const ConfusionMatrix& cm);

// Fold id per sample. Each class is shuffled with its own derived stream and
// dealt round-robin, continuing where the previous class stopped, so fold
// sizes and per-fold class counts differ by at most one.
std::vector<std::size_t> stratified_folds(std::span<const Label> labels, std::size_t k,
                                          std::uint64_t seed);

// Pooled out-of-fold confusion matrix. One-class kinds train each fold on its
// Optimal rows and score the whole held-out fold (flagged => Suboptimal).
// Errors: TooFewSamples (|data| < k), FoldClassCollapse, InvalidArgument.
ConfusionMatrix kfold_pooled_eval(ModelKind kind, const FeatureDataset& data,
                                  const HyperParams& hp, std::size_t k, std::uint64_t seed);

// Body positions and their devices: LeftWrist -> left watch, RightWrist ->
// right watch, RightBicep -> phone.
enum class BodySite : std::uint8_t { LeftWrist, RightWrist, RightBicep };
inline constexpr std::array<BodySite, 3> kBodySites{BodySite::LeftWrist, BodySite::RightWrist,
                                                    BodySite::RightBicep};
std::string_view to_string(BodySite s);
std::optional<BodySite> parse_body_site(std::string_view s);
Device device_of(BodySite s);

struct EvalCell {
  Phase phase = Phase::Catch;
  ModelKind kind = ModelKind::ExtraTrees;
  ConfusionMatrix pooled;
  MetricSet metrics;
  friend bool operator==(const EvalCell&, const EvalCell&) = default;
};

struct FeatureImportance {
  std::string feature;
  double mean_drop = 0;
  double std_drop = 0;
  friend bool operator==(const FeatureImportance&, const FeatureImportance&) = default;
};

struct GroupImportance {
  ChannelGroup group = ChannelGroup::PhoneAccelerometer;
  double mean_drop = 0;  // average over member features
  std::size_t members = 0;
  friend bool operator==(const GroupImportance&, const GroupImportance&) = default;
};

struct ImportanceResult {
  ModelKind kind = ModelKind::ExtraTrees;
  Phase phase = Phase::Catch;
  std::size_t repeats = 0;
  std::uint64_t seed = 0;
  double baseline_accuracy = 0;
  std::vector<FeatureImportance> features;  // descending mean_drop, stable
  std::vector<GroupImportance> groups;      // descending mean_drop, stable
  friend bool operator==(const ImportanceResult&, const ImportanceResult&) = default;
};

struct DeviceReport {
  BodySite site = BodySite::LeftWrist;
  std::size_t features = 0;
  std::vector<EvalCell> cells;
  friend bool operator==(const DeviceReport&, const DeviceReport&) = default;
};

struct EvalReport {
  std::size_t k = 5;
  std::uint64_t fold_seed = 0;
  std::string dataset_digest;
  std::string registry_digest;
  std::vector<EvalCell> cells;  // phase-major, kinds in request order
  std::vector<DeviceReport> devices;
  std::optional<ImportanceResult> importance;

  const EvalCell* find(Phase p, ModelKind k) const;
  std::string to_json() const;  // includes "digest"
  std::string digest() const;   // SHA-256 of the JSON without the digest field
  static EvalReport from_json(std::string_view json);
};

// One cell per (phase, kind). Datasets must be catch/pull/recovery.
EvalReport evaluate_suite(std::span<const FeatureDataset> datasets,
                          std::span<const ModelKind> kinds, const HyperParams& hp,
                          std::size_t k, std::uint64_t seed);

// Restricts every dataset to the site's device channels, then evaluates `kind`.
// Errors: MissingChannel when the registry has no channel of that device.
DeviceReport evaluate_by_device(std::span<const FeatureDataset> datasets, BodySite site,
                                ModelKind kind, const HyperParams& hp, std::size_t k,
                                std::uint64_t seed);

// Accuracy drop when one column is shuffled, averaged over `repeats`
// shuffles with streams derived from (seed, column, repeat). Features outside
// the seven device x sensor groups do not enter the grouped view.
// Errors: InvalidArgument (repeats == 0), RegistryMismatch.
ImportanceResult permutation_importance(const TrainedModel& model, const FeatureDataset& data,
                                        std::size_t repeats, std::uint64_t seed);

std::string importance_to_csv(const ImportanceResult& r);

}  // namespace paddle
