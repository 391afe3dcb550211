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
#include "paddle/kernels.hpp"
#include "paddle/tree.hpp"

namespace paddle {

enum class ModelKind : std::uint8_t {
  KernelSVC,
  RandomForest,
  GradientBoost,
  ExtraTrees,
  IsolationForest,
  OneClassSVM,
};
inline constexpr std::array<ModelKind, 6> kModelKinds{
    ModelKind::KernelSVC,  ModelKind::RandomForest,    ModelKind::GradientBoost,
    ModelKind::ExtraTrees, ModelKind::IsolationForest, ModelKind::OneClassSVM};
inline constexpr std::array<ModelKind, 4> kSupervisedKinds{
    ModelKind::KernelSVC, ModelKind::RandomForest, ModelKind::GradientBoost,
    ModelKind::ExtraTrees};
inline constexpr std::array<ModelKind, 2> kAnomalyKinds{ModelKind::IsolationForest,
                                                        ModelKind::OneClassSVM};

constexpr bool is_supervised(ModelKind k) noexcept {
  return k != ModelKind::IsolationForest && k != ModelKind::OneClassSVM;
}
// svc, random_forest, gradient_boost, extra_trees, isolation_forest, one_class_svm
std::string_view to_string(ModelKind k);
std::optional<ModelKind> parse_model_kind(std::string_view s);

// One struct for every kind; each learner reads its own fields.
struct HyperParams {
  // KernelSVC
  double svc_c = 1.0;
  // Kernel kinds: RBF gamma, 1/d when unset.
  std::optional<double> gamma;
  double svm_tolerance = 1e-3;
  // RandomForest
  std::size_t rf_trees = 100;
  int rf_max_depth = 2;
  // GradientBoost
  std::size_t gb_estimators = 100;
  int gb_max_depth = 1;
  double gb_learning_rate = 0.1;
  // ExtraTrees
  std::size_t et_estimators = 100;
  int et_max_depth = 1;
  // IsolationForest
  std::size_t if_trees = 100;
  std::size_t if_max_samples = 256;
  // OneClassSVM
  double ocsvm_nu = 0.5;

  std::uint64_t seed = 0;

  void validate() const;  // InvalidArgument
  friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

// Per-feature affine map applied before the kernel learners.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;  // sqrt(max(var, 1e-12))

  static Standardizer fit(const FeatureView& x);
  void apply(std::span<const double> in, std::span<double> out) const;
  friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

// f(x) = sum_i coef[i] K(sv_i, x) - rho, K(a, b) = exp(-gamma |a - b|^2).
// coef = alpha_i * y_i (C-SVC) or alpha_i (one-class).
struct SvmParams {
  double gamma = 0;
  std::size_t dims = 0;
  std::vector<double> support;  // row-major [n_sv x dims], standardized space
  std::vector<double> coef;
  double rho = 0;
  std::size_t iterations = 0;

  double decision(std::span<const double> z) const;
  friend bool operator==(const SvmParams&, const SvmParams&) = default;
};

inline constexpr std::uint32_t kModelFormatVersion = 1;

struct TrainedModel {
  ModelKind kind = ModelKind::ExtraTrees;
  HyperParams hp;
  std::string registry_digest;
  Phase phase = Phase::Catch;
  std::size_t num_features = 0;
  std::uint32_t format_version = kModelFormatVersion;

  // Kernel kinds.
  Standardizer scaler;
  SvmParams svm;
  // Tree kinds. GradientBoost: score = sigmoid(init_score + lr * sum(tree)).
  std::vector<Tree> trees;
  double init_score = 0;
  // IsolationForest subsample size psi.
  std::size_t isolation_samples = 0;

  friend bool operator==(const TrainedModel&, const TrainedModel&) = default;
};

// Errors: SingleClassData (supervised kinds), EmptyInput, InvalidArgument.
// Supervised kinds need Optimal/Suboptimal labels on every row. One-class
// kinds train on the rows not labeled Suboptimal.
TrainedModel train(ModelKind kind, const FeatureDataset& data, const HyperParams& hp);

// Raw entry point. y[i] = 1 for Optimal, 0 for Suboptimal (ignored by the
// one-class kinds, which use every row).
TrainedModel train_raw(ModelKind kind, const FeatureView& x, std::span<const int> y,
                       const HyperParams& hp);

struct Prediction {
  Label label = Label::Suboptimal;
  // Decision value (KernelSVC), Optimal probability (ensembles) or anomaly
  // score (one-class kinds, higher = more anomalous).
  double score = 0;
  friend bool operator==(const Prediction&, const Prediction&) = default;
};

struct AnomalyResult {
  double score = 0;  // higher = more anomalous
  bool flagged = false;
};

// Errors: RegistryMismatch (digest or width).
Prediction predict(const TrainedModel& m, const FeatureRegistry& registry,
                   std::span<const double> values);
std::vector<Prediction> predict(const TrainedModel& m, const FeatureDataset& data,
                                kernels::Exec exec = kernels::Exec::Parallel);
// No registry check; x must have m.num_features columns.
std::vector<Prediction> predict_rows(const TrainedModel& m, const FeatureView& x,
                                     kernels::Exec exec = kernels::Exec::Parallel);

// One-class kinds only. IsolationForest: 2^(-E[h] / c(psi)), flagged when
// > 0.5. OneClassSVM: score = -decision, flagged when decision < 0.
AnomalyResult anomaly_score(const TrainedModel& m, const FeatureRegistry& registry,
                            std::span<const double> values);

// Binary envelope:
//   "STRKMDL1" | u32 format_version | u64 payload_length | payload |
//   64 ASCII hex chars of SHA-256(payload)
// All integers little-endian, doubles as their IEEE-754 bit pattern.
// Errors on load: CorruptModel, VersionUnsupported.
std::string save_model(const TrainedModel& m);
TrainedModel load_model(std::string_view bytes);

// libsvm-style SMO for
//   min 0.5 a'Qa + p'a  s.t.  y'a = const, 0 <= a_i <= C_i
// with Q_ij = y_i y_j K_ij, second-order working-set selection and stopping
// tolerance `eps`. Exposed for the KKT property tests.
struct SmoResult {
  std::vector<double> alpha;
  double rho = 0;
  std::size_t iterations = 0;
};
SmoResult solve_smo(std::span<const double> kernel, std::span<const int> y,
                    std::span<const double> p, std::span<const double> upper,
                    std::vector<double> alpha0, double eps);

}  // namespace paddle
