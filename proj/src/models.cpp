#include "paddle/models.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "paddle/error.hpp"
#include "paddle/rng.hpp"

namespace paddle {

std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::KernelSVC: return "svc";
    case ModelKind::RandomForest: return "random_forest";
    case ModelKind::GradientBoost: return "gradient_boost";
    case ModelKind::ExtraTrees: return "extra_trees";
    case ModelKind::IsolationForest: return "isolation_forest";
    case ModelKind::OneClassSVM: return "one_class_svm";
  }
  return "?";
}

std::optional<ModelKind> parse_model_kind(std::string_view s) {
  for (auto k : kModelKinds)
    if (to_string(k) == s) return k;
  return std::nullopt;
}

void HyperParams::validate() const {
  auto fail = [](const char* what) { throw Error(ErrorCode::InvalidArgument, what, "models"); };
  if (!(svc_c > 0) || !std::isfinite(svc_c)) fail("svc_c must be positive");
  if (gamma && (!(*gamma > 0) || !std::isfinite(*gamma))) fail("gamma must be positive");
  if (!(svm_tolerance > 0)) fail("svm_tolerance must be positive");
  if (rf_trees == 0 || gb_estimators == 0 || et_estimators == 0 || if_trees == 0)
    fail("tree counts must be positive");
  if (rf_max_depth < 1 || gb_max_depth < 1 || et_max_depth < 1) fail("depths must be positive");
  if (!(gb_learning_rate > 0) || !std::isfinite(gb_learning_rate))
    fail("gb_learning_rate must be positive");
  if (if_max_samples == 0) fail("if_max_samples must be positive");
  if (!(ocsvm_nu > 0) || ocsvm_nu > 1) fail("ocsvm_nu must lie in (0, 1]");
}

Standardizer Standardizer::fit(const FeatureView& x) {
  Standardizer s;
  s.mean.assign(x.cols, 0.0);
  s.scale.assign(x.cols, 1.0);
  const double n = static_cast<double>(x.rows);
  for (std::size_t c = 0; c < x.cols; ++c) {
    double sum = 0;
    for (std::size_t r = 0; r < x.rows; ++r) sum += x.at(r, c);
    const double mu = sum / n;
    double ss = 0;
    for (std::size_t r = 0; r < x.rows; ++r) ss += (x.at(r, c) - mu) * (x.at(r, c) - mu);
    s.mean[c] = mu;
    s.scale[c] = std::sqrt(std::max(ss / n, 1e-12));
  }
  return s;
}

void Standardizer::apply(std::span<const double> in, std::span<double> out) const {
  for (std::size_t c = 0; c < in.size(); ++c) out[c] = (in[c] - mean[c]) / scale[c];
}

namespace {

constexpr std::uint64_t kind_tag(ModelKind k) { return static_cast<std::uint64_t>(k) + 1; }

std::size_t sqrt_features(std::size_t d) {
  return static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))));
}

std::vector<double> standardized(const Standardizer& s, const FeatureView& x) {
  std::vector<double> z(x.rows * x.cols);
  for (std::size_t r = 0; r < x.rows; ++r)
    s.apply(x.row(r), std::span<double>(z.data() + r * x.cols, x.cols));
  return z;
}

std::vector<double> rbf_matrix(const std::vector<double>& z, std::size_t n, std::size_t d,
                               double gamma) {
  std::vector<double> k(n * n);
  const auto rows = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    for (std::size_t j = 0; j < n; ++j) {
      double d2 = 0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = z[i * d + c] - z[j * d + c];
        d2 += diff * diff;
      }
      k[i * n + j] = std::exp(-gamma * d2);
    }
  }
  return k;
}

void fit_svm(TrainedModel& m, const FeatureView& x, std::span<const int> labels) {
  const std::size_t n = x.rows, d = x.cols;
  m.scaler = Standardizer::fit(x);
  const auto z = standardized(m.scaler, x);
  const double gamma = m.hp.gamma.value_or(1.0 / static_cast<double>(d));
  const auto k = rbf_matrix(z, n, d, gamma);

  std::vector<int> y(n, 1);
  std::vector<double> p(n), upper(n), alpha0(n, 0.0);
  if (m.kind == ModelKind::KernelSVC) {
    for (std::size_t i = 0; i < n; ++i) y[i] = labels[i] == 1 ? 1 : -1;
    std::fill(p.begin(), p.end(), -1.0);
    std::fill(upper.begin(), upper.end(), m.hp.svc_c);
  } else {
    // One-class: alpha in [0, 1], sum alpha = nu * n, started from the first
    // floor(nu n) points at the bound.
    std::fill(upper.begin(), upper.end(), 1.0);
    const double total = m.hp.ocsvm_nu * static_cast<double>(n);
    const auto full = static_cast<std::size_t>(std::floor(total));
    for (std::size_t i = 0; i < std::min(full, n); ++i) alpha0[i] = 1.0;
    if (full < n) alpha0[full] = total - static_cast<double>(full);
  }
  auto res = solve_smo(k, y, p, upper, std::move(alpha0), m.hp.svm_tolerance);

  m.svm = SvmParams{};
  m.svm.gamma = gamma;
  m.svm.dims = d;
  m.svm.rho = res.rho;
  m.svm.iterations = res.iterations;
  for (std::size_t i = 0; i < n; ++i) {
    if (res.alpha[i] <= 0) continue;
    m.svm.coef.push_back(res.alpha[i] * y[i]);
    m.svm.support.insert(m.svm.support.end(), z.begin() + static_cast<std::ptrdiff_t>(i * d),
                         z.begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
  }
}

void fit_forest(TrainedModel& m, const FeatureView& x, std::span<const int> y) {
  const bool extra = m.kind == ModelKind::ExtraTrees;
  const std::size_t count = extra ? m.hp.et_estimators : m.hp.rf_trees;
  ClassTreeOptions opts;
  opts.max_depth = extra ? m.hp.et_max_depth : m.hp.rf_max_depth;
  opts.max_features = sqrt_features(x.cols);
  opts.random_thresholds = extra;
  m.trees.assign(count, Tree{});
  const auto trees = static_cast<std::int64_t>(count);
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t t = 0; t < trees; ++t) {
    Rng rng(derive_seed(m.hp.seed, {kind_tag(m.kind), static_cast<std::uint64_t>(t)}));
    std::vector<double> w(x.rows, extra ? 1.0 : 0.0);
    if (!extra)
      for (std::size_t i = 0; i < x.rows; ++i) w[rng.below(x.rows)] += 1.0;
    m.trees[static_cast<std::size_t>(t)] = fit_classification_tree(x, y, w, opts, rng);
  }
}

double sigmoid(double f) { return 1.0 / (1.0 + std::exp(-f)); }

void fit_boost(TrainedModel& m, const FeatureView& x, std::span<const int> y) {
  const std::size_t n = x.rows;
  const double pos = static_cast<double>(std::count(y.begin(), y.end(), 1));
  const double prior = pos / static_cast<double>(n);
  m.init_score = std::log(prior / (1.0 - prior));
  std::vector<double> f(n, m.init_score), g(n), h(n);
  m.trees.clear();
  m.trees.reserve(m.hp.gb_estimators);
  for (std::size_t it = 0; it < m.hp.gb_estimators; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(f[i]);
      g[i] = static_cast<double>(y[i]) - p;
      h[i] = p * (1.0 - p);
    }
    auto tree = fit_newton_tree(x, g, h, m.hp.gb_max_depth);
    for (std::size_t i = 0; i < n; ++i) f[i] += m.hp.gb_learning_rate * tree.predict(x.row(i));
    m.trees.push_back(std::move(tree));
  }
}

void fit_isolation(TrainedModel& m, const FeatureView& x) {
  const std::size_t psi = std::min(m.hp.if_max_samples, x.rows);
  m.isolation_samples = psi;
  const int height =
      psi <= 1 ? 0 : static_cast<int>(std::ceil(std::log2(static_cast<double>(psi))));
  m.trees.assign(m.hp.if_trees, Tree{});
  const auto trees = static_cast<std::int64_t>(m.hp.if_trees);
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t t = 0; t < trees; ++t) {
    Rng rng(derive_seed(m.hp.seed, {kind_tag(m.kind), static_cast<std::uint64_t>(t)}));
    std::vector<std::size_t> idx(x.rows);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    // Partial Fisher-Yates: the first psi entries are the subsample.
    for (std::size_t i = 0; i < psi; ++i)
      std::swap(idx[i], idx[i + static_cast<std::size_t>(rng.below(x.rows - i))]);
    idx.resize(psi);
    m.trees[static_cast<std::size_t>(t)] = fit_isolation_tree(x, idx, height, rng);
  }
}

double isolation_normalizer(std::size_t psi) { return std::max(average_path_length(psi), 1.0); }

void check_width(const TrainedModel& m, std::size_t width) {
  if (width != m.num_features)
    throw Error(ErrorCode::RegistryMismatch,
                "expected " + std::to_string(m.num_features) + " features, got " +
                    std::to_string(width),
                "models");
}

}  // namespace

TrainedModel train_raw(ModelKind kind, const FeatureView& x, std::span<const int> y,
                       const HyperParams& hp) {
  hp.validate();
  if (x.rows == 0 || x.cols == 0)
    throw Error(ErrorCode::EmptyInput, "no training data", "models");
  for (std::size_t i = 0; i < x.rows * x.cols; ++i)
    if (!std::isfinite(x.data[i]))
      throw Error(ErrorCode::NonFinite, "non-finite training value", "models");
  TrainedModel m;
  m.kind = kind;
  m.hp = hp;
  m.num_features = x.cols;
  if (is_supervised(kind)) {
    if (y.size() != x.rows)
      throw Error(ErrorCode::InvalidArgument, "label count differs from rows", "models");
    const auto pos = std::count(y.begin(), y.end(), 1);
    if (pos == 0 || static_cast<std::size_t>(pos) == x.rows)
      throw Error(ErrorCode::SingleClassData, "supervised training needs both classes",
                  "models");
  }
  switch (kind) {
    case ModelKind::KernelSVC:
    case ModelKind::OneClassSVM: fit_svm(m, x, y); break;
    case ModelKind::RandomForest:
    case ModelKind::ExtraTrees: fit_forest(m, x, y); break;
    case ModelKind::GradientBoost: fit_boost(m, x, y); break;
    case ModelKind::IsolationForest: fit_isolation(m, x); break;
  }
  return m;
}

TrainedModel train(ModelKind kind, const FeatureDataset& data, const HyperParams& hp) {
  std::vector<double> xs;
  std::vector<int> y;
  std::size_t rows = 0;
  const std::size_t d = data.registry.size();
  for (const auto& r : data.rows) {
    if (r.values.size() != d)
      throw Error(ErrorCode::RegistryMismatch, "vector length differs from registry", "models");
    if (is_supervised(kind)) {
      if (r.label == Label::Unlabeled)
        throw Error(ErrorCode::InvalidArgument, "supervised training needs labeled rows",
                    "models");
    } else if (r.label == Label::Suboptimal) {
      continue;
    }
    xs.insert(xs.end(), r.values.begin(), r.values.end());
    y.push_back(r.label == Label::Optimal ? 1 : 0);
    ++rows;
  }
  auto m = train_raw(kind, FeatureView{xs.data(), rows, d}, y, hp);
  m.registry_digest = data.registry.digest();
  m.phase = data.phase;
  return m;
}

std::vector<Prediction> predict_rows(const TrainedModel& m, const FeatureView& x,
                                     kernels::Exec exec) {
  check_width(m, x.cols);
  const std::size_t n = x.rows;
  std::vector<Prediction> out(n);
  const bool par = exec == kernels::Exec::Parallel;
  const auto rows = static_cast<std::int64_t>(n);
  switch (m.kind) {
    case ModelKind::KernelSVC:
    case ModelKind::OneClassSVM: {
#pragma omp parallel for schedule(static) if (par)
      for (std::int64_t rr = 0; rr < rows; ++rr) {
        const auto r = static_cast<std::size_t>(rr);
        std::vector<double> z(x.cols);
        m.scaler.apply(x.row(r), z);
        const double f = m.svm.decision(z);
        if (m.kind == ModelKind::KernelSVC)
          out[r] = {f > 0 ? Label::Optimal : Label::Suboptimal, f};
        else
          out[r] = {f < 0 ? Label::Suboptimal : Label::Optimal, -f};
      }
      break;
    }
    case ModelKind::RandomForest:
    case ModelKind::ExtraTrees: {
      std::vector<double> s(n);
      kernels::ensemble_mean(m.trees, x, s, exec);
      for (std::size_t r = 0; r < n; ++r)
        out[r] = {s[r] > 0.5 ? Label::Optimal : Label::Suboptimal, s[r]};
      break;
    }
    case ModelKind::GradientBoost: {
#pragma omp parallel for schedule(static) if (par)
      for (std::int64_t rr = 0; rr < rows; ++rr) {
        const auto r = static_cast<std::size_t>(rr);
        double f = 0;
        for (const auto& t : m.trees) f += t.predict(x.row(r));
        const double p = sigmoid(m.init_score + m.hp.gb_learning_rate * f);
        out[r] = {p > 0.5 ? Label::Optimal : Label::Suboptimal, p};
      }
      break;
    }
    case ModelKind::IsolationForest: {
      std::vector<double> h(n);
      kernels::isolation_path(m.trees, x, h, exec);
      const double c = isolation_normalizer(m.isolation_samples);
      for (std::size_t r = 0; r < n; ++r) {
        const double s = std::exp2(-h[r] / c);
        out[r] = {s > 0.5 ? Label::Suboptimal : Label::Optimal, s};
      }
      break;
    }
  }
  return out;
}

Prediction predict(const TrainedModel& m, const FeatureRegistry& registry,
                   std::span<const double> values) {
  if (registry.digest() != m.registry_digest)
    throw Error(ErrorCode::RegistryMismatch, "feature registry differs from the model's",
                "models");
  return predict_rows(m, FeatureView{values.data(), 1, values.size()},
                      kernels::Exec::Serial)[0];
}

std::vector<Prediction> predict(const TrainedModel& m, const FeatureDataset& data,
                                kernels::Exec exec) {
  if (data.registry.digest() != m.registry_digest)
    throw Error(ErrorCode::RegistryMismatch, "feature registry differs from the model's",
                "models");
  const auto x = data.matrix();
  return predict_rows(m, FeatureView{x.data(), data.size(), data.registry.size()}, exec);
}

AnomalyResult anomaly_score(const TrainedModel& m, const FeatureRegistry& registry,
                            std::span<const double> values) {
  if (is_supervised(m.kind))
    throw Error(ErrorCode::InvalidArgument, "anomaly_score needs a one-class model", "models");
  const auto p = predict(m, registry, values);
  return {p.score, p.label == Label::Suboptimal};
}

}  // namespace paddle
