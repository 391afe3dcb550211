#include <doctest.h>

#include <cmath>
#include <limits>

#include "paddle/kernels.hpp"
#include "paddle/models.hpp"
#include "paddle/rng.hpp"
#include "support.hpp"

using namespace paddle;
using testing::error_code;

namespace {

FeatureRegistry small_registry(std::size_t d) {
  const auto ch = canonical_channels();
  std::vector<FeatureKey> keys;
  for (std::size_t j = 0; j < d; ++j) keys.push_back({ch[j], StatKind::Mean});
  return FeatureRegistry(std::move(keys));
}

FeatureDataset make_dataset(const std::vector<std::vector<double>>& xs, const std::vector<Label>& ys) {
  FeatureDataset ds{small_registry(xs.front().size()), Phase::Catch, {}};
  for (std::size_t i = 0; i < xs.size(); ++i) ds.rows.push_back({i, Phase::Catch, xs[i], ys[i]});
  return ds;
}

double training_accuracy(const TrainedModel& m, const FeatureDataset& ds) {
  const auto p = predict(m, ds);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) ok += p[i].label == ds.rows[i].label;
  return static_cast<double>(ok) / static_cast<double>(ds.size());
}

// Mean over trees of depth + c(leaf size), walking the nodes directly.
double oracle_isolation_score(const TrainedModel& m, std::span<const double> x) {
  // c(n) with the usual ln(i) + Euler-gamma estimate of the harmonic number.
  auto c = [](std::size_t n) {
    if (n <= 1) return 0.0;
    if (n == 2) return 1.0;
    const double h = std::log(static_cast<double>(n - 1)) + 0.5772156649015329;
    return 2.0 * h - 2.0 * static_cast<double>(n - 1) / static_cast<double>(n);
  };
  double sum = 0;
  for (const auto& t : m.trees) {
    std::size_t i = 0, depth = 0;
    while (t.nodes[i].feature >= 0) {
      const auto& n = t.nodes[i];
      i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
      ++depth;
    }
    sum += static_cast<double>(depth) + c(t.nodes[i].samples);
  }
  const double mean = sum / static_cast<double>(m.trees.size());
  return std::pow(2.0, -mean / std::max(c(m.isolation_samples), 1.0));
}

// Exhaustive best stump: every feature, every midpoint between distinct values.
struct Stump {
  int feature = -1;
  double threshold = 0;
  double impurity = std::numeric_limits<double>::infinity();
};

Stump brute_force_stump(const FeatureView& x, std::span<const int> y) {
  Stump best;
  for (std::size_t f = 0; f < x.cols; ++f) {
    std::vector<double> v;
    for (std::size_t r = 0; r < x.rows; ++r) v.push_back(x.at(r, f));
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    for (std::size_t k = 0; k + 1 < v.size(); ++k) {
      const double thr = v[k] + (v[k + 1] - v[k]) / 2;
      double l[2] = {0, 0}, r[2] = {0, 0};
      for (std::size_t i = 0; i < x.rows; ++i) (x.at(i, f) <= thr ? l : r)[y[i]] += 1;
      auto g = [](double a, double b) { return a + b == 0 ? 0.0 : 1 - (a * a + b * b) / ((a + b) * (a + b)); };
      const double n = static_cast<double>(x.rows);
      const double imp = ((l[0] + l[1]) * g(l[0], l[1]) + (r[0] + r[1]) * g(r[0], r[1])) / n;
      if (imp < best.impurity - kSplitTieEps) best = {static_cast<int>(f), thr, imp};
    }
  }
  return best;
}

SynthDataset small_synth(std::size_t per_class, double separation, std::uint64_t seed) {
  SynthSpec spec;
  spec.class_separation = separation;
  return generate_dataset(per_class, spec, seed);
}

}  // namespace

TEST_CASE("one-dimensional extra trees") {
  const auto ds = make_dataset({{0.0}, {1.0}}, {Label::Suboptimal, Label::Optimal});
  const auto m = train(ModelKind::ExtraTrees, ds, HyperParams{});
  CHECK(predict(m, ds.registry, std::vector<double>{0.0}).label == Label::Suboptimal);
  CHECK(predict(m, ds.registry, std::vector<double>{1.0}).label == Label::Optimal);
  CHECK(predict(m, ds.registry, std::vector<double>{0.9}).label == Label::Optimal);
  CHECK(training_accuracy(m, ds) == 1.0);

  const FeatureRegistry other({FeatureKey{canonical_channels()[5], StatKind::Mean}});
  CHECK(error_code([&] { predict(m, other, std::vector<double>{0.0}); }) == ErrorCode::RegistryMismatch);
  CHECK(error_code([&] { predict(m, small_registry(2), std::vector<double>{0.0, 0.0}); }) ==
        ErrorCode::RegistryMismatch);
}

TEST_CASE("boosted stumps cannot fit XOR") {
  const auto ds = make_dataset({{0, 0}, {1, 1}, {0, 1}, {1, 0}},
                               {Label::Suboptimal, Label::Suboptimal, Label::Optimal, Label::Optimal});
  const auto m = train(ModelKind::GradientBoost, ds, HyperParams{});
  CHECK(m.trees.size() == 100);
  CHECK(training_accuracy(m, ds) <= 0.75);

  // Every single stump on this data is no better than chance.
  const auto x = ds.matrix();
  const std::vector<int> y{0, 0, 1, 1};
  const auto s = brute_force_stump({x.data(), 4, 2}, y);
  CHECK(s.impurity == doctest::Approx(0.5));
}

TEST_CASE("supervised kinds fit separable synth data") {
  const auto data = small_synth(30, 2.0, 1);
  for (const auto& ds : data.phases) {
    REQUIRE(ds.size() == 60);
    for (auto kind : kSupervisedKinds) {
      HyperParams hp;
      hp.seed = 3;
      CHECK_MESSAGE(training_accuracy(train(kind, ds, hp), ds) >= 0.9, to_string(kind));
    }
  }
}

TEST_CASE("single-class data is refused by supervised kinds") {
  const auto ds = make_dataset({{0.0}, {1.0}}, {Label::Optimal, Label::Optimal});
  for (auto kind : kSupervisedKinds)
    CHECK(error_code([&] { train(kind, ds, HyperParams{}); }) == ErrorCode::SingleClassData);
  CHECK_NOTHROW(train(ModelKind::IsolationForest, ds, HyperParams{}));
}

TEST_CASE("isolation forest ranks a far outlier above the cluster") {
  Rng rng(11);
  std::vector<std::vector<double>> xs;
  for (int i = 0; i < 20; ++i) {
    const double a = rng.uniform(0, 2 * 3.141592653589793), r = 0.1 * std::sqrt(rng.uniform());
    xs.push_back({r * std::cos(a), r * std::sin(a)});
  }
  const auto ds = make_dataset(xs, std::vector<Label>(20, Label::Optimal));
  const auto m = train(ModelKind::IsolationForest, ds, HyperParams{});
  CHECK(m.isolation_samples == 20);

  const std::vector<double> far{10.0, 0.0};
  const auto q = anomaly_score(m, ds.registry, far);
  CHECK(q.score == doctest::Approx(oracle_isolation_score(m, far)).epsilon(1e-9));
  double centroid[2] = {0, 0};
  std::vector<double> scores;
  for (const auto& x : xs) {
    const auto s = anomaly_score(m, ds.registry, x);
    CHECK(s.score == doctest::Approx(oracle_isolation_score(m, x)).epsilon(1e-9));
    CHECK(s.score > 0);
    CHECK(s.score <= 1);
    scores.push_back(s.score);
    centroid[0] += x[0] / 20;
    centroid[1] += x[1] / 20;
  }
  // A query beyond the range of one feature shares every split on that
  // feature with the extreme training point, so it beats the typical point
  // but not necessarily every edge point.
  std::sort(scores.begin(), scores.end());
  CHECK(q.score > scores[scores.size() / 2]);
  CHECK(q.flagged);
  const auto c = anomaly_score(m, ds.registry, std::vector<double>{centroid[0], centroid[1]});
  CHECK_FALSE(c.flagged);
  CHECK(c.score == doctest::Approx(oracle_isolation_score(m, std::vector<double>{centroid[0], centroid[1]})).epsilon(1e-9));
}

TEST_CASE("isolation forest on a single point") {
  const auto ds = make_dataset({{1.0, 2.0}}, {Label::Optimal});
  const auto m = train(ModelKind::IsolationForest, ds, HyperParams{});
  const auto s = anomaly_score(m, ds.registry, std::vector<double>{5.0, 5.0});
  CHECK(std::isfinite(s.score));
  CHECK(s.score == 1.0);  // zero path length over a unit normalizer
}

TEST_CASE("one-class SVM accepts the cluster core and flags a far point") {
  Rng rng(2);
  std::vector<std::vector<double>> xs;
  for (int i = 0; i < 40; ++i) xs.push_back({rng.normal(), rng.normal()});
  const auto ds = make_dataset(xs, std::vector<Label>(40, Label::Optimal));
  const auto m = train(ModelKind::OneClassSVM, ds, HyperParams{});
  CHECK(anomaly_score(m, ds.registry, std::vector<double>{8.0, 8.0}).flagged);
  CHECK_FALSE(anomaly_score(m, ds.registry, std::vector<double>{0.0, 0.0}).flagged);
  // nu bounds the training outlier fraction from above (up to one point).
  std::size_t out = 0;
  for (const auto& x : xs) out += anomaly_score(m, ds.registry, x).flagged;
  CHECK(out <= 21);
}

TEST_CASE("one-class kinds ignore suboptimal rows") {
  const auto ds = make_dataset({{0.0}, {0.1}, {0.2}, {50.0}},
                               {Label::Optimal, Label::Optimal, Label::Optimal, Label::Suboptimal});
  const auto m = train(ModelKind::IsolationForest, ds, HyperParams{});
  CHECK(m.isolation_samples == 3);
}

TEST_CASE("kernel SVC satisfies the box and equality constraints") {
  const auto data = small_synth(10, 1.0, 5);
  for (double c : {0.1, 1.0, 10.0}) {
    HyperParams hp;
    hp.svc_c = c;
    const auto m = train(ModelKind::KernelSVC, data.phases[1], hp);
    double sum = 0;
    for (double a : m.svm.coef) {
      CHECK(std::abs(a) <= c + 1e-12);
      CHECK(a != 0.0);
      sum += a;
    }
    CHECK(std::abs(sum) <= 1e-6);
  }
}

TEST_CASE("SMO solution meets the KKT conditions") {
  Rng rng(7);
  const std::size_t n = 30;
  std::vector<double> x(n * 2);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = i % 2 ? 1 : -1;
    x[2 * i] = rng.normal() + y[i];
    x[2 * i + 1] = rng.normal();
  }
  std::vector<double> k(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double dx = x[2 * i] - x[2 * j], dy = x[2 * i + 1] - x[2 * j + 1];
      k[i * n + j] = std::exp(-0.5 * (dx * dx + dy * dy));
    }
  const double cap = 1.0;
  const std::vector<double> p(n, -1.0), upper(n, cap);
  const auto r = solve_smo(k, y, p, upper, std::vector<double>(n, 0.0), 1e-3);
  double eq = 0;
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(r.alpha[i] >= 0);
    CHECK(r.alpha[i] <= cap);
    eq += r.alpha[i] * y[i];
  }
  CHECK(std::abs(eq) <= 1e-6);
  // Gradient of the dual: G_i = y_i f(x_i) + rho y_i... check the margin conditions directly.
  for (std::size_t i = 0; i < n; ++i) {
    double f = 0;
    for (std::size_t j = 0; j < n; ++j) f += r.alpha[j] * y[j] * k[i * n + j];
    const double margin = y[i] * (f - r.rho);
    if (r.alpha[i] <= 1e-9) CHECK(margin >= 1 - 1e-2);
    else if (r.alpha[i] >= cap - 1e-9) CHECK(margin <= 1 + 1e-2);
    else CHECK(margin == doctest::Approx(1).epsilon(1e-2));
  }
}

TEST_CASE("every kind round-trips through the model file") {
  const auto data = small_synth(5, 1.0, 9);
  const auto& ds = data.phases[0];
  REQUIRE(ds.size() == 10);
  for (auto kind : kModelKinds) {
    HyperParams hp;
    hp.seed = 21;
    const auto m = train(kind, ds, hp);
    const auto bytes = save_model(m);
    const auto back = load_model(bytes);
    CHECK(back == m);
    CHECK(save_model(back) == bytes);
    const auto a = predict(m, ds), b = predict(back, ds);
    CHECK(a == b);
  }
}

TEST_CASE("damaged model files are refused") {
  const auto ds = make_dataset({{0.0}, {1.0}}, {Label::Suboptimal, Label::Optimal});
  const auto bytes = save_model(train(ModelKind::ExtraTrees, ds, HyperParams{}));
  CHECK(error_code([&] { load_model(bytes.substr(0, bytes.size() / 2)); }) == ErrorCode::CorruptModel);
  CHECK(error_code([&] { load_model(""); }) == ErrorCode::CorruptModel);
  auto flipped = bytes;
  flipped[30] = static_cast<char>(flipped[30] ^ 0x40);
  CHECK(error_code([&] { load_model(flipped); }) == ErrorCode::CorruptModel);
  auto magic = bytes;
  magic[0] = 'X';
  CHECK(error_code([&] { load_model(magic); }) == ErrorCode::CorruptModel);
  auto bumped = bytes;
  bumped[8] = static_cast<char>(bumped[8] + 1);
  CHECK(error_code([&] { load_model(bumped); }) == ErrorCode::VersionUnsupported);
}

TEST_CASE("training is deterministic for a fixed seed") {
  const auto data = small_synth(6, 1.0, 13);
  for (auto kind : kModelKinds) {
    HyperParams hp;
    hp.seed = 99;
    CHECK(save_model(train(kind, data.phases[2], hp)) == save_model(train(kind, data.phases[2], hp)));
  }
}

TEST_CASE("depth-one trees match the exhaustive stump search") {
  Rng rng(2024);
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t n = 2 + rng.below(15), d = 1 + rng.below(4);
    std::vector<double> x(n * d);
    std::vector<int> y(n);
    for (auto& v : x) v = static_cast<double>(rng.below(6)) + (rng.uniform() < 0.5 ? 0.0 : rng.uniform());
    for (auto& v : y) v = static_cast<int>(rng.below(2));
    const FeatureView view{x.data(), n, d};
    const std::vector<double> w(n, 1.0);
    std::vector<std::size_t> rows(n), feats(d);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    std::iota(feats.begin(), feats.end(), std::size_t{0});
    const auto got = best_gini_split(view, y, w, rows, feats);
    const auto want = brute_force_stump(view, y);
    CHECK(got.feature == want.feature);
    if (want.feature >= 0) {
      CHECK(got.threshold == want.threshold);
      CHECK(got.impurity == doctest::Approx(want.impurity).epsilon(1e-12));
    }
    Rng tree_rng(1);
    const auto t = fit_classification_tree(view, y, w, ClassTreeOptions{}, tree_rng);
    const bool pure = std::count(y.begin(), y.end(), 1) % static_cast<long>(n) == 0;
    if (!pure && want.feature >= 0) {
      CHECK(t.nodes[0].feature == want.feature);
      CHECK(t.nodes[0].threshold == want.threshold);
    }
  }
}

TEST_CASE("tree predictions survive monotone feature transforms") {
  Rng rng(31);
  for (int inst = 0; inst < 20; ++inst) {
    const std::size_t n = 12, d = 3;
    std::vector<std::vector<double>> xs, tx;
    std::vector<Label> ys;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> row(d), trow(d);
      for (std::size_t j = 0; j < d; ++j) {
        row[j] = rng.normal();
        trow[j] = std::exp(row[j]) + 3 * row[j];
      }
      xs.push_back(row);
      tx.push_back(trow);
      ys.push_back(i % 2 ? Label::Optimal : Label::Suboptimal);
    }
    const auto a = make_dataset(xs, ys), b = make_dataset(tx, ys);
    for (auto kind : {ModelKind::RandomForest, ModelKind::GradientBoost}) {
      HyperParams hp;
      hp.seed = static_cast<std::uint64_t>(inst);
      const auto pa = predict(train(kind, a, hp), a);
      const auto pb = predict(train(kind, b, hp), b);
      for (std::size_t i = 0; i < n; ++i) CHECK(pa[i].label == pb[i].label);
    }
  }
}

TEST_CASE("one-feature trees predict a nondecreasing step") {
  std::vector<std::vector<double>> xs;
  std::vector<Label> ys;
  for (int i = 0; i < 20; ++i) {
    xs.push_back({static_cast<double>(i)});
    ys.push_back(i >= 9 ? Label::Optimal : Label::Suboptimal);
  }
  const auto ds = make_dataset(xs, ys);
  for (auto kind : {ModelKind::RandomForest, ModelKind::GradientBoost, ModelKind::ExtraTrees}) {
    const auto m = train(kind, ds, HyperParams{});
    int prev = 0;
    for (double v = -5; v <= 25; v += 0.25) {
      const auto p = predict(m, ds.registry, std::vector<double>{v});
      CHECK(p.score >= 0);
      CHECK(p.score <= 1);
      const int now = p.label == Label::Optimal;
      CHECK(now >= prev);
      prev = now;
    }
  }
}

TEST_CASE("serial and parallel tree kernels agree") {
  const auto data = small_synth(8, 1.0, 17);
  const auto& ds = data.phases[0];
  const auto x = ds.matrix();
  const FeatureView view{x.data(), ds.size(), ds.registry.size()};
  for (auto kind : {ModelKind::RandomForest, ModelKind::IsolationForest}) {
    const auto m = train(kind, ds, HyperParams{});
    std::vector<double> a(view.rows), b(view.rows);
    if (kind == ModelKind::RandomForest) {
      kernels::serial::ensemble_mean(m.trees, view, a);
      kernels::omp::ensemble_mean(m.trees, view, b);
    } else {
      kernels::serial::isolation_path(m.trees, view, a);
      kernels::omp::isolation_path(m.trees, view, b);
    }
    CHECK(a == b);
    CHECK(predict_rows(m, view, kernels::Exec::Serial) == predict_rows(m, view, kernels::Exec::Parallel));
  }
}

TEST_CASE("hyperparameters are validated") {
  HyperParams hp;
  hp.svc_c = 0;
  CHECK(error_code([&] { hp.validate(); }) == ErrorCode::InvalidArgument);
  hp = {};
  hp.ocsvm_nu = 1.5;
  CHECK(error_code([&] { hp.validate(); }) == ErrorCode::InvalidArgument);
  hp = {};
  hp.rf_trees = 0;
  CHECK(error_code([&] { hp.validate(); }) == ErrorCode::InvalidArgument);
}
