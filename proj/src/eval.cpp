#include "paddle/eval.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <json.hpp>
#include <numeric>

#include "paddle/digest.hpp"
#include "paddle/error.hpp"
#include "paddle/rng.hpp"

namespace paddle {

using Json = nlohmann::ordered_json;

void ConfusionMatrix::add(Label truth, Label predicted) {
  const bool t = truth == Label::Optimal;
  const bool p = predicted == Label::Optimal;
  if (t && p) ++tp;
  else if (!t && p) ++fp;
  else if (t && !p) ++fn;
  else ++tn;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& o) noexcept {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  tn += o.tn;
  return *this;
}

const std::optional<Metric>& metric_at(const MetricSet& m, std::size_t i) {
  switch (i) {
    case 0: return m.accuracy;
    case 1: return m.sensitivity;
    case 2: return m.specificity;
    case 3: return m.ppv;
    case 4: return m.npv;
    default: return m.f_score;
  }
}

double binomial_se(double m, std::uint64_t n) {
  if (n == 0) return 0;
  return std::sqrt(std::max(0.0, m * (1.0 - m)) / static_cast<double>(n));
}

MetricSet compute_metrics(const ConfusionMatrix& cm) {
  const auto n = cm.n();
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "empty confusion matrix", "eval");
  auto ratio = [&](std::uint64_t num, std::uint64_t den) -> std::optional<Metric> {
    if (den == 0) return std::nullopt;
    const double m = static_cast<double>(num) / static_cast<double>(den);
    return Metric{m, binomial_se(m, n)};
  };
  MetricSet out;
  out.n_evaluated = n;
  out.accuracy = ratio(cm.tp + cm.tn, n);
  out.sensitivity = ratio(cm.tp, cm.tp + cm.fn);
  out.specificity = ratio(cm.tn, cm.tn + cm.fp);
  out.ppv = ratio(cm.tp, cm.tp + cm.fp);
  out.npv = ratio(cm.tn, cm.tn + cm.fn);
  if (out.ppv && out.sensitivity && out.ppv->mean + out.sensitivity->mean > 0) {
    const double p = out.ppv->mean, s = out.sensitivity->mean;
    const double f = 2.0 * p * s / (p + s);
    out.f_score = Metric{f, binomial_se(f, n)};
  }
  return out;
}

std::vector<std::size_t> stratified_folds(std::span<const Label> labels, std::size_t k,
                                          std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::InvalidArgument, "k must be at least 2", "eval");
  std::vector<std::size_t> fold(labels.size(), 0);
  std::size_t next = 0;
  for (auto cls : {Label::Optimal, Label::Suboptimal, Label::Unlabeled}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) idx.push_back(i);
    Rng rng(derive_seed(seed, {0xF01D, static_cast<std::uint64_t>(cls)}));
    rng.shuffle(std::span<std::size_t>(idx));
    for (auto i : idx) fold[i] = next++ % k;
  }
  return fold;
}

namespace {

std::vector<Label> labels_of(const FeatureDataset& data) {
  std::vector<Label> out;
  out.reserve(data.size());
  for (const auto& r : data.rows) {
    if (r.label == Label::Unlabeled)
      throw Error(ErrorCode::InvalidArgument, "evaluation needs labeled rows", "eval");
    out.push_back(r.label);
  }
  return out;
}

double accuracy_of(std::span<const Prediction> p, std::span<const Label> truth) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < p.size(); ++i) hit += p[i].label == truth[i];
  return static_cast<double>(hit) / static_cast<double>(p.size());
}

// Runs body(i) for i in [0, n) in parallel and rethrows the first error.
template <typename F>
void parallel_for_each(std::size_t n, F&& body) {
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

ConfusionMatrix kfold_pooled_eval(ModelKind kind, const FeatureDataset& data,
                                  const HyperParams& hp, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::InvalidArgument, "k must be at least 2", "eval");
  if (data.size() < k)
    throw Error(ErrorCode::TooFewSamples,
                std::to_string(data.size()) + " samples for " + std::to_string(k) + " folds",
                "eval");
  const auto labels = labels_of(data);
  const auto fold = stratified_folds(labels, k, seed);
  const std::size_t d = data.registry.size();

  for (std::size_t f = 0; f < k; ++f) {
    std::size_t opt = 0, sub = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (fold[i] != f) (labels[i] == Label::Optimal ? opt : sub) += 1;
    if (opt == 0 || (is_supervised(kind) && sub == 0))
      throw Error(ErrorCode::FoldClassCollapse,
                  "training fold " + std::to_string(f) + " lacks a class", "eval");
  }

  std::vector<ConfusionMatrix> per_fold(k);
  parallel_for_each(k, [&](std::size_t f) {
    std::vector<double> xtr, xte;
    std::vector<int> ytr;
    std::vector<Label> truth;
    std::size_t ntr = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto& v = data.rows[i].values;
      if (fold[i] == f) {
        xte.insert(xte.end(), v.begin(), v.end());
        truth.push_back(labels[i]);
      } else if (is_supervised(kind) || labels[i] == Label::Optimal) {
        xtr.insert(xtr.end(), v.begin(), v.end());
        ytr.push_back(labels[i] == Label::Optimal ? 1 : 0);
        ++ntr;
      }
    }
    auto m = train_raw(kind, FeatureView{xtr.data(), ntr, d}, ytr, hp);
    const auto pred =
        predict_rows(m, FeatureView{xte.data(), truth.size(), d}, kernels::Exec::Serial);
    for (std::size_t i = 0; i < truth.size(); ++i) per_fold[f].add(truth[i], pred[i].label);
  });
  ConfusionMatrix pooled;
  for (const auto& c : per_fold) pooled += c;
  return pooled;
}

std::string_view to_string(BodySite s) {
  switch (s) {
    case BodySite::LeftWrist: return "left_wrist";
    case BodySite::RightWrist: return "right_wrist";
    case BodySite::RightBicep: return "right_bicep";
  }
  return "?";
}

std::optional<BodySite> parse_body_site(std::string_view s) {
  for (auto b : kBodySites)
    if (to_string(b) == s) return b;
  return std::nullopt;
}

Device device_of(BodySite s) {
  switch (s) {
    case BodySite::LeftWrist: return Device::LeftWatch;
    case BodySite::RightWrist: return Device::RightWatch;
    case BodySite::RightBicep: return Device::Phone;
  }
  return Device::Phone;
}

EvalReport evaluate_suite(std::span<const FeatureDataset> datasets,
                          std::span<const ModelKind> kinds, const HyperParams& hp,
                          std::size_t k, std::uint64_t seed) {
  if (datasets.empty()) throw Error(ErrorCode::InvalidArgument, "no datasets", "eval");
  EvalReport rep;
  rep.k = k;
  rep.fold_seed = seed;
  rep.dataset_digest = dataset_digest(datasets);
  rep.registry_digest = datasets.front().registry.digest();
  for (const auto& ds : datasets) {
    for (auto kind : kinds) {
      EvalCell c;
      c.phase = ds.phase;
      c.kind = kind;
      try {
        c.pooled = kfold_pooled_eval(kind, ds, hp, k, seed);
      } catch (const Error& e) {
        throw e.with_stage("eval", std::string(to_string(ds.phase)) + "/" +
                                       std::string(to_string(kind)));
      }
      c.metrics = compute_metrics(c.pooled);
      rep.cells.push_back(std::move(c));
    }
  }
  return rep;
}

DeviceReport evaluate_by_device(std::span<const FeatureDataset> datasets, BodySite site,
                                ModelKind kind, const HyperParams& hp, std::size_t k,
                                std::uint64_t seed) {
  DeviceReport out;
  out.site = site;
  for (const auto& ds : datasets) {
    const auto sub = ds.registry.restrict_to(device_of(site));
    const auto restricted = ds.select(sub);
    out.features = sub.size();
    EvalCell c;
    c.phase = ds.phase;
    c.kind = kind;
    c.pooled = kfold_pooled_eval(kind, restricted, hp, k, seed);
    c.metrics = compute_metrics(c.pooled);
    out.cells.push_back(std::move(c));
  }
  return out;
}

ImportanceResult permutation_importance(const TrainedModel& model, const FeatureDataset& data,
                                        std::size_t repeats, std::uint64_t seed) {
  if (repeats == 0)
    throw Error(ErrorCode::InvalidArgument, "importance needs at least one repeat", "eval");
  if (data.registry.digest() != model.registry_digest)
    throw Error(ErrorCode::RegistryMismatch, "feature registry differs from the model's", "eval");
  if (data.size() == 0) throw Error(ErrorCode::EmptyInput, "no rows to permute", "eval");
  const auto truth = labels_of(data);
  const auto x = data.matrix();
  const std::size_t n = data.size(), d = data.registry.size();

  ImportanceResult out;
  out.kind = model.kind;
  out.phase = data.phase;
  out.repeats = repeats;
  out.seed = seed;
  out.baseline_accuracy =
      accuracy_of(predict_rows(model, FeatureView{x.data(), n, d}, kernels::Exec::Serial), truth);

  std::vector<FeatureImportance> feats(d);
  const auto names = data.registry.names();
  parallel_for_each(d, [&](std::size_t j) {
    std::vector<double> xp = x;
    std::vector<double> col(n);
    std::vector<double> drops(repeats);
    for (std::size_t r = 0; r < repeats; ++r) {
      for (std::size_t i = 0; i < n; ++i) col[i] = x[i * d + j];
      Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(r)}));
      rng.shuffle(std::span<double>(col));
      for (std::size_t i = 0; i < n; ++i) xp[i * d + j] = col[i];
      const auto p = predict_rows(model, FeatureView{xp.data(), n, d}, kernels::Exec::Serial);
      drops[r] = out.baseline_accuracy - accuracy_of(p, truth);
    }
    const double mean =
        std::accumulate(drops.begin(), drops.end(), 0.0) / static_cast<double>(repeats);
    double ss = 0;
    for (double v : drops) ss += (v - mean) * (v - mean);
    feats[j] = {names[j], mean, repeats > 1 ? std::sqrt(ss / static_cast<double>(repeats - 1)) : 0};
  });

  std::array<double, kChannelGroupCount> sum{};
  std::array<std::size_t, kChannelGroupCount> members{};
  for (std::size_t j = 0; j < d; ++j) {
    if (auto g = group_of(data.registry.entries()[j].channel)) {
      sum[static_cast<std::size_t>(*g)] += feats[j].mean_drop;
      ++members[static_cast<std::size_t>(*g)];
    }
  }
  for (std::size_t g = 0; g < kChannelGroupCount; ++g)
    if (members[g] > 0)
      out.groups.push_back({static_cast<ChannelGroup>(g),
                            sum[g] / static_cast<double>(members[g]), members[g]});
  out.features = std::move(feats);
  auto by_drop = [](const auto& a, const auto& b) { return a.mean_drop > b.mean_drop; };
  std::stable_sort(out.features.begin(), out.features.end(), by_drop);
  std::stable_sort(out.groups.begin(), out.groups.end(), by_drop);
  return out;
}

std::string importance_to_csv(const ImportanceResult& r) {
  std::string out = "rank,feature,mean_drop,std_drop\n";
  for (std::size_t i = 0; i < r.features.size(); ++i) {
    const auto& f = r.features[i];
    out += std::to_string(i + 1) + ',' + f.feature + ',' + Json(f.mean_drop).dump() + ',' +
           Json(f.std_drop).dump() + '\n';
  }
  return out;
}

// ---- report document ----

namespace {

Json cell_json(const EvalCell& c) {
  Json metrics = Json::object();
  for (std::size_t i = 0; i < kMetricNames.size(); ++i) {
    const auto& m = metric_at(c.metrics, i);
    metrics[std::string(kMetricNames[i])] =
        m ? Json{{"mean", m->mean}, {"se", m->se}} : Json(nullptr);
  }
  return Json{{"phase", to_string(c.phase)},
              {"kind", to_string(c.kind)},
              {"confusion", {{"tp", c.pooled.tp}, {"fp", c.pooled.fp},
                             {"fn", c.pooled.fn}, {"tn", c.pooled.tn}}},
              {"n", c.metrics.n_evaluated},
              {"metrics", std::move(metrics)}};
}

EvalCell cell_from(const Json& j) {
  EvalCell c;
  auto phase = parse_phase(j.at("phase").get<std::string>());
  auto kind = parse_model_kind(j.at("kind").get<std::string>());
  if (!phase || !kind) throw Error(ErrorCode::InvalidArgument, "bad cell in report", "eval");
  c.phase = *phase;
  c.kind = *kind;
  const auto& cm = j.at("confusion");
  c.pooled = {cm.at("tp").get<std::uint64_t>(), cm.at("fp").get<std::uint64_t>(),
              cm.at("fn").get<std::uint64_t>(), cm.at("tn").get<std::uint64_t>()};
  c.metrics = compute_metrics(c.pooled);
  return c;
}

Json importance_json(const ImportanceResult& r) {
  Json feats = Json::array(), groups = Json::array();
  for (const auto& f : r.features)
    feats.push_back({{"feature", f.feature}, {"mean_drop", f.mean_drop}, {"std_drop", f.std_drop}});
  for (const auto& g : r.groups)
    groups.push_back(
        {{"group", to_string(g.group)}, {"mean_drop", g.mean_drop}, {"members", g.members}});
  return Json{{"kind", to_string(r.kind)},
              {"phase", to_string(r.phase)},
              {"repeats", r.repeats},
              {"seed", r.seed},
              {"baseline_accuracy", r.baseline_accuracy},
              {"features", std::move(feats)},
              {"groups", std::move(groups)}};
}

ImportanceResult importance_from(const Json& j) {
  ImportanceResult r;
  auto kind = parse_model_kind(j.at("kind").get<std::string>());
  auto phase = parse_phase(j.at("phase").get<std::string>());
  if (!kind || !phase) throw Error(ErrorCode::InvalidArgument, "bad importance block", "eval");
  r.kind = *kind;
  r.phase = *phase;
  r.repeats = j.at("repeats").get<std::size_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.baseline_accuracy = j.at("baseline_accuracy").get<double>();
  for (const auto& f : j.at("features"))
    r.features.push_back({f.at("feature").get<std::string>(), f.at("mean_drop").get<double>(),
                          f.at("std_drop").get<double>()});
  for (const auto& g : j.at("groups")) {
    const auto name = g.at("group").get<std::string>();
    std::optional<ChannelGroup> grp;
    for (std::size_t i = 0; i < kChannelGroupCount; ++i)
      if (to_string(static_cast<ChannelGroup>(i)) == name) grp = static_cast<ChannelGroup>(i);
    if (!grp) throw Error(ErrorCode::InvalidArgument, "unknown group " + name, "eval");
    r.groups.push_back({*grp, g.at("mean_drop").get<double>(), g.at("members").get<std::size_t>()});
  }
  return r;
}

Json report_body(const EvalReport& r) {
  Json cells = Json::array();
  for (const auto& c : r.cells) cells.push_back(cell_json(c));
  Json devices = Json::array();
  for (const auto& d : r.devices) {
    Json dc = Json::array();
    for (const auto& c : d.cells) dc.push_back(cell_json(c));
    devices.push_back({{"site", to_string(d.site)}, {"features", d.features}, {"cells", dc}});
  }
  return Json{{"v", 1},
              {"k", r.k},
              {"fold_seed", r.fold_seed},
              {"dataset_digest", r.dataset_digest},
              {"registry_digest", r.registry_digest},
              {"se_rule", "sqrt(m(1-m)/n), n = pooled out-of-fold samples"},
              {"cells", std::move(cells)},
              {"devices", std::move(devices)},
              {"importance", r.importance ? importance_json(*r.importance) : Json(nullptr)}};
}

}  // namespace

const EvalCell* EvalReport::find(Phase p, ModelKind k) const {
  for (const auto& c : cells)
    if (c.phase == p && c.kind == k) return &c;
  return nullptr;
}

std::string EvalReport::digest() const { return sha256_hex(report_body(*this).dump()); }

std::string EvalReport::to_json() const {
  auto j = report_body(*this);
  j["digest"] = digest();
  return j.dump(2) + "\n";
}

EvalReport EvalReport::from_json(std::string_view text) {
  try {
    const auto j = Json::parse(text);
    if (j.at("v").get<int>() != 1)
      throw Error(ErrorCode::VersionUnsupported, "report version", "eval");
    EvalReport r;
    r.k = j.at("k").get<std::size_t>();
    r.fold_seed = j.at("fold_seed").get<std::uint64_t>();
    r.dataset_digest = j.at("dataset_digest").get<std::string>();
    r.registry_digest = j.at("registry_digest").get<std::string>();
    for (const auto& c : j.at("cells")) r.cells.push_back(cell_from(c));
    for (const auto& d : j.at("devices")) {
      DeviceReport dr;
      auto site = parse_body_site(d.at("site").get<std::string>());
      if (!site) throw Error(ErrorCode::InvalidArgument, "unknown body site", "eval");
      dr.site = *site;
      dr.features = d.at("features").get<std::size_t>();
      for (const auto& c : d.at("cells")) dr.cells.push_back(cell_from(c));
      r.devices.push_back(std::move(dr));
    }
    if (!j.at("importance").is_null()) r.importance = importance_from(j.at("importance"));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed report: ") + e.what(), "eval");
  }
}

}  // namespace paddle
