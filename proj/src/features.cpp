#include "paddle/features.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "paddle/digest.hpp"
#include "paddle/error.hpp"
#include "paddle/text.hpp"

namespace paddle {

std::string_view to_string(StatKind k) {
  switch (k) {
    case StatKind::Mean: return "mean";
    case StatKind::Skewness: return "skewness";
    case StatKind::StdDev: return "std";
    case StatKind::Min: return "min";
    case StatKind::Max: return "max";
    case StatKind::Range: return "range";
    case StatKind::Q1: return "q1";
    case StatKind::Q3: return "q3";
  }
  return "?";
}

std::optional<StatKind> parse_stat(std::string_view s) {
  for (auto k : kStatKinds)
    if (to_string(k) == s) return k;
  return std::nullopt;
}

kernels::Stats summarize_series(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) throw Error(ErrorCode::EmptyInput, "summary of empty series", "features");
  for (double v : x)
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "non-finite sample", "features");

  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  const double lo = sorted.front();
  const double hi = sorted.back();
  auto quantile = [&](double q) {
    const double pos = static_cast<double>(n - 1) * q;
    const auto i = static_cast<std::size_t>(std::floor(pos));
    if (i + 1 >= n) return sorted[n - 1];
    const double frac = pos - static_cast<double>(i);
    return sorted[i] + (sorted[i + 1] - sorted[i]) * frac;
  };

  kernels::Stats out{};
  auto set = [&](StatKind k, double v) { out[static_cast<std::size_t>(k)] = v; };
  set(StatKind::Min, lo);
  set(StatKind::Max, hi);
  set(StatKind::Range, hi - lo);
  if (lo == hi) {
    // Constant series: exact values, no rounding residue in the moments.
    set(StatKind::Mean, lo);
    set(StatKind::Q1, lo);
    set(StatKind::Q3, lo);
    return out;
  }
  set(StatKind::Q1, quantile(0.25));
  set(StatKind::Q3, quantile(0.75));

  const double nn = static_cast<double>(n);
  double sum = 0;
  for (double v : x) sum += v;
  double mean = sum / nn;
  double corr = 0;
  for (double v : x) corr += v - mean;
  mean += corr / nn;
  set(StatKind::Mean, mean);

  double m2 = 0, m3 = 0;
  for (double v : x) {
    const double d = v - mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  set(StatKind::StdDev, std::sqrt(m2 / (nn - 1.0)));
  if (n >= 3 && m2 > 0) {
    const double pm2 = m2 / nn;
    const double pm3 = m3 / nn;
    const double g1 = pm3 / std::pow(pm2, 1.5);
    set(StatKind::Skewness, g1 * std::sqrt(nn * (nn - 1.0)) / (nn - 2.0));
  }
  return out;
}

std::string feature_name(const FeatureKey& k) {
  return channel_name(k.channel) + "." + std::string(to_string(k.stat));
}

std::optional<FeatureKey> parse_feature_name(std::string_view name) {
  const auto dot = name.rfind('.');
  if (dot == std::string_view::npos) return std::nullopt;
  auto ch = parse_channel_name(name.substr(0, dot));
  auto st = parse_stat(name.substr(dot + 1));
  if (!ch || !st) return std::nullopt;
  return FeatureKey{*ch, *st};
}

FeatureRegistry::FeatureRegistry(std::vector<FeatureKey> entries) : entries_(std::move(entries)) {
  std::set<std::string> seen;
  std::string joined;
  for (const auto& e : entries_) {
    auto name = feature_name(e);
    if (!seen.insert(name).second)
      throw Error(ErrorCode::InvalidArgument, "duplicate feature " + name, "features");
    joined += name;
    joined += '\n';
  }
  digest_ = sha256_hex(joined);
}

FeatureRegistry FeatureRegistry::full(std::span<const ChannelId> channels) {
  std::vector<FeatureKey> e;
  e.reserve(channels.size() * kStatKinds.size());
  for (const auto& c : channels)
    for (auto k : kStatKinds) e.push_back({c, k});
  return FeatureRegistry(std::move(e));
}

FeatureRegistry FeatureRegistry::canonical() {
  const auto ch = canonical_channels();
  return full(ch);
}

FeatureRegistry FeatureRegistry::restrict_to(Device d) const {
  std::vector<FeatureKey> e;
  for (const auto& k : entries_)
    if (k.channel.device == d) e.push_back(k);
  if (e.empty())
    throw Error(ErrorCode::MissingChannel, "no channels for device " + std::string(to_string(d)),
                "features");
  return FeatureRegistry(std::move(e));
}

std::vector<std::string> FeatureRegistry::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(feature_name(e));
  return out;
}

std::vector<std::size_t> FeatureRegistry::indices_of(const FeatureRegistry& sub) const {
  std::vector<std::size_t> out;
  for (const auto& e : sub.entries()) {
    auto it = std::find(entries_.begin(), entries_.end(), e);
    if (it == entries_.end())
      throw Error(ErrorCode::MissingChannel, feature_name(e), "features");
    out.push_back(static_cast<std::size_t>(it - entries_.begin()));
  }
  return out;
}

std::vector<double> FeatureDataset::matrix() const {
  std::vector<double> out;
  out.reserve(rows.size() * registry.size());
  for (const auto& r : rows) out.insert(out.end(), r.values.begin(), r.values.end());
  return out;
}

FeatureDataset FeatureDataset::select(const FeatureRegistry& sub) const {
  const auto idx = registry.indices_of(sub);
  FeatureDataset out{sub, phase, {}};
  out.rows.reserve(rows.size());
  for (const auto& r : rows) {
    FeatureVector v{r.stroke, r.phase, {}, r.label};
    v.values.reserve(idx.size());
    for (auto i : idx) v.values.push_back(r.values[i]);
    out.rows.push_back(std::move(v));
  }
  return out;
}

std::size_t FeatureDataset::count(Label l) const {
  return static_cast<std::size_t>(
      std::count_if(rows.begin(), rows.end(), [&](const auto& r) { return r.label == l; }));
}

namespace {

// Registry entry -> row index in `channels`.
std::vector<std::size_t> channel_rows(const std::vector<ChannelId>& channels,
                                      const FeatureRegistry& registry) {
  std::map<ChannelId, std::size_t> where;
  for (std::size_t i = 0; i < channels.size(); ++i) where.emplace(channels[i], i);
  std::vector<std::size_t> out;
  out.reserve(registry.size());
  for (const auto& e : registry.entries()) {
    auto it = where.find(e.channel);
    if (it == where.end())
      throw Error(ErrorCode::MissingChannel, channel_name(e.channel), "features");
    out.push_back(it->second);
  }
  return out;
}

std::vector<double> gather(const std::vector<kernels::Stats>& stats,
                           const std::vector<std::size_t>& rows, const FeatureRegistry& registry) {
  std::vector<double> v;
  v.reserve(registry.size());
  for (std::size_t i = 0; i < registry.size(); ++i)
    v.push_back(stats[rows[i]][static_cast<std::size_t>(registry.entries()[i].stat)]);
  return v;
}

}  // namespace

FeatureVector featurize_phase(const ChannelMatrix& phase, const FeatureRegistry& registry) {
  const auto rows = channel_rows(phase.channels(), registry);
  if (phase.frames() == 0) throw Error(ErrorCode::EmptyInput, "phase has no frames", "features");
  std::vector<kernels::Stats> stats(phase.rows());
  // Only rows the registry references are summarized.
  std::vector<char> used(phase.rows(), 0);
  for (auto r : rows) used[r] = 1;
  for (std::size_t r = 0; r < phase.rows(); ++r)
    if (used[r]) stats[r] = summarize_series(phase.row(r));
  FeatureVector out;
  out.values = gather(stats, rows, registry);
  return out;
}

std::array<FeatureDataset, 3> featurize_trial(const AlignedSession& session,
                                              std::span<const StrokeRecord> records,
                                              const FeatureRegistry& registry,
                                              const SegmentationParams& params,
                                              kernels::Exec exec) {
  std::array<FeatureDataset, 3> out;
  for (std::size_t p = 0; p < 3; ++p) out[p] = FeatureDataset{registry, kPhases[p], {}};
  const auto rows = channel_rows(session.registry(), registry);

  std::vector<ChannelMatrix> phases;
  std::vector<std::pair<std::size_t, std::size_t>> origin;  // (stroke index, phase)
  for (const auto& r : records) {
    if (!r.accepted()) continue;
    auto mats = standardize(session, r, params);
    for (std::size_t p = 0; p < 3; ++p) {
      phases.push_back(std::move(mats[p]));
      origin.emplace_back(r.index, p);
    }
  }
  std::vector<std::vector<kernels::Stats>> stats(phases.size());
  kernels::summarize_batch(phases, stats, exec);
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const auto [stroke, p] = origin[i];
    FeatureVector v{stroke, kPhases[p], gather(stats[i], rows, registry), session.label};
    out[p].rows.push_back(std::move(v));
  }
  return out;
}

std::string write_feature_table(std::span<const FeatureDataset> datasets) {
  if (datasets.empty()) throw Error(ErrorCode::InvalidArgument, "no datasets", "features");
  const auto& reg = datasets.front().registry;
  std::string out = "stroke,phase,label";
  for (const auto& n : reg.names()) out += "," + n;
  out += '\n';
  for (const auto& ds : datasets) {
    if (!(ds.registry == reg))
      throw Error(ErrorCode::RegistryMismatch, "datasets use different registries", "features");
    for (const auto& r : ds.rows) {
      if (r.values.size() != reg.size())
        throw Error(ErrorCode::InvalidArgument, "vector length differs from registry", "features");
      out += std::to_string(r.stroke);
      out += ',';
      out += to_string(ds.phase);
      out += ',';
      out += to_string(r.label);
      for (double v : r.values) {
        out += ',';
        out += text::format_real(v);
      }
      out += '\n';
    }
  }
  return out;
}

std::array<FeatureDataset, 3> read_feature_table(std::string_view csv) {
  const auto ls = text::lines(csv);
  if (ls.empty() || text::trim(ls[0]).empty())
    throw Error(ErrorCode::EmptyFile, "feature table has no header", "features");
  const auto header = text::split(ls[0]);
  if (header.size() < 3 || header[0] != "stroke" || header[1] != "phase" || header[2] != "label")
    throw Error(ErrorCode::InvalidArgument, "feature table header must start stroke,phase,label",
                "features");
  std::vector<FeatureKey> keys;
  for (std::size_t c = 3; c < header.size(); ++c) {
    auto k = parse_feature_name(header[c]);
    if (!k)
      throw Error(ErrorCode::InvalidArgument, "unknown feature column " + std::string(header[c]),
                  "features");
    keys.push_back(*k);
  }
  FeatureRegistry reg(std::move(keys));
  std::array<FeatureDataset, 3> out;
  for (std::size_t p = 0; p < 3; ++p) out[p] = FeatureDataset{reg, kPhases[p], {}};
  for (std::size_t l = 1; l < ls.size(); ++l) {
    if (text::trim(ls[l]).empty()) continue;
    const auto c = text::split(ls[l]);
    auto bad = [&](const std::string& why) {
      return Error(ErrorCode::InvalidArgument, why + " at line " + std::to_string(l + 1),
                   "features");
    };
    if (c.size() != header.size()) throw bad("wrong cell count");
    auto stroke = text::parse_int(c[0]);
    auto phase = parse_phase(c[1]);
    auto label = parse_label(c[2]);
    if (!stroke || *stroke < 0 || !phase || !label) throw bad("bad stroke/phase/label");
    FeatureVector v{static_cast<std::size_t>(*stroke), *phase, {}, *label};
    v.values.reserve(reg.size());
    for (std::size_t i = 3; i < c.size(); ++i) {
      auto x = text::parse_real(c[i]);
      if (!x || !std::isfinite(*x)) throw bad("bad value");
      v.values.push_back(*x);
    }
    out[static_cast<std::size_t>(*phase)].rows.push_back(std::move(v));
  }
  return out;
}

void append_rows(std::array<FeatureDataset, 3>& into, const std::array<FeatureDataset, 3>& more) {
  for (std::size_t p = 0; p < 3; ++p) {
    if (into[p].registry.size() == 0 && into[p].rows.empty()) {
      into[p] = more[p];
      continue;
    }
    if (!(into[p].registry == more[p].registry))
      throw Error(ErrorCode::RegistryMismatch, "cannot append datasets with different registries",
                  "features");
    into[p].rows.insert(into[p].rows.end(), more[p].rows.begin(), more[p].rows.end());
  }
}

std::string dataset_digest(std::span<const FeatureDataset> datasets) {
  return sha256_hex(write_feature_table(datasets));
}

}  // namespace paddle
