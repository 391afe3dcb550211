#include "paddle/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace paddle {

Tree::Leaf Tree::find_leaf(std::span<const double> x) const noexcept {
  std::size_t i = 0;
  std::size_t depth = 0;
  while (!nodes[i].is_leaf()) {
    const auto& n = nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left
                                                                                          : n.right);
    ++depth;
  }
  return {i, depth};
}

double gini(double w0, double w1) noexcept {
  const double w = w0 + w1;
  if (w <= 0) return 0.0;
  const double p0 = w0 / w;
  const double p1 = w1 / w;
  return 1.0 - p0 * p0 - p1 * p1;
}

double average_path_length(std::size_t n) noexcept {
  if (n <= 1) return 0.0;
  if (n == 2) return 1.0;
  const double m = static_cast<double>(n);
  return 2.0 * (std::log(m - 1.0) + std::numbers::egamma) - 2.0 * (m - 1.0) / m;
}

namespace {

// Midpoint between two consecutive distinct values, never equal to hi.
double midpoint(double lo, double hi) {
  double t = lo + (hi - lo) / 2.0;
  if (t >= hi || t < lo) t = lo;
  return t;
}

struct Sorted {
  std::vector<std::pair<double, std::size_t>> items;  // (value, row)
};

void sort_rows(const FeatureView& x, std::span<const std::size_t> rows, std::size_t f,
               Sorted& out) {
  out.items.clear();
  out.items.reserve(rows.size());
  for (auto r : rows) out.items.emplace_back(x.at(r, f), r);
  std::sort(out.items.begin(), out.items.end());
}

// Scans all thresholds of one feature. Returns impurity of best split and
// sets `threshold`; +inf when the feature is constant over `rows`.
double scan_gini(const FeatureView& x, std::span<const int> y, std::span<const double> w,
                 std::span<const std::size_t> rows, std::size_t f, Sorted& buf,
                 double& threshold) {
  sort_rows(x, rows, f, buf);
  double tot[2] = {0, 0};
  for (const auto& [v, r] : buf.items) tot[y[r]] += w[r];
  const double total = tot[0] + tot[1];
  double left[2] = {0, 0};
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < buf.items.size(); ++i) {
    const auto r = buf.items[i].second;
    left[y[r]] += w[r];
    const double a = buf.items[i].first;
    const double b = buf.items[i + 1].first;
    if (!(a < b)) continue;
    const double wl = left[0] + left[1];
    const double wr = total - wl;
    const double imp =
        (wl * gini(left[0], left[1]) + wr * gini(tot[0] - left[0], tot[1] - left[1])) / total;
    if (imp < best - kSplitTieEps) {
      best = imp;
      threshold = midpoint(a, b);
    }
  }
  return best;
}

double impurity_at(const FeatureView& x, std::span<const int> y, std::span<const double> w,
                   std::span<const std::size_t> rows, std::size_t f, double threshold) {
  double l[2] = {0, 0}, r[2] = {0, 0};
  for (auto i : rows) (x.at(i, f) <= threshold ? l : r)[y[i]] += w[i];
  const double wl = l[0] + l[1], wr = r[0] + r[1];
  return (wl * gini(l[0], l[1]) + wr * gini(r[0], r[1])) / (wl + wr);
}

bool is_constant(const FeatureView& x, std::span<const std::size_t> rows, std::size_t f,
                 double& lo, double& hi) {
  lo = std::numeric_limits<double>::infinity();
  hi = -lo;
  for (auto r : rows) {
    lo = std::min(lo, x.at(r, f));
    hi = std::max(hi, x.at(r, f));
  }
  return !(lo < hi);
}

struct ClassBuilder {
  const FeatureView& x;
  std::span<const int> y;
  std::span<const double> w;
  const ClassTreeOptions& opts;
  Rng& rng;
  Tree tree;
  Sorted buf;
  std::vector<std::size_t> feature_order;

  std::int32_t build(std::vector<std::size_t> rows, int depth) {
    double cls[2] = {0, 0};
    for (auto r : rows) cls[y[r]] += w[r];
    const auto id = static_cast<std::int32_t>(tree.nodes.size());
    TreeNode node;
    node.samples = static_cast<std::uint32_t>(rows.size());
    const double total = cls[0] + cls[1];
    node.value = total > 0 ? cls[1] / total : 0.0;
    tree.nodes.push_back(node);
    if (depth >= opts.max_depth || cls[0] <= 0 || cls[1] <= 0 || rows.size() < 2) return id;

    const SplitChoice split = choose(rows);
    if (split.feature < 0) return id;

    std::vector<std::size_t> lrows, rrows;
    for (auto r : rows)
      (x.at(r, static_cast<std::size_t>(split.feature)) <= split.threshold ? lrows : rrows)
          .push_back(r);
    if (lrows.empty() || rrows.empty()) return id;
    const auto l = build(std::move(lrows), depth + 1);
    const auto rt = build(std::move(rrows), depth + 1);
    auto& n = tree.nodes[static_cast<std::size_t>(id)];
    n.feature = split.feature;
    n.threshold = split.threshold;
    n.left = l;
    n.right = rt;
    return id;
  }

  SplitChoice choose(std::span<const std::size_t> rows) {
    const std::size_t d = x.cols;
    const std::size_t want = opts.max_features == 0 ? d : std::min(opts.max_features, d);
    feature_order.resize(d);
    std::iota(feature_order.begin(), feature_order.end(), std::size_t{0});
    if (want < d || opts.random_thresholds) rng.shuffle(std::span<std::size_t>(feature_order));

    // Candidates are visited in draw order, but ties resolve by (feature,
    // threshold) so the result does not depend on the draw permutation.
    SplitChoice best;
    best.impurity = std::numeric_limits<double>::infinity();
    std::size_t evaluated = 0;
    for (std::size_t k = 0; k < d && evaluated < want; ++k) {
      const std::size_t f = feature_order[k];
      double lo = 0, hi = 0;
      if (is_constant(x, rows, f, lo, hi)) continue;
      ++evaluated;
      double thr = 0;
      double imp = 0;
      if (opts.random_thresholds) {
        thr = rng.uniform(lo, hi);
        if (thr >= hi) thr = lo;
        imp = impurity_at(x, y, w, rows, f, thr);
      } else {
        imp = scan_gini(x, y, w, rows, f, buf, thr);
      }
      const bool better = imp < best.impurity - kSplitTieEps;
      const bool tie = !better && std::abs(imp - best.impurity) <= kSplitTieEps &&
                       static_cast<std::int32_t>(f) < best.feature;
      if (better || tie) best = {static_cast<std::int32_t>(f), thr, imp};
    }
    return best;
  }
};

}  // namespace

SplitChoice best_gini_split(const FeatureView& x, std::span<const int> y,
                            std::span<const double> weight, std::span<const std::size_t> rows,
                            std::span<const std::size_t> features) {
  SplitChoice best;
  best.impurity = std::numeric_limits<double>::infinity();
  Sorted buf;
  std::vector<std::size_t> sorted_features(features.begin(), features.end());
  std::sort(sorted_features.begin(), sorted_features.end());
  for (auto f : sorted_features) {
    double thr = 0;
    const double imp = scan_gini(x, y, weight, rows, f, buf, thr);
    if (imp < best.impurity - kSplitTieEps) best = {static_cast<std::int32_t>(f), thr, imp};
  }
  if (best.feature < 0) best.impurity = 0.0;
  return best;
}

Tree fit_classification_tree(const FeatureView& x, std::span<const int> y,
                             std::span<const double> weight, const ClassTreeOptions& opts,
                             Rng& rng) {
  ClassBuilder b{x, y, weight, opts, rng, {}, {}, {}};
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < x.rows; ++r)
    if (weight[r] > 0) rows.push_back(r);
  b.build(std::move(rows), 0);
  return std::move(b.tree);
}

namespace {

struct NewtonBuilder {
  const FeatureView& x;
  std::span<const double> g;
  std::span<const double> h;
  int max_depth;
  Tree tree;
  Sorted buf;

  std::int32_t build(std::vector<std::size_t> rows, int depth) {
    double sg = 0, sh = 0;
    for (auto r : rows) {
      sg += g[r];
      sh += h[r];
    }
    const auto id = static_cast<std::int32_t>(tree.nodes.size());
    TreeNode node;
    node.samples = static_cast<std::uint32_t>(rows.size());
    node.value = std::abs(sh) < 1e-150 ? 0.0 : sg / sh;
    tree.nodes.push_back(node);
    if (depth >= max_depth || rows.size() < 2) return id;

    // Maximize sum_L^2/n_L + sum_R^2/n_R (squared-error reduction).
    std::int32_t best_f = -1;
    double best_thr = 0;
    double best_gain = -std::numeric_limits<double>::infinity();
    const double n = static_cast<double>(rows.size());
    for (std::size_t f = 0; f < x.cols; ++f) {
      sort_rows(x, rows, f, buf);
      double left = 0;
      for (std::size_t i = 0; i + 1 < buf.items.size(); ++i) {
        left += g[buf.items[i].second];
        const double a = buf.items[i].first, b = buf.items[i + 1].first;
        if (!(a < b)) continue;
        const double nl = static_cast<double>(i + 1);
        const double nr = n - nl;
        const double right = sg - left;
        const double gain = left * left / nl + right * right / nr;
        if (gain > best_gain + kSplitTieEps) {
          best_gain = gain;
          best_f = static_cast<std::int32_t>(f);
          best_thr = midpoint(a, b);
        }
      }
    }
    if (best_f < 0) return id;
    std::vector<std::size_t> lrows, rrows;
    for (auto r : rows)
      (x.at(r, static_cast<std::size_t>(best_f)) <= best_thr ? lrows : rrows).push_back(r);
    const auto l = build(std::move(lrows), depth + 1);
    const auto rt = build(std::move(rrows), depth + 1);
    auto& nd = tree.nodes[static_cast<std::size_t>(id)];
    nd.feature = best_f;
    nd.threshold = best_thr;
    nd.left = l;
    nd.right = rt;
    return id;
  }
};

struct IsolationBuilder {
  const FeatureView& x;
  int height_limit;
  Rng& rng;
  Tree tree;
  std::vector<std::size_t> order;

  std::int32_t build(std::vector<std::size_t> rows, int depth) {
    const auto id = static_cast<std::int32_t>(tree.nodes.size());
    TreeNode node;
    node.samples = static_cast<std::uint32_t>(rows.size());
    tree.nodes.push_back(node);
    if (depth >= height_limit || rows.size() <= 1) return id;

    order.resize(x.cols);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    std::int32_t feature = -1;
    double lo = 0, hi = 0;
    for (auto f : order) {
      if (!is_constant(x, rows, f, lo, hi)) {
        feature = static_cast<std::int32_t>(f);
        break;
      }
    }
    if (feature < 0) return id;
    double thr = rng.uniform(lo, hi);
    if (thr >= hi) thr = lo;
    std::vector<std::size_t> lrows, rrows;
    for (auto r : rows)
      (x.at(r, static_cast<std::size_t>(feature)) <= thr ? lrows : rrows).push_back(r);
    const auto l = build(std::move(lrows), depth + 1);
    const auto rt = build(std::move(rrows), depth + 1);
    auto& nd = tree.nodes[static_cast<std::size_t>(id)];
    nd.feature = feature;
    nd.threshold = thr;
    nd.left = l;
    nd.right = rt;
    return id;
  }
};

}  // namespace

Tree fit_newton_tree(const FeatureView& x, std::span<const double> residual,
                     std::span<const double> hessian, int max_depth) {
  NewtonBuilder b{x, residual, hessian, max_depth, {}, {}};
  std::vector<std::size_t> rows(x.rows);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  b.build(std::move(rows), 0);
  return std::move(b.tree);
}

Tree fit_isolation_tree(const FeatureView& x, std::span<const std::size_t> rows,
                        int height_limit, Rng& rng) {
  IsolationBuilder b{x, height_limit, rng, {}, {}};
  b.build(std::vector<std::size_t>(rows.begin(), rows.end()), 0);
  return std::move(b.tree);
}

}  // namespace paddle
