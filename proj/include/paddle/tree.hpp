#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "paddle/rng.hpp"

namespace paddle {

// Row-major [samples x features] view.
struct FeatureView {
  const double* data = nullptr;
  std::size_t rows = 0;
  std::size_t cols = 0;

  double at(std::size_t r, std::size_t c) const noexcept { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const noexcept { return {data + r * cols, cols}; }
};

// Internal node when feature >= 0: x[feature] <= threshold goes left.
struct TreeNode {
  std::int32_t feature = -1;
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;         // leaf output (class-1 fraction, Newton step, ...)
  std::uint32_t samples = 0;  // training samples reaching the node

  bool is_leaf() const noexcept { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  struct Leaf {
    std::size_t index;
    std::size_t depth;
  };
  Leaf find_leaf(std::span<const double> x) const noexcept;
  double predict(std::span<const double> x) const noexcept { return nodes[find_leaf(x).index].value; }

  friend bool operator==(const Tree&, const Tree&) = default;
};

// Ties within this margin keep the earlier candidate (lower feature index,
// then lower threshold).
inline constexpr double kSplitTieEps = 1e-12;

struct SplitChoice {
  std::int32_t feature = -1;
  double threshold = 0.0;
  double impurity = 0.0;  // weighted Gini of the two children
};

// Best Gini split over `features` for the samples `rows`; binary labels 0/1
// with per-sample weights. feature == -1 when every candidate is constant.
SplitChoice best_gini_split(const FeatureView& x, std::span<const int> y,
                            std::span<const double> weight,
                            std::span<const std::size_t> rows,
                            std::span<const std::size_t> features);

double gini(double w0, double w1) noexcept;

struct ClassTreeOptions {
  int max_depth = 1;
  std::size_t max_features = 0;   // 0 = all features
  bool random_thresholds = false;  // extremely randomized split points
};

// Leaf value = weighted fraction of label 1.
Tree fit_classification_tree(const FeatureView& x, std::span<const int> y,
                             std::span<const double> weight, const ClassTreeOptions& opts,
                             Rng& rng);

// Squared-error tree on `residual`; leaf value = sum(residual) / sum(hessian)
// (one Newton step for logistic loss).
Tree fit_newton_tree(const FeatureView& x, std::span<const double> residual,
                     std::span<const double> hessian, int max_depth);

// Random-split isolation tree over the given sample rows.
Tree fit_isolation_tree(const FeatureView& x, std::span<const std::size_t> rows,
                        int height_limit, Rng& rng);

// Average unsuccessful-search path length in a BST of n nodes:
// 0 for n <= 1, 1 for n == 2, else 2 H(n-1) - 2 (n-1) / n.
double average_path_length(std::size_t n) noexcept;

}  // namespace paddle
