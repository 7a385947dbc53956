#include "safemes/forest.hpp"

#include <algorithm>
#include <numeric>

#include "safemes/common.hpp"

namespace safemes {

void FeatureMatrix::push_row(std::span<const double> values) {
  if (n_features == 0) n_features = values.size();
  if (values.size() != n_features) throw Error("feature row has wrong width");
  data.insert(data.end(), values.begin(), values.end());
}

void RegressionTree::fit(const FeatureMatrix& x, std::span<const double> y, std::vector<std::size_t> sample,
                         int max_depth, int min_samples_leaf) {
  if (sample.empty()) throw Error("cannot fit a tree on zero samples");
  nodes_.clear();
  build(x, y, sample, 0, sample.size(), 0, max_depth, std::max(1, min_samples_leaf));
}

int RegressionTree::build(const FeatureMatrix& x, std::span<const double> y, std::vector<std::size_t>& idx,
                          std::size_t begin, std::size_t end, int depth, int max_depth,
                          int min_samples_leaf) {
  const std::size_t n = end - begin;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    sum += y[idx[i]];
    sum_sq += y[idx[i]] * y[idx[i]];
  }
  const int node_id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{-1, 0.0, -1, -1, sum / static_cast<double>(n)});

  const double parent_sse = sum_sq - sum * sum / static_cast<double>(n);
  const auto min_leaf = static_cast<std::size_t>(min_samples_leaf);
  if (depth >= max_depth || n < 2 * min_leaf || parent_sse <= 1e-14) return node_id;

  int best_feature = -1;
  double best_threshold = 0.0;
  double best_sse = parent_sse;
  std::vector<std::size_t> order(idx.begin() + static_cast<std::ptrdiff_t>(begin),
                                 idx.begin() + static_cast<std::ptrdiff_t>(end));
  for (std::size_t f = 0; f < x.n_features; ++f) {
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x.at(a, f) < x.at(b, f); });
    double left_sum = 0.0;
    double left_sq = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double v = y[order[i]];
      left_sum += v;
      left_sq += v * v;
      const std::size_t n_left = i + 1;
      const std::size_t n_right = n - n_left;
      if (n_left < min_leaf || n_right < min_leaf) continue;
      const double here = x.at(order[i], f);
      const double next = x.at(order[i + 1], f);
      if (!(here < next)) continue;
      const double right_sum = sum - left_sum;
      const double right_sq = sum_sq - left_sq;
      const double sse = (left_sq - left_sum * left_sum / static_cast<double>(n_left)) +
                         (right_sq - right_sum * right_sum / static_cast<double>(n_right));
      if (sse < best_sse - 1e-12) {
        best_sse = sse;
        best_feature = static_cast<int>(f);
        best_threshold = 0.5 * (here + next);
      }
    }
  }
  if (best_feature < 0) return node_id;

  const auto f = static_cast<std::size_t>(best_feature);
  auto mid_it = std::partition(idx.begin() + static_cast<std::ptrdiff_t>(begin),
                               idx.begin() + static_cast<std::ptrdiff_t>(end),
                               [&](std::size_t s) { return x.at(s, f) <= best_threshold; });
  const auto mid = static_cast<std::size_t>(mid_it - idx.begin());

  const int left = build(x, y, idx, begin, mid, depth + 1, max_depth, min_samples_leaf);
  const int right = build(x, y, idx, mid, end, depth + 1, max_depth, min_samples_leaf);
  Node& node = nodes_[static_cast<std::size_t>(node_id)];
  node.feature = best_feature;
  node.threshold = best_threshold;
  node.left = left;
  node.right = right;
  return node_id;
}

double RegressionTree::predict(std::span<const double> features) const {
  std::size_t i = 0;
  while (nodes_[i].feature >= 0) {
    const Node& n = nodes_[i];
    i = static_cast<std::size_t>(features[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return nodes_[i].value;
}

RegressionTree RegressionTree::from_nodes(std::vector<Node> nodes) {
  if (nodes.empty()) throw Error("tree has no nodes");
  const int count = static_cast<int>(nodes.size());
  for (const Node& n : nodes) {
    if (n.feature >= 0 && (n.left <= 0 || n.right <= 0 || n.left >= count || n.right >= count)) {
      throw Error("tree node references a child out of range");
    }
  }
  RegressionTree t;
  t.nodes_ = std::move(nodes);
  return t;
}

void RandomForest::fit(const FeatureMatrix& x, std::span<const double> y, const ForestParams& params) {
  const std::size_t n = x.rows();
  if (n == 0 || y.size() != n) throw Error("forest fit: features and targets disagree in length");
  if (params.n_trees < 1) throw Error("forest fit: n_trees must be >= 1");
  trees_.assign(static_cast<std::size_t>(params.n_trees), RegressionTree{});
  Rng rng(params.seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  for (auto& tree : trees_) {
    std::vector<std::size_t> sample(n);
    if (params.bootstrap) {
      for (auto& s : sample) s = pick(rng);
    } else {
      std::iota(sample.begin(), sample.end(), std::size_t{0});
    }
    tree.fit(x, y, std::move(sample), params.max_depth, params.min_samples_leaf);
  }
}

double RandomForest::predict(std::span<const double> features) const {
  double sum = 0.0;
  for (const auto& t : trees_) sum += t.predict(features);
  return sum / static_cast<double>(trees_.size());
}

RandomForest RandomForest::from_trees(std::vector<RegressionTree> trees) {
  if (trees.empty()) throw Error("forest has no trees");
  RandomForest f;
  f.trees_ = std::move(trees);
  return f;
}

}  // namespace safemes
