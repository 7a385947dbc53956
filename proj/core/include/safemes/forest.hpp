#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace safemes {

/// Dense row-major design matrix.
struct FeatureMatrix {
  std::size_t n_features = 0;
  std::vector<double> data;

  std::size_t rows() const { return n_features == 0 ? 0 : data.size() / n_features; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * n_features, n_features}; }
  double at(std::size_t i, std::size_t f) const { return data[i * n_features + f]; }
  void push_row(std::span<const double> values);
};

struct ForestParams {
  int n_trees = 24;
  int max_depth = 14;
  int min_samples_leaf = 2;
  bool bootstrap = true;
  std::uint64_t seed = 7;
};

/// CART regression tree with variance-reduction splits. Leaves predict the
/// mean of their training targets.
class RegressionTree {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };

  void fit(const FeatureMatrix& x, std::span<const double> y, std::vector<std::size_t> sample,
           int max_depth, int min_samples_leaf);
  double predict(std::span<const double> features) const;

  const std::vector<Node>& nodes() const { return nodes_; }
  static RegressionTree from_nodes(std::vector<Node> nodes);

 private:
  int build(const FeatureMatrix& x, std::span<const double> y, std::vector<std::size_t>& idx,
            std::size_t begin, std::size_t end, int depth, int max_depth, int min_samples_leaf);

  std::vector<Node> nodes_;
};

/// Bagged ensemble of regression trees; prediction is the tree average.
class RandomForest {
 public:
  void fit(const FeatureMatrix& x, std::span<const double> y, const ForestParams& params);
  double predict(std::span<const double> features) const;

  std::size_t n_trees() const { return trees_.size(); }
  const std::vector<RegressionTree>& trees() const { return trees_; }
  static RandomForest from_trees(std::vector<RegressionTree> trees);

 private:
  std::vector<RegressionTree> trees_;
};

}  // namespace safemes
