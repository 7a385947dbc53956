#pragma once

#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "safemes/common.hpp"

namespace safemes {

enum class OutputActivation { kLinear, kTanh };

/// Per-layer activations kept from a batched forward pass for backprop.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> activations;  // [0] is the input batch
};

/// Fully connected network with tanh hidden layers. All weights and biases
/// live in one flat parameter vector: per layer W (out x in, column-major)
/// followed by b.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<int> layer_sizes, OutputActivation output);

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  void init_uniform(Rng& rng);

  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  const std::vector<int>& layer_sizes() const { return sizes_; }
  OutputActivation output_activation() const { return output_; }
  std::size_t n_layers() const { return sizes_.size() - 1; }

  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }
  Eigen::Index n_params() const { return params_.size(); }

  Eigen::Map<Eigen::MatrixXd> weight(std::size_t layer);
  Eigen::Map<const Eigen::MatrixXd> weight(std::size_t layer) const;
  Eigen::Map<Eigen::VectorXd> bias(std::size_t layer);
  Eigen::Map<const Eigen::VectorXd> bias(std::size_t layer) const;

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;

  /// Columns of x are samples. Fills cache when given.
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x, ForwardCache* cache = nullptr) const;

  struct Gradients {
    Eigen::VectorXd params;  // same layout as params()
    Eigen::MatrixXd input;   // dL/dx, one column per sample
  };

  /// Reverse pass given dL/dy for the batch that produced cache.
  Gradients backward(const ForwardCache& cache, const Eigen::MatrixXd& d_output) const;

  bool all_finite() const { return params_.allFinite(); }

 private:
  std::vector<int> sizes_;
  OutputActivation output_ = OutputActivation::kLinear;
  Eigen::VectorXd params_;
  std::vector<Eigen::Index> offsets_;  // start of W for each layer
};

/// Loss over a batch of network outputs: returns (loss, dL/dy).
using OutputLoss = std::function<std::pair<double, Eigen::MatrixXd>(const Eigen::MatrixXd& y)>;

struct LossAndGrad {
  double loss = 0.0;
  Mlp::Gradients grad;
};

/// Forward + backward for a loss defined on the outputs of net(x).
LossAndGrad loss_and_grad(const Mlp& net, const Eigen::MatrixXd& x, const OutputLoss& loss);

/// Adam with bias correction.
class Adam {
 public:
  Adam() = default;
  Adam(Eigen::Index n_params, double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);

  double learning_rate() const { return lr_; }
  std::int64_t steps() const { return t_; }
  Eigen::VectorXd& first_moment() { return m_; }
  Eigen::VectorXd& second_moment() { return v_; }
  const Eigen::VectorXd& first_moment() const { return m_; }
  const Eigen::VectorXd& second_moment() const { return v_; }
  void set_steps(std::int64_t t) { t_ = t; }

 private:
  double lr_ = 1e-3;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  std::int64_t t_ = 0;
};

/// target <- rho * target + (1 - rho) * source
void polyak_update(Eigen::VectorXd& target, const Eigen::VectorXd& source, double rho);

}  // namespace safemes
