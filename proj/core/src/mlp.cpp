#include "safemes/mlp.hpp"

#include <cmath>
#include <string>

namespace safemes {

Mlp::Mlp(std::vector<int> layer_sizes, OutputActivation output) : sizes_(std::move(layer_sizes)), output_(output) {
  if (sizes_.size() < 2) throw Error("mlp needs at least an input and an output layer");
  Eigen::Index total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] <= 0 || sizes_[l + 1] <= 0) throw Error("mlp layer sizes must be positive");
    offsets_.push_back(total);
    total += static_cast<Eigen::Index>(sizes_[l + 1]) * (sizes_[l] + 1);
  }
  params_ = Eigen::VectorXd::Zero(total);
}

void Mlp::init_uniform(Rng& rng) {
  for (std::size_t l = 0; l < n_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
    std::uniform_real_distribution<double> u(-bound, bound);
    auto w = weight(l);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = u(rng);
    auto b = bias(l);
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = u(rng);
  }
}

Eigen::Map<Eigen::MatrixXd> Mlp::weight(std::size_t layer) {
  return {params_.data() + offsets_[layer], sizes_[layer + 1], sizes_[layer]};
}

Eigen::Map<const Eigen::MatrixXd> Mlp::weight(std::size_t layer) const {
  return {params_.data() + offsets_[layer], sizes_[layer + 1], sizes_[layer]};
}

Eigen::Map<Eigen::VectorXd> Mlp::bias(std::size_t layer) {
  return {params_.data() + offsets_[layer] + static_cast<Eigen::Index>(sizes_[layer + 1]) * sizes_[layer],
          sizes_[layer + 1]};
}

Eigen::Map<const Eigen::VectorXd> Mlp::bias(std::size_t layer) const {
  return {params_.data() + offsets_[layer] + static_cast<Eigen::Index>(sizes_[layer + 1]) * sizes_[layer],
          sizes_[layer + 1]};
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x) const {
  if (x.size() != input_size()) {
    throw Error("mlp input has size " + std::to_string(x.size()) + ", expected " + std::to_string(input_size()));
  }
  Eigen::VectorXd a = x;
  for (std::size_t l = 0; l < n_layers(); ++l) {
    Eigen::VectorXd z = weight(l) * a + bias(l);
    const bool last = l + 1 == n_layers();
    if (!last || output_ == OutputActivation::kTanh) z = z.array().tanh();
    a = std::move(z);
  }
  return a;
}

Eigen::MatrixXd Mlp::forward_batch(const Eigen::MatrixXd& x, ForwardCache* cache) const {
  if (x.rows() != input_size()) {
    throw Error("mlp input has " + std::to_string(x.rows()) + " rows, expected " + std::to_string(input_size()));
  }
  if (cache) {
    cache->activations.resize(n_layers() + 1);
    cache->activations[0] = x;
  }
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l < n_layers(); ++l) {
    Eigen::MatrixXd z = weight(l) * a;
    z.colwise() += bias(l);
    const bool last = l + 1 == n_layers();
    if (!last || output_ == OutputActivation::kTanh) z = z.array().tanh();
    a = std::move(z);
    if (cache) cache->activations[l + 1] = a;
  }
  return a;
}

Mlp::Gradients Mlp::backward(const ForwardCache& cache, const Eigen::MatrixXd& d_output) const {
  if (cache.activations.size() != n_layers() + 1) throw Error("mlp backward: cache does not match network");
  const Eigen::MatrixXd& y = cache.activations.back();
  if (d_output.rows() != y.rows() || d_output.cols() != y.cols()) throw Error("mlp backward: gradient shape mismatch");

  Gradients g;
  g.params = Eigen::VectorXd::Zero(params_.size());
  Eigen::MatrixXd delta = d_output;
  if (output_ == OutputActivation::kTanh) delta.array() *= 1.0 - y.array().square();

  for (std::size_t l = n_layers(); l-- > 0;) {
    const Eigen::MatrixXd& a_in = cache.activations[l];
    const Eigen::Index rows = sizes_[l + 1];
    const Eigen::Index cols = sizes_[l];
    Eigen::Map<Eigen::MatrixXd>(g.params.data() + offsets_[l], rows, cols).noalias() = delta * a_in.transpose();
    Eigen::Map<Eigen::VectorXd>(g.params.data() + offsets_[l] + rows * cols, rows) = delta.rowwise().sum();
    Eigen::MatrixXd back = weight(l).transpose() * delta;
    if (l > 0) back.array() *= 1.0 - a_in.array().square();
    delta = std::move(back);
  }
  g.input = std::move(delta);
  return g;
}

LossAndGrad loss_and_grad(const Mlp& net, const Eigen::MatrixXd& x, const OutputLoss& loss) {
  ForwardCache cache;
  const Eigen::MatrixXd y = net.forward_batch(x, &cache);
  auto [value, d_y] = loss(y);
  if (!std::isfinite(value)) throw Error("loss is not finite");
  return {value, net.backward(cache, d_y)};
}

Adam::Adam(Eigen::Index n_params, double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps),
      m_(Eigen::VectorXd::Zero(n_params)),
      v_(Eigen::VectorXd::Zero(n_params)) {}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

void polyak_update(Eigen::VectorXd& target, const Eigen::VectorXd& source, double rho) {
  target = rho * target + (1.0 - rho) * source;
}

}  // namespace safemes
