#include "safemes/agents.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace safemes {

namespace {

constexpr std::uint32_t kAgentFormatVersion = 1;

void write_mlp(BinaryWriter& w, const Mlp& net) {
  std::vector<int> sizes = net.layer_sizes();
  w.write_pod_vector(sizes);
  w.write<int>(net.output_activation() == OutputActivation::kTanh ? 1 : 0);
  w.write_vector(net.params());
}

Mlp read_mlp(BinaryReader& r) {
  auto sizes = r.read_pod_vector<int>();
  const int act = r.read<int>();
  Mlp net(sizes, act == 1 ? OutputActivation::kTanh : OutputActivation::kLinear);
  Eigen::VectorXd p = r.read_vector();
  if (p.size() != net.n_params()) throw Error("checkpoint network size mismatch");
  net.params() = std::move(p);
  return net;
}

void write_adam(BinaryWriter& w, const Adam& a) {
  w.write<double>(a.learning_rate());
  w.write<std::int64_t>(a.steps());
  w.write_vector(a.first_moment());
  w.write_vector(a.second_moment());
}

Adam read_adam(BinaryReader& r) {
  const double lr = r.read<double>();
  const auto t = r.read<std::int64_t>();
  Eigen::VectorXd m = r.read_vector();
  Eigen::VectorXd v = r.read_vector();
  Adam a(m.size(), lr);
  a.first_moment() = std::move(m);
  a.second_moment() = std::move(v);
  a.set_steps(t);
  return a;
}

void write_hyper(BinaryWriter& w, const Td3Hyper& h) {
  w.write_string(h.name);
  w.write(h.gamma);
  w.write(h.learning_rate);
  w.write(h.batch_size);
  w.write<std::uint64_t>(h.buffer_size);
  w.write(h.train_freq);
  w.write(h.gradient_steps);
  w.write_string(h.noise_type);
  w.write(h.noise_std);
  w.write(h.policy_delay);
  w.write(h.target_noise_std);
  w.write(h.target_noise_clip);
  w.write(h.polyak);
  w.write(h.warmup_steps);
  w.write(h.hidden);
  w.write(h.uniform_retry_after);
}

Td3Hyper read_hyper(BinaryReader& r) {
  Td3Hyper h;
  h.name = r.read_string();
  h.gamma = r.read<double>();
  h.learning_rate = r.read<double>();
  h.batch_size = r.read<int>();
  h.buffer_size = r.read<std::uint64_t>();
  h.train_freq = r.read<int>();
  h.gradient_steps = r.read<int>();
  h.noise_type = r.read_string();
  h.noise_std = r.read<double>();
  h.policy_delay = r.read<int>();
  h.target_noise_std = r.read<double>();
  h.target_noise_clip = r.read<double>();
  h.polyak = r.read<double>();
  h.warmup_steps = r.read<int>();
  h.hidden = r.read<int>();
  h.uniform_retry_after = r.read<int>();
  return h;
}

}  // namespace

// ---------------------------------------------------------------- replay

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw Error("replay buffer capacity must be positive");
}

void ReplayBuffer::push(const ExperienceTuple& t) {
  if (data_.size() < capacity_) {
    data_.push_back(t);
    return;
  }
  data_[head_] = t;
  head_ = (head_ + 1) % capacity_;
}

const ExperienceTuple& ReplayBuffer::oldest(std::size_t i) const {
  if (i >= data_.size()) throw Error("replay buffer index out of range");
  return data_[(head_ + i) % data_.size()];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t n, Rng& rng) const {
  if (data_.empty()) throw Error("cannot sample from an empty replay buffer");
  std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

void ReplayBuffer::save(BinaryWriter& w) const {
  w.write<std::uint64_t>(capacity_);
  w.write<std::uint64_t>(head_);
  w.write_pod_vector(data_);
}

ReplayBuffer ReplayBuffer::load(BinaryReader& r) {
  ReplayBuffer b(r.read<std::uint64_t>());
  b.head_ = r.read<std::uint64_t>();
  b.data_ = r.read_pod_vector<ExperienceTuple>();
  if (b.data_.size() > b.capacity_ || (b.head_ != 0 && b.head_ >= b.data_.size())) {
    throw Error("checkpoint replay buffer is inconsistent");
  }
  return b;
}

// ---------------------------------------------------------------- hyper

Td3Hyper Td3Hyper::preset(std::string_view name) {
  Td3Hyper h;
  if (name == "safefallback") {
    h.name = "safefallback";
    h.gamma = 0.7;
    h.learning_rate = 0.000583;
    h.batch_size = 16;
    h.buffer_size = 1000000;
    h.train_freq = 1;
    h.gradient_steps = 1;
    h.noise_std = 0.183;
  } else if (name == "givesafe") {
    h.name = "givesafe";
    h.gamma = 0.95;
    h.learning_rate = 0.000119;
    h.batch_size = 16;
    h.buffer_size = 100000;
    h.train_freq = 10;
    h.gradient_steps = 10;
    h.noise_std = 0.791;
  } else if (name == "unsafe") {
    h.name = "unsafe";
    h.gamma = 0.9;
    h.learning_rate = 0.0003833;
    h.batch_size = 100;
    h.buffer_size = 100000;
    h.train_freq = 2000;
    h.gradient_steps = 2000;
    h.noise_std = 0.329;
  } else {
    throw Error("unknown TD3 preset: " + std::string(name));
  }
  return h;
}

void Td3Hyper::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw Error("td3: gamma must lie in (0,1)");
  if (!(learning_rate > 0.0)) throw Error("td3: learning_rate must be positive");
  if (batch_size < 1 || buffer_size < 1) throw Error("td3: batch_size and buffer_size must be positive");
  if (static_cast<std::size_t>(batch_size) > buffer_size) throw Error("td3: batch_size exceeds buffer_size");
  if (train_freq < 1 || gradient_steps < 0) throw Error("td3: train_freq must be >= 1, gradient_steps >= 0");
  if (noise_type != "normal") throw Error("td3: only normal action noise is supported");
  if (noise_std < 0.0 || target_noise_std < 0.0 || target_noise_clip < 0.0) throw Error("td3: noise parameters must be >= 0");
  if (policy_delay < 1) throw Error("td3: policy_delay must be >= 1");
  if (!(polyak >= 0.0 && polyak <= 1.0)) throw Error("td3: polyak must lie in [0,1]");
  if (warmup_steps < 0 || hidden < 1) throw Error("td3: warmup_steps must be >= 0 and hidden >= 1");
  if (uniform_retry_after < 0) throw Error("td3: uniform_retry_after must be >= 0");
}

// ---------------------------------------------------------------- actions

Eigen::VectorXd to_vector(const Observation& s) {
  return Eigen::Map<const Eigen::VectorXd>(s.values.data(), static_cast<Eigen::Index>(s.values.size()));
}

Eigen::VectorXd to_vector(const Action& a) {
  return Eigen::Map<const Eigen::VectorXd>(a.values.data(), static_cast<Eigen::Index>(a.values.size()));
}

Action select_action(const Mlp& actor, const Observation& s, double sigma, Rng& rng) {
  if (sigma < 0.0) throw Error("exploration noise std must be >= 0");
  const Eigen::VectorXd mu = actor.forward(to_vector(s));
  Action a;
  std::normal_distribution<double> noise(0.0, sigma > 0.0 ? sigma : 1.0);
  for (std::size_t i = 0; i < kActionDim; ++i) {
    double v = mu(static_cast<Eigen::Index>(i));
    if (sigma > 0.0) v += noise(rng);
    a.values[i] = std::clamp(v, -1.0, 1.0);
  }
  return a;
}

Action random_action(Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Action a;
  for (double& v : a.values) v = u(rng);
  return a;
}

Eigen::VectorXd td3_targets(const Mlp& actor_target, const Mlp& critic1_target, const Mlp& critic2_target,
                            const Eigen::MatrixXd& s_next, const Eigen::VectorXd& reward,
                            const Eigen::VectorXd& done, const Eigen::MatrixXd& eps, double gamma,
                            double noise_clip) {
  const Eigen::Index batch = s_next.cols();
  Eigen::MatrixXd a_next = actor_target.forward_batch(s_next);
  a_next += eps.cwiseMax(-noise_clip).cwiseMin(noise_clip);
  a_next = a_next.cwiseMax(-1.0).cwiseMin(1.0);

  Eigen::MatrixXd input(s_next.rows() + a_next.rows(), batch);
  input << s_next, a_next;
  const Eigen::MatrixXd q1 = critic1_target.forward_batch(input);
  const Eigen::MatrixXd q2 = critic2_target.forward_batch(input);
  Eigen::VectorXd y(batch);
  for (Eigen::Index j = 0; j < batch; ++j) {
    y(j) = reward(j) + gamma * (1.0 - done(j)) * std::min(q1(0, j), q2(0, j));
  }
  return y;
}

// ---------------------------------------------------------------- agent

Td3Agent::Td3Agent(const Td3Hyper& hyper, std::uint64_t seed)
    : hyper_(hyper), buffer_(std::max<std::size_t>(1, hyper.buffer_size)), rng_(seed) {
  hyper_.validate();
  const int obs = static_cast<int>(kObservationDim);
  const int act = static_cast<int>(kActionDim);
  actor_ = Mlp({obs, hyper_.hidden, hyper_.hidden, act}, OutputActivation::kTanh);
  critic1_ = Mlp({obs + act, hyper_.hidden, hyper_.hidden, 1}, OutputActivation::kLinear);
  critic2_ = critic1_;
  actor_.init_uniform(rng_);
  critic1_.init_uniform(rng_);
  critic2_.init_uniform(rng_);
  actor_target_ = actor_;
  critic1_target_ = critic1_;
  critic2_target_ = critic2_;
  actor_opt_ = Adam(actor_.n_params(), hyper_.learning_rate);
  critic1_opt_ = Adam(critic1_.n_params(), hyper_.learning_rate);
  critic2_opt_ = Adam(critic2_.n_params(), hyper_.learning_rate);
}

Action Td3Agent::policy_action(const Observation& s) const {
  Rng unused(0);
  return select_action(actor_, s, 0.0, unused);
}

Action Td3Agent::explore_action(const Observation& s) { return select_action(actor_, s, hyper_.noise_std, rng_); }

Td3Diagnostics Td3Agent::update(int gradient_steps) {
  const auto batch = static_cast<std::size_t>(hyper_.batch_size);
  if (buffer_.size() < batch) throw Error("td3 update: replay buffer holds fewer tuples than batch_size");
  const auto obs = static_cast<Eigen::Index>(kObservationDim);
  const auto act = static_cast<Eigen::Index>(kActionDim);
  const auto b = static_cast<Eigen::Index>(batch);

  Td3Diagnostics diag;
  Eigen::MatrixXd s(obs, b), a(act, b), s_next(obs, b), eps(act, b);
  Eigen::VectorXd r(b), d(b);
  std::normal_distribution<double> target_noise(0.0, hyper_.target_noise_std > 0.0 ? hyper_.target_noise_std : 1.0);

  for (int step = 0; step < gradient_steps; ++step) {
    const auto idx = buffer_.sample_indices(batch, rng_);
    for (Eigen::Index j = 0; j < b; ++j) {
      const ExperienceTuple& t = buffer_.raw(idx[static_cast<std::size_t>(j)]);
      for (Eigen::Index i = 0; i < obs; ++i) {
        s(i, j) = t.s.values[static_cast<std::size_t>(i)];
        s_next(i, j) = t.s_next.values[static_cast<std::size_t>(i)];
      }
      for (Eigen::Index i = 0; i < act; ++i) a(i, j) = t.a.values[static_cast<std::size_t>(i)];
      r(j) = t.r;
      d(j) = t.done ? 1.0 : 0.0;
    }
    for (Eigen::Index j = 0; j < b; ++j)
      for (Eigen::Index i = 0; i < act; ++i) eps(i, j) = hyper_.target_noise_std > 0.0 ? target_noise(rng_) : 0.0;

    const Eigen::VectorXd y = td3_targets(actor_target_, critic1_target_, critic2_target_, s_next, r, d, eps,
                                          hyper_.gamma, hyper_.target_noise_clip);

    Eigen::MatrixXd sa(obs + act, b);
    sa << s, a;
    const OutputLoss mse = [&](const Eigen::MatrixXd& q) {
      const Eigen::RowVectorXd diff = q.row(0) - y.transpose();
      Eigen::MatrixXd grad = (2.0 / static_cast<double>(b)) * diff;
      return std::make_pair(diff.squaredNorm() / static_cast<double>(b), grad);
    };
    const LossAndGrad c1 = loss_and_grad(critic1_, sa, mse);
    const LossAndGrad c2 = loss_and_grad(critic2_, sa, mse);
    critic1_opt_.step(critic1_.params(), c1.grad.params);
    critic2_opt_.step(critic2_.params(), c2.grad.params);
    diag.critic_loss = 0.5 * (c1.loss + c2.loss);

    ++n_updates_;
    if (n_updates_ % hyper_.policy_delay == 0) {
      ForwardCache actor_cache;
      const Eigen::MatrixXd mu = actor_.forward_batch(s, &actor_cache);
      Eigen::MatrixXd s_mu(obs + act, b);
      s_mu << s, mu;
      ForwardCache critic_cache;
      const Eigen::MatrixXd q = critic1_.forward_batch(s_mu, &critic_cache);
      const Eigen::MatrixXd d_q = Eigen::MatrixXd::Constant(1, b, -1.0 / static_cast<double>(b));
      const Mlp::Gradients through_critic = critic1_.backward(critic_cache, d_q);
      const Mlp::Gradients actor_grad = actor_.backward(actor_cache, through_critic.input.bottomRows(act));
      actor_opt_.step(actor_.params(), actor_grad.params);
      diag.actor_loss = -q.mean();
      ++diag.actor_updates;

      polyak_update(critic1_target_.params(), critic1_.params(), hyper_.polyak);
      polyak_update(critic2_target_.params(), critic2_.params(), hyper_.polyak);
      polyak_update(actor_target_.params(), actor_.params(), hyper_.polyak);
    }
  }
  if (!actor_.all_finite() || !critic1_.all_finite() || !critic2_.all_finite()) {
    throw Error("td3 update produced non-finite parameters");
  }
  return diag;
}

void Td3Agent::save(BinaryWriter& w) const {
  w.write<std::uint32_t>(kAgentFormatVersion);
  write_hyper(w, hyper_);
  for (const Mlp* net : {&actor_, &critic1_, &critic2_, &actor_target_, &critic1_target_, &critic2_target_}) {
    write_mlp(w, *net);
  }
  for (const Adam* opt : {&actor_opt_, &critic1_opt_, &critic2_opt_}) write_adam(w, *opt);
  w.write<std::int64_t>(n_updates_);
  std::ostringstream rng_state;
  rng_state << rng_;
  w.write_string(rng_state.str());
  buffer_.save(w);
}

Td3Agent Td3Agent::load(BinaryReader& r) {
  if (r.read<std::uint32_t>() != kAgentFormatVersion) throw Error("unsupported agent checkpoint version");
  Td3Agent agent(read_hyper(r), 0);
  for (Mlp* net : {&agent.actor_, &agent.critic1_, &agent.critic2_, &agent.actor_target_, &agent.critic1_target_,
                   &agent.critic2_target_}) {
    *net = read_mlp(r);
  }
  for (Adam* opt : {&agent.actor_opt_, &agent.critic1_opt_, &agent.critic2_opt_}) *opt = read_adam(r);
  agent.n_updates_ = r.read<std::int64_t>();
  std::istringstream rng_state(r.read_string());
  rng_state >> agent.rng_;
  if (!rng_state) throw Error("checkpoint RNG state is corrupt");
  agent.buffer_ = ReplayBuffer::load(r);
  return agent;
}

}  // namespace safemes
