#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "safemes/binary_io.hpp"
#include "safemes/experience.hpp"
#include "safemes/mlp.hpp"

namespace safemes {

/// Fixed-capacity FIFO of experience; the oldest tuple is overwritten first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(const ExperienceTuple& t);
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }

  /// i = 0 is the oldest stored tuple.
  const ExperienceTuple& oldest(std::size_t i) const;
  /// Uniform sample with replacement.
  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const;
  const ExperienceTuple& raw(std::size_t slot) const { return data_[slot]; }

  void save(BinaryWriter& w) const;
  static ReplayBuffer load(BinaryReader& r);

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // next slot to overwrite once full
  std::vector<ExperienceTuple> data_;
};

struct Td3Hyper {
  std::string name = "safefallback";
  double gamma = 0.7;
  double learning_rate = 0.000583;
  int batch_size = 16;
  std::size_t buffer_size = 1000000;
  int train_freq = 1;
  int gradient_steps = 1;
  std::string noise_type = "normal";
  double noise_std = 0.183;
  int policy_delay = 2;
  double target_noise_std = 0.2;
  double target_noise_clip = 0.5;
  double polyak = 0.995;
  int warmup_steps = 1000;
  int hidden = 64;
  // GiveSafe retries: after this many rejections within one step the
  // behaviour policy draws uniformly from the action box (0 = never).
  int uniform_retry_after = 100;

  /// Named presets: "safefallback", "givesafe", "unsafe".
  static Td3Hyper preset(std::string_view name);
  void validate() const;
};

struct Td3Diagnostics {
  double critic_loss = 0.0;  // mean of both critics, last gradient step
  double actor_loss = 0.0;   // last actor step, -mean Q1(s, mu(s))
  int actor_updates = 0;
};

/// clip(mu(s) + eps, -1, 1) with eps ~ N(0, sigma); sigma = 0 draws nothing.
Action select_action(const Mlp& actor, const Observation& s, double sigma, Rng& rng);

/// Uniform action on [-1, 1]^5.
Action random_action(Rng& rng);

Eigen::VectorXd to_vector(const Observation& s);
Eigen::VectorXd to_vector(const Action& a);

/// Clipped double-Q targets y = r + gamma (1 - d) min_i Q_targ,i(s', a'),
/// a' = clip(mu_targ(s') + clip(eps, -c, c), -1, 1). eps is given per sample
/// as a (5 x B) matrix so callers control the noise draw.
Eigen::VectorXd td3_targets(const Mlp& actor_target, const Mlp& critic1_target, const Mlp& critic2_target,
                            const Eigen::MatrixXd& s_next, const Eigen::VectorXd& reward,
                            const Eigen::VectorXd& done, const Eigen::MatrixXd& eps, double gamma,
                            double noise_clip);

class Td3Agent {
 public:
  Td3Agent(const Td3Hyper& hyper, std::uint64_t seed);

  const Td3Hyper& hyper() const { return hyper_; }

  Action policy_action(const Observation& s) const;
  /// mu(s) plus exploration noise from the agent's own stream.
  Action explore_action(const Observation& s);

  void store(const ExperienceTuple& t) { buffer_.push(t); }
  const ReplayBuffer& buffer() const { return buffer_; }
  bool ready_to_train() const { return buffer_.size() >= static_cast<std::size_t>(hyper_.batch_size); }

  /// Runs gradient_steps TD3 updates (critic every step, actor and targets
  /// every policy_delay-th update). Throws if the buffer holds fewer than
  /// batch_size tuples.
  Td3Diagnostics update(int gradient_steps);

  const Mlp& actor() const { return actor_; }
  const Mlp& critic1() const { return critic1_; }
  const Mlp& critic2() const { return critic2_; }
  const Mlp& actor_target() const { return actor_target_; }
  const Mlp& critic1_target() const { return critic1_target_; }
  const Mlp& critic2_target() const { return critic2_target_; }
  Mlp& actor() { return actor_; }
  Mlp& critic1() { return critic1_; }
  Mlp& critic2() { return critic2_; }
  std::int64_t n_updates() const { return n_updates_; }
  Rng& rng() { return rng_; }

  void save(BinaryWriter& w) const;
  static Td3Agent load(BinaryReader& r);

 private:
  Td3Hyper hyper_;
  Mlp actor_, critic1_, critic2_;
  Mlp actor_target_, critic1_target_, critic2_target_;
  Adam actor_opt_, critic1_opt_, critic2_opt_;
  ReplayBuffer buffer_;
  Rng rng_;
  std::int64_t n_updates_ = 0;
};

}  // namespace safemes
