#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "safemes/agents.hpp"

using namespace safemes;

namespace {

double rel_err(double a, double b) { return std::abs(a - b) / std::max({1e-8, std::abs(a), std::abs(b)}); }

// Central differences of a scalar function of the flat parameter vector.
Eigen::VectorXd numeric_grad(Mlp& net, const std::function<double()>& f, double h = 1e-6) {
  Eigen::VectorXd g(net.n_params());
  for (Eigen::Index i = 0; i < net.n_params(); ++i) {
    const double keep = net.params()(i);
    net.params()(i) = keep + h;
    const double up = f();
    net.params()(i) = keep - h;
    const double down = f();
    net.params()(i) = keep;
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = u(rng);
  return m;
}

ExperienceTuple tuple(double v) {
  ExperienceTuple t;
  t.s.values.fill(v);
  t.a.values.fill(0.0);
  t.r = v;
  t.s_next.values.fill(v);
  return t;
}

}  // namespace

TEST(Mlp, HandComputedForward) {
  Mlp net({2, 2, 1}, OutputActivation::kLinear);
  net.weight(0) << 0.5, -1.0,  // row-major fill
      0.25, 2.0;
  net.bias(0) << 0.1, -0.2;
  net.weight(1) << 1.5, -0.5;
  net.bias(1) << 0.3;
  Eigen::VectorXd x(2);
  x << 1.0, 0.5;
  const double h0 = std::tanh(0.5 * 1.0 - 1.0 * 0.5 + 0.1);
  const double h1 = std::tanh(0.25 * 1.0 + 2.0 * 0.5 - 0.2);
  EXPECT_NEAR(net.forward(x)(0), 1.5 * h0 - 0.5 * h1 + 0.3, 1e-15);
}

TEST(Mlp, TanhOutputIsBounded) {
  Rng rng(3);
  Mlp net({9, 64, 64, 5}, OutputActivation::kTanh);
  net.init_uniform(rng);
  const Eigen::MatrixXd y = net.forward_batch(10.0 * random_matrix(9, 50, rng));
  EXPECT_LE(y.cwiseAbs().maxCoeff(), 1.0);
}

TEST(Mlp, ShapesOfSpecifiedNetworks) {
  Td3Agent agent(Td3Hyper::preset("safefallback"), 1);
  EXPECT_EQ(agent.actor().layer_sizes(), (std::vector<int>{9, 64, 64, 5}));
  EXPECT_EQ(agent.critic1().layer_sizes(), (std::vector<int>{14, 64, 64, 1}));
  EXPECT_EQ(agent.actor().output_activation(), OutputActivation::kTanh);
  EXPECT_EQ(agent.critic2().output_activation(), OutputActivation::kLinear);
}

TEST(Mlp, BatchMatchesSingleForward) {
  Rng rng(4);
  Mlp net({3, 5, 2}, OutputActivation::kTanh);
  net.init_uniform(rng);
  const Eigen::MatrixXd x = random_matrix(3, 7, rng);
  const Eigen::MatrixXd y = net.forward_batch(x);
  for (Eigen::Index j = 0; j < x.cols(); ++j) EXPECT_LT((y.col(j) - net.forward(x.col(j))).norm(), 1e-14);
}

// Critic regression loss against fixed targets, on random networks.
TEST(Gradients, CriticLossMatchesFiniteDifferences) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Mlp critic({14, 8, 8, 1}, OutputActivation::kLinear);
    critic.init_uniform(rng);
    const Eigen::MatrixXd x = random_matrix(14, 6, rng);
    const Eigen::RowVectorXd y = random_matrix(1, 6, rng).row(0);
    const OutputLoss mse = [&](const Eigen::MatrixXd& q) {
      const Eigen::RowVectorXd diff = q.row(0) - y;
      Eigen::MatrixXd g = (2.0 / 6.0) * diff;
      return std::make_pair(diff.squaredNorm() / 6.0, g);
    };
    const LossAndGrad analytic = loss_and_grad(critic, x, mse);
    const Eigen::VectorXd numeric = numeric_grad(critic, [&] { return mse(critic.forward_batch(x)).first; });
    for (Eigen::Index i = 0; i < numeric.size(); ++i) {
      if (std::abs(numeric(i)) < 1e-7) continue;
      ASSERT_LE(rel_err(analytic.grad.params(i), numeric(i)), 1e-4) << "trial " << trial << " param " << i;
    }
  }
}

// Actor loss -mean Q(s, mu(s)) with the critic held fixed.
TEST(Gradients, ActorLossThroughCriticMatchesFiniteDifferences) {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    Mlp actor({9, 8, 8, 5}, OutputActivation::kTanh);
    Mlp critic({14, 8, 8, 1}, OutputActivation::kLinear);
    actor.init_uniform(rng);
    critic.init_uniform(rng);
    const Eigen::MatrixXd s = random_matrix(9, 4, rng);
    const auto loss = [&] {
      Eigen::MatrixXd sa(14, 4);
      sa << s, actor.forward_batch(s);
      return -critic.forward_batch(sa).mean();
    };
    ForwardCache ac, cc;
    const Eigen::MatrixXd mu = actor.forward_batch(s, &ac);
    Eigen::MatrixXd sa(14, 4);
    sa << s, mu;
    critic.forward_batch(sa, &cc);
    const auto through = critic.backward(cc, Eigen::MatrixXd::Constant(1, 4, -0.25));
    const auto grad = actor.backward(ac, through.input.bottomRows(5));
    const Eigen::VectorXd numeric = numeric_grad(actor, loss);
    for (Eigen::Index i = 0; i < numeric.size(); ++i) {
      if (std::abs(numeric(i)) < 1e-7) continue;
      ASSERT_LE(rel_err(grad.params(i), numeric(i)), 1e-4) << "trial " << trial << " param " << i;
    }
  }
}

TEST(Gradients, ConstantLossHasZeroGradient) {
  Rng rng(13);
  Mlp net({4, 6, 2}, OutputActivation::kTanh);
  net.init_uniform(rng);
  const auto r = loss_and_grad(net, random_matrix(4, 3, rng), [](const Eigen::MatrixXd& y) {
    return std::make_pair(7.0, Eigen::MatrixXd::Zero(y.rows(), y.cols()).eval());
  });
  EXPECT_EQ(r.loss, 7.0);
  EXPECT_EQ(r.grad.params.cwiseAbs().maxCoeff(), 0.0);
}

// Linear output layer: dL/dW = dL/dy h^T and dL/db = dL/dy.
TEST(Gradients, LastLayerGradientIsOuterProduct) {
  Rng rng(14);
  Mlp net({3, 4, 2}, OutputActivation::kLinear);
  net.init_uniform(rng);
  const Eigen::MatrixXd x = random_matrix(3, 1, rng);
  const Eigen::MatrixXd dy = random_matrix(2, 1, rng);
  ForwardCache cache;
  net.forward_batch(x, &cache);
  const auto g = net.backward(cache, dy);
  const Eigen::MatrixXd expected = dy * cache.activations[1].transpose();
  const Eigen::Index w1 = 4 * 3 + 4;
  for (Eigen::Index c = 0; c < 4; ++c)
    for (Eigen::Index r = 0; r < 2; ++r) EXPECT_NEAR(g.params(w1 + c * 2 + r), expected(r, c), 1e-15);
  EXPECT_NEAR(g.params(w1 + 8), dy(0), 1e-15);
  EXPECT_NEAR(g.params(w1 + 9), dy(1), 1e-15);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(3);
  Eigen::VectorXd g(3);
  g << 2.0, -0.5, 0.0;
  Adam opt(3, 0.01);
  opt.step(p, g);
  EXPECT_NEAR(p(0), -0.01, 1e-9);
  EXPECT_NEAR(p(1), 0.01, 1e-9);
  EXPECT_EQ(p(2), 0.0);
}

TEST(Polyak, RhoOneKeepsTarget) {
  Eigen::VectorXd t(2), s(2);
  t << 1.0, 2.0;
  s << -3.0, 5.0;
  polyak_update(t, s, 1.0);
  EXPECT_EQ(t(0), 1.0);
  EXPECT_EQ(t(1), 2.0);
}

TEST(Polyak, RepeatedUpdatesFollowGeometricDecay) {
  Eigen::VectorXd t(1), s(1);
  t << 1.0;
  s << 0.0;
  const double rho = 0.995;
  for (int k = 1; k <= 200; ++k) {
    polyak_update(t, s, rho);
    ASSERT_NEAR(t(0), std::pow(rho, k), 1e-12);
  }
}

TEST(Td3Targets, HandComputedAtGamma07) {
  // Zero weights: actor target outputs 0, critics output their bias.
  Mlp actor({9, 2, 2, 5}, OutputActivation::kTanh);
  Mlp c1({14, 2, 2, 1}, OutputActivation::kLinear);
  Mlp c2 = c1;
  actor.params().setZero();
  c1.params().setZero();
  c2.params().setZero();
  c1.bias(2)(0) = 3.0;
  c2.bias(2)(0) = 2.5;
  Eigen::MatrixXd s_next = Eigen::MatrixXd::Zero(9, 2);
  Eigen::VectorXd r(2), d(2);
  r << -1.0, 0.5;
  d << 0.0, 1.0;
  const Eigen::MatrixXd eps = Eigen::MatrixXd::Constant(5, 2, 0.9);
  const Eigen::VectorXd y = td3_targets(actor, c1, c2, s_next, r, d, eps, 0.7, 0.5);
  EXPECT_NEAR(y(0), -1.0 + 0.7 * 2.5, 1e-12);
  EXPECT_NEAR(y(1), 0.5, 1e-12);  // terminal: y = r
}

TEST(Td3Targets, NeverExceedsEitherCritic) {
  Rng rng(15);
  Mlp actor({9, 8, 8, 5}, OutputActivation::kTanh);
  Mlp c1({14, 8, 8, 1}, OutputActivation::kLinear);
  Mlp c2({14, 8, 8, 1}, OutputActivation::kLinear);
  actor.init_uniform(rng);
  c1.init_uniform(rng);
  c2.init_uniform(rng);
  const Eigen::MatrixXd s_next = random_matrix(9, 32, rng);
  const Eigen::VectorXd r = Eigen::VectorXd::Zero(32);
  const Eigen::VectorXd d = Eigen::VectorXd::Zero(32);
  const Eigen::MatrixXd eps = Eigen::MatrixXd::Zero(5, 32);
  const Eigen::VectorXd y = td3_targets(actor, c1, c2, s_next, r, d, eps, 0.9, 0.5);
  Eigen::MatrixXd sa(14, 32);
  sa << s_next, actor.forward_batch(s_next);
  const Eigen::MatrixXd q1 = c1.forward_batch(sa), q2 = c2.forward_batch(sa);
  for (Eigen::Index j = 0; j < 32; ++j) {
    EXPECT_LE(y(j), 0.9 * q1(0, j) + 1e-12);
    EXPECT_LE(y(j), 0.9 * q2(0, j) + 1e-12);
  }
}

TEST(ReplayBuffer, FifoOverwrite) {
  ReplayBuffer b(3);
  for (int i = 0; i < 5; ++i) b.push(tuple(i));
  EXPECT_EQ(b.size(), 3u);
  EXPECT_EQ(b.oldest(0).r, 2.0);
  EXPECT_EQ(b.oldest(1).r, 3.0);
  EXPECT_EQ(b.oldest(2).r, 4.0);
  EXPECT_THROW(b.oldest(3), Error);
}

TEST(ReplayBuffer, KeepsInsertionOrderBeforeFull) {
  ReplayBuffer b(10);
  for (int i = 0; i < 4; ++i) b.push(tuple(i));
  for (int i = 0; i < 4; ++i) EXPECT_EQ(b.oldest(static_cast<std::size_t>(i)).r, i);
  EXPECT_THROW(ReplayBuffer(0), Error);
}

TEST(Actions, RandomActionIsUniform) {
  Rng rng(16);
  std::array<double, kActionDim> sum{};
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const Action a = random_action(rng);
    for (std::size_t k = 0; k < kActionDim; ++k) {
      ASSERT_GE(a.values[k], -1.0);
      ASSERT_LE(a.values[k], 1.0);
      sum[k] += a.values[k];
    }
  }
  for (double s : sum) EXPECT_NEAR(s / n, 0.0, 0.02);
}

TEST(Actions, SelectActionClipsNoisyOutput) {
  // Bias-only actor saturating near 0.95; the noise draw cannot leave [-1, 1].
  Mlp actor({9, 2, 2, 5}, OutputActivation::kTanh);
  actor.params().setZero();
  actor.bias(2).setConstant(std::atanh(0.95));
  Rng rng(17);
  Observation s;
  bool clipped = false;
  for (int i = 0; i < 200; ++i) {
    const Action a = select_action(actor, s, 0.2, rng);
    for (double v : a.values) {
      ASSERT_LE(v, 1.0);
      ASSERT_GE(v, -1.0);
      clipped |= v == 1.0;
    }
  }
  EXPECT_TRUE(clipped);
  Rng unused(0);
  EXPECT_NEAR(select_action(actor, s, 0.0, unused).values[0], 0.95, 1e-12);
  EXPECT_THROW(select_action(actor, s, -0.1, unused), Error);
}

TEST(Hyper, PresetsAndValidation) {
  const auto sf = Td3Hyper::preset("safefallback");
  EXPECT_EQ(sf.gamma, 0.7);
  EXPECT_EQ(sf.batch_size, 16);
  EXPECT_EQ(sf.policy_delay, 2);
  EXPECT_EQ(sf.polyak, 0.995);
  EXPECT_EQ(sf.target_noise_clip, 0.5);
  EXPECT_EQ(sf.warmup_steps, 1000);
  EXPECT_EQ(Td3Hyper::preset("unsafe").train_freq, 2000);
  EXPECT_EQ(Td3Hyper::preset("givesafe").noise_std, 0.791);
  EXPECT_THROW(Td3Hyper::preset("ddpg"), Error);
  auto bad = sf;
  bad.gamma = 1.0;
  EXPECT_THROW(bad.validate(), Error);
  bad = sf;
  bad.noise_type = "ou";
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Td3Agent, UpdateNeedsFullBatch) {
  Td3Agent agent(Td3Hyper::preset("safefallback"), 5);
  for (int i = 0; i < 15; ++i) agent.store(tuple(0.01 * i));
  EXPECT_FALSE(agent.ready_to_train());
  EXPECT_THROW(agent.update(1), Error);
  agent.store(tuple(0.2));
  EXPECT_TRUE(agent.ready_to_train());
  EXPECT_NO_THROW(agent.update(1));
}

TEST(Td3Agent, ActorAndTargetsMoveEveryPolicyDelaySteps) {
  Td3Agent agent(Td3Hyper::preset("safefallback"), 6);
  for (int i = 0; i < 32; ++i) agent.store(tuple(0.03 * i));
  const Eigen::VectorXd actor0 = agent.actor().params();
  const Eigen::VectorXd target0 = agent.critic1_target().params();
  auto d = agent.update(1);
  EXPECT_EQ(d.actor_updates, 0);
  EXPECT_EQ(agent.actor().params(), actor0);
  EXPECT_EQ(agent.critic1_target().params(), target0);
  d = agent.update(1);
  EXPECT_EQ(d.actor_updates, 1);
  EXPECT_NE(agent.actor().params(), actor0);
  EXPECT_NE(agent.critic1_target().params(), target0);
}

TEST(Td3Agent, CriticFitsConstantReward) {
  Td3Hyper h = Td3Hyper::preset("safefallback");
  h.learning_rate = 1e-3;
  Td3Agent agent(h, 7);
  for (int i = 0; i < 64; ++i) {
    ExperienceTuple t = tuple(0.0);
    t.r = -1.0;
    t.done = true;
    agent.store(t);
  }
  Td3Diagnostics d;
  for (int i = 0; i < 1500; ++i) d = agent.update(1);
  EXPECT_LT(d.critic_loss, 1e-3);
}

TEST(Td3Agent, CheckpointResumeIsBitIdentical) {
  Td3Agent a(Td3Hyper::preset("safefallback"), 8);
  for (int i = 0; i < 40; ++i) a.store(tuple(0.02 * i));
  a.update(5);

  std::stringstream blob;
  {
    BinaryWriter w(blob);
    a.save(w);
  }
  BinaryReader r(blob);
  Td3Agent b = Td3Agent::load(r);

  a.update(7);
  b.update(7);
  EXPECT_EQ(a.actor().params(), b.actor().params());
  EXPECT_EQ(a.critic2_target().params(), b.critic2_target().params());
  EXPECT_EQ(a.n_updates(), b.n_updates());
  Observation s;
  s.values.fill(0.3);
  EXPECT_EQ(a.explore_action(s), b.explore_action(s));
}
