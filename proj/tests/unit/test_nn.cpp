#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "ftp/errors.hpp"
#include "ftp/nn.hpp"

using namespace ftp::nn;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd gaussian_vector(Rng& rng, int n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

// Straight-line forward pass with explicit loops.
VectorXd loop_forward(const Mlp& net, const VectorXd& x) {
  std::vector<double> h(x.data(), x.data() + x.size());
  for (int l = 0; l < net.layer_count(); ++l) {
    const auto W = net.weight(l);
    const auto b = net.bias(l);
    std::vector<double> out(W.rows());
    for (int r = 0; r < W.rows(); ++r) {
      double acc = b[r];
      for (int c = 0; c < W.cols(); ++c) acc += W(r, c) * h[c];
      out[r] = net.activations()[l] == Activation::Tanh ? std::tanh(acc) : acc;
    }
    h = out;
  }
  return Eigen::Map<VectorXd>(h.data(), static_cast<Eigen::Index>(h.size()));
}

Mlp small_net(Rng& rng) {
  Mlp net({25, 8, 8, 6}, {Activation::Tanh, Activation::Tanh, Activation::Linear});
  net.parameters() = gaussian_vector(rng, static_cast<int>(net.parameter_count()), 0.5);
  return net;
}

VectorXd x_grad(const VectorXd& x, const Eigen::Vector3d& scale) {
  return x.cwiseProduct(scale).cwiseProduct(scale);
}

}  // namespace

TEST(InitOrthogonal, SquareIsOrthogonal) {
  Rng rng(1);
  const MatrixXd W = init_orthogonal(4, 4, 1.0, rng);
  EXPECT_LT((W.transpose() * W - MatrixXd::Identity(4, 4)).norm(), 1e-9);
}

TEST(InitOrthogonal, SingularValuesEqualGain) {
  Rng rng(2);
  for (auto [r, c] : {std::pair{8, 3}, std::pair{3, 8}, std::pair{6, 6}}) {
    const MatrixXd W = init_orthogonal(r, c, std::sqrt(2.0), rng);
    const VectorXd sv = Eigen::JacobiSVD<MatrixXd>(W).singularValues();
    for (int i = 0; i < sv.size(); ++i) EXPECT_NEAR(sv[i], std::sqrt(2.0), 1e-9);
  }
}

TEST(InitOrthogonal, Seeded) {
  Rng a(3), b(3);
  EXPECT_EQ(init_orthogonal(5, 7, 1.0, a), init_orthogonal(5, 7, 1.0, b));
}

TEST(Mlp, ZeroNetGivesZero) {
  Mlp net = Mlp::three_hidden(25, 6, 16);
  net.parameters().setZero();
  Rng rng(4);
  EXPECT_EQ(net.forward(gaussian_vector(rng, 25)), VectorXd::Zero(6));
}

TEST(Mlp, IdentityLayerReproducesInput) {
  Mlp net({4, 4}, {Activation::Linear});
  net.weight(0) = RowMatrix::Identity(4, 4);
  net.bias(0).setZero();
  const VectorXd x = (VectorXd(4) << 1.5, -2.0, 0.25, 7.0).finished();
  EXPECT_EQ(net.forward(x), x);
}

TEST(Mlp, MatchesLoopOracle) {
  Rng rng(5);
  Mlp net = Mlp::three_hidden(25, 6, 32, false);
  net.init_orthogonal(rng, std::sqrt(2.0), 0.5);
  net.parameters() += gaussian_vector(rng, static_cast<int>(net.parameter_count()), 0.05);
  for (int n = 0; n < 20; ++n) {
    const VectorXd x = gaussian_vector(rng, 25);
    EXPECT_LT((net.forward(x) - loop_forward(net, x)).cwiseAbs().maxCoeff(), 1e-12);
  }
  MatrixXd X(25, 5);
  for (int c = 0; c < 5; ++c) X.col(c) = gaussian_vector(rng, 25);
  const MatrixXd Y = net.forward_batch(X);
  for (int c = 0; c < 5; ++c) EXPECT_LT((Y.col(c) - loop_forward(net, X.col(c))).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Mlp, ShapeMismatch) {
  const Mlp net = Mlp::three_hidden(25, 6, 8);
  EXPECT_THROW(net.forward(VectorXd::Zero(24)), ftp::ShapeMismatch);
}

TEST(Mlp, BackwardMatchesFiniteDifference) {
  Rng rng(6);
  Mlp net = small_net(rng);
  MatrixXd X(25, 3);
  for (int c = 0; c < 3; ++c) X.col(c) = gaussian_vector(rng, 25);
  MatrixXd target(6, 3);
  for (int c = 0; c < 3; ++c) target.col(c) = gaussian_vector(rng, 6);
  auto loss = [&](const Mlp& m) { return 0.5 * (m.forward_batch(X) - target).squaredNorm(); };

  ForwardCache cache;
  const MatrixXd Y = net.forward_batch(X, &cache);
  VectorXd grad = VectorXd::Zero(net.parameter_count());
  net.backward(cache, Y - target, grad);

  const double h = 1e-5;
  for (Eigen::Index i = 0; i < net.parameter_count(); ++i) {
    Mlp p = net, m = net;
    p.parameters()[i] += h;
    m.parameters()[i] -= h;
    const double fd = (loss(p) - loss(m)) / (2 * h);
    EXPECT_NEAR(grad[i], fd, 1e-4 * std::max(1.0, std::abs(fd))) << "parameter " << i;
  }
}

TEST(Mlp, InputGradientMatchesFiniteDifference) {
  Rng rng(7);
  const Mlp net = small_net(rng);
  const VectorXd x = gaussian_vector(rng, 25);
  const VectorXd w = gaussian_vector(rng, 6);
  ForwardCache cache;
  net.forward_batch(x, &cache);
  VectorXd grad = VectorXd::Zero(net.parameter_count());
  const MatrixXd dx = net.backward(cache, w, grad);
  const double h = 1e-6;
  for (int i = 0; i < 25; ++i) {
    VectorXd xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    EXPECT_NEAR(dx(i, 0), (w.dot(net.forward(xp)) - w.dot(net.forward(xm))) / (2 * h), 1e-7);
  }
}

TEST(Mlp, ZeroLossGradientIsZero) {
  Rng rng(8);
  const Mlp net = small_net(rng);
  ForwardCache cache;
  const MatrixXd Y = net.forward_batch(gaussian_vector(rng, 25), &cache);
  VectorXd grad = VectorXd::Zero(net.parameter_count());
  net.backward(cache, MatrixXd::Zero(Y.rows(), Y.cols()), grad);
  EXPECT_EQ(grad.cwiseAbs().maxCoeff(), 0.0);
}

TEST(LogProb, ClosedForms) {
  const VectorXd mu = VectorXd::Constant(6, 0.3);
  EXPECT_NEAR(log_prob(mu, VectorXd::Zero(6), mu), -6 * 0.5 * std::log(2 * M_PI), 1e-12);
  EXPECT_NEAR(log_prob(mu, VectorXd::Zero(6), mu), -5.51363, 1e-5);
  EXPECT_GT(log_prob(mu, VectorXd::Zero(6), mu), log_prob(mu, VectorXd::Constant(6, 0.1), mu));

  Rng rng(9);
  for (int n = 0; n < 100; ++n) {
    const VectorXd m = gaussian_vector(rng, 6), ls = gaussian_vector(rng, 6, 0.3), a = gaussian_vector(rng, 6);
    double expected = 0.0;
    VectorXd per;
    for (int d = 0; d < 6; ++d) {
      const double s = std::exp(ls[d]);
      expected += -0.5 * std::pow((a[d] - m[d]) / s, 2) - ls[d] - 0.5 * std::log(2 * M_PI);
    }
    EXPECT_NEAR(log_prob(m, ls, a, &per), expected, 1e-12);
    EXPECT_NEAR(per.sum(), expected, 1e-12);
  }
}

TEST(LogProb, MeanGradientVanishesAtMean) {
  const VectorXd mu = (VectorXd(6) << 0.1, 0.2, -0.3, 0.4, 0.5, -0.6).finished();
  const VectorXd ls = VectorXd::Constant(6, -0.2);
  const double h = 1e-6;
  for (int d = 0; d < 6; ++d) {
    VectorXd p = mu, m = mu;
    p[d] += h;
    m[d] -= h;
    EXPECT_NEAR((log_prob(p, ls, mu) - log_prob(m, ls, mu)) / (2 * h), 0.0, 1e-8);
  }
}

TEST(GaussianPolicy, SampleStatistics) {
  Rng rng(10);
  GaussianPolicy pi = GaussianPolicy::make(25, 6, rng, 16);
  pi.log_std = VectorXd::Constant(6, std::log(0.5));
  const VectorXd s = gaussian_vector(rng, 25);
  const VectorXd mu = pi.mean.forward(s);
  const int n = 20000;
  VectorXd sum = VectorXd::Zero(6), sq = VectorXd::Zero(6);
  for (int i = 0; i < n; ++i) {
    const VectorXd a = pi.sample(s, rng) - mu;
    sum += a;
    sq += a.cwiseProduct(a);
  }
  EXPECT_LT((sum / n).cwiseAbs().maxCoeff(), 0.02);
  EXPECT_LT(((sq / n).array() - 0.25).abs().maxCoeff(), 0.015);
}

TEST(Adam, ZeroGradientKeepsParameters) {
  Adam opt(5, 1e-3);
  VectorXd p = VectorXd::LinSpaced(5, -1, 1);
  const VectorXd before = p;
  for (int i = 0; i < 10; ++i) opt.step(p, VectorXd::Zero(5));
  EXPECT_EQ(p, before);
}

TEST(Adam, FirstStepIsSignTimesRate) {
  Adam opt(4, 0.01);
  VectorXd p = VectorXd::Zero(4);
  const VectorXd g = (VectorXd(4) << 3.0, -0.5, 1e-3, -20.0).finished();
  opt.step(p, g);
  for (int i = 0; i < 4; ++i) {
    const double expected = -0.01 * g[i] / (std::abs(g[i]) + 1e-8);
    EXPECT_NEAR(p[i], expected, 1e-12);
  }
  EXPECT_THROW(opt.step(p, VectorXd::Zero(3)), ftp::ShapeMismatch);
}

TEST(Adam, QuadraticBowlDecreases) {
  // small steps, so no coordinate reaches the minimum within 100 iterations
  Adam opt(3, 0.005);
  VectorXd p = (VectorXd(3) << 1.0, -2.0, 1.5).finished();
  const Eigen::Vector3d scale(1.0, 3.0, 0.5);
  auto f = [&](const VectorXd& x) { return 0.5 * x.cwiseProduct(scale).squaredNorm(); };
  const double initial = f(p);
  double prev = initial;
  for (int i = 0; i < 100; ++i) {
    opt.step(p, x_grad(p, scale));
    const double cur = f(p);
    EXPECT_LT(cur, prev);
    prev = cur;
  }
  EXPECT_LT(prev, 0.7 * initial);
}

TEST(Checkpoint, RoundTripAndHeader) {
  Rng rng(11);
  Mlp net = Mlp::three_hidden(25, 6, 8);
  net.init_orthogonal(rng, std::sqrt(2.0), 0.01);
  const auto dir = std::filesystem::temp_directory_path() / "ftp_nn_ckpt";
  std::filesystem::create_directories(dir);
  write_checkpoint(dir / "m.ckpt", to_tensors(net, "actor"));

  std::ifstream in(dir / "m.ckpt", std::ios::binary);
  char magic[8];
  in.read(magic, 8);
  EXPECT_EQ(std::string(magic, 8), std::string("FTPCKPT\0", 8));

  Mlp back = Mlp::three_hidden(25, 6, 8);
  from_tensors(back, "actor", read_checkpoint(dir / "m.ckpt"));
  EXPECT_EQ(back.parameters(), net.parameters());

  Mlp wrong = Mlp::three_hidden(25, 6, 9);
  EXPECT_THROW(from_tensors(wrong, "actor", read_checkpoint(dir / "m.ckpt")), ftp::ShapeMismatch);
  std::filesystem::remove_all(dir);
}

TEST(Mlp, FiniteThroughManyUpdates) {
  Rng rng(12);
  Mlp net = Mlp::three_hidden(25, 6, 16);
  net.init_orthogonal(rng, std::sqrt(2.0), 0.01);
  Adam opt(net.parameter_count(), 1e-3);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int it = 0; it < 2000; ++it) {
    MatrixXd X(25, 4);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = u(rng);
    ForwardCache cache;
    const MatrixXd Y = net.forward_batch(X, &cache);
    VectorXd grad = VectorXd::Zero(net.parameter_count());
    net.backward(cache, (Y.array() - 1.0).matrix() / 4.0, grad);
    opt.step(net.parameters(), grad);
  }
  EXPECT_TRUE(net.parameters().allFinite());
}
