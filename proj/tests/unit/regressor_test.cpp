#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "t2f/regressor/adam.hpp"
#include "t2f/regressor/mlp.hpp"
#include "t2f/regressor/regress.hpp"
#include "t2f/regressor/train.hpp"
#include "t2f/regressor/weights_io.hpp"
#include "test_support.hpp"

namespace t2f::reg {
namespace {

using mm::DimsProfile;

MlpWeights random_net(Rng& rng, const std::string& arch, const DimsProfile& profile) {
  auto w = MlpWeights::from_architecture(arch, profile);
  for (double& p : w.params()) p = rng.uniform(-1.0, 1.0);
  return w;
}

// Naive loops, independent of the Eigen path.
std::vector<double> oracle_forward(const MlpWeights& w, const std::vector<double>& x) {
  std::vector<double> a = x;
  const auto params = w.params();
  for (std::size_t l = 0; l < w.layers().size(); ++l) {
    const auto& shape = w.layers()[l];
    std::vector<double> z(shape.out, 0.0);
    for (std::uint32_t o = 0; o < shape.out; ++o) {
      double sum = 0.0;
      for (std::uint32_t i = 0; i < shape.in; ++i) sum += params[w.weight_offset(l) + o * shape.in + i] * a[i];
      sum += params[w.bias_offset(l) + o];
      if (shape.activation == Activation::leaky_relu && sum < 0.0) sum *= 0.01;
      z[o] = sum;
    }
    a = std::move(z);
  }
  return a;
}

TEST(Forward, ZeroWeightsOutputLastBias) {
  const DimsProfile p{2, 1, 0, 1};
  auto w = MlpWeights::from_architecture("3-5-4", p);
  Eigen::VectorXd b(4);
  b << 0.5, -1.0, 2.0, 3.5;
  w.bias(1) = b;
  Rng rng(1);
  EXPECT_EQ(forward(w, test::random_vector(rng, 3)), b);
}

TEST(Forward, IdentityLinearLayerPassesThrough) {
  const DimsProfile p{2, 1, 0, 1};
  auto w = MlpWeights::from_architecture("4-4", p);
  w.weight(0).setIdentity();
  Rng rng(2);
  const auto x = test::random_vector(rng, 4);
  EXPECT_EQ(forward(w, x), x);
}

TEST(Forward, RandomThreeLayerNetMatchesLoopOracle) {
  Rng rng(3);
  const DimsProfile p{3, 2, 1, 1};
  for (int trial = 0; trial < 20; ++trial) {
    const auto w = random_net(rng, "6-9-8-7", p);
    const auto x = test::random_vector(rng, 6);
    const auto got = forward(w, x);
    const auto want = oracle_forward(w, std::vector<double>(x.data(), x.data() + x.size()));
    for (Eigen::Index i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[static_cast<std::size_t>(i)], 1e-12);
  }
}

TEST(Forward, DimensionMismatchThrows) {
  const auto w = MlpWeights::from_architecture("4-4", {2, 1, 0, 1});
  EXPECT_THROW(forward(w, Eigen::VectorXd::Zero(3)), DimensionError);
}

TEST(Architecture, ParsingAndChaining) {
  EXPECT_EQ(parse_architecture("768-1024-1024-512-284"),
            (std::vector<std::uint32_t>{768, 1024, 1024, 512, 284}));
  EXPECT_THROW(parse_architecture("768"), DimensionError);
  EXPECT_THROW(parse_architecture("768--284"), DimensionError);
  EXPECT_THROW(parse_architecture("768-x"), DimensionError);
  EXPECT_THROW(MlpWeights::from_architecture("768-100", DimsProfile{}), DimensionError);
  const auto w = MlpWeights::from_architecture("768-1024-1024-512-284", DimsProfile{});
  EXPECT_EQ(w.signature(), "768-1024-1024-512-284|LLLN|S100-E50-P6-D128");
  EXPECT_EQ(w.layers().back().activation, Activation::linear);
}

TEST(Architecture, GlorotInitIsBoundedAndSeeded) {
  auto a = MlpWeights::from_architecture("10-20-4", {1, 1, 1, 1});
  auto b = a;
  a.init_glorot(7);
  b.init_glorot(7);
  EXPECT_EQ(a, b);
  const double limit0 = std::sqrt(6.0 / 30.0);
  EXPECT_LE(a.weight(0).cwiseAbs().maxCoeff(), limit0);
  EXPECT_EQ(a.bias(0), Eigen::VectorXd::Zero(20));
}

TEST(Loss, ZeroWhenEqualAndConstantOffset) {
  const DimsProfile p{2, 3, 4, 1};
  Rng rng(4);
  const auto t = test::random_vector(rng, 10);
  EXPECT_EQ(loss(t, t, p), 0.0);
  const double c = 0.3;
  // Four groups, each contributing c².
  EXPECT_NEAR(loss((t.array() + c).matrix(), t, p) / 4.0, c * c, 1e-15);
}

TEST(Loss, TwoGroupsHandComputed) {
  const DimsProfile p{2, 3, 0, 0};
  Eigen::VectorXd pred(5), target(5);
  pred << 1, 2, 1, 1, 1;
  target.setZero();
  // group 1: (1+4)/2 = 2.5 * 1 ; group 2: 3/3 = 1 * 2
  EXPECT_DOUBLE_EQ(loss(pred, target, p, {1.0, 2.0, 1.0, 1.0}), 4.5);
}

TEST(Backward, ZeroGradientAtTarget) {
  Rng rng(5);
  const DimsProfile p{2, 2, 1, 1};
  const auto w = random_net(rng, "3-5-6", p);
  const auto x = test::random_vector(rng, 3);
  for (double g : backward(w, x, forward(w, x))) EXPECT_EQ(g, 0.0);
}

TEST(Backward, ScalarLinearHandDerivative) {
  const DimsProfile p{1, 0, 0, 0};
  auto w = MlpWeights::from_architecture("1-1", p);
  const double wv = 0.7, x = -1.3, t = 0.4;
  w.weight(0)(0, 0) = wv;
  Eigen::VectorXd xv(1), tv(1);
  xv << x;
  tv << t;
  const auto g = backward(w, xv, tv);
  EXPECT_NEAR(g[0], 2.0 * x * (wv * x - t), 1e-15);
  EXPECT_NEAR(g[1], 2.0 * (wv * x - t), 1e-15);
}

double relative_error(const Gradient& a, const Gradient& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-300});
}

Gradient central_differences(MlpWeights w, const Eigen::VectorXd& x, const Eigen::VectorXd& t,
                             const GroupWeights& gw, double h) {
  Gradient g(w.param_count());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double orig = w.params()[i];
    w.params()[i] = orig + h;
    const double up = loss(forward(w, x), t, w.profile(), gw);
    w.params()[i] = orig - h;
    const double down = loss(forward(w, x), t, w.profile(), gw);
    w.params()[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

TEST(Backward, MatchesFiniteDifferencesOnRandomNets) {
  Rng rng(6);
  const DimsProfile p{2, 2, 1, 2};
  for (const char* arch : {"4-7", "4-6-7", "4-5-6-7", "4-3-5-4-7"}) {
    for (int trial = 0; trial < 5; ++trial) {
      const auto w = random_net(rng, arch, p);
      const auto x = test::random_vector(rng, 4);
      const auto t = test::random_vector(rng, 7);
      const GroupWeights gw{rng.uniform(0.1, 2), rng.uniform(0.1, 2), rng.uniform(0.1, 2), rng.uniform(0.1, 2)};
      EXPECT_LT(relative_error(backward(w, x, t, gw), central_differences(w, x, t, gw, 1e-5)), 1e-4) << arch;
    }
  }
}

TEST(Backward, BatchGradientIsMeanOfSampleGradients) {
  Rng rng(7);
  const DimsProfile p{2, 1, 1, 1};
  const auto w = random_net(rng, "3-4-5", p);
  Eigen::MatrixXd xs(3, 4), ts(5, 4);
  for (Eigen::Index c = 0; c < 4; ++c) {
    xs.col(c) = test::random_vector(rng, 3);
    ts.col(c) = test::random_vector(rng, 5);
  }
  Gradient batch;
  const double value = backward_batch(w, xs, ts, {1, 1, 1, 1}, batch);
  Gradient mean(w.param_count(), 0.0);
  double loss_mean = 0.0;
  for (Eigen::Index c = 0; c < 4; ++c) {
    const auto g = backward(w, xs.col(c), ts.col(c));
    for (std::size_t i = 0; i < g.size(); ++i) mean[i] += g[i] / 4.0;
    loss_mean += loss(forward(w, xs.col(c)), ts.col(c), p) / 4.0;
  }
  EXPECT_NEAR(value, loss_mean, 1e-14);
  for (std::size_t i = 0; i < mean.size(); ++i) EXPECT_NEAR(batch[i], mean[i], 1e-14);
}

TEST(Adam, ZeroGradientLeavesWeightsUnchanged) {
  std::vector<double> w{0.5, -2.0, 3.0};
  const auto before = w;
  AdamState s(3);
  adam_step(w, s, std::vector<double>(3, 0.0), {});
  EXPECT_EQ(w, before);
  EXPECT_EQ(s.step, 1u);
}

TEST(Adam, FirstStepMagnitudeIsLearningRate) {
  Rng rng(8);
  const AdamConfig cfg;
  for (double scale : {1e-4, 1.0, 1e6}) {
    std::vector<double> w(50, 0.0), g(50);
    for (auto& v : g) v = scale * rng.uniform(-1.0, 1.0);
    AdamState s(50);
    adam_step(w, s, g, cfg);
    for (std::size_t i = 0; i < w.size(); ++i) {
      EXPECT_LE(std::abs(w[i]), cfg.learning_rate * (1 + 1e-6));
      EXPECT_NEAR(std::abs(w[i]), cfg.learning_rate * std::abs(g[i]) / (std::abs(g[i]) + cfg.epsilon), 1e-18);
      EXPECT_EQ(std::signbit(w[i]), !std::signbit(g[i]));
    }
  }
}

TEST(Adam, TwoUnitGradientStepsHandComputed) {
  std::vector<double> w{1.0};
  AdamState s(1);
  const AdamConfig cfg;
  adam_step(w, s, std::vector<double>{1.0}, cfg);
  EXPECT_NEAR(s.m[0], 0.1, 1e-16);
  EXPECT_NEAR(s.v[0], 0.001, 1e-17);
  EXPECT_NEAR(w[0], 1.0 - 1e-3 / (1.0 + 1e-8), 1e-15);
  adam_step(w, s, std::vector<double>{1.0}, cfg);
  EXPECT_NEAR(s.m[0], 0.19, 1e-15);
  EXPECT_NEAR(s.v[0], 0.001999, 1e-16);
  // m̂ = 0.19/0.19 = 1 and v̂ = 0.001999/0.001999 = 1 again.
  EXPECT_NEAR(w[0], 1.0 - 2e-3 / (1.0 + 1e-8), 1e-15);
}

Samples linear_samples(Rng& rng, const Eigen::MatrixXd& A, Eigen::Index n) {
  Samples s;
  s.inputs.resize(A.cols(), n);
  for (Eigen::Index c = 0; c < n; ++c) s.inputs.col(c) = test::random_vector(rng, A.cols());
  s.targets = A * s.inputs;
  return s;
}

TEST(Train, DefaultsEchoPublishedHyperparameters) {
  const TrainConfig cfg;
  EXPECT_EQ(cfg.learning_rate, 1e-3);
  EXPECT_EQ(cfg.batch_size, 64u);
  EXPECT_EQ(cfg.max_epochs, 100u);
  EXPECT_EQ(cfg.patience, 10u);
  EXPECT_EQ(cfg.beta1, 0.9);
  EXPECT_EQ(cfg.beta2, 0.999);
  EXPECT_EQ(cfg.epsilon, 1e-8);
  EXPECT_EQ(cfg.validation_fraction, 0.1);
}

TEST(Train, ScriptedValidationLossStopsAfterPatience) {
  Rng rng(9);
  const DimsProfile p{1, 1, 0, 0};
  const Eigen::MatrixXd A = Eigen::MatrixXd::Random(2, 3);
  const auto train = linear_samples(rng, A, 20);
  auto w = MlpWeights::from_architecture("3-2", p);
  w.init_glorot(1);
  const std::vector<double> script{5.0, 4.0, 3.0, 2.0, 1.5, 1.6, 1.5, 1.7, 1.9, 1.5, 2.0, 2.0, 1.8, 1.6, 1.5, 1.0};
  std::vector<std::vector<double>> snapshots;
  TrainHooks hooks;
  hooks.validation_loss = [&](const MlpWeights& cur, std::size_t epoch) {
    snapshots.emplace_back(cur.params().begin(), cur.params().end());
    return script.at(epoch);
  };
  TrainConfig cfg;
  cfg.batch_size = 4;
  const auto result = fit(w, train, train, cfg, hooks);
  EXPECT_EQ(result.report.best_epoch, 4u);
  EXPECT_EQ(result.report.stopped_epoch, 14u);
  EXPECT_TRUE(result.report.early_stopped);
  EXPECT_EQ(result.report.val_loss.size(), 15u);
  const std::vector<double> restored(result.weights.params().begin(), result.weights.params().end());
  EXPECT_EQ(restored, snapshots.at(4));
}

TEST(Train, RealEarlyStopRestoresBestExactly) {
  // Validation targets are the negation of the train mapping. Starting from
  // zero weights, validation loss rises from the first epoch on.
  Rng rng(10);
  const DimsProfile p{2, 1, 0, 0};
  const Eigen::MatrixXd A = Eigen::MatrixXd::Random(3, 4);
  const auto train = linear_samples(rng, A, 64);
  auto val = linear_samples(rng, A, 16);
  val.targets = -val.targets;
  const auto w = MlpWeights::from_architecture("4-3", p);
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.learning_rate = 1e-2;
  cfg.patience = 5;
  cfg.max_epochs = 60;
  const auto r = fit(w, train, val, cfg);
  ASSERT_TRUE(r.report.early_stopped);
  EXPECT_EQ(r.report.stopped_epoch - r.report.best_epoch, cfg.patience);
  EXPECT_EQ(evaluate_loss(r.weights, val, cfg.group_weights), r.report.val_loss[r.report.best_epoch]);
  EXPECT_EQ(*std::min_element(r.report.val_loss.begin(), r.report.val_loss.end()),
            r.report.val_loss[r.report.best_epoch]);
}

TEST(Train, OverfitsEightSamplesWithTwoHiddenLayers) {
  Rng rng(11);
  const DimsProfile p{2, 2, 1, 1};
  Samples s;
  s.inputs.resize(5, 8);
  s.targets.resize(6, 8);
  for (Eigen::Index c = 0; c < 8; ++c) {
    s.inputs.col(c) = test::random_vector(rng, 5);
    s.targets.col(c) = test::random_vector(rng, 6);
  }
  auto w = MlpWeights::from_architecture("5-32-32-6", p);
  w.init_glorot(3);
  TrainConfig cfg;
  cfg.patience = 0;
  cfg.max_epochs = 2000;
  const auto r = fit(w, s, s, cfg);
  EXPECT_EQ(r.report.val_loss.size(), 2000u);
  const double mse = (forward_batch(r.weights, s.inputs) - s.targets).squaredNorm() / double(s.targets.size());
  EXPECT_LT(mse, 1e-3);
}

TEST(Train, BitDeterministicForFixedSeed) {
  Rng rng(12);
  const DimsProfile p{2, 1, 1, 0};
  const Eigen::MatrixXd A = Eigen::MatrixXd::Random(4, 3);
  const auto train = linear_samples(rng, A, 100);
  const auto val = linear_samples(rng, A, 20);
  auto w = MlpWeights::from_architecture("3-8-4", p);
  w.init_glorot(4);
  TrainConfig cfg;
  cfg.max_epochs = 15;
  const auto a = fit(w, train, val, cfg);
  const auto b = fit(w, train, val, cfg);
  EXPECT_TRUE(a.report.same_trajectory(b.report));
  EXPECT_EQ(a.weights, b.weights);
  cfg.seed = 43;
  const auto c = fit(w, train, val, cfg);
  EXPECT_NE(a.report.train_loss, c.report.train_loss);
}

TEST(Train, ErrorsOnEmptySplitsAndDivergence) {
  Rng rng(13);
  const DimsProfile p{1, 0, 0, 0};
  auto w = MlpWeights::from_architecture("2-1", p);
  const auto s = linear_samples(rng, Eigen::MatrixXd::Ones(1, 2), 4);
  Samples empty{Eigen::MatrixXd(2, 0), Eigen::MatrixXd(1, 0)};
  EXPECT_THROW(fit(w, empty, s, {}), DataError);
  EXPECT_THROW(fit(w, s, empty, {}), DataError);
  auto poisoned = s;
  poisoned.targets(0, 2) = std::numeric_limits<double>::infinity();
  try {
    fit(w, poisoned, s, {});
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("diverged"), std::string::npos);
  }
  TrainConfig bad;
  bad.batch_size = 0;
  EXPECT_THROW(fit(w, s, s, bad), DataError);
  bad = {};
  bad.validation_fraction = 1.0;
  EXPECT_THROW(fit(w, s, s, bad), DataError);
}

TEST(RegressParams, ZeroNetGivesZeroParams) {
  const DimsProfile p{3, 2, 6, 4};
  const auto w = MlpWeights::from_architecture("8-15", p);
  Rng rng(14);
  const auto params = regress_params(w, test::random_vector(rng, 8), p);
  EXPECT_EQ(params, p.zeros());
}

TEST(RegressParams, BiasSlicesLandInGroupOrder) {
  const DimsProfile p{3, 2, 6, 4};
  auto w = MlpWeights::from_architecture("8-15", p);
  for (Eigen::Index i = 0; i < 15; ++i) w.bias(0)[i] = double(i + 1);
  const auto params = regress_params(w, Eigen::VectorXd::Zero(8), p);
  EXPECT_EQ(params.beta, (Eigen::VectorXd(3) << 1, 2, 3).finished());
  EXPECT_EQ(params.psi, (Eigen::VectorXd(2) << 4, 5).finished());
  EXPECT_EQ(params.theta, (Eigen::VectorXd(6) << 6, 7, 8, 9, 10, 11).finished());
  EXPECT_EQ(params.delta, (Eigen::VectorXd(4) << 12, 13, 14, 15).finished());
}

TEST(RegressParams, SlicingIsAPartitionOfTheRawOutput) {
  Rng rng(15);
  const DimsProfile p{3, 2, 6, 4};
  const auto w = random_net(rng, "8-10-15", p);
  const auto x = test::random_vector(rng, 8);
  EXPECT_EQ(concat_params(regress_params(w, x, p)), forward(w, x));
}

TEST(RegressParams, StatsUnstandardizeAndNormalizeInput) {
  Rng rng(16);
  const DimsProfile p{3, 2, 6, 4};
  const auto w = random_net(rng, "8-10-15", p);
  data::NormStats stats = data::identity_stats(15, true);
  for (std::size_t i = 0; i < 15; ++i) {
    stats.mean[i] = rng.uniform(-2, 2);
    stats.std[i] = rng.uniform(0.1, 3);
  }
  const auto x = test::random_vector(rng, 8, 5.0);
  const auto got = concat_params(regress_params(w, x, p, &stats));
  const Eigen::VectorXd raw = forward(w, x / x.norm());
  for (Eigen::Index i = 0; i < 15; ++i) EXPECT_EQ(got[i], raw[i] * stats.std[i] + stats.mean[i]);
  EXPECT_THROW(regress_params(w, x, DimsProfile{3, 2, 4, 6}), DimensionError);
}

TEST(RegressParams, InputStandardizationFollowsNormalization) {
  Rng rng(21);
  const DimsProfile p{3, 2, 6, 4};
  const auto w = random_net(rng, "8-10-15", p);
  auto stats = data::identity_stats(15, true);
  for (int i = 0; i < 8; ++i) {
    stats.input_mean.push_back(rng.uniform(-0.2, 0.2));
    stats.input_std.push_back(rng.uniform(0.1, 0.5));
  }
  const auto x = test::random_vector(rng, 8, 3.0);
  Eigen::VectorXd z = x / x.norm();
  for (int i = 0; i < 8; ++i) z[i] = (z[i] - stats.input_mean[i]) / stats.input_std[i];
  EXPECT_EQ(concat_params(regress_params(w, x, p, &stats)), forward(w, z));
}

TEST(WeightsIo, RoundTripIsBitwise) {
  Rng rng(17);
  const DimsProfile p{3, 2, 6, 4};
  const auto w = random_net(rng, "8-10-15", p);
  auto stats = data::identity_stats(15, false);
  stats.mean[3] = 0.125;
  stats.clamped[2] = 1;
  stats.input_mean.assign(8, 0.25);
  stats.input_std.assign(8, 2.0);
  test::TempDir dir("weights");
  save_weights(w, stats, dir / "w.t2fw");
  const auto back = load_weights(dir / "w.t2fw");
  EXPECT_EQ(back.weights, w);
  ASSERT_TRUE(back.stats.has_value());
  EXPECT_EQ(*back.stats, stats);
  save_weights(w, std::nullopt, dir / "w2.t2fw");
  EXPECT_FALSE(load_weights(dir / "w2.t2fw").stats.has_value());
}

TEST(WeightsIo, CorruptedByteFailsChecksum) {
  Rng rng(18);
  const auto w = random_net(rng, "8-10-15", {3, 2, 6, 4});
  const auto bytes = serialize_weights(w, std::nullopt);
  for (std::size_t pos : {std::size_t{6}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
    auto bad = bytes;
    bad[pos] ^= 0x10;
    try {
      parse_weights(bad);
      FAIL() << pos;
    } catch (const FormatError& e) {
      EXPECT_NE(std::string(e.what()).find("checksum"), std::string::npos) << pos;
    }
  }
}

TEST(WeightsIo, VersionMismatchIsReported) {
  Rng rng(19);
  const auto w = random_net(rng, "4-7", {2, 2, 1, 2});
  auto bytes = serialize_weights(w, std::nullopt);
  bytes[4] = 9;
  bytes.resize(bytes.size() - 4);
  const auto crc = io::crc32(bytes);
  const auto* c = reinterpret_cast<const std::uint8_t*>(&crc);
  bytes.insert(bytes.end(), c, c + 4);
  try {
    parse_weights(bytes);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("unsupported version 9"), std::string::npos);
  }
}

TEST(WeightsIo, CrossProfileLoadForFinetuneIsRefused) {
  Rng rng(20);
  const DimsProfile a{3, 2, 6, 4};
  const DimsProfile b{2, 3, 6, 4};  // same total width, different groups
  const auto wa = random_net(rng, "8-10-15", a);
  const auto wb = MlpWeights::from_architecture("8-10-15", b);
  test::TempDir dir("finetune");
  save_weights(wa, std::nullopt, dir / "a.t2fw");
  EXPECT_NO_THROW(load_weights_for_finetune(dir / "a.t2fw", wa.signature()));
  try {
    load_weights_for_finetune(dir / "a.t2fw", wb.signature());
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("architecture signature mismatch"), std::string::npos);
  }
}

}  // namespace
}  // namespace t2f::reg
