/*
 * Copyright 2026 The speakerctx Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "speakerctx/training.hpp"

namespace speakerctx {
namespace {

// o = w . x + b, parameters [w | b].
class LinearModel {
 public:
  using Input = Eigen::VectorXd;
  explicit LinearModel(int dim) : params_(Eigen::VectorXd::Zero(dim + 1)) {}

  Eigen::VectorXd& parameters() { return params_; }
  double predict(const Input& x) const {
    return params_.head(x.size()).dot(x) + params_[x.size()];
  }
  double forward_backward(const Input& x, double target, double weight, double scale,
                          Eigen::VectorXd& grad) const {
    const double o = predict(x);
    const double d = 2.0 * weight * (o - target) * scale;
    grad.head(x.size()) += d * x;
    grad[x.size()] += d;
    return o;
  }

 private:
  Eigen::VectorXd params_;
};

// Emits NaN once its first weight moves past a threshold.
class ExplodingModel : public LinearModel {
 public:
  using LinearModel::LinearModel;
  double forward_backward(const Input& x, double target, double weight, double scale,
                          Eigen::VectorXd& grad) const {
    grad[0] += std::numeric_limits<double>::quiet_NaN();
    return LinearModel::forward_backward(x, target, weight, scale, grad);
  }
};

Dataset<Eigen::VectorXd> linear_data(int n, const Eigen::VectorXd& w, double b,
                                     std::uint64_t seed, double noise = 0.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> e(0.0, 1.0);
  Dataset<Eigen::VectorXd> d;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd x(w.size());
    for (auto& v : x) v = u(rng);
    d.inputs.push_back(x);
    d.targets.push_back(w.dot(x) + b + noise * e(rng));
    d.levels.push_back(i % 2);
  }
  return d;
}

// ---------------------------------------------------------------------------
// Weighted MSE
// ---------------------------------------------------------------------------

TEST(WeightedMseTest, HandWorkedCase) {
  ClassWeights w;
  w.weights = {1.0, 2.0};
  const std::vector<double> t = {0.0, 1.0}, p = {0.5, 0.5};
  const std::vector<int> levels = {0, 1};
  EXPECT_NEAR(weighted_mse(t, p, w, levels), 0.375, 1e-12);
}

TEST(WeightedMseTest, ZeroOnEqualVectors) {
  const std::vector<double> t = {0.1, 0.7, 0.3};
  const std::vector<int> levels = {0, 2, 1};
  ClassWeights w;
  w.weights = {3.0, 0.2, 1.5};
  EXPECT_EQ(weighted_mse(t, t, w, levels), 0.0);
}

TEST(WeightedMseTest, UniformWeightsGivePlainMse) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> t(37), p(37);
  std::vector<int> levels(37);
  double plain = 0.0;
  for (int i = 0; i < 37; ++i) {
    t[i] = u(rng);
    p[i] = u(rng);
    levels[i] = i % 4;
    plain += (t[i] - p[i]) * (t[i] - p[i]);
  }
  plain /= 37;
  EXPECT_EQ(weighted_mse(t, p, ClassWeights::uniform(4), levels), plain);
}

TEST(WeightedMseTest, PermutationInvariantAndNonNegative) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 2);
  ClassWeights w;
  w.weights = {0.5, 1.5, 4.0};
  std::vector<double> t(20), p(20);
  std::vector<int> levels(20);
  for (int i = 0; i < 20; ++i) {
    t[i] = u(rng);
    p[i] = u(rng);
    levels[i] = static_cast<int>(rng() % 3);
  }
  const double base = weighted_mse(t, p, w, levels);
  EXPECT_GT(base, 0.0);
  std::vector<int> idx(20);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<double> t2, p2;
  std::vector<int> l2;
  for (int i : idx) {
    t2.push_back(t[i]);
    p2.push_back(p[i]);
    l2.push_back(levels[i]);
  }
  EXPECT_NEAR(weighted_mse(t2, p2, w, l2), base, 1e-12);
}

TEST(WeightedMseTest, Errors) {
  const std::vector<double> a = {0.1, 0.2}, b = {0.1};
  const std::vector<int> l = {0, 0};
  EXPECT_THROW(weighted_mse(a, b, ClassWeights::uniform(2), l), Error);
  EXPECT_THROW(weighted_mse({}, {}, ClassWeights::uniform(2), {}), Error);
}

// ---------------------------------------------------------------------------
// Class weights
// ---------------------------------------------------------------------------

TEST(ClassWeightsTest, HandWorkedImbalance) {
  const std::vector<int> hist = {90, 10};
  const ClassWeights w = compute_class_weights(hist);
  EXPECT_NEAR(w[0], 0.5556, 1e-3);
  EXPECT_NEAR(w[1], 5.0, 1e-3);
  EXPECT_TRUE(w.warnings.empty());
}

TEST(ClassWeightsTest, BalancedIsAllOnes) {
  const std::vector<int> hist = {7, 7, 7, 7};
  for (double x : compute_class_weights(hist).weights) EXPECT_DOUBLE_EQ(x, 1.0);
}

TEST(ClassWeightsTest, ScaleInvariant) {
  const std::vector<int> a = {3, 5, 11}, b = {30, 50, 110};
  const auto wa = compute_class_weights(a), wb = compute_class_weights(b);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(wa[k], wb[k], 1e-12);
}

TEST(ClassWeightsTest, ZeroCountWarns) {
  const std::vector<int> hist = {4, 0, 4};
  const ClassWeights w = compute_class_weights(hist);
  EXPECT_EQ(w.warnings.size(), 1u);
  EXPECT_DOUBLE_EQ(w[1], 8.0 / 3.0);
  for (double x : w.weights) EXPECT_GT(x, 0.0);
}

TEST(ClassWeightsTest, FromLevels) {
  const std::vector<int> levels = {0, 0, 0, 1};
  const ClassWeights w = compute_class_weights(levels, 2);
  EXPECT_DOUBLE_EQ(w[0], 4.0 / 6.0);
  EXPECT_DOUBLE_EQ(w[1], 2.0);
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

TEST(TrainConfigTest, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.lr_decay_factor = 1.0;
  EXPECT_THROW(c.validate(), Error);
  c = TrainConfig{};
  c.early_stop_patience = 0;
  EXPECT_THROW(c.validate(), Error);
  c = TrainConfig{};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(TrainTest, ZeroEpochsLeavesModelUntouched) {
  LinearModel model(3);
  model.parameters() << 1, 2, 3, 4;
  const Eigen::VectorXd before = model.parameters();
  const auto data = linear_data(20, Eigen::Vector3d(1, 1, 1), 0, 1);
  TrainConfig c;
  c.max_epochs = 0;
  const TrainingLog log = train(model, data, data, ClassWeights::uniform(2), c);
  EXPECT_TRUE(log.epochs.empty());
  EXPECT_EQ(model.parameters(), before);
}

TEST(TrainTest, LinearDataConverges) {
  const Eigen::Vector3d w(0.3, -0.5, 0.8);
  const auto train_set = linear_data(256, w, 0.1, 1);
  const auto val_set = linear_data(64, w, 0.1, 2);
  LinearModel model(3);
  TrainConfig c;
  c.learning_rate = 0.05;
  c.max_epochs = 200;
  c.early_stop_patience = 200;
  const ClassWeights weights = ClassWeights::uniform(2);
  train(model, train_set, val_set, weights, c);
  EXPECT_LT(evaluate_loss(model, train_set, weights), 1e-3);
}

TEST(TrainTest, EarlyStoppingBoundAndRestore) {
  const auto train_set = linear_data(64, Eigen::Vector3d(1, 0, -1), 0, 3, 0.5);
  const auto val_set = linear_data(16, Eigen::Vector3d(1, 0, -1), 0, 4, 0.5);
  LinearModel model(3);
  TrainConfig c;
  c.learning_rate = 0.2;
  c.max_epochs = 500;
  c.early_stop_patience = 4;
  c.plateau_patience = 2;
  const ClassWeights weights = ClassWeights::uniform(2);
  const TrainingLog log = train(model, train_set, val_set, weights, c);
  ASSERT_TRUE(log.stopped_early);
  EXPECT_LE(static_cast<int>(log.epochs.size()), log.best_epoch + c.early_stop_patience);
  double min_val = std::numeric_limits<double>::infinity();
  for (const auto& e : log.epochs) min_val = std::min(min_val, e.val_loss);
  EXPECT_EQ(log.best_val_loss, log.epochs[log.best_epoch - 1].val_loss);
  EXPECT_NEAR(evaluate_loss(model, val_set, weights), min_val, 1e-12);
}

TEST(TrainTest, PlateauDecaysLearningRateToFloor) {
  // Constant targets the model fits instantly; validation then stalls.
  Dataset<Eigen::VectorXd> d;
  for (int i = 0; i < 8; ++i) {
    d.inputs.push_back(Eigen::VectorXd::Zero(1));
    d.targets.push_back(0.0);
    d.levels.push_back(0);
  }
  LinearModel model(1);
  TrainConfig c;
  c.max_epochs = 30;
  c.early_stop_patience = 100;
  c.plateau_patience = 1;
  c.lr_decay_factor = 0.5;
  c.min_lr = 1e-4;
  const TrainingLog log = train(model, d, d, ClassWeights::uniform(1), c);
  for (std::size_t e = 1; e < log.epochs.size(); ++e) {
    EXPECT_LE(log.epochs[e].learning_rate, log.epochs[e - 1].learning_rate);
  }
  EXPECT_DOUBLE_EQ(log.epochs.back().learning_rate, 1e-4);
}

TEST(TrainTest, IdenticalSeedsIdenticalLogs) {
  const auto train_set = linear_data(100, Eigen::Vector3d(1, 2, 3), 0, 5, 0.1);
  const auto val_set = linear_data(20, Eigen::Vector3d(1, 2, 3), 0, 6, 0.1);
  TrainConfig c;
  c.max_epochs = 15;
  c.seed = 99;
  LinearModel a(3), b(3);
  const auto la = train(a, train_set, val_set, ClassWeights::uniform(2), c);
  const auto lb = train(b, train_set, val_set, ClassWeights::uniform(2), c);
  EXPECT_EQ(la, lb);
  EXPECT_EQ(la.to_text(), lb.to_text());
  EXPECT_EQ(a.parameters(), b.parameters());
}

TEST(TrainTest, NonFiniteLossAbortsWithLocation) {
  const auto data = linear_data(10, Eigen::Vector2d(1, 1), 0, 7);
  ExplodingModel model(2);
  TrainConfig c;
  try {
    train(model, data, data, ClassWeights::uniform(2), c);
    FAIL() << "expected a training error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kTraining);
    EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("batch 0"), std::string::npos);
  }
}

TEST(TrainTest, EmptySplitsRejected) {
  LinearModel model(2);
  Dataset<Eigen::VectorXd> empty;
  const auto data = linear_data(10, Eigen::Vector2d(1, 1), 0, 7);
  EXPECT_THROW(train(model, data, empty, ClassWeights::uniform(2), TrainConfig{}), Error);
}

TEST(AdamTest, SmallStepDecreasesFrozenBatchLoss) {
  const auto batch = linear_data(32, Eigen::Vector3d(0.5, -1, 2), 0.3, 8);
  const ClassWeights weights = ClassWeights::uniform(2);
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    LinearModel model(3);
    model.parameters() = Eigen::VectorXd::Random(4);
    const double before = evaluate_loss(model, batch, weights);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(4);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      model.forward_backward(batch.inputs[i], batch.targets[i], 1.0, 1.0 / batch.size(), grad);
    }
    AdamOptimizer adam(4);
    adam.step(model.parameters(), grad, 1e-4);
    EXPECT_LT(evaluate_loss(model, batch, weights), before);
  }
}

TEST(TrainingLogTest, TextFormat) {
  TrainingLog log;
  log.epochs.push_back({1, 0.5, 0.25, 0.001});
  const std::string text = log.to_text();
  EXPECT_NE(text.find("1\t0.5\t0.25\t0.001"), std::string::npos);
}

}  // namespace
}  // namespace speakerctx
