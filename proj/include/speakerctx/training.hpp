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

#ifndef SPEAKERCTX_TRAINING_HPP_
#define SPEAKERCTX_TRAINING_HPP_

#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "speakerctx/common.hpp"

namespace speakerctx {

// Per-level loss weights, inverse-frequency with mean-1 normalization:
// w[k] = N_total / (num_levels * count_k).
struct ClassWeights {
  std::vector<double> weights;
  // One note per level whose training count was zero (treated as count 1).
  std::vector<std::string> warnings;

  double operator[](int level) const;
  int num_levels() const { return static_cast<int>(weights.size()); }
  static ClassWeights uniform(int num_levels);
};

ClassWeights compute_class_weights(std::span<const int> histogram);
ClassWeights compute_class_weights(std::span<const int> levels, int num_levels);

// (1/N) sum_i (y_true_i - y_pred_i)^2 w[level_i]
double weighted_mse(std::span<const double> y_true, std::span<const double> y_pred,
                    const ClassWeights& weights, std::span<const int> levels);

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 32;
  int max_epochs = 100;
  int early_stop_patience = 8;
  int plateau_patience = 3;
  double lr_decay_factor = 0.5;
  double min_lr = 1e-6;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double learning_rate = 0.0;
  bool operator==(const EpochRecord&) const = default;
};

struct TrainingLog {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;  // 0 when no epoch ran
  double best_val_loss = std::numeric_limits<double>::infinity();
  bool stopped_early = false;

  // `epoch \t train_loss \t val_loss \t lr` per line.
  std::string to_text() const;
  bool operator==(const TrainingLog&) const = default;
};

class AdamOptimizer {
 public:
  explicit AdamOptimizer(Eigen::Index size, double beta1 = 0.9, double beta2 = 0.999,
                         double epsilon = 1e-8);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double learning_rate);
  long steps() const { return steps_; }

 private:
  Eigen::VectorXd first_;
  Eigen::VectorXd second_;
  double beta1_, beta2_, epsilon_;
  long steps_ = 0;
};

template <typename Input>
struct Dataset {
  std::vector<Input> inputs;
  std::vector<double> targets;  // normalized to [0,1]
  std::vector<int> levels;      // integer ground truth, keys the class weight

  std::size_t size() const { return inputs.size(); }
};

// A scalar regressor trainable by `train`. `forward_backward` returns the
// model output o and adds scale * d/dparams [weight * (o - target)^2] into grad.
template <typename M>
concept Regressor = requires(M& model, const M& cmodel, const typename M::Input& x,
                             Eigen::VectorXd& grad) {
  { model.parameters() } -> std::same_as<Eigen::VectorXd&>;
  { cmodel.predict(x) } -> std::convertible_to<double>;
  { cmodel.forward_backward(x, 0.0, 1.0, 1.0, grad) } -> std::convertible_to<double>;
};

namespace internal {
bool improved(double value, double best);
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch);
}  // namespace internal

template <Regressor M>
double evaluate_loss(const M& model, const Dataset<typename M::Input>& data,
                     const ClassWeights& weights) {
  std::vector<double> predictions(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) predictions[i] = model.predict(data.inputs[i]);
  return weighted_mse(data.targets, predictions, weights, data.levels);
}

// Mini-batch Adam on weighted MSE. After every epoch the weighted validation
// loss drives LR reduction on plateau and early stopping; the parameters of
// the best validation epoch are restored before returning.
template <Regressor M>
TrainingLog train(M& model, const Dataset<typename M::Input>& train_set,
                  const Dataset<typename M::Input>& validation_set,
                  const ClassWeights& weights, const TrainConfig& config) {
  config.validate();
  TrainingLog log;
  if (config.max_epochs == 0) return log;
  if (train_set.size() == 0 || validation_set.size() == 0) {
    fail(ErrorKind::kTraining, "training needs non-empty train and validation sets");
  }

  Eigen::VectorXd& params = model.parameters();
  AdamOptimizer adam(params.size());
  Eigen::VectorXd grad(params.size());
  Eigen::VectorXd best_params = params;
  double lr = config.learning_rate;
  int since_best = 0;
  int since_plateau_best = 0;
  double plateau_best = std::numeric_limits<double>::infinity();

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto order = internal::epoch_order(train_set.size(), config.seed, epoch);
    double epoch_loss = 0.0;
    int batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      grad.setZero();
      double batch_loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = order[k];
        const double w = weights[train_set.levels[i]];
        const double out =
            model.forward_backward(train_set.inputs[i], train_set.targets[i], w, scale, grad);
        const double r = out - train_set.targets[i];
        batch_loss += w * r * r;
      }
      if (!std::isfinite(batch_loss) || !grad.allFinite()) {
        fail(ErrorKind::kTraining, "non-finite loss at epoch " + std::to_string(epoch) +
                                       ", batch " + std::to_string(batch_index));
      }
      epoch_loss += batch_loss;
      adam.step(params, grad, lr);
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = epoch_loss / static_cast<double>(order.size());
    record.val_loss = evaluate_loss(model, validation_set, weights);
    record.learning_rate = lr;
    if (!std::isfinite(record.val_loss)) {
      fail(ErrorKind::kTraining, "non-finite validation loss at epoch " + std::to_string(epoch));
    }
    log.epochs.push_back(record);

    if (internal::improved(record.val_loss, log.best_val_loss)) {
      log.best_val_loss = record.val_loss;
      log.best_epoch = epoch;
      best_params = params;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (internal::improved(record.val_loss, plateau_best)) {
      plateau_best = record.val_loss;
      since_plateau_best = 0;
    } else if (++since_plateau_best >= config.plateau_patience) {
      lr = std::max(lr * config.lr_decay_factor, config.min_lr);
      since_plateau_best = 0;
    }
    if (since_best >= config.early_stop_patience) {
      log.stopped_early = epoch < config.max_epochs;
      break;
    }
  }
  params = best_params;
  return log;
}

}  // namespace speakerctx

#endif  // SPEAKERCTX_TRAINING_HPP_
