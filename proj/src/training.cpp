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

#include "speakerctx/training.hpp"

#include <cstdio>

#include "speakerctx/corpus.hpp"

namespace speakerctx {

double ClassWeights::operator[](int level) const {
  if (level < 0 || level >= num_levels()) {
    fail(ErrorKind::kInvalidArgument, "no class weight for level " + std::to_string(level));
  }
  return weights[level];
}

ClassWeights ClassWeights::uniform(int num_levels) {
  ClassWeights w;
  w.weights.assign(num_levels, 1.0);
  return w;
}

ClassWeights compute_class_weights(std::span<const int> histogram) {
  require(!histogram.empty(), "class histogram must be non-empty");
  ClassWeights result;
  const int levels = static_cast<int>(histogram.size());
  double total = 0.0;
  for (int c : histogram) {
    require(c >= 0, "class counts must be non-negative");
    total += c;
  }
  require(total > 0, "class histogram is empty");
  for (int k = 0; k < levels; ++k) {
    int count = histogram[k];
    if (count == 0) {
      result.warnings.push_back("level " + std::to_string(k) +
                                " has no training samples; weighted as count 1");
      count = 1;
    }
    result.weights.push_back(total / (static_cast<double>(levels) * count));
  }
  return result;
}

ClassWeights compute_class_weights(std::span<const int> levels, int num_levels) {
  std::vector<int> histogram(num_levels, 0);
  for (int level : levels) {
    require(level >= 0 && level < num_levels, "label outside level range");
    ++histogram[level];
  }
  return compute_class_weights(histogram);
}

double weighted_mse(std::span<const double> y_true, std::span<const double> y_pred,
                    const ClassWeights& weights, std::span<const int> levels) {
  if (y_true.size() != y_pred.size() || y_true.size() != levels.size()) {
    fail(ErrorKind::kInvalidArgument, "weighted_mse length mismatch");
  }
  if (y_true.empty()) fail(ErrorKind::kInvalidArgument, "weighted_mse of an empty batch");
  double sum = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const double r = y_true[i] - y_pred[i];
    sum += r * r * weights[levels[i]];
  }
  return sum / static_cast<double>(y_true.size());
}

void TrainConfig::validate() const {
  require(learning_rate > 0, "learning_rate must be > 0");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(max_epochs >= 0, "max_epochs must be >= 0");
  require(early_stop_patience >= 1 && plateau_patience >= 1, "patience values must be >= 1");
  require(lr_decay_factor > 0 && lr_decay_factor < 1, "lr_decay_factor must lie in (0,1)");
  require(min_lr >= 0, "min_lr must be >= 0");
}

std::string TrainingLog::to_text() const {
  std::string out;
  for (const EpochRecord& r : epochs) {
    out += std::to_string(r.epoch) + '\t' + format_real(r.train_loss) + '\t' +
           format_real(r.val_loss) + '\t' + format_real(r.learning_rate) + '\n';
  }
  return out;
}

AdamOptimizer::AdamOptimizer(Eigen::Index size, double beta1, double beta2, double epsilon)
    : first_(Eigen::VectorXd::Zero(size)),
      second_(Eigen::VectorXd::Zero(size)),
      beta1_(beta1),
      beta2_(beta2),
      epsilon_(epsilon) {}

void AdamOptimizer::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad,
                         double learning_rate) {
  ++steps_;
  first_ = beta1_ * first_ + (1.0 - beta1_) * grad;
  second_ = beta2_ * second_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  params.array() -= learning_rate * (first_.array() / c1) /
                    ((second_.array() / c2).sqrt() + epsilon_);
}

namespace internal {

bool improved(double value, double best) {
  if (!std::isfinite(best)) return std::isfinite(value);
  return value < best - 1e-4 * std::abs(best);
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(derive_seed(seed, "batches", static_cast<std::uint64_t>(epoch)));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  return order;
}

}  // namespace internal

}  // namespace speakerctx
