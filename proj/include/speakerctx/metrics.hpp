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

#ifndef SPEAKERCTX_METRICS_HPP_
#define SPEAKERCTX_METRICS_HPP_

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "speakerctx/common.hpp"

namespace speakerctx {

// O: normalized observed counts (true i, predicted j); W: (i-j)^2/(C-1)^2;
// E: normalized outer product of the two label histograms.
struct ConfusionMatrices {
  Eigen::MatrixXd observed;
  Eigen::MatrixXd weights;
  Eigen::MatrixXd expected;
  int num_classes = 0;
};

ConfusionMatrices confusion_matrices(std::span<const int> y_true, std::span<const int> y_pred,
                                     int num_classes);

// Quadratic weighted kappa: 1 - sum(W.O) / sum(W.E). A zero denominator
// (both vectors constant on the same class) yields 1.0.
double qwk(std::span<const int> y_true, std::span<const int> y_pred, int num_classes);

double mean_squared_error(std::span<const double> y_true, std::span<const double> y_pred);

double accuracy(std::span<const int> y_true, std::span<const int> y_pred);

struct PanelPrediction {
  std::string speaker_id;
  std::map<int, int> truth;      // prompt -> level
  std::map<int, int> predicted;  // prompt -> level
};

struct SpeakerAccuracy {
  double mean_correct = 0.0;
  std::vector<int> at_least;  // at_least[k] for k = 0..P
};

SpeakerAccuracy speaker_accuracy(std::span<const PanelPrediction> panels, int num_prompts);

struct HighBias {
  std::vector<std::size_t> indices;
  int count = 0;
  Eigen::MatrixXi heatmap;  // (true, predicted) counts over all samples
};

// Flags |true - pred| >= 2.
HighBias high_bias_samples(std::span<const int> y_true, std::span<const int> y_pred,
                           int num_classes);

struct PartitionMetrics {
  int count = 0;
  double accuracy = 0.0;
  double qwk = 0.0;
};

struct AgreementSplit {
  std::optional<PartitionMetrics> agree;
  std::optional<PartitionMetrics> disagree;
};

// Partitions on primary == secondary; metrics are scored against primary.
AgreementSplit agreement_split_eval(std::span<const int> primary, std::span<const int> y_pred,
                                    std::span<const int> secondary, int num_classes);

struct CrossPromptThresholds {
  std::optional<int> high_min_level;  // default: top level of the earlier prompt
  std::optional<int> low_max_level;   // default: ceil(N/3) - 1 of the later prompt
};

struct ProbeOutcome {
  int count = 0;
  double over = 0.0;
  double under = 0.0;
  double exact = 0.0;
};

struct CrossPromptProbe {
  int earlier_prompt = 0;
  int later_prompt = 0;
  std::vector<std::size_t> subset;
  std::map<std::string, ProbeOutcome> by_strategy;
};

// Samples with a high predicted level on the earlier prompt and a low true
// level on the later one, and how each strategy's later-prompt predictions
// compare with the truth on them.
CrossPromptProbe cross_prompt_bias_probe(
    std::span<const int> earlier_predicted, int earlier_levels, std::span<const int> later_truth,
    int later_levels, const std::map<std::string, std::vector<int>>& later_predicted_by_strategy,
    const CrossPromptThresholds& thresholds = {});

// Everything needed to score one prompt on one split.
struct PromptPredictions {
  int prompt_index = 0;
  int num_levels = 2;
  std::vector<std::string> speakers;
  std::vector<int> truth;
  std::vector<int> secondary;  // empty when the corpus has no second rater
  std::vector<double> raw;     // model outputs on the normalized scale
  std::vector<int> predicted;  // rescaled levels
};

struct PromptReport {
  int prompt_index = 0;
  int count = 0;
  double qwk = 0.0;
  double mse = 0.0;
  HighBias high_bias;
  AgreementSplit agreement;
};

struct EvaluationReport {
  std::string strategy;
  std::string split;
  std::vector<PromptReport> prompts;
  double average_qwk = 0.0;
  double average_mse = 0.0;
  SpeakerAccuracy speaker_accuracy;
  std::vector<CrossPromptProbe> cross_prompt_bias;
};

EvaluationReport build_report(const std::vector<PromptPredictions>& per_prompt,
                              const std::string& strategy, const std::string& split,
                              const CrossPromptThresholds& thresholds = {});

nlohmann::json report_to_json(const EvaluationReport& report);
// Whitespace-separated integer grid, one row per line.
std::string format_grid(const Eigen::MatrixXi& grid);

}  // namespace speakerctx

#endif  // SPEAKERCTX_METRICS_HPP_
