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

#include "speakerctx/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace speakerctx {

namespace {

void check_labels(std::span<const int> labels, int num_classes, const char* what) {
  for (int v : labels) {
    if (v < 0 || v >= num_classes) {
      fail(ErrorKind::kInvalidArgument, std::string(what) + " label " + std::to_string(v) +
                                            " outside 0.." + std::to_string(num_classes - 1));
    }
  }
}

}  // namespace

ConfusionMatrices confusion_matrices(std::span<const int> y_true, std::span<const int> y_pred,
                                     int num_classes) {
  require(num_classes >= 2, "QWK needs at least 2 classes");
  if (y_true.size() != y_pred.size()) fail(ErrorKind::kInvalidArgument, "QWK length mismatch");
  if (y_true.empty()) fail(ErrorKind::kInvalidArgument, "QWK of an empty sample");
  check_labels(y_true, num_classes, "true");
  check_labels(y_pred, num_classes, "predicted");

  const int c = num_classes;
  ConfusionMatrices m;
  m.num_classes = c;
  m.observed = Eigen::MatrixXd::Zero(c, c);
  Eigen::VectorXd hist_true = Eigen::VectorXd::Zero(c);
  Eigen::VectorXd hist_pred = Eigen::VectorXd::Zero(c);
  for (std::size_t k = 0; k < y_true.size(); ++k) {
    m.observed(y_true[k], y_pred[k]) += 1.0;
    hist_true[y_true[k]] += 1.0;
    hist_pred[y_pred[k]] += 1.0;
  }
  m.observed /= m.observed.sum();
  m.expected = hist_true * hist_pred.transpose();
  m.expected /= m.expected.sum();
  m.weights.resize(c, c);
  const double denom = static_cast<double>(c - 1) * (c - 1);
  for (int i = 0; i < c; ++i)
    for (int j = 0; j < c; ++j) m.weights(i, j) = static_cast<double>((i - j) * (i - j)) / denom;
  return m;
}

double qwk(std::span<const int> y_true, std::span<const int> y_pred, int num_classes) {
  const ConfusionMatrices m = confusion_matrices(y_true, y_pred, num_classes);
  const double numerator = m.weights.cwiseProduct(m.observed).sum();
  const double denominator = m.weights.cwiseProduct(m.expected).sum();
  if (denominator == 0.0) {
    if (std::equal(y_true.begin(), y_true.end(), y_pred.begin())) return 1.0;
    fail(ErrorKind::kInvalidArgument, "QWK undefined: zero expected disagreement");
  }
  return 1.0 - numerator / denominator;
}

double mean_squared_error(std::span<const double> y_true, std::span<const double> y_pred) {
  if (y_true.size() != y_pred.size()) fail(ErrorKind::kInvalidArgument, "MSE length mismatch");
  if (y_true.empty()) fail(ErrorKind::kInvalidArgument, "MSE of an empty sample");
  double sum = 0.0;
  for (std::size_t k = 0; k < y_true.size(); ++k) {
    const double r = y_true[k] - y_pred[k];
    sum += r * r;
  }
  return sum / static_cast<double>(y_true.size());
}

double accuracy(std::span<const int> y_true, std::span<const int> y_pred) {
  if (y_true.size() != y_pred.size()) fail(ErrorKind::kInvalidArgument, "accuracy length mismatch");
  if (y_true.empty()) fail(ErrorKind::kInvalidArgument, "accuracy of an empty sample");
  std::size_t hits = 0;
  for (std::size_t k = 0; k < y_true.size(); ++k) hits += y_true[k] == y_pred[k];
  return static_cast<double>(hits) / static_cast<double>(y_true.size());
}

SpeakerAccuracy speaker_accuracy(std::span<const PanelPrediction> panels, int num_prompts) {
  require(num_prompts >= 1, "num_prompts must be >= 1");
  SpeakerAccuracy out;
  out.at_least.assign(num_prompts + 1, 0);
  if (panels.empty()) return out;
  long total_correct = 0;
  for (const PanelPrediction& panel : panels) {
    int correct = 0;
    for (int j = 1; j <= num_prompts; ++j) {
      auto t = panel.truth.find(j);
      auto p = panel.predicted.find(j);
      if (t == panel.truth.end() || p == panel.predicted.end()) {
        fail(ErrorKind::kMissingKey, "speaker " + panel.speaker_id +
                                         " has no prediction for prompt " + std::to_string(j));
      }
      correct += t->second == p->second;
    }
    total_correct += correct;
    for (int k = 0; k <= correct; ++k) ++out.at_least[k];
  }
  out.mean_correct = static_cast<double>(total_correct) / static_cast<double>(panels.size());
  return out;
}

HighBias high_bias_samples(std::span<const int> y_true, std::span<const int> y_pred,
                           int num_classes) {
  if (y_true.size() != y_pred.size()) {
    fail(ErrorKind::kInvalidArgument, "high-bias scan length mismatch");
  }
  check_labels(y_true, num_classes, "true");
  check_labels(y_pred, num_classes, "predicted");
  HighBias out;
  out.heatmap = Eigen::MatrixXi::Zero(num_classes, num_classes);
  for (std::size_t k = 0; k < y_true.size(); ++k) {
    ++out.heatmap(y_true[k], y_pred[k]);
    if (std::abs(y_true[k] - y_pred[k]) >= 2) out.indices.push_back(k);
  }
  out.count = static_cast<int>(out.indices.size());
  return out;
}

AgreementSplit agreement_split_eval(std::span<const int> primary, std::span<const int> y_pred,
                                    std::span<const int> secondary, int num_classes) {
  if (primary.size() != y_pred.size() || primary.size() != secondary.size()) {
    fail(ErrorKind::kInvalidArgument, "agreement split length mismatch");
  }
  std::vector<int> agree_true, agree_pred, disagree_true, disagree_pred;
  for (std::size_t k = 0; k < primary.size(); ++k) {
    if (primary[k] == secondary[k]) {
      agree_true.push_back(primary[k]);
      agree_pred.push_back(y_pred[k]);
    } else {
      disagree_true.push_back(primary[k]);
      disagree_pred.push_back(y_pred[k]);
    }
  }
  auto metrics = [num_classes](const std::vector<int>& t,
                               const std::vector<int>& p) -> std::optional<PartitionMetrics> {
    if (t.empty()) return std::nullopt;
    return PartitionMetrics{static_cast<int>(t.size()), accuracy(t, p), qwk(t, p, num_classes)};
  };
  return {metrics(agree_true, agree_pred), metrics(disagree_true, disagree_pred)};
}

CrossPromptProbe cross_prompt_bias_probe(
    std::span<const int> earlier_predicted, int earlier_levels, std::span<const int> later_truth,
    int later_levels, const std::map<std::string, std::vector<int>>& later_predicted_by_strategy,
    const CrossPromptThresholds& thresholds) {
  if (earlier_predicted.size() != later_truth.size()) {
    fail(ErrorKind::kInvalidArgument, "cross-prompt probe length mismatch");
  }
  const int high = thresholds.high_min_level.value_or(earlier_levels - 1);
  const int low = thresholds.low_max_level.value_or((later_levels + 2) / 3 - 1);
  CrossPromptProbe probe;
  for (std::size_t k = 0; k < later_truth.size(); ++k) {
    if (earlier_predicted[k] >= high && later_truth[k] <= low) probe.subset.push_back(k);
  }
  for (const auto& [name, predicted] : later_predicted_by_strategy) {
    if (predicted.size() != later_truth.size()) {
      fail(ErrorKind::kInvalidArgument, "cross-prompt probe length mismatch for " + name);
    }
    ProbeOutcome outcome;
    outcome.count = static_cast<int>(probe.subset.size());
    if (outcome.count > 0) {
      int over = 0, under = 0, exact = 0;
      for (std::size_t k : probe.subset) {
        if (predicted[k] > later_truth[k]) ++over;
        else if (predicted[k] < later_truth[k]) ++under;
        else ++exact;
      }
      outcome.over = static_cast<double>(over) / outcome.count;
      outcome.under = static_cast<double>(under) / outcome.count;
      outcome.exact = static_cast<double>(exact) / outcome.count;
    }
    probe.by_strategy.emplace(name, outcome);
  }
  return probe;
}

EvaluationReport build_report(const std::vector<PromptPredictions>& per_prompt,
                              const std::string& strategy, const std::string& split,
                              const CrossPromptThresholds& thresholds) {
  if (per_prompt.empty()) fail(ErrorKind::kInvalidArgument, "report needs at least one prompt");
  EvaluationReport report;
  report.strategy = strategy;
  report.split = split;
  std::map<std::string, PanelPrediction> panels;
  for (const PromptPredictions& p : per_prompt) {
    if (p.truth.empty()) {
      fail(ErrorKind::kInvalidArgument, "no samples for prompt " + std::to_string(p.prompt_index));
    }
    PromptReport r;
    r.prompt_index = p.prompt_index;
    r.count = static_cast<int>(p.truth.size());
    r.qwk = qwk(p.truth, p.predicted, p.num_levels);
    std::vector<double> target(p.truth.size()), clamped(p.raw.size());
    for (std::size_t k = 0; k < p.truth.size(); ++k) {
      target[k] = static_cast<double>(p.truth[k]) / (p.num_levels - 1);
      clamped[k] = std::clamp(p.raw[k], 0.0, 1.0);
    }
    r.mse = mean_squared_error(target, clamped);
    r.high_bias = high_bias_samples(p.truth, p.predicted, p.num_levels);
    if (!p.secondary.empty()) {
      r.agreement = agreement_split_eval(p.truth, p.predicted, p.secondary, p.num_levels);
    }
    for (std::size_t k = 0; k < p.speakers.size(); ++k) {
      PanelPrediction& panel = panels[p.speakers[k]];
      panel.speaker_id = p.speakers[k];
      panel.truth[p.prompt_index] = p.truth[k];
      panel.predicted[p.prompt_index] = p.predicted[k];
    }
    report.average_qwk += r.qwk;
    report.average_mse += r.mse;
    report.prompts.push_back(std::move(r));
  }
  report.average_qwk /= static_cast<double>(per_prompt.size());
  report.average_mse /= static_cast<double>(per_prompt.size());

  std::vector<PanelPrediction> panel_list;
  for (auto& [id, panel] : panels) panel_list.push_back(std::move(panel));
  report.speaker_accuracy = speaker_accuracy(panel_list, static_cast<int>(per_prompt.size()));

  for (std::size_t j = 1; j < per_prompt.size(); ++j) {
    const PromptPredictions& earlier = per_prompt[j - 1];
    const PromptPredictions& later = per_prompt[j];
    if (earlier.speakers != later.speakers) {
      fail(ErrorKind::kInvalidArgument, "cross-prompt probe needs the same speakers per prompt");
    }
    auto probe = cross_prompt_bias_probe(earlier.predicted, earlier.num_levels, later.truth,
                                         later.num_levels, {{strategy, later.predicted}},
                                         thresholds);
    probe.earlier_prompt = earlier.prompt_index;
    probe.later_prompt = later.prompt_index;
    report.cross_prompt_bias.push_back(std::move(probe));
  }
  return report;
}

namespace {

nlohmann::json grid_json(const Eigen::MatrixXi& grid) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < grid.rows(); ++i) {
    std::vector<int> row(grid.cols());
    for (Eigen::Index j = 0; j < grid.cols(); ++j) row[j] = grid(i, j);
    rows.push_back(row);
  }
  return rows;
}

nlohmann::json partition_json(const std::optional<PartitionMetrics>& m) {
  if (!m) return nullptr;
  return {{"count", m->count}, {"accuracy", m->accuracy}, {"qwk", m->qwk}};
}

}  // namespace

nlohmann::json report_to_json(const EvaluationReport& report) {
  nlohmann::json j;
  j["strategy"] = report.strategy;
  j["split"] = report.split;
  j["average_qwk"] = report.average_qwk;
  j["average_mse"] = report.average_mse;
  nlohmann::json prompts = nlohmann::json::array();
  int high_bias_total = 0;
  for (const PromptReport& p : report.prompts) {
    prompts.push_back({{"prompt", p.prompt_index},
                       {"count", p.count},
                       {"qwk", p.qwk},
                       {"mse", p.mse},
                       {"high_bias_count", p.high_bias.count},
                       {"confusion", grid_json(p.high_bias.heatmap)},
                       {"agreement",
                        {{"agree", partition_json(p.agreement.agree)},
                         {"disagree", partition_json(p.agreement.disagree)}}}});
    high_bias_total += p.high_bias.count;
  }
  j["prompts"] = prompts;
  j["high_bias_total"] = high_bias_total;
  j["speaker_accuracy"] = {{"mean_correct", report.speaker_accuracy.mean_correct},
                           {"at_least_k", report.speaker_accuracy.at_least}};
  nlohmann::json probes = nlohmann::json::array();
  for (const CrossPromptProbe& probe : report.cross_prompt_bias) {
    nlohmann::json outcomes;
    for (const auto& [name, o] : probe.by_strategy) {
      outcomes[name] = {{"count", o.count}, {"over", o.over}, {"under", o.under}, {"exact", o.exact}};
    }
    probes.push_back({{"earlier_prompt", probe.earlier_prompt},
                      {"later_prompt", probe.later_prompt},
                      {"subset_size", probe.subset.size()},
                      {"outcomes", outcomes}});
  }
  j["cross_prompt_bias"] = probes;
  return j;
}

std::string format_grid(const Eigen::MatrixXi& grid) {
  std::string out;
  for (Eigen::Index i = 0; i < grid.rows(); ++i) {
    for (Eigen::Index j = 0; j < grid.cols(); ++j) {
      if (j) out += ' ';
      out += std::to_string(grid(i, j));
    }
    out += '\n';
  }
  return out;
}

}  // namespace speakerctx
