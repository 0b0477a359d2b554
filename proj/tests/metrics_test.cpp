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

#include <cmath>
#include <random>

#include "speakerctx/metrics.hpp"

namespace speakerctx {
namespace {

// Kappa straight from raw counts, with plain loops:
//   1 - sum_ij w_ij n_ij / sum_ij w_ij (r_i c_j / N),  w_ij = (i-j)^2
// The (C-1)^2 and 1/N normalizations cancel between numerator and denominator.
double kappa_from_counts(const std::vector<int>& a, const std::vector<int>& b, int c) {
  std::vector<std::vector<double>> n(c, std::vector<double>(c, 0.0));
  std::vector<double> rows(c, 0.0), cols(c, 0.0);
  for (std::size_t k = 0; k < a.size(); ++k) {
    n[a[k]][b[k]] += 1;
    rows[a[k]] += 1;
    cols[b[k]] += 1;
  }
  const double total = static_cast<double>(a.size());
  double num = 0.0, den = 0.0;
  for (int i = 0; i < c; ++i) {
    for (int j = 0; j < c; ++j) {
      const double w = static_cast<double>((i - j) * (i - j));
      num += w * n[i][j];
      den += w * rows[i] * cols[j] / total;
    }
  }
  return 1.0 - num / den;
}

// ---------------------------------------------------------------------------
// QWK
// ---------------------------------------------------------------------------

TEST(QwkTest, PerfectAgreement) {
  const std::vector<int> y = {0, 1, 2};
  EXPECT_DOUBLE_EQ(qwk(y, y, 3), 1.0);
}

TEST(QwkTest, FullReversalIsMinusOne) {
  const std::vector<int> t = {0, 1, 2}, p = {2, 1, 0};
  EXPECT_NEAR(qwk(t, p, 3), -1.0, 1e-12);
}

TEST(QwkTest, MatricesHandWorked) {
  const std::vector<int> t = {0, 1, 2}, p = {2, 1, 0};
  const auto m = confusion_matrices(t, p, 3);
  // numerator sum(W.O) = 2 * (1/3) * 1 = 2/3; denominator sum(W.E) = 1/3
  EXPECT_NEAR(m.weights.cwiseProduct(m.observed).sum(), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(m.weights.cwiseProduct(m.expected).sum(), 1.0 / 3.0, 1e-15);
}

TEST(QwkTest, MatrixInvariants) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const int c = 2 + static_cast<int>(rng() % 6);
    const int n = 1 + static_cast<int>(rng() % 50);
    std::vector<int> a(n), b(n);
    for (int k = 0; k < n; ++k) {
      a[k] = static_cast<int>(rng() % c);
      b[k] = static_cast<int>(rng() % c);
    }
    const auto m = confusion_matrices(a, b, c);
    EXPECT_NEAR(m.observed.sum(), 1.0, 1e-9);
    EXPECT_NEAR(m.expected.sum(), 1.0, 1e-9);
    EXPECT_TRUE(m.weights.isApprox(m.weights.transpose()));
    EXPECT_TRUE(m.weights.diagonal().isZero(0.0));
    for (int i = 0; i < c; ++i) {
      for (int j = 0; j < c; ++j) {
        EXPECT_DOUBLE_EQ(m.weights(i, j), double((i - j) * (i - j)) / ((c - 1) * (c - 1)));
      }
    }
  }
}

TEST(QwkTest, MatchesCountOracle) {
  std::mt19937_64 rng(2026);
  int checked = 0;
  while (checked < 1000) {
    const int c = 3 + static_cast<int>(rng() % 4);
    const int n = 5 + static_cast<int>(rng() % 196);
    std::vector<int> a(n), b(n);
    for (int k = 0; k < n; ++k) {
      a[k] = static_cast<int>(rng() % c);
      b[k] = static_cast<int>(rng() % c);
    }
    ASSERT_NEAR(qwk(a, b, c), kappa_from_counts(a, b, c), 1e-9);
    ++checked;
  }
}

TEST(QwkTest, ReversalInvariance) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const int c = 3 + static_cast<int>(rng() % 4);
    std::vector<int> a(40), b(40), ra(40), rb(40);
    for (int k = 0; k < 40; ++k) {
      a[k] = static_cast<int>(rng() % c);
      b[k] = static_cast<int>(rng() % c);
      ra[k] = c - 1 - a[k];
      rb[k] = c - 1 - b[k];
    }
    EXPECT_NEAR(qwk(a, b, c), qwk(ra, rb, c), 1e-12);
  }
}

TEST(QwkTest, IndependentLabelsNearZero) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    std::vector<int> a(10000), b(10000);
    for (int k = 0; k < 10000; ++k) {
      a[k] = static_cast<int>(rng() % 3);
      b[k] = static_cast<int>(rng() % 3);
    }
    EXPECT_LT(std::abs(qwk(a, b, 3)), 0.05);
  }
}

TEST(QwkTest, Degenerate) {
  const std::vector<int> same = {1, 1, 1};
  EXPECT_DOUBLE_EQ(qwk(same, same, 3), 1.0);
  const std::vector<int> bad = {0, 3};
  EXPECT_THROW(qwk(bad, bad, 3), Error);
  EXPECT_THROW(qwk({}, {}, 3), Error);
}

TEST(MseTest, Basic) {
  const std::vector<double> a = {0, 1}, b = {0.5, 0.5};
  EXPECT_DOUBLE_EQ(mean_squared_error(a, b), 0.25);
}

// ---------------------------------------------------------------------------
// Speaker-level accuracy
// ---------------------------------------------------------------------------

PanelPrediction panel(const std::string& id, int num_prompts, int correct) {
  PanelPrediction p;
  p.speaker_id = id;
  for (int j = 1; j <= num_prompts; ++j) {
    p.truth[j] = 1;
    p.predicted[j] = j <= correct ? 1 : 0;
  }
  return p;
}

TEST(SpeakerAccuracyTest, HandWorkedPair) {
  const std::vector<PanelPrediction> panels = {panel("a", 6, 3), panel("b", 6, 5)};
  const SpeakerAccuracy acc = speaker_accuracy(panels, 6);
  EXPECT_DOUBLE_EQ(acc.mean_correct, 4.0);
  ASSERT_EQ(acc.at_least.size(), 7u);
  EXPECT_EQ(acc.at_least[0], 2);
  EXPECT_EQ(acc.at_least[4], 1);
  EXPECT_EQ(acc.at_least[5], 1);
  EXPECT_EQ(acc.at_least[6], 0);
}

TEST(SpeakerAccuracyTest, Saturation) {
  std::vector<PanelPrediction> panels;
  for (int i = 0; i < 10; ++i) panels.push_back(panel("s" + std::to_string(i), 6, 6));
  const SpeakerAccuracy acc = speaker_accuracy(panels, 6);
  EXPECT_DOUBLE_EQ(acc.mean_correct, 6.0);
  for (int k = 0; k <= 6; ++k) EXPECT_EQ(acc.at_least[k], 10);
}

TEST(SpeakerAccuracyTest, TelescopingAndMonotone) {
  std::mt19937_64 rng(4);
  std::vector<PanelPrediction> panels;
  for (int i = 0; i < 57; ++i) panels.push_back(panel("s" + std::to_string(i), 6, rng() % 7));
  const SpeakerAccuracy acc = speaker_accuracy(panels, 6);
  double telescoped = 0.0;
  for (int k = 1; k <= 6; ++k) {
    EXPECT_LE(acc.at_least[k], acc.at_least[k - 1]);
    telescoped += acc.at_least[k];
  }
  EXPECT_NEAR(acc.mean_correct, telescoped / 57.0, 1e-12);
  EXPECT_EQ(acc.at_least[0], 57);
}

TEST(SpeakerAccuracyTest, MissingPromptRejected) {
  auto p = panel("a", 6, 3);
  p.predicted.erase(4);
  const std::vector<PanelPrediction> panels = {p};
  EXPECT_THROW(speaker_accuracy(panels, 6), Error);
}

// ---------------------------------------------------------------------------
// High bias
// ---------------------------------------------------------------------------

TEST(HighBiasTest, HandWorked) {
  const std::vector<int> t = {0, 0, 2, 4}, p = {2, 1, 2, 1};
  const HighBias hb = high_bias_samples(t, p, 5);
  EXPECT_EQ(hb.indices, (std::vector<std::size_t>{0, 3}));
  EXPECT_EQ(hb.count, 2);
  EXPECT_EQ(hb.heatmap(0, 2), 1);
  EXPECT_EQ(hb.heatmap(4, 1), 1);
  EXPECT_EQ(hb.heatmap.sum(), 4);
}

TEST(HighBiasTest, Boundaries) {
  const std::vector<int> t1 = {2}, p1 = {0};
  EXPECT_EQ(high_bias_samples(t1, p1, 3).count, 1);
  const std::vector<int> t2 = {1}, p2 = {2};
  EXPECT_EQ(high_bias_samples(t2, p2, 3).count, 0);
}

// ---------------------------------------------------------------------------
// Rater agreement
// ---------------------------------------------------------------------------

TEST(AgreementTest, HandWorkedPartitions) {
  // Samples 4 and 5 are rater disagreements; one error in each partition.
  const std::vector<int> primary = {0, 1, 2, 1, 0, 2};
  const std::vector<int> secondary = {0, 1, 2, 1, 1, 1};
  const std::vector<int> pred = {0, 1, 2, 0, 0, 1};
  const AgreementSplit s = agreement_split_eval(primary, pred, secondary, 3);
  ASSERT_TRUE(s.agree && s.disagree);
  EXPECT_EQ(s.agree->count, 4);
  EXPECT_DOUBLE_EQ(s.agree->accuracy, 0.75);
  EXPECT_EQ(s.disagree->count, 2);
  EXPECT_DOUBLE_EQ(s.disagree->accuracy, 0.5);
}

TEST(AgreementTest, AlwaysAgreeHasNoDisagreePartition) {
  const std::vector<int> y = {0, 1, 2};
  const AgreementSplit s = agreement_split_eval(y, y, y, 3);
  EXPECT_TRUE(s.agree);
  EXPECT_FALSE(s.disagree);
  EXPECT_DOUBLE_EQ(s.agree->accuracy, 1.0);
}

// ---------------------------------------------------------------------------
// Cross-prompt probe
// ---------------------------------------------------------------------------

TEST(CrossPromptProbeTest, HandWorkedOverFraction) {
  // Earlier prompt on 3 levels (high = 2), later on 5 levels (low <= 1).
  const std::vector<int> earlier = {2, 2, 2, 2, 2, 0, 1};
  const std::vector<int> later_truth = {0, 1, 0, 1, 0, 0, 0};
  const std::vector<int> later_pred = {2, 1, 1, 0, 0, 4, 4};
  const auto probe = cross_prompt_bias_probe(earlier, 3, later_truth, 5, {{"m", later_pred}});
  EXPECT_EQ(probe.subset.size(), 5u);
  const ProbeOutcome& o = probe.by_strategy.at("m");
  EXPECT_DOUBLE_EQ(o.over, 0.4);
  EXPECT_DOUBLE_EQ(o.under, 0.2);
  EXPECT_DOUBLE_EQ(o.exact, 0.4);
}

TEST(CrossPromptProbeTest, EmptySubset) {
  const std::vector<int> earlier = {0, 0}, truth = {0, 0}, pred = {1, 1};
  const auto probe = cross_prompt_bias_probe(earlier, 3, truth, 3, {{"m", pred}});
  EXPECT_TRUE(probe.subset.empty());
  const ProbeOutcome& o = probe.by_strategy.at("m");
  EXPECT_EQ(o.count, 0);
  EXPECT_EQ(o.over + o.under + o.exact, 0.0);
}

TEST(CrossPromptProbeTest, ExactPredictor) {
  const std::vector<int> earlier = {2, 2, 2}, truth = {0, 0, 1};
  const auto probe = cross_prompt_bias_probe(earlier, 3, truth, 3, {{"m", truth}});
  EXPECT_DOUBLE_EQ(probe.by_strategy.at("m").exact, 1.0);
}

TEST(CrossPromptProbeTest, CustomThresholds) {
  const std::vector<int> earlier = {1, 2}, truth = {2, 2}, pred = {2, 2};
  CrossPromptThresholds th;
  th.high_min_level = 1;
  th.low_max_level = 2;
  EXPECT_EQ(cross_prompt_bias_probe(earlier, 3, truth, 3, {{"m", pred}}, th).subset.size(), 2u);
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

PromptPredictions prompt_preds(int j, int levels, const std::vector<int>& truth,
                               const std::vector<int>& pred) {
  PromptPredictions p;
  p.prompt_index = j;
  p.num_levels = levels;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    p.speakers.push_back("s" + std::to_string(k));
    p.truth.push_back(truth[k]);
    p.predicted.push_back(pred[k]);
    p.raw.push_back(static_cast<double>(pred[k]) / (levels - 1));
  }
  return p;
}

TEST(ReportTest, AverageIsMeanOfPromptQwks) {
  const auto a = prompt_preds(1, 3, {0, 1, 2, 1, 0}, {0, 2, 2, 1, 1});
  const auto b = prompt_preds(2, 4, {0, 3, 2, 1, 0}, {1, 3, 2, 0, 0});
  const EvaluationReport r = build_report({a, b}, "baseline", "test");
  ASSERT_EQ(r.prompts.size(), 2u);
  EXPECT_DOUBLE_EQ(r.average_qwk, (r.prompts[0].qwk + r.prompts[1].qwk) / 2);
  EXPECT_DOUBLE_EQ(r.average_mse, (r.prompts[0].mse + r.prompts[1].mse) / 2);
  EXPECT_EQ(r.speaker_accuracy.at_least[0], 5);
  EXPECT_EQ(r.cross_prompt_bias.size(), 1u);
  const auto j = report_to_json(r);
  EXPECT_DOUBLE_EQ(j["average_qwk"].get<double>(), r.average_qwk);
  EXPECT_EQ(j["prompts"].size(), 2u);
}

TEST(ReportTest, PerfectPredictorScoresOne) {
  const auto a = prompt_preds(1, 3, {0, 1, 2, 1, 0}, {0, 1, 2, 1, 0});
  const auto b = prompt_preds(2, 5, {0, 4, 2, 1, 3}, {0, 4, 2, 1, 3});
  const EvaluationReport r = build_report({a, b}, "baseline", "test");
  for (const auto& p : r.prompts) {
    EXPECT_DOUBLE_EQ(p.qwk, 1.0);
    EXPECT_DOUBLE_EQ(p.mse, 0.0);
  }
  EXPECT_DOUBLE_EQ(r.speaker_accuracy.mean_correct, 2.0);
}

TEST(ReportTest, MseClampsRawOutputs) {
  auto a = prompt_preds(1, 3, {2, 0}, {2, 0});
  a.raw = {1.4, -0.3};
  EXPECT_DOUBLE_EQ(build_report({a}, "baseline", "test").prompts[0].mse, 0.0);
}

TEST(ReportTest, GridFormat) {
  Eigen::MatrixXi g(2, 2);
  g << 1, 0,
       3, 12;
  EXPECT_EQ(format_grid(g), "1 0\n3 12\n");
}

}  // namespace
}  // namespace speakerctx
