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

#ifndef SPEAKERCTX_ATTRIBUTION_HPP_
#define SPEAKERCTX_ATTRIBUTION_HPP_

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "speakerctx/common.hpp"
#include "speakerctx/context_store.hpp"
#include "speakerctx/corpus.hpp"
#include "speakerctx/feature_table.hpp"
#include "speakerctx/strategies.hpp"

namespace speakerctx {

enum class Aggregation { kSigned, kAbsolute };

std::string aggregation_name(Aggregation aggregation);
Aggregation parse_aggregation(const std::string& name);

struct AttributionConfig {
  int num_steps = 2048;
  // Same shape as the input; all zeros when absent.
  std::optional<Eigen::VectorXd> baseline;
  Aggregation aggregation = Aggregation::kSigned;
};

// Right-endpoint Riemann approximation of the path integral from b to x:
//   IG_i = (x_i - b_i) / m * sum_{s=1..m} dF/dx_i (b + s/m (x - b)).
// `gradient` maps a point to dF/dx at that point.
template <typename Scalar, typename GradientFn>
Vector<Scalar> integrated_gradients(GradientFn&& gradient, const Vector<Scalar>& x,
                                    const Vector<Scalar>& b, int num_steps) {
  require(num_steps >= 1, "integrated gradients needs at least one step");
  require(x.size() == b.size(), "input and baseline shapes differ");
  const Vector<Scalar> delta = x - b;
  Vector<Scalar> total = Vector<Scalar>::Zero(x.size());
  for (int s = 1; s <= num_steps; ++s) {
    const Scalar alpha = static_cast<Scalar>(s) / static_cast<Scalar>(num_steps);
    const Vector<Scalar> point = b + alpha * delta;
    const Vector<Scalar> g = gradient(point);
    if (g.size() != x.size()) {
      fail(ErrorKind::kInvalidArgument, "gradient dimension mismatch");
    }
    if (!g.allFinite()) {
      fail(ErrorKind::kInvalidArgument, "non-finite gradient at step " + std::to_string(s));
    }
    total += g;
  }
  return (delta.array() * total.array() / static_cast<Scalar>(num_steps)).matrix();
}

struct AttributionResult {
  Eigen::VectorXd per_dimension;
  std::map<int, double> per_segment;            // source prompt -> attribution
  std::map<std::string, double> per_modality;   // "text"/"audio", when known
  double output_delta = 0.0;                    // F(x) - F(b)
  double completeness_gap = 0.0;                // |sum IG - (F(x) - F(b))|
};

// Sums per-dimension attributions within each named slice.
std::map<std::string, double> sum_slices(const Eigen::VectorXd& per_dimension,
                                         const std::vector<std::pair<std::string, Slice>>& slices);

// Modality slices of every segment of a model's conditioned context;
// errors when any segment lacks audio metadata.
std::vector<std::pair<std::string, Slice>> modality_layout(const ScoringModel& model,
                                                           const ContextStore& store);

// IG of the scoring head with respect to the conditioned context c'.
AttributionResult attribute_conditioned(const ScoringModel& model, const Eigen::VectorXd& conditioned,
                                        const AttributionConfig& config,
                                        const std::vector<std::pair<std::string, Slice>>* modalities =
                                            nullptr);

struct PromptAttribution {
  Eigen::MatrixXd heatmap;  // (scored prompt i, source prompt j), rows in prompt order
  std::vector<double> max_completeness_gap;    // per scored prompt
  std::vector<double> mean_completeness_gap;   // per scored prompt
  int samples = 0;
};

// Aggregated attribution of each source prompt's segment in every two-stage
// model's prediction over `speakers`.
PromptAttribution prompt_wise_attribution(const std::vector<ScoringModel>& models,
                                          const Corpus& corpus, const ContextStore& store,
                                          const std::set<std::string>& speakers,
                                          const AttributionConfig& config,
                                          const FeatureTable* audio_features = nullptr);

// Divides each row by its sum of absolute values (rows of zeros stay zero).
Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& heatmap);

struct ModalityRow {
  int prompt_index = 0;
  double text = 0.0;
  double audio = 0.0;
  double max_completeness_gap = 0.0;
};

std::vector<ModalityRow> modality_attribution(const std::vector<ScoringModel>& models,
                                              const Corpus& corpus, const ContextStore& store,
                                              const std::set<std::string>& speakers,
                                              const AttributionConfig& config,
                                              const FeatureTable* audio_features = nullptr);

}  // namespace speakerctx

#endif  // SPEAKERCTX_ATTRIBUTION_HPP_
