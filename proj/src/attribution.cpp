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

#include "speakerctx/attribution.hpp"

namespace speakerctx {

std::string aggregation_name(Aggregation aggregation) {
  return aggregation == Aggregation::kSigned ? "signed" : "absolute";
}

Aggregation parse_aggregation(const std::string& name) {
  if (name == "signed") return Aggregation::kSigned;
  if (name == "absolute" || name == "abs") return Aggregation::kAbsolute;
  fail(ErrorKind::kInvalidArgument, "unknown aggregation '" + name + "'");
}

std::map<std::string, double> sum_slices(const Eigen::VectorXd& per_dimension,
                                         const std::vector<std::pair<std::string, Slice>>& slices) {
  std::map<std::string, double> out;
  for (const auto& [name, slice] : slices) {
    if (slice.begin < 0 || slice.end > per_dimension.size() || slice.begin > slice.end) {
      fail(ErrorKind::kInvalidArgument, "slice '" + name + "' outside the attribution vector");
    }
    out[name] += per_dimension.segment(slice.begin, slice.size()).sum();
  }
  return out;
}

std::vector<std::pair<std::string, Slice>> modality_layout(const ScoringModel& model,
                                                           const ContextStore& store) {
  std::vector<std::pair<std::string, Slice>> out;
  for (const Segment& s : model.prefix_layout()) {
    const StoredPromptInfo& info = store.prompt_info(s.source_prompt);
    if (info.text_dim >= info.dim) {
      fail(ErrorKind::kMissingKey, "stored vectors of prompt " + std::to_string(s.source_prompt) +
                                       " carry no audio slice");
    }
    out.emplace_back("text", Slice{s.range.begin, s.range.begin + info.text_dim});
    out.emplace_back("audio", Slice{s.range.begin + info.text_dim, s.range.end});
  }
  const ModalitySlices own = model.encoder().slices();
  if (!own.audio) {
    fail(ErrorKind::kMissingKey, "model for prompt " + std::to_string(model.prompt_index()) +
                                     " has no audio slice; modality attribution needs a "
                                     "multimodal encoder");
  }
  const int offset = model.prefix_dim();
  out.emplace_back("text", Slice{offset + own.text.begin, offset + own.text.end});
  out.emplace_back("audio", Slice{offset + own.audio->begin, offset + own.audio->end});
  return out;
}

AttributionResult attribute_conditioned(const ScoringModel& model, const Eigen::VectorXd& conditioned,
                                        const AttributionConfig& config,
                                        const std::vector<std::pair<std::string, Slice>>* modalities) {
  const Eigen::VectorXd baseline =
      config.baseline ? *config.baseline : Eigen::VectorXd::Zero(conditioned.size());
  // The scoring head is affine in c', so its gradient is the weight vector.
  const Eigen::VectorXd weights = model.head_weights();
  auto gradient = [&weights](const Eigen::VectorXd&) { return weights; };
  AttributionResult result;
  result.per_dimension =
      integrated_gradients<double>(gradient, conditioned, baseline, config.num_steps);
  for (const Segment& s : model.layout()) {
    result.per_segment[s.source_prompt] =
        result.per_dimension.segment(s.range.begin, s.range.size()).sum();
  }
  if (modalities) result.per_modality = sum_slices(result.per_dimension, *modalities);
  result.output_delta = model.score(conditioned) - model.score(baseline);
  result.completeness_gap = std::abs(result.per_dimension.sum() - result.output_delta);
  return result;
}

namespace {

void check_trained(const std::vector<ScoringModel>& models) {
  if (models.empty()) fail(ErrorKind::kState, "no trained models to attribute");
  for (const ScoringModel& m : models) {
    if (m.parameters().isZero(0.0)) {
      fail(ErrorKind::kState, "model for prompt " + std::to_string(m.prompt_index()) +
                                  " is untrained");
    }
  }
}

}  // namespace

PromptAttribution prompt_wise_attribution(const std::vector<ScoringModel>& models,
                                          const Corpus& corpus, const ContextStore& store,
                                          const std::set<std::string>& speakers,
                                          const AttributionConfig& config,
                                          const FeatureTable* audio_features) {
  check_trained(models);
  for (const ScoringModel& m : models) {
    if (m.strategy() != Strategy::kTwoStage) {
      fail(ErrorKind::kStrategyMismatch,
           "prompt-wise attribution needs two-stage models; prompt " +
               std::to_string(m.prompt_index()) + " is " + strategy_name(m.strategy()));
    }
  }
  const int p = static_cast<int>(models.size());
  PromptAttribution out;
  out.heatmap = Eigen::MatrixXd::Zero(p, p);
  out.max_completeness_gap.assign(p, 0.0);
  out.mean_completeness_gap.assign(p, 0.0);
  out.samples = static_cast<int>(speakers.size());
  for (int row = 0; row < p; ++row) {
    const ScoringModel& model = models[row];
    for (const std::string& speaker : speakers) {
      const Eigen::VectorXd c =
          model.conditioned(make_input(corpus, store, model, speaker, audio_features));
      const AttributionResult r = attribute_conditioned(model, c, config);
      for (const auto& [source, value] : r.per_segment) {
        if (source < 1 || source > p) continue;
        out.heatmap(row, source - 1) +=
            config.aggregation == Aggregation::kSigned ? value : std::abs(value);
      }
      out.max_completeness_gap[row] = std::max(out.max_completeness_gap[row], r.completeness_gap);
      out.mean_completeness_gap[row] += r.completeness_gap;
    }
    if (!speakers.empty()) out.mean_completeness_gap[row] /= static_cast<double>(speakers.size());
  }
  return out;
}

Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& heatmap) {
  Eigen::MatrixXd out = heatmap;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double norm = out.row(i).cwiseAbs().sum();
    if (norm > 0) out.row(i) /= norm;
  }
  return out;
}

std::vector<ModalityRow> modality_attribution(const std::vector<ScoringModel>& models,
                                              const Corpus& corpus, const ContextStore& store,
                                              const std::set<std::string>& speakers,
                                              const AttributionConfig& config,
                                              const FeatureTable* audio_features) {
  check_trained(models);
  std::vector<ModalityRow> rows;
  for (const ScoringModel& model : models) {
    const auto layout = modality_layout(model, store);
    ModalityRow row;
    row.prompt_index = model.prompt_index();
    for (const std::string& speaker : speakers) {
      const Eigen::VectorXd c =
          model.conditioned(make_input(corpus, store, model, speaker, audio_features));
      const AttributionResult r = attribute_conditioned(model, c, config, &layout);
      auto pick = [&](const char* name) {
        auto it = r.per_modality.find(name);
        const double v = it == r.per_modality.end() ? 0.0 : it->second;
        return config.aggregation == Aggregation::kSigned ? v : std::abs(v);
      };
      row.text += pick("text");
      row.audio += pick("audio");
      row.max_completeness_gap = std::max(row.max_completeness_gap, r.completeness_gap);
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace speakerctx
