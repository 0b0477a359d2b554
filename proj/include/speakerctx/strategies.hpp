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

#ifndef SPEAKERCTX_STRATEGIES_HPP_
#define SPEAKERCTX_STRATEGIES_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "speakerctx/context_store.hpp"
#include "speakerctx/corpus.hpp"
#include "speakerctx/encoders.hpp"
#include "speakerctx/feature_table.hpp"
#include "speakerctx/training.hpp"

namespace speakerctx {

enum class Strategy { kBaseline, kOneStage, kTwoStage };

std::string strategy_name(Strategy strategy);
Strategy parse_strategy(const std::string& name);

struct Segment {
  int source_prompt = 0;
  Slice range;
  bool operator==(const Segment&) const = default;
};

// c'_ij together with the prompt each slice came from.
struct ConditionedContext {
  Eigen::VectorXd values;
  std::vector<Segment> layout;
};

// Prompts whose stored vectors precede c_ij in the conditioned context:
// one-stage uses 1..j-1, two-stage every k != j, both ascending.
std::vector<int> conditioning_sources(Strategy strategy, int prompt_index, int num_prompts);

// sum of d_k over the sources plus d_j. `dims` maps prompt index -> d_k.
int expected_context_dim(Strategy strategy, int prompt_index, const std::map<int, int>& dims);

ConditionedContext build_one_stage_context(const ContextStore& store, const std::string& speaker_id,
                                           int prompt_index, const Eigen::VectorXd& current);
ConditionedContext build_two_stage_context(const ContextStore& store, const std::string& speaker_id,
                                           int prompt_index, int num_prompts,
                                           const Eigen::VectorXd& current);

// The stored-vector prefix alone, widened to double.
Eigen::VectorXd conditioning_prefix(const ContextStore& store, const std::string& speaker_id,
                                    const std::vector<int>& sources);

struct ScoringInput {
  std::span<const std::int32_t> tokens;
  Eigen::VectorXd audio;   // empty for text-only encoders
  Eigen::VectorXd prefix;  // frozen stored vectors; empty for baseline
};

// Encoder plus linear head o = w . c' + b for one prompt. All trainable
// parameters sit in a single flat block: [encoder | w | b].
class ScoringModel {
 public:
  using Input = ScoringInput;

  ScoringModel(int prompt_index, Strategy strategy, const EncoderConfig& encoder,
               std::vector<Segment> prefix_layout);

  // Encoder init from `seed`; head weights on the prefix start at zero.
  void initialize(std::uint64_t seed);
  // Copies a trained baseline's encoder and head; prefix weights are zero,
  // so the result scores exactly like `baseline` until trained further.
  static ScoringModel warm_start(const ScoringModel& baseline, Strategy strategy,
                                 std::vector<Segment> prefix_layout);

  int prompt_index() const { return prompt_index_; }
  Strategy strategy() const { return strategy_; }
  const Encoder& encoder() const { return encoder_; }
  const std::vector<Segment>& prefix_layout() const { return prefix_layout_; }
  // Prefix segments followed by the current prompt's segment.
  std::vector<Segment> layout() const;
  int prefix_dim() const { return prefix_dim_; }
  int expected_context_dim() const { return prefix_dim_ + encoder_.context_dim(); }

  Eigen::VectorXd& parameters() { return params_; }
  const Eigen::VectorXd& parameters() const { return params_; }
  std::span<const double> encoder_parameters() const;
  Eigen::Map<const Eigen::VectorXd> head_weights() const;
  Eigen::Map<Eigen::VectorXd> head_weights();
  double head_bias() const { return params_[params_.size() - 1]; }
  double& head_bias() { return params_[params_.size() - 1]; }

  // c_ij for one response.
  Eigen::VectorXd encode(std::span<const std::int32_t> tokens, const Eigen::VectorXd& audio) const;
  // o = w . c' + b, raw and unclamped.
  double score(const Eigen::Ref<const Eigen::VectorXd>& conditioned) const;
  Eigen::VectorXd conditioned(const ScoringInput& input) const;
  double predict(const ScoringInput& input) const;
  double forward_backward(const ScoringInput& input, double target, double weight, double scale,
                          Eigen::VectorXd& grad) const;

 private:
  int prompt_index_;
  Strategy strategy_;
  Encoder encoder_;
  std::vector<Segment> prefix_layout_;
  int prefix_dim_ = 0;
  Eigen::VectorXd params_;
};

// baseline: o = W c_ij + b, requires strategy == baseline.
double score_baseline(const ScoringModel& model, const ScoringInput& input);

// Which speakers' labels were read while building loss terms.
struct LabelAudit {
  std::set<std::string> speakers;
  long reads = 0;
};

struct PipelineConfig {
  Strategy strategy = Strategy::kBaseline;
  EncoderConfig encoder;
  TrainConfig train;
  std::uint64_t seed = 0;
  // When set, audio inputs come from this table instead of the corpus.
  const FeatureTable* audio_features = nullptr;
  int jobs = 1;
};

struct PromptRun;
// Invoked on the calling thread once per successfully trained model, in
// prompt order within each stage, including when a sibling job failed.
using TrainedCallback = std::function<void(const PromptRun&)>;

struct PromptRun {
  int stage = 1;
  ScoringModel model;
  TrainingLog log;
  ClassWeights weights;
};

struct PipelineResult {
  Strategy strategy = Strategy::kBaseline;
  std::vector<PromptRun> stage_one;  // two-stage only: the baseline pass
  std::vector<PromptRun> models;     // final scoring model per prompt, index order
  ContextStore store;                // vectors the final models condition on
  LabelAudit audit;
};

ScoringInput make_input(const Corpus& corpus, const ContextStore& store, const ScoringModel& model,
                        const std::string& speaker_id, const FeatureTable* audio_features = nullptr);

PipelineResult run_pipeline(const Corpus& corpus, const SplitAssignment& split,
                            const PipelineConfig& config,
                            const TrainedCallback& on_trained = nullptr);

// Raw outputs of `model` for the given speakers.
std::map<std::string, double> predict_prompt(const Corpus& corpus, const ContextStore& store,
                                             const ScoringModel& model,
                                             const std::set<std::string>& speakers,
                                             const FeatureTable* audio_features = nullptr);

// Checkpoint: JSON document with the model's shape, parameters and the config
// hash it was trained under.
void save_checkpoint(const ScoringModel& model, const std::string& config_hash,
                     const std::filesystem::path& path);
ScoringModel load_checkpoint(const std::filesystem::path& path, std::string* config_hash = nullptr);

}  // namespace speakerctx

#endif  // SPEAKERCTX_STRATEGIES_HPP_
