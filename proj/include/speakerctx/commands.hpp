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

#ifndef SPEAKERCTX_COMMANDS_HPP_
#define SPEAKERCTX_COMMANDS_HPP_

// Entry points behind the `speakerctx` subcommands. Each returns its result
// and writes artifacts under the run directory; the CLI only parses flags.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "speakerctx/corpus.hpp"
#include "speakerctx/metrics.hpp"
#include "speakerctx/run_config.hpp"

namespace speakerctx {

struct SynthOptions {
  int num_speakers = 100;
  int num_prompts = 6;
  double ability_correlation = 0.8;
  double rater_noise = 0.3;
  int audio_dim = 8;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "corpus";
};

struct SynthResult {
  std::filesystem::path corpus_path;
  std::filesystem::path prompt_spec_path;
  std::size_t records = 0;
  std::map<int, std::vector<int>> histograms;  // prompt -> count per level
};

SynthResult cmd_synth(const SynthOptions& options, std::ostream& out);

RunManifest cmd_train(const RunConfig& config, std::ostream& out);

// Scores `models` on `speakers`; errors when the speaker set is empty.
std::vector<PromptPredictions> collect_predictions(const Corpus& corpus, const ContextStore& store,
                                                   const std::vector<ScoringModel>& models,
                                                   const std::set<std::string>& speakers,
                                                   const FeatureTable* audio_features = nullptr);

EvaluationReport cmd_evaluate(const std::filesystem::path& manifest_path, Split split,
                              std::ostream& out);

enum class AttributionKind { kPrompt, kModality, kAll };
AttributionKind parse_attribution_kind(const std::string& name);

struct AttributeResult {
  std::vector<std::filesystem::path> files;
  PromptAttribution prompt;
  std::vector<ModalityRow> modality;
};

AttributeResult cmd_attribute(const std::filesystem::path& manifest_path, AttributionKind kind,
                              bool normalize, std::ostream& out);

// Deltas of b relative to a, from two report documents.
nlohmann::json compare_reports(const nlohmann::json& a, const nlohmann::json& b);

nlohmann::json cmd_compare(const std::filesystem::path& manifest_a,
                           const std::filesystem::path& manifest_b, Split split,
                           const std::filesystem::path& output_path, std::ostream& out);

}  // namespace speakerctx

#endif  // SPEAKERCTX_COMMANDS_HPP_
