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

#ifndef SPEAKERCTX_RUN_CONFIG_HPP_
#define SPEAKERCTX_RUN_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "speakerctx/attribution.hpp"
#include "speakerctx/encoders.hpp"
#include "speakerctx/strategies.hpp"
#include "speakerctx/training.hpp"

namespace speakerctx {

// Environment variable that relocates relative output directories.
inline constexpr const char* kOutputRootEnv = "SPEAKERCTX_OUTPUT_ROOT";

struct RunConfig {
  std::string corpus_path;
  std::string prompt_spec_path;
  std::string audio_features_path;  // optional external audio features
  Strategy strategy = Strategy::kBaseline;
  // vocab_size 0 means "derive from the corpus"; audio_context_dim > 0
  // enables the audio branch with the input width taken from the data.
  EncoderConfig encoder{0, 16, 16, Pooling::kAttention, 0, 0, 512};
  TrainConfig train;
  int attribution_steps = 2048;
  Aggregation attribution_aggregation = Aggregation::kSigned;
  std::uint64_t seed = 0;
  std::string output_dir = "run";
  int jobs = 1;

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  // Hash of every field that affects results (excludes output_dir and jobs).
  std::string hash() const;
  // Referenced input paths must exist.
  void validate() const;
  std::filesystem::path resolved_output_dir() const;

  bool operator==(const RunConfig&) const = default;
};

struct Artifact {
  std::string role;  // e.g. "checkpoint", "context-store", "log", "report"
  std::string path;  // relative to the manifest's directory
  std::string hash;
  int prompt_index = 0;
  int stage = 0;
  bool operator==(const Artifact&) const = default;
};

struct RunManifest {
  std::string config_hash;
  RunConfig config;
  EncoderConfig resolved_encoder;
  std::string corpus_hash;
  int num_prompts = 0;
  std::vector<Artifact> artifacts;
  std::string created_at;
  std::string updated_at;
  // "complete", or "failed" when training aborted part way.
  std::string status = "complete";

  std::vector<Artifact> with_role(const std::string& role) const;
  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
  static RunManifest load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  // Throws if any artifact is missing or its content hash differs.
  void verify(const std::filesystem::path& run_dir) const;
};

std::string file_hash(const std::filesystem::path& path);
std::string utc_timestamp();

}  // namespace speakerctx

#endif  // SPEAKERCTX_RUN_CONFIG_HPP_
