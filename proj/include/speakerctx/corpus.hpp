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

#ifndef SPEAKERCTX_CORPUS_HPP_
#define SPEAKERCTX_CORPUS_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "speakerctx/common.hpp"

namespace speakerctx {

// Reserved vocabulary index for out-of-vocabulary words. Its embedding is
// pinned to the zero vector.
inline constexpr std::int32_t kUnkToken = 0;

struct PromptSpec {
  int index = 0;  // 1-based
  int num_levels = 2;
  std::string difficulty_label;
  std::vector<std::string> level_names;

  bool operator==(const PromptSpec&) const = default;
};

struct Response {
  std::string speaker_id;
  int prompt_index = 0;
  std::vector<std::int32_t> tokens;
  Eigen::VectorXd audio_features;
  int rating_primary = 0;
  std::optional<int> rating_secondary;
};

struct ResponsePanel {
  std::string speaker_id;
  std::map<int, Response> responses;  // keyed by prompt index
  int global_score = 0;
};

// Rounded (half up) mean of the panel's primary ratings.
int compute_global_score(const ResponsePanel& panel);

// Immutable after construction. Construction validates every invariant:
// contiguous prompt indices, complete panels, ratings in range, a single
// audio feature dimension.
class Corpus {
 public:
  Corpus(std::vector<PromptSpec> prompts, std::vector<ResponsePanel> panels);

  const std::vector<PromptSpec>& prompts() const { return prompts_; }
  const std::vector<ResponsePanel>& panels() const { return panels_; }
  int num_prompts() const { return static_cast<int>(prompts_.size()); }
  const PromptSpec& prompt(int index) const { return prompts_.at(index - 1); }
  const ResponsePanel& panel(const std::string& speaker_id) const;
  // max token index + 1 (at least 1 so UNK always exists).
  int vocab_size() const { return vocab_size_; }
  // 0 when the corpus carries no audio features.
  int audio_dim() const { return audio_dim_; }

 private:
  std::vector<PromptSpec> prompts_;
  std::vector<ResponsePanel> panels_;
  std::map<std::string, std::size_t> by_speaker_;
  int vocab_size_ = 1;
  int audio_dim_ = 0;
};

struct SplitAssignment {
  std::set<std::string> train;
  std::set<std::string> validation;
  std::set<std::string> test;

  static constexpr double kTrainFraction = 0.70;
  static constexpr double kValidationFraction = 0.10;
  static constexpr double kTestFraction = 0.20;

  bool operator==(const SplitAssignment&) const = default;
};

enum class Split { kTrain, kValidation, kTest };

std::string split_name(Split split);
Split parse_split(const std::string& name);
const std::set<std::string>& speakers_in(const SplitAssignment& split,
                                         Split which);

// Largest-remainder apportionment of `count` items over 70:10:20.
std::array<int, 3> split_sizes(int count);

// Stratifies by global score; within a stratum speakers are ordered by id
// hash and then shuffled with `seed`.
SplitAssignment stratified_split(const std::vector<ResponsePanel>& panels,
                                 std::uint64_t seed);

double normalize_score(int level, int num_levels);
// Clamps to [0,1] and rounds half up to the nearest level.
int rescale_to_level(double output, int num_levels);

struct SyntheticCorpusOptions {
  int num_speakers = 100;
  std::vector<PromptSpec> prompts;
  double ability_correlation = 0.8;
  double rater_noise = 0.0;
  std::uint64_t seed = 0;
  // Token and audio generator shape.
  int min_length = 8;
  int max_length = 16;
  int filler_vocab = 40;
  int discriminative_vocab = 40;  // each of the good and bad groups
  double filler_rate = 0.5;
  double unk_rate = 0.02;
  double token_gain = 1.5;
  int audio_dim = 8;  // 0 disables audio features
  int audio_signal_dims = 2;
  double audio_noise = 0.6;
};

// Six prompts mirroring the shape of a SOPI-style exam (B1..C1 difficulty,
// 3 to 5 levels).
std::vector<PromptSpec> default_prompt_specs(int num_prompts = 6);

// Draws behind a synthetic corpus, row i belonging to speaker i + 1.
struct SyntheticLatents {
  Eigen::VectorXd ability;
  Eigen::MatrixXd quality;  // speakers x prompts
};

Corpus generate_synthetic_corpus(const SyntheticCorpusOptions& options,
                                 SyntheticLatents* latents = nullptr);

// Line-delimited TSV formats.
void write_corpus_file(const Corpus& corpus, const std::filesystem::path& path);
void write_prompt_spec_file(const std::vector<PromptSpec>& prompts,
                            const std::filesystem::path& path);
std::vector<PromptSpec> read_prompt_spec_file(const std::filesystem::path& path);
Corpus read_corpus(const std::filesystem::path& corpus_path,
                   const std::filesystem::path& prompt_spec_path);

// Shortest decimal representation that parses back to the same double.
std::string format_real(double value);
double parse_real(std::string_view text);

}  // namespace speakerctx

#endif  // SPEAKERCTX_CORPUS_HPP_
