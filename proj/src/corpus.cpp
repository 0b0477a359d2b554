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

#include "speakerctx/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace speakerctx {

namespace {

// Fisher-Yates with a fixed index mapping so results do not depend on the
// standard library's distribution implementation.
template <typename T>
void deterministic_shuffle(std::vector<T>& items, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace

int compute_global_score(const ResponsePanel& panel) {
  if (panel.responses.empty()) return 0;
  double sum = 0.0;
  for (const auto& [index, response] : panel.responses) {
    sum += response.rating_primary;
  }
  return static_cast<int>(std::floor(sum / panel.responses.size() + 0.5));
}

Corpus::Corpus(std::vector<PromptSpec> prompts,
               std::vector<ResponsePanel> panels)
    : prompts_(std::move(prompts)), panels_(std::move(panels)) {
  require(!prompts_.empty(), "corpus needs at least one prompt spec");
  std::sort(prompts_.begin(), prompts_.end(),
            [](const PromptSpec& a, const PromptSpec& b) { return a.index < b.index; });
  for (std::size_t k = 0; k < prompts_.size(); ++k) {
    const PromptSpec& spec = prompts_[k];
    if (spec.index != static_cast<int>(k) + 1) {
      fail(ErrorKind::kFormat, "prompt indices must be contiguous 1..P; found " +
                                   std::to_string(spec.index));
    }
    if (spec.num_levels < 2) {
      fail(ErrorKind::kFormat, "prompt " + std::to_string(spec.index) +
                                   " needs at least 2 levels");
    }
    if (static_cast<int>(spec.level_names.size()) != spec.num_levels) {
      fail(ErrorKind::kFormat, "prompt " + std::to_string(spec.index) +
                                   ": level_names size != num_levels");
    }
  }

  std::sort(panels_.begin(), panels_.end(),
            [](const ResponsePanel& a, const ResponsePanel& b) {
              return a.speaker_id < b.speaker_id;
            });
  bool audio_dim_set = false;
  std::int32_t max_token = kUnkToken;
  for (std::size_t p = 0; p < panels_.size(); ++p) {
    const ResponsePanel& panel = panels_[p];
    if (!by_speaker_.emplace(panel.speaker_id, p).second) {
      fail(ErrorKind::kFormat, "duplicate speaker " + panel.speaker_id);
    }
    if (static_cast<int>(panel.responses.size()) != num_prompts()) {
      fail(ErrorKind::kFormat,
           "incomplete panel for speaker " + panel.speaker_id + ": " +
               std::to_string(panel.responses.size()) + " of " +
               std::to_string(num_prompts()) + " prompts");
    }
    for (const auto& [index, response] : panel.responses) {
      const std::string where = "speaker " + panel.speaker_id + ", prompt " +
                                std::to_string(index);
      if (index < 1 || index > num_prompts()) {
        fail(ErrorKind::kFormat, where + ": unknown prompt index");
      }
      if (response.prompt_index != index || response.speaker_id != panel.speaker_id) {
        fail(ErrorKind::kFormat, where + ": response keyed inconsistently");
      }
      if (response.tokens.empty()) {
        fail(ErrorKind::kFormat, where + ": empty token sequence");
      }
      for (std::int32_t token : response.tokens) {
        if (token < 0) fail(ErrorKind::kFormat, where + ": negative token index");
        max_token = std::max(max_token, token);
      }
      const int levels = prompt(index).num_levels;
      if (response.rating_primary < 0 || response.rating_primary >= levels) {
        fail(ErrorKind::kFormat, where + ": primary rating out of range");
      }
      if (response.rating_secondary &&
          (*response.rating_secondary < 0 || *response.rating_secondary >= levels)) {
        fail(ErrorKind::kFormat, where + ": secondary rating out of range");
      }
      const int dim = static_cast<int>(response.audio_features.size());
      if (!audio_dim_set) {
        audio_dim_ = dim;
        audio_dim_set = true;
      } else if (dim != audio_dim_) {
        fail(ErrorKind::kFormat, where + ": audio feature dimension " +
                                     std::to_string(dim) + " != " +
                                     std::to_string(audio_dim_));
      }
    }
  }
  vocab_size_ = max_token + 1;
}

const ResponsePanel& Corpus::panel(const std::string& speaker_id) const {
  auto it = by_speaker_.find(speaker_id);
  if (it == by_speaker_.end()) {
    fail(ErrorKind::kMissingKey, "unknown speaker " + speaker_id);
  }
  return panels_[it->second];
}

std::string split_name(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kValidation:
      return "validation";
    case Split::kTest:
      return "test";
  }
  return "test";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "validation" || name == "val") return Split::kValidation;
  if (name == "test") return Split::kTest;
  fail(ErrorKind::kInvalidArgument, "unknown split '" + name + "'");
}

const std::set<std::string>& speakers_in(const SplitAssignment& split,
                                         Split which) {
  switch (which) {
    case Split::kTrain:
      return split.train;
    case Split::kValidation:
      return split.validation;
    case Split::kTest:
      return split.test;
  }
  return split.test;
}

std::array<int, 3> split_sizes(int count) {
  // Percent weights keep the apportionment exact in integers.
  constexpr std::array<int, 3> kPercent = {70, 10, 20};
  std::array<int, 3> sizes{};
  std::array<int, 3> remainders{};
  int assigned = 0;
  for (int k = 0; k < 3; ++k) {
    sizes[k] = count * kPercent[k] / 100;
    remainders[k] = count * kPercent[k] % 100;
    assigned += sizes[k];
  }
  std::array<int, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return remainders[a] > remainders[b]; });
  for (int k = 0; assigned < count; ++k, ++assigned) ++sizes[order[k]];
  return sizes;
}

SplitAssignment stratified_split(const std::vector<ResponsePanel>& panels,
                                 std::uint64_t seed) {
  if (panels.size() < 10) {
    fail(ErrorKind::kInvalidArgument,
         "stratified split needs at least 10 speakers, got " +
             std::to_string(panels.size()));
  }
  const std::size_t expected = panels.front().responses.size();
  std::map<int, std::vector<std::string>> strata;
  std::set<std::string> seen;
  for (const ResponsePanel& panel : panels) {
    if (panel.responses.size() != expected || expected == 0) {
      fail(ErrorKind::kInvalidArgument,
           "incomplete panel for speaker " + panel.speaker_id);
    }
    if (!seen.insert(panel.speaker_id).second) {
      fail(ErrorKind::kInvalidArgument, "duplicate speaker " + panel.speaker_id);
    }
    strata[panel.global_score].push_back(panel.speaker_id);
  }

  SplitAssignment result;
  for (auto& [score, speakers] : strata) {
    std::sort(speakers.begin(), speakers.end(),
              [](const std::string& a, const std::string& b) {
                const auto ha = fnv1a64(a), hb = fnv1a64(b);
                return ha != hb ? ha < hb : a < b;
              });
    deterministic_shuffle(speakers,
                          derive_seed(seed, "split", static_cast<std::uint64_t>(score)));
    const auto sizes = split_sizes(static_cast<int>(speakers.size()));
    std::size_t k = 0;
    for (int n = 0; n < sizes[0]; ++n) result.train.insert(speakers[k++]);
    for (int n = 0; n < sizes[1]; ++n) result.validation.insert(speakers[k++]);
    for (int n = 0; n < sizes[2]; ++n) result.test.insert(speakers[k++]);
  }
  if (result.train.empty() || result.validation.empty() || result.test.empty()) {
    fail(ErrorKind::kInvalidArgument,
         "split leaves an empty partition (train " +
             std::to_string(result.train.size()) + ", validation " +
             std::to_string(result.validation.size()) + ", test " +
             std::to_string(result.test.size()) + ")");
  }
  return result;
}

double normalize_score(int level, int num_levels) {
  require(num_levels >= 2, "num_levels must be >= 2");
  require(level >= 0 && level < num_levels,
          "level " + std::to_string(level) + " outside 0.." +
              std::to_string(num_levels - 1));
  return static_cast<double>(level) / (num_levels - 1);
}

int rescale_to_level(double output, int num_levels) {
  require(num_levels >= 2, "num_levels must be >= 2");
  if (std::isnan(output)) output = 0.0;
  const double clamped = std::clamp(output, 0.0, 1.0);
  const int level = static_cast<int>(std::floor(clamped * (num_levels - 1) + 0.5));
  return std::clamp(level, 0, num_levels - 1);
}

std::vector<PromptSpec> default_prompt_specs(int num_prompts) {
  require(num_prompts >= 1, "need at least one prompt");
  static const char* kDifficulty[] = {"B1", "B2", "C1", "C1", "B2", "B1"};
  static const int kLevels[] = {3, 4, 5, 5, 4, 3};
  static const char* kBands[] = {"A1", "A2", "B1", "B2", "C1", "C2"};
  std::vector<PromptSpec> specs;
  for (int j = 0; j < num_prompts; ++j) {
    PromptSpec spec;
    spec.index = j + 1;
    spec.num_levels = kLevels[j % 6];
    spec.difficulty_label = kDifficulty[j % 6];
    for (int k = 0; k < spec.num_levels; ++k) spec.level_names.emplace_back(kBands[k]);
    specs.push_back(std::move(spec));
  }
  return specs;
}

Corpus generate_synthetic_corpus(const SyntheticCorpusOptions& options,
                                 SyntheticLatents* latents) {
  require(options.num_speakers >= 1, "num_speakers must be >= 1");
  require(!options.prompts.empty(), "prompt specs must be non-empty");
  const double rho = options.ability_correlation;
  if (!(rho >= 0.0 && rho <= 1.0)) {
    fail(ErrorKind::kInvalidArgument,
         "ability correlation must lie in [0,1], got " + std::to_string(rho));
  }
  require(options.rater_noise >= 0.0, "rater_noise must be >= 0");
  require(options.min_length >= 1 && options.max_length >= options.min_length,
          "invalid token length range");
  require(options.audio_signal_dims <= options.audio_dim || options.audio_dim == 0,
          "audio_signal_dims exceeds audio_dim");

  const int num_speakers = options.num_speakers;
  const int num_prompts = static_cast<int>(options.prompts.size());
  std::mt19937_64 rng(derive_seed(options.seed, "synthetic"));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  const double residual = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  Eigen::VectorXd ability(num_speakers);
  Eigen::MatrixXd quality(num_speakers, num_prompts);
  for (int i = 0; i < num_speakers; ++i) {
    ability[i] = normal(rng);
    for (int j = 0; j < num_prompts; ++j) {
      quality(i, j) = rho * ability[i] + residual * normal(rng);
    }
  }
  if (latents) *latents = SyntheticLatents{ability, quality};

  // Quantile binning on the empirical rank within each prompt.
  Eigen::MatrixXi levels(num_speakers, num_prompts);
  for (int j = 0; j < num_prompts; ++j) {
    std::vector<int> order(num_speakers);
    for (int i = 0; i < num_speakers; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return quality(a, j) < quality(b, j); });
    const int n_levels = options.prompts[j].num_levels;
    for (int rank = 0; rank < num_speakers; ++rank) {
      levels(order[rank], j) =
          static_cast<int>(static_cast<long long>(rank) * n_levels / num_speakers);
    }
  }

  const int filler_begin = 1;
  const int good_begin = filler_begin + options.filler_vocab;
  const int bad_begin = good_begin + options.discriminative_vocab;
  std::vector<ResponsePanel> panels;
  panels.reserve(num_speakers);
  for (int i = 0; i < num_speakers; ++i) {
    ResponsePanel panel;
    char id[32];
    std::snprintf(id, sizeof(id), "spk%05d", i + 1);
    panel.speaker_id = id;
    for (int j = 0; j < num_prompts; ++j) {
      Response response;
      response.speaker_id = panel.speaker_id;
      response.prompt_index = options.prompts[j].index;
      const double q = quality(i, j);
      const double good_rate = 1.0 / (1.0 + std::exp(-options.token_gain * q));
      const int span = options.max_length - options.min_length + 1;
      const int length = options.min_length + static_cast<int>(rng() % span);
      response.tokens.reserve(length);
      for (int t = 0; t < length; ++t) {
        const double u = uniform(rng);
        std::int32_t token;
        if (u < options.unk_rate) {
          token = kUnkToken;
        } else if (u < options.unk_rate + options.filler_rate || options.discriminative_vocab == 0) {
          token = filler_begin + static_cast<std::int32_t>(rng() % std::max(1, options.filler_vocab));
        } else {
          const bool good = uniform(rng) < good_rate;
          token = (good ? good_begin : bad_begin) +
                  static_cast<std::int32_t>(rng() % options.discriminative_vocab);
        }
        response.tokens.push_back(token);
      }
      response.audio_features.resize(options.audio_dim);
      for (int d = 0; d < options.audio_dim; ++d) {
        const double noise = normal(rng);
        response.audio_features[d] =
            d < options.audio_signal_dims ? q + options.audio_noise * noise : noise;
      }
      response.rating_primary = levels(i, j);
      int secondary = response.rating_primary;
      if (options.rater_noise > 0.0) {
        secondary += static_cast<int>(std::lround(options.rater_noise * normal(rng)));
        secondary = std::clamp(secondary, 0, options.prompts[j].num_levels - 1);
      }
      response.rating_secondary = secondary;
      panel.responses.emplace(response.prompt_index, std::move(response));
    }
    panel.global_score = compute_global_score(panel);
    panels.push_back(std::move(panel));
  }
  return Corpus(options.prompts, std::move(panels));
}

}  // namespace speakerctx
