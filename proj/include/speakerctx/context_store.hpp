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

#ifndef SPEAKERCTX_CONTEXT_STORE_HPP_
#define SPEAKERCTX_CONTEXT_STORE_HPP_

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace speakerctx {

struct StoredPromptInfo {
  int dim = 0;
  int text_dim = 0;  // dim - text_dim is the audio slice width
  std::string provenance;  // which strategy/model wrote this prompt
  bool operator==(const StoredPromptInfo&) const = default;
};

// Per-(speaker, prompt) context vectors handed from trained encoders to
// downstream models. Append-only: each prompt is written exactly once, as a
// whole. Values are kept as 32-bit floats, which is also the on-disk width,
// so a save/load round trip is bit-exact.
//
// File layout (little-endian):
//   "CTXSTORE1"
//   u16 prompt_count; per prompt: u16 index, u32 dim, u32 text_dim,
//                                 u16 provenance_len, provenance bytes
//   u64 record_count; per record: u16 speaker_len, speaker bytes,
//                                 u16 prompt_index, dim x f32
class ContextStore {
 public:
  static constexpr char kMagic[] = "CTXSTORE1";

  void write_prompt(int prompt_index, StoredPromptInfo info,
                    const std::map<std::string, Eigen::VectorXf>& vectors);

  const Eigen::VectorXf& get(const std::string& speaker_id, int prompt_index) const;
  bool contains(const std::string& speaker_id, int prompt_index) const;
  bool has_prompt(int prompt_index) const { return prompts_.count(prompt_index) > 0; }
  const StoredPromptInfo& prompt_info(int prompt_index) const;
  const std::map<int, StoredPromptInfo>& prompts() const { return prompts_; }
  std::size_t size() const { return entries_.size(); }

  void save(const std::filesystem::path& path) const;
  static ContextStore load(const std::filesystem::path& path);

  bool operator==(const ContextStore& other) const;

 private:
  std::map<int, StoredPromptInfo> prompts_;
  std::map<std::pair<std::string, int>, Eigen::VectorXf> entries_;
};

}  // namespace speakerctx

#endif  // SPEAKERCTX_CONTEXT_STORE_HPP_
