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

#ifndef SPEAKERCTX_FEATURE_TABLE_HPP_
#define SPEAKERCTX_FEATURE_TABLE_HPP_

#include <filesystem>
#include <map>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace speakerctx {

// Precomputed per-response feature vectors (e.g. from a pretrained speech or
// text model), keyed by (speaker_id, prompt_index). File format: one record
// per line, `speaker_id \t prompt_index \t r1,r2,...` with reals written in
// shortest round-trip form.
class FeatureTable {
 public:
  using Key = std::pair<std::string, int>;

  static FeatureTable load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  void insert(const std::string& speaker_id, int prompt_index, Eigen::VectorXd values);
  const Eigen::VectorXd& lookup(const std::string& speaker_id, int prompt_index) const;
  bool contains(const std::string& speaker_id, int prompt_index) const;

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  // 0 while empty.
  int dim() const { return dim_; }

 private:
  std::map<Key, Eigen::VectorXd> entries_;
  int dim_ = 0;
};

}  // namespace speakerctx

#endif  // SPEAKERCTX_FEATURE_TABLE_HPP_
