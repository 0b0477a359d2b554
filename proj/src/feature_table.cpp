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

#include "speakerctx/feature_table.hpp"

#include "speakerctx/common.hpp"
#include "speakerctx/encoders.hpp"
#include "speakerctx/text_io.hpp"

namespace speakerctx {

std::string pooling_name(Pooling pooling) {
  return pooling == Pooling::kAttention ? "attention" : "last-step";
}

Pooling parse_pooling(const std::string& name) {
  if (name == "attention") return Pooling::kAttention;
  if (name == "last-step" || name == "last") return Pooling::kLastStep;
  fail(ErrorKind::kInvalidArgument, "unknown pooling '" + name + "'");
}

FeatureTable FeatureTable::load(const std::filesystem::path& path) {
  FeatureTable table;
  int line_no = 0;
  for (const std::string& line : read_lines(path)) {
    ++line_no;
    const auto fields = split_fields(line, '\t');
    if (fields.size() != 3) {
      fail(ErrorKind::kFormat, path.string() + ":" + std::to_string(line_no) +
                                   ": expected speaker, prompt, values");
    }
    table.insert(std::string(fields[0]), parse_int(fields[1]), parse_reals(fields[2]));
  }
  return table;
}

void FeatureTable::save(const std::filesystem::path& path) const {
  std::string out;
  for (const auto& [key, values] : entries_) {
    out += key.first + '\t' + std::to_string(key.second) + '\t' + join_reals(values) + '\n';
  }
  write_text_file(path, out);
}

void FeatureTable::insert(const std::string& speaker_id, int prompt_index,
                          Eigen::VectorXd values) {
  const int dim = static_cast<int>(values.size());
  if (!entries_.empty() && dim != dim_) {
    fail(ErrorKind::kFormat, "feature dimension " + std::to_string(dim) +
                                 " for (" + speaker_id + ", " +
                                 std::to_string(prompt_index) + ") != " +
                                 std::to_string(dim_));
  }
  if (!entries_.emplace(Key{speaker_id, prompt_index}, std::move(values)).second) {
    fail(ErrorKind::kFormat, "duplicate features for (" + speaker_id + ", " +
                                 std::to_string(prompt_index) + ")");
  }
  dim_ = dim;
}

const Eigen::VectorXd& FeatureTable::lookup(const std::string& speaker_id,
                                            int prompt_index) const {
  auto it = entries_.find(Key{speaker_id, prompt_index});
  if (it == entries_.end()) {
    fail(ErrorKind::kMissingKey, "no features for (speaker " + speaker_id +
                                     ", prompt " + std::to_string(prompt_index) + ")");
  }
  return it->second;
}

bool FeatureTable::contains(const std::string& speaker_id, int prompt_index) const {
  return entries_.count(Key{speaker_id, prompt_index}) > 0;
}

}  // namespace speakerctx
