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

#include "speakerctx/context_store.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include "speakerctx/common.hpp"
#include "speakerctx/text_io.hpp"

namespace speakerctx {

namespace {

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t k = 0; k < sizeof(T); ++k) {
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * k)) & 0xff));
  }
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::uint64_t value = 0;
    for (std::size_t k = 0; k < sizeof(T); ++k) {
      value |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + k])) << (8 * k);
    }
    pos_ += sizeof(T);
    return static_cast<T>(value);
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) fail(ErrorKind::kFormat, "truncated context store");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

void check_u16(std::size_t value, const char* what) {
  if (value > std::numeric_limits<std::uint16_t>::max()) {
    fail(ErrorKind::kFormat, std::string(what) + " does not fit in 16 bits");
  }
}

}  // namespace

void ContextStore::write_prompt(int prompt_index, StoredPromptInfo info,
                                const std::map<std::string, Eigen::VectorXf>& vectors) {
  if (prompts_.count(prompt_index)) {
    fail(ErrorKind::kState, "context store already holds prompt " + std::to_string(prompt_index));
  }
  require(prompt_index >= 0 && prompt_index <= 0xffff, "prompt index out of u16 range");
  require(info.text_dim >= 0 && info.text_dim <= info.dim, "text_dim outside 0..dim");
  for (const auto& [speaker, values] : vectors) {
    if (values.size() != info.dim) {
      fail(ErrorKind::kFormat, "vector for (" + speaker + ", " + std::to_string(prompt_index) +
                                   ") has dimension " + std::to_string(values.size()) +
                                   ", prompt dimension is " + std::to_string(info.dim));
    }
  }
  for (const auto& [speaker, values] : vectors) {
    entries_.emplace(std::make_pair(speaker, prompt_index), values);
  }
  prompts_.emplace(prompt_index, std::move(info));
}

const Eigen::VectorXf& ContextStore::get(const std::string& speaker_id, int prompt_index) const {
  auto it = entries_.find({speaker_id, prompt_index});
  if (it == entries_.end()) {
    fail(ErrorKind::kMissingKey, "context store has no vector for (speaker " + speaker_id +
                                     ", prompt " + std::to_string(prompt_index) + ")");
  }
  return it->second;
}

bool ContextStore::contains(const std::string& speaker_id, int prompt_index) const {
  return entries_.count({speaker_id, prompt_index}) > 0;
}

const StoredPromptInfo& ContextStore::prompt_info(int prompt_index) const {
  auto it = prompts_.find(prompt_index);
  if (it == prompts_.end()) {
    fail(ErrorKind::kMissingKey, "context store has no prompt " + std::to_string(prompt_index));
  }
  return it->second;
}

void ContextStore::save(const std::filesystem::path& path) const {
  std::string out(kMagic, sizeof(kMagic) - 1);
  check_u16(prompts_.size(), "prompt count");
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(prompts_.size()));
  for (const auto& [index, info] : prompts_) {
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(index));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(info.dim));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(info.text_dim));
    check_u16(info.provenance.size(), "provenance");
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(info.provenance.size()));
    out += info.provenance;
  }
  put_le<std::uint64_t>(out, entries_.size());
  for (const auto& [key, values] : entries_) {
    check_u16(key.first.size(), "speaker id");
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(key.first.size()));
    out += key.first;
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(key.second));
    for (Eigen::Index k = 0; k < values.size(); ++k) {
      put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(values[k]));
    }
  }
  write_text_file(path, out);
}

ContextStore ContextStore::load(const std::filesystem::path& path) {
  const std::string bytes = read_text_file(path);
  Reader in(bytes);
  if (in.bytes(sizeof(kMagic) - 1) != std::string(kMagic, sizeof(kMagic) - 1)) {
    fail(ErrorKind::kFormat, path.string() + " is not a context store");
  }
  ContextStore store;
  const auto prompt_count = in.get<std::uint16_t>();
  for (std::uint16_t p = 0; p < prompt_count; ++p) {
    const int index = in.get<std::uint16_t>();
    StoredPromptInfo info;
    info.dim = static_cast<int>(in.get<std::uint32_t>());
    info.text_dim = static_cast<int>(in.get<std::uint32_t>());
    info.provenance = in.bytes(in.get<std::uint16_t>());
    if (!store.prompts_.emplace(index, std::move(info)).second) {
      fail(ErrorKind::kFormat, "duplicate prompt " + std::to_string(index) + " in store header");
    }
  }
  const auto records = in.get<std::uint64_t>();
  for (std::uint64_t r = 0; r < records; ++r) {
    std::string speaker = in.bytes(in.get<std::uint16_t>());
    const int index = in.get<std::uint16_t>();
    auto info = store.prompts_.find(index);
    if (info == store.prompts_.end()) {
      fail(ErrorKind::kFormat, "record references undeclared prompt " + std::to_string(index));
    }
    Eigen::VectorXf values(info->second.dim);
    for (int k = 0; k < info->second.dim; ++k) {
      values[k] = std::bit_cast<float>(in.get<std::uint32_t>());
    }
    if (!store.entries_.emplace(std::make_pair(std::move(speaker), index), std::move(values)).second) {
      fail(ErrorKind::kFormat, "duplicate record in context store");
    }
  }
  if (!in.done()) fail(ErrorKind::kFormat, "trailing bytes in context store");
  return store;
}

bool ContextStore::operator==(const ContextStore& other) const {
  if (prompts_ != other.prompts_ || entries_.size() != other.entries_.size()) return false;
  auto a = entries_.begin();
  auto b = other.entries_.begin();
  for (; a != entries_.end(); ++a, ++b) {
    if (a->first != b->first || a->second.size() != b->second.size()) return false;
    if (std::memcmp(a->second.data(), b->second.data(), sizeof(float) * a->second.size()) != 0) {
      return false;
    }
  }
  return true;
}

}  // namespace speakerctx
