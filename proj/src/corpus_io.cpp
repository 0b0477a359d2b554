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

#include <charconv>
#include <fstream>
#include <sstream>

#include "speakerctx/corpus.hpp"
#include "speakerctx/text_io.hpp"

namespace speakerctx {

std::string format_real(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) fail(ErrorKind::kFormat, "cannot format real");
  return std::string(buf, end);
}

double parse_real(std::string_view text) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    fail(ErrorKind::kFormat, "malformed real '" + std::string(text) + "'");
  }
  return value;
}

int parse_int(std::string_view text) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    fail(ErrorKind::kFormat, "malformed integer '" + std::string(text) + "'");
  }
  return value;
}

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

std::string join_reals(const Eigen::Ref<const Eigen::VectorXd>& values) {
  std::string out;
  for (Eigen::Index k = 0; k < values.size(); ++k) {
    if (k) out += ',';
    out += format_real(values[k]);
  }
  return out;
}

Eigen::VectorXd parse_reals(std::string_view text) {
  if (text.empty()) return Eigen::VectorXd();
  const auto fields = split_fields(text, ',');
  Eigen::VectorXd values(static_cast<Eigen::Index>(fields.size()));
  for (std::size_t k = 0; k < fields.size(); ++k) values[k] = parse_real(fields[k]);
  return values;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    lines.push_back(std::move(line));
  }
  return lines;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out << content;
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Corpus records: speaker \t prompt \t primary \t secondary \t tokens \t audio
void write_corpus_file(const Corpus& corpus, const std::filesystem::path& path) {
  std::string out;
  for (const ResponsePanel& panel : corpus.panels()) {
    for (const auto& [index, r] : panel.responses) {
      out += r.speaker_id;
      out += '\t';
      out += std::to_string(r.prompt_index);
      out += '\t';
      out += std::to_string(r.rating_primary);
      out += '\t';
      if (r.rating_secondary) out += std::to_string(*r.rating_secondary);
      out += '\t';
      for (std::size_t t = 0; t < r.tokens.size(); ++t) {
        if (t) out += ' ';
        out += std::to_string(r.tokens[t]);
      }
      out += '\t';
      out += join_reals(r.audio_features);
      out += '\n';
    }
  }
  write_text_file(path, out);
}

// Prompt records: index \t num_levels \t difficulty \t comma-separated names
void write_prompt_spec_file(const std::vector<PromptSpec>& prompts,
                            const std::filesystem::path& path) {
  std::string out;
  for (const PromptSpec& spec : prompts) {
    out += std::to_string(spec.index) + '\t' + std::to_string(spec.num_levels) +
           '\t' + spec.difficulty_label + '\t';
    for (std::size_t k = 0; k < spec.level_names.size(); ++k) {
      if (k) out += ',';
      out += spec.level_names[k];
    }
    out += '\n';
  }
  write_text_file(path, out);
}

std::vector<PromptSpec> read_prompt_spec_file(const std::filesystem::path& path) {
  std::vector<PromptSpec> prompts;
  int line_no = 0;
  for (const std::string& line : read_lines(path)) {
    ++line_no;
    const auto fields = split_fields(line, '\t');
    if (fields.size() != 4) {
      fail(ErrorKind::kFormat, path.string() + ":" + std::to_string(line_no) +
                                   ": expected 4 tab-separated fields");
    }
    PromptSpec spec;
    spec.index = parse_int(fields[0]);
    spec.num_levels = parse_int(fields[1]);
    spec.difficulty_label = std::string(fields[2]);
    for (auto name : split_fields(fields[3], ',')) spec.level_names.emplace_back(name);
    prompts.push_back(std::move(spec));
  }
  return prompts;
}

Corpus read_corpus(const std::filesystem::path& corpus_path,
                   const std::filesystem::path& prompt_spec_path) {
  auto prompts = read_prompt_spec_file(prompt_spec_path);
  std::map<std::string, ResponsePanel> panels;
  int line_no = 0;
  for (const std::string& line : read_lines(corpus_path)) {
    ++line_no;
    const std::string where = corpus_path.string() + ":" + std::to_string(line_no);
    const auto fields = split_fields(line, '\t');
    if (fields.size() != 6) {
      fail(ErrorKind::kFormat, where + ": expected 6 tab-separated fields");
    }
    Response r;
    r.speaker_id = std::string(fields[0]);
    r.prompt_index = parse_int(fields[1]);
    r.rating_primary = parse_int(fields[2]);
    if (!fields[3].empty()) r.rating_secondary = parse_int(fields[3]);
    for (auto tok : split_fields(fields[4], ' ')) {
      if (!tok.empty()) r.tokens.push_back(parse_int(tok));
    }
    r.audio_features = parse_reals(fields[5]);
    ResponsePanel& panel = panels[r.speaker_id];
    panel.speaker_id = r.speaker_id;
    const int index = r.prompt_index;
    if (!panel.responses.emplace(index, std::move(r)).second) {
      fail(ErrorKind::kFormat, where + ": duplicate response for prompt " +
                                   std::to_string(index));
    }
  }
  std::vector<ResponsePanel> list;
  list.reserve(panels.size());
  for (auto& [id, panel] : panels) {
    panel.global_score = compute_global_score(panel);
    list.push_back(std::move(panel));
  }
  return Corpus(std::move(prompts), std::move(list));
}

}  // namespace speakerctx
