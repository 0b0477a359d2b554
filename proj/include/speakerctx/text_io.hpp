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

#ifndef SPEAKERCTX_TEXT_IO_HPP_
#define SPEAKERCTX_TEXT_IO_HPP_

// Small helpers shared by the line-delimited file formats.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace speakerctx {

int parse_int(std::string_view text);
std::vector<std::string_view> split_fields(std::string_view line, char sep);
std::string join_reals(const Eigen::Ref<const Eigen::VectorXd>& values);
Eigen::VectorXd parse_reals(std::string_view text);
// Non-empty lines with any trailing CR stripped.
std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace speakerctx

#endif  // SPEAKERCTX_TEXT_IO_HPP_
