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

#ifndef SPEAKERCTX_COMMON_HPP_
#define SPEAKERCTX_COMMON_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace speakerctx {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// Error categories double as the machine-parsable prefix printed by the CLI.
enum class ErrorKind {
  kInvalidArgument,
  kIo,
  kFormat,
  kMissingKey,
  kTraining,
  kStrategyMismatch,
  kState,
};

std::string_view error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, const std::string& message) {
  if (!condition) fail(ErrorKind::kInvalidArgument, message);
}

// splitmix64 finalizer; used to fan one root seed out to components.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// 64-bit FNV-1a over raw bytes.
std::uint64_t fnv1a64(std::string_view bytes,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string hex64(std::uint64_t value);

// Derives an independent stream seed for a named component (and optional index).
std::uint64_t derive_seed(std::uint64_t root, std::string_view component,
                          std::uint64_t index = 0);

}  // namespace speakerctx

#endif  // SPEAKERCTX_COMMON_HPP_
