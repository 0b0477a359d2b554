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

#include "speakerctx/run_config.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>

#include "speakerctx/json_io.hpp"
#include "speakerctx/text_io.hpp"

namespace speakerctx {

nlohmann::json RunConfig::to_json() const {
  return {{"corpus_path", corpus_path},
          {"prompt_spec_path", prompt_spec_path},
          {"audio_features_path", audio_features_path},
          {"strategy", strategy_name(strategy)},
          {"encoder", encoder},
          {"train", train},
          {"attribution", {{"num_steps", attribution_steps},
                           {"aggregation", aggregation_name(attribution_aggregation)},
                           {"baseline", "zeros"}}},
          {"seed", seed},
          {"output_dir", output_dir},
          {"jobs", jobs}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  try {
    c.corpus_path = j.value("corpus_path", c.corpus_path);
    c.prompt_spec_path = j.value("prompt_spec_path", c.prompt_spec_path);
    c.audio_features_path = j.value("audio_features_path", c.audio_features_path);
    c.strategy = parse_strategy(j.value("strategy", strategy_name(c.strategy)));
    if (j.contains("encoder")) {
      EncoderConfig e = c.encoder;
      speakerctx::from_json(j.at("encoder"), e);
      if (!j.at("encoder").contains("vocab_size")) e.vocab_size = 0;
      c.encoder = e;
    }
    if (j.contains("train")) c.train = j.at("train").get<TrainConfig>();
    if (j.contains("attribution")) {
      const auto& a = j.at("attribution");
      c.attribution_steps = a.value("num_steps", c.attribution_steps);
      c.attribution_aggregation =
          parse_aggregation(a.value("aggregation", aggregation_name(c.attribution_aggregation)));
    }
    c.seed = j.value("seed", c.seed);
    c.output_dir = j.value("output_dir", c.output_dir);
    c.jobs = j.value("jobs", c.jobs);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kFormat, std::string("run config: ") + e.what());
  }
  return c;
}

std::string RunConfig::hash() const {
  nlohmann::json j = to_json();
  j.erase("output_dir");
  j.erase("jobs");
  return hex64(fnv1a64(j.dump()));
}

void RunConfig::validate() const {
  for (const std::string* p : {&corpus_path, &prompt_spec_path}) {
    if (p->empty()) fail(ErrorKind::kInvalidArgument, "corpus and prompt spec paths are required");
    if (!std::filesystem::exists(*p)) fail(ErrorKind::kIo, "no such file: " + *p);
  }
  if (!audio_features_path.empty() && !std::filesystem::exists(audio_features_path)) {
    fail(ErrorKind::kIo, "no such file: " + audio_features_path);
  }
  train.validate();
  require(attribution_steps >= 1, "attribution steps must be >= 1");
  require(jobs >= 1, "jobs must be >= 1");
}

std::filesystem::path RunConfig::resolved_output_dir() const {
  std::filesystem::path dir(output_dir);
  if (const char* root = std::getenv(kOutputRootEnv); root && *root && dir.is_relative()) {
    return std::filesystem::path(root) / dir;
  }
  return dir;
}

std::vector<Artifact> RunManifest::with_role(const std::string& role) const {
  std::vector<Artifact> out;
  for (const Artifact& a : artifacts) {
    if (a.role == role) out.push_back(a);
  }
  return out;
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const Artifact& a : artifacts) {
    list.push_back({{"role", a.role},
                    {"path", a.path},
                    {"hash", a.hash},
                    {"prompt", a.prompt_index},
                    {"stage", a.stage}});
  }
  return {{"format", "speakerctx-manifest-1"},
          {"config_hash", config_hash},
          {"config", config.to_json()},
          {"resolved_encoder", resolved_encoder},
          {"corpus_hash", corpus_hash},
          {"num_prompts", num_prompts},
          {"seed", config.seed},
          {"artifacts", list},
          {"created_at", created_at},
          {"updated_at", updated_at},
          {"status", status}};
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "speakerctx-manifest-1") {
    fail(ErrorKind::kFormat, "not a run manifest");
  }
  RunManifest m;
  try {
    m.config_hash = j.at("config_hash").get<std::string>();
    m.config = RunConfig::from_json(j.at("config"));
    m.resolved_encoder = j.at("resolved_encoder").get<EncoderConfig>();
    m.corpus_hash = j.at("corpus_hash").get<std::string>();
    m.num_prompts = j.at("num_prompts").get<int>();
    for (const auto& a : j.at("artifacts")) {
      m.artifacts.push_back({a.at("role").get<std::string>(), a.at("path").get<std::string>(),
                             a.at("hash").get<std::string>(), a.value("prompt", 0),
                             a.value("stage", 0)});
    }
    m.created_at = j.value("created_at", "");
    m.updated_at = j.value("updated_at", "");
    m.status = j.value("status", "complete");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kFormat, std::string("manifest: ") + e.what());
  }
  return m;
}

RunManifest RunManifest::load(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kFormat, path.string() + ": " + e.what());
  }
  return from_json(j);
}

void RunManifest::save(const std::filesystem::path& path) const {
  write_text_file(path, to_json().dump(2) + "\n");
}

void RunManifest::verify(const std::filesystem::path& run_dir) const {
  for (const Artifact& a : artifacts) {
    const auto path = run_dir / a.path;
    if (!std::filesystem::exists(path)) {
      fail(ErrorKind::kIo, "manifest artifact missing: " + a.path);
    }
    if (file_hash(path) != a.hash) {
      fail(ErrorKind::kFormat, "manifest artifact hash mismatch: " + a.path);
    }
  }
}

std::string file_hash(const std::filesystem::path& path) {
  return hex64(fnv1a64(read_text_file(path)));
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace speakerctx
