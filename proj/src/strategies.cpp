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

#include "speakerctx/strategies.hpp"

#include <numeric>

#include "speakerctx/json_io.hpp"
#include "speakerctx/text_io.hpp"

namespace speakerctx {

void to_json(nlohmann::json& j, const EncoderConfig& c) {
  j = nlohmann::json{{"vocab_size", c.vocab_size},
                     {"embed_dim", c.embed_dim},
                     {"hidden_dim", c.hidden_dim},
                     {"pooling", pooling_name(c.pooling)},
                     {"audio_input_dim", c.audio_input_dim},
                     {"audio_context_dim", c.audio_context_dim},
                     {"max_length", c.max_length}};
}

void from_json(const nlohmann::json& j, EncoderConfig& c) {
  EncoderConfig d;
  c.vocab_size = j.value("vocab_size", d.vocab_size);
  c.embed_dim = j.value("embed_dim", d.embed_dim);
  c.hidden_dim = j.value("hidden_dim", d.hidden_dim);
  c.pooling = parse_pooling(j.value("pooling", pooling_name(d.pooling)));
  c.audio_input_dim = j.value("audio_input_dim", d.audio_input_dim);
  c.audio_context_dim = j.value("audio_context_dim", d.audio_context_dim);
  c.max_length = j.value("max_length", d.max_length);
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"learning_rate", c.learning_rate},
                     {"batch_size", c.batch_size},
                     {"max_epochs", c.max_epochs},
                     {"early_stop_patience", c.early_stop_patience},
                     {"plateau_patience", c.plateau_patience},
                     {"lr_decay_factor", c.lr_decay_factor},
                     {"min_lr", c.min_lr},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig d;
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.max_epochs = j.value("max_epochs", d.max_epochs);
  c.early_stop_patience = j.value("early_stop_patience", d.early_stop_patience);
  c.plateau_patience = j.value("plateau_patience", d.plateau_patience);
  c.lr_decay_factor = j.value("lr_decay_factor", d.lr_decay_factor);
  c.min_lr = j.value("min_lr", d.min_lr);
  c.seed = j.value("seed", d.seed);
}

std::string strategy_name(Strategy strategy) {
  switch (strategy) {
    case Strategy::kBaseline:
      return "baseline";
    case Strategy::kOneStage:
      return "one-stage";
    case Strategy::kTwoStage:
      return "two-stage";
  }
  return "baseline";
}

Strategy parse_strategy(const std::string& name) {
  if (name == "baseline") return Strategy::kBaseline;
  if (name == "one-stage" || name == "one_stage") return Strategy::kOneStage;
  if (name == "two-stage" || name == "two_stage") return Strategy::kTwoStage;
  fail(ErrorKind::kInvalidArgument, "unknown strategy '" + name + "'");
}

std::vector<int> conditioning_sources(Strategy strategy, int prompt_index, int num_prompts) {
  require(prompt_index >= 1 && prompt_index <= num_prompts, "prompt index outside 1..P");
  std::vector<int> sources;
  switch (strategy) {
    case Strategy::kBaseline:
      break;
    case Strategy::kOneStage:
      for (int k = 1; k < prompt_index; ++k) sources.push_back(k);
      break;
    case Strategy::kTwoStage:
      for (int k = 1; k <= num_prompts; ++k) {
        if (k != prompt_index) sources.push_back(k);
      }
      break;
  }
  return sources;
}

int expected_context_dim(Strategy strategy, int prompt_index, const std::map<int, int>& dims) {
  const int num_prompts = static_cast<int>(dims.size());
  int total = dims.at(prompt_index);
  for (int k : conditioning_sources(strategy, prompt_index, num_prompts)) total += dims.at(k);
  return total;
}

Eigen::VectorXd conditioning_prefix(const ContextStore& store, const std::string& speaker_id,
                                    const std::vector<int>& sources) {
  int dim = 0;
  for (int k : sources) dim += store.prompt_info(k).dim;
  Eigen::VectorXd prefix(dim);
  int offset = 0;
  for (int k : sources) {
    const Eigen::VectorXf& v = store.get(speaker_id, k);
    prefix.segment(offset, v.size()) = v.cast<double>();
    offset += static_cast<int>(v.size());
  }
  return prefix;
}

namespace {

ConditionedContext assemble(const ContextStore& store, const std::string& speaker_id,
                            int prompt_index, const std::vector<int>& sources,
                            const Eigen::VectorXd& current) {
  ConditionedContext out;
  const Eigen::VectorXd prefix = conditioning_prefix(store, speaker_id, sources);
  out.values.resize(prefix.size() + current.size());
  out.values << prefix, current;
  int offset = 0;
  for (int k : sources) {
    const int d = store.prompt_info(k).dim;
    out.layout.push_back({k, {offset, offset + d}});
    offset += d;
  }
  out.layout.push_back({prompt_index, {offset, offset + static_cast<int>(current.size())}});
  return out;
}

}  // namespace

ConditionedContext build_one_stage_context(const ContextStore& store, const std::string& speaker_id,
                                           int prompt_index, const Eigen::VectorXd& current) {
  require(prompt_index >= 1, "prompt index must be >= 1");
  std::vector<int> sources;
  for (int k = 1; k < prompt_index; ++k) sources.push_back(k);
  return assemble(store, speaker_id, prompt_index, sources, current);
}

ConditionedContext build_two_stage_context(const ContextStore& store, const std::string& speaker_id,
                                           int prompt_index, int num_prompts,
                                           const Eigen::VectorXd& current) {
  return assemble(store, speaker_id, prompt_index,
                  conditioning_sources(Strategy::kTwoStage, prompt_index, num_prompts), current);
}

ScoringModel::ScoringModel(int prompt_index, Strategy strategy, const EncoderConfig& encoder,
                           std::vector<Segment> prefix_layout)
    : prompt_index_(prompt_index),
      strategy_(strategy),
      encoder_(encoder),
      prefix_layout_(std::move(prefix_layout)) {
  int offset = 0;
  for (const Segment& s : prefix_layout_) {
    if (s.range.begin != offset || s.range.size() <= 0) {
      fail(ErrorKind::kInvalidArgument, "prefix segments must tile the prefix");
    }
    offset = s.range.end;
  }
  if (strategy_ == Strategy::kBaseline && !prefix_layout_.empty()) {
    fail(ErrorKind::kInvalidArgument, "baseline models take no conditioning prefix");
  }
  prefix_dim_ = offset;
  params_ = Eigen::VectorXd::Zero(encoder_.num_parameters() + expected_context_dim() + 1);
}

std::vector<Segment> ScoringModel::layout() const {
  std::vector<Segment> out = prefix_layout_;
  out.push_back({prompt_index_, {prefix_dim_, expected_context_dim()}});
  return out;
}

void ScoringModel::initialize(std::uint64_t seed) {
  params_.setZero();
  const auto n = encoder_.num_parameters();
  encoder_.initialize(std::span<double>(params_.data(), n), derive_seed(seed, "encoder"));
  std::mt19937_64 rng(derive_seed(seed, "head"));
  const int d = encoder_.context_dim();
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  std::uniform_real_distribution<double> uniform(-bound, bound);
  auto w = head_weights();
  for (int k = 0; k < d; ++k) w[prefix_dim_ + k] = uniform(rng);
  head_bias() = 0.5;
}

ScoringModel ScoringModel::warm_start(const ScoringModel& baseline, Strategy strategy,
                                      std::vector<Segment> prefix_layout) {
  ScoringModel model(baseline.prompt_index(), strategy, baseline.encoder().config(),
                     std::move(prefix_layout));
  const auto n = baseline.encoder().num_parameters();
  model.params_.head(n) = baseline.params_.head(n);
  model.head_weights().tail(baseline.encoder().context_dim()) =
      baseline.head_weights().tail(baseline.encoder().context_dim());
  model.head_bias() = baseline.head_bias();
  return model;
}

std::span<const double> ScoringModel::encoder_parameters() const {
  return {params_.data(), static_cast<std::size_t>(encoder_.num_parameters())};
}

Eigen::Map<const Eigen::VectorXd> ScoringModel::head_weights() const {
  return {params_.data() + encoder_.num_parameters(), expected_context_dim()};
}

Eigen::Map<Eigen::VectorXd> ScoringModel::head_weights() {
  return {params_.data() + encoder_.num_parameters(), expected_context_dim()};
}

Eigen::VectorXd ScoringModel::encode(std::span<const std::int32_t> tokens,
                                     const Eigen::VectorXd& audio) const {
  return encoder_.forward(encoder_parameters(), tokens, audio);
}

double ScoringModel::score(const Eigen::Ref<const Eigen::VectorXd>& conditioned) const {
  if (conditioned.size() != expected_context_dim()) {
    fail(ErrorKind::kInvalidArgument,
         "context dimension " + std::to_string(conditioned.size()) + " != expected " +
             std::to_string(expected_context_dim()) + " for prompt " +
             std::to_string(prompt_index_));
  }
  return head_weights().dot(conditioned) + head_bias();
}

Eigen::VectorXd ScoringModel::conditioned(const ScoringInput& input) const {
  if (input.prefix.size() != prefix_dim_) {
    fail(ErrorKind::kInvalidArgument, "conditioning prefix dimension " +
                                          std::to_string(input.prefix.size()) + " != " +
                                          std::to_string(prefix_dim_));
  }
  Eigen::VectorXd c(expected_context_dim());
  c << input.prefix, encode(input.tokens, input.audio);
  return c;
}

double ScoringModel::predict(const ScoringInput& input) const { return score(conditioned(input)); }

double ScoringModel::forward_backward(const ScoringInput& input, double target, double weight,
                                      double scale, Eigen::VectorXd& grad) const {
  if (input.prefix.size() != prefix_dim_) {
    fail(ErrorKind::kInvalidArgument, "conditioning prefix dimension mismatch");
  }
  EncoderTrace<double> trace;
  const Eigen::VectorXd current =
      encoder_.forward(encoder_parameters(), input.tokens, input.audio, &trace);
  const auto w = head_weights();
  const double out = w.head(prefix_dim_).dot(input.prefix) + w.tail(current.size()).dot(current) +
                     head_bias();
  const double d_out = 2.0 * weight * (out - target) * scale;
  const auto n = encoder_.num_parameters();
  auto gw = grad.segment(n, expected_context_dim());
  gw.head(prefix_dim_) += d_out * input.prefix;
  gw.tail(current.size()) += d_out * current;
  grad[grad.size() - 1] += d_out;
  const Eigen::VectorXd d_current = d_out * w.tail(current.size());
  encoder_.backward(encoder_parameters(), trace, d_current,
                    std::span<double>(grad.data(), static_cast<std::size_t>(n)));
  return out;
}

double score_baseline(const ScoringModel& model, const ScoringInput& input) {
  if (model.strategy() != Strategy::kBaseline) {
    fail(ErrorKind::kStrategyMismatch, "score_baseline needs a baseline model");
  }
  return model.predict(input);
}

void save_checkpoint(const ScoringModel& model, const std::string& config_hash,
                     const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = "speakerctx-checkpoint-1";
  j["config_hash"] = config_hash;
  j["prompt_index"] = model.prompt_index();
  j["strategy"] = strategy_name(model.strategy());
  j["encoder"] = model.encoder().config();
  nlohmann::json layout = nlohmann::json::array();
  for (const Segment& s : model.prefix_layout()) {
    layout.push_back({s.source_prompt, s.range.begin, s.range.end});
  }
  j["prefix_layout"] = layout;
  const auto& p = model.parameters();
  j["parameters"] = std::vector<double>(p.data(), p.data() + p.size());
  write_text_file(path, j.dump());
}

ScoringModel load_checkpoint(const std::filesystem::path& path, std::string* config_hash) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kFormat, path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "speakerctx-checkpoint-1") {
    fail(ErrorKind::kFormat, path.string() + " is not a checkpoint");
  }
  std::vector<Segment> layout;
  for (const auto& s : j.at("prefix_layout")) {
    layout.push_back({s.at(0).get<int>(), {s.at(1).get<int>(), s.at(2).get<int>()}});
  }
  ScoringModel model(j.at("prompt_index").get<int>(), parse_strategy(j.at("strategy")),
                     j.at("encoder").get<EncoderConfig>(), std::move(layout));
  const auto values = j.at("parameters").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(values.size()) != model.parameters().size()) {
    fail(ErrorKind::kFormat, path.string() + ": parameter count mismatch");
  }
  model.parameters() = Eigen::Map<const Eigen::VectorXd>(values.data(), values.size());
  if (config_hash) *config_hash = j.value("config_hash", "");
  return model;
}

}  // namespace speakerctx
