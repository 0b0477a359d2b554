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

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "speakerctx/strategies.hpp"

namespace speakerctx {

namespace {

std::vector<Segment> layout_for(const ContextStore& store, const std::vector<int>& sources) {
  std::vector<Segment> layout;
  int offset = 0;
  for (int k : sources) {
    const int d = store.prompt_info(k).dim;
    layout.push_back({k, {offset, offset + d}});
    offset += d;
  }
  return layout;
}

std::vector<int> sources_of(const ScoringModel& model) {
  std::vector<int> sources;
  for (const Segment& s : model.prefix_layout()) sources.push_back(s.source_prompt);
  return sources;
}

Dataset<ScoringInput> build_dataset(const Corpus& corpus, const ContextStore& store,
                                    const ScoringModel& model,
                                    const std::set<std::string>& speakers,
                                    const FeatureTable* audio_features, LabelAudit& audit) {
  Dataset<ScoringInput> data;
  const int levels = corpus.prompt(model.prompt_index()).num_levels;
  for (const std::string& speaker : speakers) {
    data.inputs.push_back(make_input(corpus, store, model, speaker, audio_features));
    const Response& r = corpus.panel(speaker).responses.at(model.prompt_index());
    data.levels.push_back(r.rating_primary);
    data.targets.push_back(normalize_score(r.rating_primary, levels));
    audit.speakers.insert(speaker);
    ++audit.reads;
  }
  return data;
}

struct TrainJob {
  ScoringModel model;
  std::uint64_t train_seed = 0;
  Dataset<ScoringInput> train_set;
  Dataset<ScoringInput> validation_set;
  ClassWeights weights;
  TrainingLog log;
};

TrainJob prepare_job(const Corpus& corpus, const SplitAssignment& split, const ContextStore& store,
                     ScoringModel model, std::uint64_t train_seed, const PipelineConfig& config,
                     LabelAudit& audit) {
  TrainJob job{std::move(model), train_seed, {}, {}, {}, {}};
  job.train_set = build_dataset(corpus, store, job.model, split.train, config.audio_features, audit);
  job.validation_set =
      build_dataset(corpus, store, job.model, split.validation, config.audio_features, audit);
  job.weights = compute_class_weights(job.train_set.levels,
                                      corpus.prompt(job.model.prompt_index()).num_levels);
  return job;
}

void run_job(TrainJob& job, const TrainConfig& base) {
  TrainConfig config = base;
  config.seed = job.train_seed;
  try {
    job.log = train(job.model, job.train_set, job.validation_set, job.weights, config);
  } catch (const Error& e) {
    fail(e.kind(), "prompt " + std::to_string(job.model.prompt_index()) + ": " + e.what());
  }
}

PromptRun finish(TrainJob&& job, int stage) {
  return PromptRun{stage, std::move(job.model), std::move(job.log), std::move(job.weights)};
}

// Trains independent jobs on up to `jobs` threads. Successful jobs are
// reported through `on_trained` before the first failure is rethrown.
std::vector<PromptRun> run_jobs(std::vector<TrainJob>& work, const TrainConfig& config, int jobs,
                                int stage, const TrainedCallback& on_trained) {
  std::vector<std::exception_ptr> errors(work.size());
  if (jobs <= 1 || work.size() <= 1) {
    for (std::size_t i = 0; i < work.size(); ++i) {
      try {
        run_job(work[i], config);
      } catch (...) {
        errors[i] = std::current_exception();
        break;
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> threads;
    const int n = std::min<int>(jobs, static_cast<int>(work.size()));
    for (int t = 0; t < n; ++t) {
      threads.emplace_back([&] {
        for (std::size_t i = next++; i < work.size(); i = next++) {
          try {
            run_job(work[i], config);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : threads) t.join();
  }
  std::exception_ptr first;
  std::vector<PromptRun> runs;
  for (std::size_t i = 0; i < work.size(); ++i) {
    if (errors[i]) {
      if (!first) first = errors[i];
      continue;
    }
    if (first && jobs <= 1) break;
    runs.push_back(finish(std::move(work[i]), stage));
    if (on_trained) on_trained(runs.back());
  }
  if (first) std::rethrow_exception(first);
  return runs;
}

// Inference-mode c_ij for every speaker in the corpus, written once.
void store_vectors(ContextStore& store, const Corpus& corpus, const ScoringModel& model,
                   const std::string& provenance, const FeatureTable* audio_features) {
  std::map<std::string, Eigen::VectorXf> vectors;
  for (const ResponsePanel& panel : corpus.panels()) {
    const Response& r = panel.responses.at(model.prompt_index());
    Eigen::VectorXd audio;
    if (model.encoder().config().has_audio()) {
      audio = audio_features ? audio_features->lookup(panel.speaker_id, model.prompt_index())
                             : r.audio_features;
    }
    vectors.emplace(panel.speaker_id, model.encode(r.tokens, audio).cast<float>());
  }
  StoredPromptInfo info;
  info.dim = model.encoder().context_dim();
  info.text_dim = model.encoder().config().text_context_dim();
  info.provenance = provenance;
  store.write_prompt(model.prompt_index(), std::move(info), vectors);
}

std::string provenance_of(Strategy strategy, int stage, int prompt) {
  return strategy_name(strategy) + "/stage" + std::to_string(stage) + "/prompt" +
         std::to_string(prompt);
}

}  // namespace

ScoringInput make_input(const Corpus& corpus, const ContextStore& store, const ScoringModel& model,
                        const std::string& speaker_id, const FeatureTable* audio_features) {
  const Response& r = corpus.panel(speaker_id).responses.at(model.prompt_index());
  ScoringInput input;
  input.tokens = r.tokens;
  if (model.encoder().config().has_audio()) {
    input.audio = audio_features ? audio_features->lookup(speaker_id, model.prompt_index())
                                 : r.audio_features;
    if (input.audio.size() != model.encoder().config().audio_input_dim) {
      fail(ErrorKind::kInvalidArgument,
           "audio features for (" + speaker_id + ", " + std::to_string(model.prompt_index()) +
               ") have dimension " + std::to_string(input.audio.size()) + ", encoder expects " +
               std::to_string(model.encoder().config().audio_input_dim));
    }
  }
  input.prefix = conditioning_prefix(store, speaker_id, sources_of(model));
  return input;
}

std::map<std::string, double> predict_prompt(const Corpus& corpus, const ContextStore& store,
                                             const ScoringModel& model,
                                             const std::set<std::string>& speakers,
                                             const FeatureTable* audio_features) {
  std::map<std::string, double> out;
  for (const std::string& speaker : speakers) {
    out.emplace(speaker, model.predict(make_input(corpus, store, model, speaker, audio_features)));
  }
  return out;
}

PipelineResult run_pipeline(const Corpus& corpus, const SplitAssignment& split,
                            const PipelineConfig& config, const TrainedCallback& on_trained) {
  config.train.validate();
  if (split.train.empty() || split.validation.empty()) {
    fail(ErrorKind::kInvalidArgument, "pipeline needs non-empty train and validation splits");
  }
  const int num_prompts = corpus.num_prompts();
  PipelineResult result;
  result.strategy = config.strategy;
  const auto init_seed = [&](int j) { return derive_seed(config.seed, "init", j); };
  const auto train_seed = [&](int j) { return derive_seed(config.seed, "train", j); };

  // Independent per-prompt baselines; also stage one of the two-stage strategy.
  auto train_baselines = [&](ContextStore& store) {
    std::vector<TrainJob> work;
    const ContextStore empty;
    for (int j = 1; j <= num_prompts; ++j) {
      ScoringModel model(j, Strategy::kBaseline, config.encoder, {});
      model.initialize(init_seed(j));
      work.push_back(prepare_job(corpus, split, empty, std::move(model), train_seed(j), config,
                                 result.audit));
    }
    auto runs = run_jobs(work, config.train, config.jobs, 1, on_trained);
    for (const PromptRun& run : runs) {
      store_vectors(store, corpus, run.model,
                    provenance_of(Strategy::kBaseline, 1, run.model.prompt_index()),
                    config.audio_features);
    }
    return runs;
  };

  switch (config.strategy) {
    case Strategy::kBaseline:
      result.models = train_baselines(result.store);
      break;
    case Strategy::kOneStage:
      for (int j = 1; j <= num_prompts; ++j) {
        const auto sources = conditioning_sources(Strategy::kOneStage, j, num_prompts);
        ScoringModel model(j, Strategy::kOneStage, config.encoder,
                           layout_for(result.store, sources));
        model.initialize(init_seed(j));
        std::vector<TrainJob> work;
        work.push_back(prepare_job(corpus, split, result.store, std::move(model), train_seed(j),
                                   config, result.audit));
        auto runs = run_jobs(work, config.train, 1, 1, on_trained);
        store_vectors(result.store, corpus, runs.front().model,
                      provenance_of(Strategy::kOneStage, 1, j), config.audio_features);
        result.models.push_back(std::move(runs.front()));
      }
      break;
    case Strategy::kTwoStage: {
      result.stage_one = train_baselines(result.store);
      std::vector<TrainJob> work;
      for (int j = 1; j <= num_prompts; ++j) {
        const auto sources = conditioning_sources(Strategy::kTwoStage, j, num_prompts);
        ScoringModel model = ScoringModel::warm_start(result.stage_one[j - 1].model,
                                                      Strategy::kTwoStage,
                                                      layout_for(result.store, sources));
        work.push_back(prepare_job(corpus, split, result.store, std::move(model),
                                   derive_seed(config.seed, "train-stage2", j), config,
                                   result.audit));
      }
      // With a single prompt there is nothing to condition on; stage two
      // keeps the stage-one model as is.
      if (num_prompts == 1) {
        work.front().log = result.stage_one.front().log;
        result.models.push_back(finish(std::move(work.front()), 2));
        if (on_trained) on_trained(result.models.back());
      } else {
        result.models = run_jobs(work, config.train, config.jobs, 2, on_trained);
      }
      break;
    }
  }
  return result;
}

}  // namespace speakerctx
