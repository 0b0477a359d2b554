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


#include "speakerctx/commands.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "speakerctx/text_io.hpp"

namespace speakerctx {
namespace fs = std::filesystem;

namespace {

std::string checkpoint_name(int prompt, int stage) {
  return "checkpoints/prompt" + std::to_string(prompt) + "_stage" + std::to_string(stage) + ".json";
}

std::string log_name(int prompt, int stage) {
  return "logs/prompt" + std::to_string(prompt) + "_stage" + std::to_string(stage) + ".tsv";
}

std::string corpus_hash_of(const RunConfig& config) {
  std::string h = file_hash(config.corpus_path) + file_hash(config.prompt_spec_path);
  if (!config.audio_features_path.empty()) h += file_hash(config.audio_features_path);
  return hex64(fnv1a64(h));
}

void put_artifact(RunManifest& manifest, const fs::path& run_dir, Artifact a) {
  a.hash = file_hash(run_dir / a.path);
  auto it = std::find_if(manifest.artifacts.begin(), manifest.artifacts.end(),
                         [&](const Artifact& x) { return x.path == a.path; });
  if (it == manifest.artifacts.end()) {
    manifest.artifacts.push_back(std::move(a));
  } else {
    *it = std::move(a);
  }
}

// Inputs shared by evaluate and attribute.
struct LoadedRun {
  fs::path dir;
  RunManifest manifest;
  Corpus corpus;
  std::optional<FeatureTable> audio;
  SplitAssignment split;
  std::vector<ScoringModel> models;
  ContextStore store;

  const FeatureTable* features() const { return audio ? &*audio : nullptr; }
};

LoadedRun load_run(const fs::path& manifest_path) {
  RunManifest manifest = RunManifest::load(manifest_path);
  if (manifest.status != "complete") {
    fail(ErrorKind::kState, "run did not finish training: " + manifest_path.string());
  }
  const fs::path dir = manifest_path.parent_path();
  const RunConfig& config = manifest.config;
  config.validate();
  if (corpus_hash_of(config) != manifest.corpus_hash) {
    fail(ErrorKind::kState, "corpus files changed since training: " + config.corpus_path);
  }
  Corpus corpus = read_corpus(config.corpus_path, config.prompt_spec_path);
  std::optional<FeatureTable> audio;
  if (!config.audio_features_path.empty()) audio = FeatureTable::load(config.audio_features_path);

  const int final_stage = config.strategy == Strategy::kTwoStage ? 2 : 1;
  std::map<int, ScoringModel> by_prompt;
  for (const Artifact& a : manifest.with_role("checkpoint")) {
    if (a.stage != final_stage) continue;
    if (!fs::exists(dir / a.path)) fail(ErrorKind::kIo, "missing checkpoint: " + a.path);
    std::string hash;
    ScoringModel model = load_checkpoint(dir / a.path, &hash);
    if (hash != manifest.config_hash) {
      fail(ErrorKind::kState, "checkpoint " + a.path + " belongs to another config");
    }
    by_prompt.emplace(a.prompt_index, std::move(model));
  }
  std::vector<ScoringModel> models;
  for (int j = 1; j <= manifest.num_prompts; ++j) {
    auto it = by_prompt.find(j);
    if (it == by_prompt.end()) {
      fail(ErrorKind::kIo, "missing checkpoint for prompt " + std::to_string(j));
    }
    models.push_back(std::move(it->second));
  }
  const auto stores = manifest.with_role("context-store");
  if (stores.empty() || !fs::exists(dir / stores.front().path)) {
    fail(ErrorKind::kIo, "missing context store in " + dir.string());
  }
  ContextStore store = ContextStore::load(dir / stores.front().path);
  SplitAssignment split = stratified_split(corpus.panels(), derive_seed(config.seed, "split"));
  return LoadedRun{dir,           std::move(manifest), std::move(corpus), std::move(audio),
                   std::move(split), std::move(models),  std::move(store)};
}

nlohmann::json delta(double a, double b) {
  nlohmann::json d{{"a", a}, {"b", b}, {"delta", b - a}};
  d["relative_pct"] = a != 0.0 ? nlohmann::json((b - a) / a * 100.0) : nlohmann::json(nullptr);
  return d;
}

}  // namespace

SynthResult cmd_synth(const SynthOptions& options, std::ostream& out) {
  require(options.num_speakers >= 1, "num_speakers must be >= 1");
  require(options.num_prompts >= 1 && options.num_prompts <= 6, "num_prompts must be in 1..6");
  require(options.audio_dim >= 0, "audio_dim must be >= 0");
  SyntheticCorpusOptions gen;
  gen.num_speakers = options.num_speakers;
  gen.prompts = default_prompt_specs(options.num_prompts);
  gen.ability_correlation = options.ability_correlation;
  gen.rater_noise = options.rater_noise;
  gen.seed = options.seed;
  gen.audio_dim = options.audio_dim;
  gen.audio_signal_dims = std::min(gen.audio_signal_dims, options.audio_dim);
  const Corpus corpus = generate_synthetic_corpus(gen);

  SynthResult result;
  result.corpus_path = options.output_dir / "corpus.tsv";
  result.prompt_spec_path = options.output_dir / "prompts.tsv";
  write_corpus_file(corpus, result.corpus_path);
  write_prompt_spec_file(corpus.prompts(), result.prompt_spec_path);

  out << "speakers " << corpus.panels().size() << ", prompts " << corpus.num_prompts() << "\n";
  for (const PromptSpec& p : corpus.prompts()) {
    std::vector<int> counts(p.num_levels, 0);
    for (const ResponsePanel& panel : corpus.panels()) {
      ++counts[panel.responses.at(p.index).rating_primary];
      ++result.records;
    }
    out << "prompt " << p.index << " [" << p.difficulty_label << "]";
    for (int k = 0; k < p.num_levels; ++k) out << " " << p.level_names[k] << ":" << counts[k];
    out << "\n";
    result.histograms.emplace(p.index, std::move(counts));
  }
  out << "wrote " << result.corpus_path.string() << " (" << result.records << " records)\n";
  return result;
}

RunManifest cmd_train(const RunConfig& config, std::ostream& out) {
  config.validate();
  const Corpus corpus = read_corpus(config.corpus_path, config.prompt_spec_path);
  std::optional<FeatureTable> audio;
  if (!config.audio_features_path.empty()) audio = FeatureTable::load(config.audio_features_path);

  EncoderConfig encoder = config.encoder;
  if (encoder.vocab_size == 0) encoder.vocab_size = corpus.vocab_size();
  if (encoder.audio_context_dim > 0) {
    encoder.audio_input_dim = audio ? audio->dim() : corpus.audio_dim();
    if (encoder.audio_input_dim == 0) {
      fail(ErrorKind::kInvalidArgument, "audio branch requested but the corpus has no audio features");
    }
  } else {
    require(!audio, "audio features given but audio_context_dim is 0");
    encoder.audio_input_dim = 0;
  }

  const fs::path dir = config.resolved_output_dir();
  RunManifest manifest;
  manifest.config_hash = config.hash();
  manifest.config = config;
  manifest.resolved_encoder = encoder;
  manifest.corpus_hash = corpus_hash_of(config);
  manifest.num_prompts = corpus.num_prompts();
  manifest.created_at = utc_timestamp();
  manifest.updated_at = manifest.created_at;
  const fs::path manifest_path = dir / "manifest.json";

  write_text_file(dir / "config.json", config.to_json().dump(2) + "\n");
  put_artifact(manifest, dir, {"config", "config.json", "", 0, 0});

  const SplitAssignment split =
      stratified_split(corpus.panels(), derive_seed(config.seed, "split"));
  out << "split train " << split.train.size() << " / validation " << split.validation.size()
      << " / test " << split.test.size() << "\n";

  PipelineConfig pipeline{config.strategy, encoder, config.train, config.seed, audio ? &*audio : nullptr,
                          config.jobs};
  auto on_trained = [&](const PromptRun& run) {
    const int j = run.model.prompt_index();
    save_checkpoint(run.model, manifest.config_hash, dir / checkpoint_name(j, run.stage));
    write_text_file(dir / log_name(j, run.stage), run.log.to_text());
    put_artifact(manifest, dir, {"checkpoint", checkpoint_name(j, run.stage), "", j, run.stage});
    put_artifact(manifest, dir, {"log", log_name(j, run.stage), "", j, run.stage});
    for (const std::string& w : run.weights.warnings) out << "warning: prompt " << j << ": " << w << "\n";
    out << "prompt " << j << " stage " << run.stage << ": " << run.log.epochs.size()
        << " epochs, best val loss " << format_real(run.log.best_val_loss) << "\n";
  };

  PipelineResult result;
  try {
    result = run_pipeline(corpus, split, pipeline, on_trained);
  } catch (const Error& e) {
    manifest.status = "failed";
    manifest.updated_at = utc_timestamp();
    manifest.save(manifest_path);
    // The pipeline's message already names the failing prompt.
    fail(e.kind(), std::string("training failed at ") + e.what());
  }

  result.store.save(dir / "context_store.bin");
  put_artifact(manifest, dir, {"context-store", "context_store.bin", "", 0, 0});
  manifest.updated_at = utc_timestamp();
  manifest.save(manifest_path);
  out << "wrote " << manifest_path.string() << "\n";
  return manifest;
}

std::vector<PromptPredictions> collect_predictions(const Corpus& corpus, const ContextStore& store,
                                                   const std::vector<ScoringModel>& models,
                                                   const std::set<std::string>& speakers,
                                                   const FeatureTable* audio_features) {
  if (speakers.empty()) fail(ErrorKind::kInvalidArgument, "no speakers to evaluate");
  std::vector<PromptPredictions> out;
  for (const ScoringModel& model : models) {
    const int j = model.prompt_index();
    PromptPredictions p;
    p.prompt_index = j;
    p.num_levels = corpus.prompt(j).num_levels;
    const auto raw = predict_prompt(corpus, store, model, speakers, audio_features);
    bool all_secondary = true;
    for (const auto& [speaker, value] : raw) {
      const Response& r = corpus.panel(speaker).responses.at(j);
      p.speakers.push_back(speaker);
      p.truth.push_back(r.rating_primary);
      p.raw.push_back(value);
      p.predicted.push_back(rescale_to_level(value, p.num_levels));
      if (r.rating_secondary) {
        p.secondary.push_back(*r.rating_secondary);
      } else {
        all_secondary = false;
      }
    }
    if (!all_secondary) p.secondary.clear();
    out.push_back(std::move(p));
  }
  return out;
}

EvaluationReport cmd_evaluate(const fs::path& manifest_path, Split split, std::ostream& out) {
  if (split == Split::kTrain) {
    fail(ErrorKind::kInvalidArgument, "evaluate on the validation or test split");
  }
  LoadedRun run = load_run(manifest_path);
  const auto& speakers = speakers_in(run.split, split);
  if (speakers.empty()) fail(ErrorKind::kInvalidArgument, split_name(split) + " split is empty");
  const auto preds = collect_predictions(run.corpus, run.store, run.models, speakers, run.features());
  const std::string name = split_name(split);
  EvaluationReport report = build_report(preds, strategy_name(run.manifest.config.strategy), name);

  nlohmann::json doc = report_to_json(report);
  doc["seed"] = run.manifest.config.seed;
  doc["config_hash"] = run.manifest.config_hash;
  doc["corpus_hash"] = run.manifest.corpus_hash;
  const std::string report_path = "reports/report_" + name + ".json";
  write_text_file(run.dir / report_path, doc.dump(2) + "\n");
  put_artifact(run.manifest, run.dir, {"report", report_path, "", 0, 0});
  for (const PromptReport& p : report.prompts) {
    const std::string grid = "reports/high_bias_prompt" + std::to_string(p.prompt_index) + "_" +
                             name + ".txt";
    std::string content = "# true level (rows) x predicted level (columns), seed " +
                          std::to_string(run.manifest.config.seed) + "\n" +
                          format_grid(p.high_bias.heatmap);
    write_text_file(run.dir / grid, content);
    put_artifact(run.manifest, run.dir, {"heatmap", grid, "", p.prompt_index, 0});
    out << "prompt " << p.prompt_index << ": qwk " << format_real(p.qwk) << ", mse "
        << format_real(p.mse) << ", high-bias " << p.high_bias.count << "\n";
  }
  out << "average qwk " << format_real(report.average_qwk) << ", average mse "
      << format_real(report.average_mse) << ", mean prompts correct "
      << format_real(report.speaker_accuracy.mean_correct) << "\n";
  run.manifest.updated_at = utc_timestamp();
  run.manifest.save(manifest_path);
  return report;
}

AttributionKind parse_attribution_kind(const std::string& name) {
  if (name == "prompt") return AttributionKind::kPrompt;
  if (name == "modality") return AttributionKind::kModality;
  if (name == "all") return AttributionKind::kAll;
  fail(ErrorKind::kInvalidArgument, "unknown attribution kind: " + name);
}

AttributeResult cmd_attribute(const fs::path& manifest_path, AttributionKind kind, bool normalize,
                              std::ostream& out) {
  const RunManifest peek = RunManifest::load(manifest_path);
  const bool two_stage = peek.config.strategy == Strategy::kTwoStage;
  const bool multimodal = peek.resolved_encoder.has_audio();
  const std::string strategy = strategy_name(peek.config.strategy);
  if (kind == AttributionKind::kPrompt && !two_stage) {
    fail(ErrorKind::kStrategyMismatch,
         "prompt-wise attribution requires a two-stage run; this run is " + strategy);
  }
  if (kind == AttributionKind::kModality && !multimodal) {
    fail(ErrorKind::kStrategyMismatch,
         "modality attribution requires a multimodal run (audio_context_dim > 0)");
  }
  if (kind == AttributionKind::kAll && !two_stage && !multimodal) {
    fail(ErrorKind::kStrategyMismatch,
         "attribution requires a two-stage run (prompt-wise) or a multimodal run (modality); "
         "this run is a text-only " + strategy + " run");
  }

  LoadedRun run = load_run(manifest_path);
  const auto& speakers = speakers_in(run.split, Split::kTest);
  if (speakers.empty()) fail(ErrorKind::kInvalidArgument, "test split is empty");
  AttributionConfig ac;
  ac.num_steps = run.manifest.config.attribution_steps;
  ac.aggregation = run.manifest.config.attribution_aggregation;

  std::ostringstream header;
  header << "# model: " << strategy << " config " << run.manifest.config_hash << " seed "
         << run.manifest.config.seed << "\n"
         << "# steps: " << ac.num_steps << "\n"
         << "# baseline: zeros\n"
         << "# aggregation: " << aggregation_name(ac.aggregation) << "\n"
         << "# normalized: " << (normalize ? "rows" : "no") << "\n"
         << "# samples: " << speakers.size() << " test speakers\n";

  AttributeResult result;
  if (two_stage && kind != AttributionKind::kModality) {
    result.prompt = prompt_wise_attribution(run.models, run.corpus, run.store, speakers, ac,
                                            run.features());
    const Eigen::MatrixXd grid =
        normalize ? normalize_rows(result.prompt.heatmap) : result.prompt.heatmap;
    std::ostringstream text;
    text << header.str() << "# rows: scored prompt 1.." << grid.rows()
         << "; columns: source prompt 1.." << grid.cols() << "\n# completeness_gap (max per row):";
    for (double g : result.prompt.max_completeness_gap) text << " " << format_real(g);
    text << "\n";
    for (Eigen::Index i = 0; i < grid.rows(); ++i) {
      for (Eigen::Index k = 0; k < grid.cols(); ++k) {
        text << (k ? "\t" : "") << format_real(grid(i, k));
      }
      text << "\n";
    }
    const std::string path = "attribution/prompt_heatmap.tsv";
    write_text_file(run.dir / path, text.str());
    put_artifact(run.manifest, run.dir, {"attribution", path, "", 0, 0});
    result.files.push_back(run.dir / path);
    out << "wrote " << (run.dir / path).string() << "\n";
  }
  if (multimodal && kind != AttributionKind::kPrompt) {
    result.modality =
        modality_attribution(run.models, run.corpus, run.store, speakers, ac, run.features());
    std::ostringstream text;
    text << header.str() << "prompt\ttext\taudio\tcompleteness_gap\n";
    for (const ModalityRow& r : result.modality) {
      double t = r.text, a = r.audio;
      if (normalize) {
        const double s = std::abs(t) + std::abs(a);
        if (s > 0.0) t /= s, a /= s;
      }
      text << r.prompt_index << "\t" << format_real(t) << "\t" << format_real(a) << "\t"
           << format_real(r.max_completeness_gap) << "\n";
    }
    const std::string path = "attribution/modality.tsv";
    write_text_file(run.dir / path, text.str());
    put_artifact(run.manifest, run.dir, {"attribution", path, "", 0, 0});
    result.files.push_back(run.dir / path);
    out << "wrote " << (run.dir / path).string() << "\n";
  }
  run.manifest.updated_at = utc_timestamp();
  run.manifest.save(manifest_path);
  return result;
}

nlohmann::json compare_reports(const nlohmann::json& a, const nlohmann::json& b) {
  if (a.at("split") != b.at("split")) {
    fail(ErrorKind::kInvalidArgument, "reports are on different splits");
  }
  const auto& pa = a.at("prompts");
  const auto& pb = b.at("prompts");
  if (pa.size() != pb.size()) fail(ErrorKind::kInvalidArgument, "reports cover different prompts");

  nlohmann::json per_prompt = nlohmann::json::array();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i].at("prompt") != pb[i].at("prompt")) {
      fail(ErrorKind::kInvalidArgument, "reports cover different prompts");
    }
    per_prompt.push_back({{"prompt", pa[i].at("prompt")},
                          {"qwk", delta(pa[i].at("qwk"), pb[i].at("qwk"))},
                          {"mse", delta(pa[i].at("mse"), pb[i].at("mse"))},
                          {"high_bias", delta(pa[i].at("high_bias_count"), pb[i].at("high_bias_count"))}});
  }
  const int hb_a = a.at("high_bias_total");
  const int hb_b = b.at("high_bias_total");
  nlohmann::json high_bias{{"a", hb_a}, {"b", hb_b}, {"reduction", hb_a - hb_b}};
  high_bias["reduction_pct"] =
      hb_a != 0 ? nlohmann::json(static_cast<double>(hb_a - hb_b) / hb_a * 100.0)
                : nlohmann::json(nullptr);

  const auto& sa = a.at("speaker_accuracy");
  const auto& sb = b.at("speaker_accuracy");
  nlohmann::json at_least = nlohmann::json::array();
  for (std::size_t k = 0; k < sa.at("at_least_k").size() && k < sb.at("at_least_k").size(); ++k) {
    at_least.push_back(sb.at("at_least_k")[k].get<int>() - sa.at("at_least_k")[k].get<int>());
  }
  return {{"split", a.at("split")},
          {"strategy_a", a.at("strategy")},
          {"strategy_b", b.at("strategy")},
          {"per_prompt", per_prompt},
          {"average_qwk", delta(a.at("average_qwk"), b.at("average_qwk"))},
          {"average_mse", delta(a.at("average_mse"), b.at("average_mse"))},
          {"speaker_accuracy",
           {{"mean_correct", delta(sa.at("mean_correct"), sb.at("mean_correct"))},
            {"at_least_k_delta", at_least}}},
          {"high_bias", high_bias}};
}

nlohmann::json cmd_compare(const fs::path& manifest_a, const fs::path& manifest_b, Split split,
                           const fs::path& output_path, std::ostream& out) {
  const RunManifest a = RunManifest::load(manifest_a);
  const RunManifest b = RunManifest::load(manifest_b);
  if (a.corpus_hash != b.corpus_hash) {
    fail(ErrorKind::kInvalidArgument, "runs were trained on different corpora");
  }
  if (a.config.seed != b.config.seed) {
    fail(ErrorKind::kInvalidArgument, "runs use different seeds, so their splits differ");
  }
  const std::string report = "reports/report_" + split_name(split) + ".json";
  auto load_report = [&](const RunManifest& m, const fs::path& path) {
    const auto reports = m.with_role("report");
    const bool listed = std::any_of(reports.begin(), reports.end(),
                                    [&](const Artifact& r) { return r.path == report; });
    if (!listed) {
      fail(ErrorKind::kMissingKey,
           path.string() + " has no " + split_name(split) + " report; run evaluate first");
    }
    return nlohmann::json::parse(read_text_file(path.parent_path() / report));
  };
  nlohmann::json result = compare_reports(load_report(a, manifest_a), load_report(b, manifest_b));
  result["manifest_a"] = manifest_a.string();
  result["manifest_b"] = manifest_b.string();
  write_text_file(output_path, result.dump(2) + "\n");
  const auto& q = result["average_qwk"];
  out << "average qwk " << format_real(q["a"]) << " -> " << format_real(q["b"]);
  if (!q["relative_pct"].is_null()) out << " (" << format_real(q["relative_pct"]) << "%)";
  out << "\nhigh-bias " << result["high_bias"]["a"] << " -> " << result["high_bias"]["b"] << "\n";
  return result;
}

}  // namespace speakerctx
