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


#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "speakerctx/strategies.hpp"

namespace speakerctx {
namespace {

Eigen::VectorXf filled(int dim, float value) { return Eigen::VectorXf::Constant(dim, value); }

// Store with one speaker "s" whose prompt-k vector is constant k.
ContextStore constant_store(const std::vector<int>& dims, const std::vector<int>& write_order) {
  ContextStore store;
  for (int k : write_order) {
    const int d = dims[k - 1];
    store.write_prompt(k, {d, d, "test"}, {{"s", filled(d, static_cast<float>(k))}});
  }
  return store;
}

std::vector<int> ascending(int n) {
  std::vector<int> v(n);
  std::iota(v.begin(), v.end(), 1);
  return v;
}

EncoderConfig small_encoder(int vocab = 20) {
  return EncoderConfig{vocab, 4, 3, Pooling::kAttention, 0, 0, 512};
}

// ---------------------------------------------------------------------------
// Baseline head
// ---------------------------------------------------------------------------

ScoringModel baseline_with_hidden(int hidden) {
  EncoderConfig cfg{10, 2, hidden, Pooling::kAttention, 0, 0, 512};
  ScoringModel m(1, Strategy::kBaseline, cfg, {});
  m.initialize(3);
  return m;
}

TEST(ScoreBaselineTest, HandWorkedHead) {
  // Hidden dim 1 gives a 2-d context vector.
  ScoringModel m = baseline_with_hidden(1);
  m.head_weights() = Eigen::Vector2d(0.5, 0.5);
  m.head_bias() = 0.25;
  EXPECT_DOUBLE_EQ(m.score(Eigen::Vector2d(1, -1)), 0.25);
}

TEST(ScoreBaselineTest, ZeroHeadIsConstant) {
  ScoringModel m = baseline_with_hidden(2);
  m.head_weights().setZero();
  m.head_bias() = 0.7;
  const std::vector<std::int32_t> a = {1, 2, 3}, b = {9, 9};
  EXPECT_EQ(score_baseline(m, {a, {}, {}}), 0.7);
  EXPECT_EQ(score_baseline(m, {b, {}, {}}), 0.7);
}

TEST(ScoreBaselineTest, HeadIsLinear) {
  ScoringModel m = baseline_with_hidden(2);
  const std::vector<std::int32_t> tokens = {4, 5, 6};
  const double o = score_baseline(m, {tokens, {}, {}});
  m.head_weights() *= 2.0;
  m.head_bias() *= 2.0;
  EXPECT_NEAR(score_baseline(m, {tokens, {}, {}}), 2.0 * o, 1e-14);
}

TEST(ScoreBaselineTest, Errors) {
  ScoringModel m = baseline_with_hidden(2);
  EXPECT_THROW(m.score(Eigen::VectorXd::Zero(3)), Error);
  ScoringModel one(2, Strategy::kOneStage, small_encoder(), {{1, {0, 6}}});
  one.initialize(1);
  const std::vector<std::int32_t> tokens = {1};
  EXPECT_THROW(score_baseline(one, {tokens, {}, Eigen::VectorXd::Zero(6)}), Error);
}

TEST(ScoringModelTest, BaselineCannotHavePrefix) {
  EXPECT_THROW(ScoringModel(2, Strategy::kBaseline, small_encoder(), {{1, {0, 6}}}), Error);
}

TEST(ScoringModelTest, PrefixMustTile) {
  EXPECT_THROW(ScoringModel(3, Strategy::kOneStage, small_encoder(), {{1, {0, 6}}, {2, {7, 13}}}),
               Error);
}

// ---------------------------------------------------------------------------
// Context bookkeeping
// ---------------------------------------------------------------------------

TEST(ContextDimTest, AllStrategiesAllPrompts) {
  std::mt19937_64 rng(5);
  for (int p = 1; p <= 6; ++p) {
    for (int trial = 0; trial < 10; ++trial) {
      std::map<int, int> dims;
      for (int k = 1; k <= p; ++k) dims[k] = 1 + static_cast<int>(rng() % 9);
      for (int j = 1; j <= p; ++j) {
        int upto = 0, all = 0;
        for (const auto& [k, d] : dims) {
          all += d;
          if (k <= j) upto += d;
        }
        EXPECT_EQ(expected_context_dim(Strategy::kBaseline, j, dims), dims[j]);
        EXPECT_EQ(expected_context_dim(Strategy::kOneStage, j, dims), upto);
        EXPECT_EQ(expected_context_dim(Strategy::kTwoStage, j, dims), all - dims[j] + dims[j]);
      }
    }
  }
}

TEST(ConditioningSourcesTest, Order) {
  EXPECT_TRUE(conditioning_sources(Strategy::kBaseline, 3, 6).empty());
  EXPECT_EQ(conditioning_sources(Strategy::kOneStage, 3, 6), (std::vector<int>{1, 2}));
  EXPECT_EQ(conditioning_sources(Strategy::kTwoStage, 3, 6), (std::vector<int>{1, 2, 4, 5, 6}));
  EXPECT_TRUE(conditioning_sources(Strategy::kOneStage, 1, 6).empty());
}

TEST(OneStageContextTest, FirstPromptIsBaselineInput) {
  const ContextStore store;
  const Eigen::VectorXd c = Eigen::Vector3d(1, 2, 3);
  const auto ctx = build_one_stage_context(store, "s", 1, c);
  EXPECT_EQ(ctx.values, c);
  ASSERT_EQ(ctx.layout.size(), 1u);
  EXPECT_EQ(ctx.layout[0], (Segment{1, {0, 3}}));
}

TEST(OneStageContextTest, ThirdPromptLayout) {
  const ContextStore store = constant_store({4, 4, 4}, {1, 2});
  const auto ctx = build_one_stage_context(store, "s", 3, Eigen::VectorXd::Constant(4, 3.0));
  EXPECT_EQ(ctx.values.size(), 12);
  ASSERT_EQ(ctx.layout.size(), 3u);
  for (int k = 0; k < 3; ++k) {
    EXPECT_EQ(ctx.layout[k].source_prompt, k + 1);
    EXPECT_EQ(ctx.layout[k].range, (Slice{4 * k, 4 * k + 4}));
    EXPECT_TRUE((ctx.values.segment(4 * k, 4).array() == k + 1).all());
  }
}

TEST(OneStageContextTest, InsertionOrderIrrelevant) {
  const ContextStore a = constant_store({2, 3, 4, 1}, {1, 2, 3});
  const ContextStore b = constant_store({2, 3, 4, 1}, {3, 1, 2});
  const Eigen::VectorXd c = Eigen::VectorXd::Constant(1, 9.0);
  const auto ca = build_one_stage_context(a, "s", 4, c);
  const auto cb = build_one_stage_context(b, "s", 4, c);
  EXPECT_EQ(ca.values, cb.values);
  EXPECT_EQ(ca.layout, cb.layout);
}

TEST(OneStageContextTest, MissingPredecessorNamed) {
  const ContextStore store = constant_store({2, 2, 2}, {1});
  try {
    build_one_stage_context(store, "s", 3, Eigen::VectorXd::Zero(2));
    FAIL() << "expected an error";
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("s"), std::string::npos);
    EXPECT_NE(msg.find("2"), std::string::npos);
  }
}

TEST(TwoStageContextTest, SixPromptsOfWidthFour) {
  const ContextStore store = constant_store({4, 4, 4, 4, 4, 4}, ascending(6));
  const auto ctx = build_two_stage_context(store, "s", 4, 6, Eigen::VectorXd::Constant(4, -1.0));
  EXPECT_EQ(ctx.values.size(), 24);
  const std::vector<int> order = {1, 2, 3, 5, 6, 4};
  ASSERT_EQ(ctx.layout.size(), 6u);
  for (int s = 0; s < 6; ++s) EXPECT_EQ(ctx.layout[s].source_prompt, order[s]);
  EXPECT_TRUE((ctx.values.tail(4).array() == -1.0).all());
  EXPECT_TRUE((ctx.values.segment(12, 4).array() == 5.0).all());
}

TEST(TwoStageContextTest, TwoPrompts) {
  const ContextStore store = constant_store({3, 2}, {1, 2});
  const Eigen::VectorXd c = Eigen::Vector2d(7, 8);
  const auto ctx = build_two_stage_context(store, "s", 2, 2, c);
  Eigen::VectorXd expected(5);
  expected << 1, 1, 1, 7, 8;
  EXPECT_EQ(ctx.values, expected);
}

TEST(TwoStageContextTest, MissingStoredVector) {
  const ContextStore store = constant_store({2, 2, 2}, {1, 2});
  EXPECT_THROW(build_two_stage_context(store, "s", 1, 3, Eigen::VectorXd::Zero(2)), Error);
  EXPECT_THROW(build_two_stage_context(store, "t", 3, 3, Eigen::VectorXd::Zero(2)), Error);
}

TEST(TwoStageContextTest, ZeroedStoreLeavesOnlyCurrentSegment) {
  ContextStore store;
  for (int k : {1, 2, 4}) store.write_prompt(k, {6, 6, ""}, {{"s", Eigen::VectorXf::Zero(6)}});
  std::vector<Segment> layout;
  for (int k : {1, 2, 4}) {
    const int b = static_cast<int>(layout.size()) * 6;
    layout.push_back({k, {b, b + 6}});
  }
  ScoringModel model(3, Strategy::kTwoStage, small_encoder(), layout);
  model.initialize(8);
  model.head_weights().head(18).setRandom();
  const Eigen::VectorXd c = Eigen::VectorXd::Random(6);
  const auto ctx = build_two_stage_context(store, "s", 3, 4, c);
  const double expected = model.head_weights().tail(6).dot(c) + model.head_bias();
  EXPECT_NEAR(model.score(ctx.values), expected, 1e-14);
}

// ---------------------------------------------------------------------------
// Context store
// ---------------------------------------------------------------------------

TEST(ContextStoreTest, WriteOnce) {
  ContextStore store = constant_store({2, 2}, {1});
  EXPECT_THROW(store.write_prompt(1, {2, 2, ""}, {{"s", filled(2, 0)}}), Error);
}

TEST(ContextStoreTest, DimensionMustMatch) {
  ContextStore store;
  EXPECT_THROW(store.write_prompt(1, {3, 3, ""}, {{"a", filled(3, 0)}, {"b", filled(2, 0)}}),
               Error);
}

TEST(ContextStoreTest, MissingKeyNamed) {
  const ContextStore store = constant_store({2}, {1});
  try {
    store.get("nobody", 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("nobody"), std::string::npos);
  }
}

TEST(ContextStoreTest, RoundTripBitExact) {
  std::mt19937_64 rng(11);
  std::normal_distribution<float> n(0.0f, 1e3f);
  ContextStore store;
  for (int k = 1; k <= 3; ++k) {
    std::map<std::string, Eigen::VectorXf> vectors;
    for (int s = 0; s < 25; ++s) {
      Eigen::VectorXf v(5 + k);
      for (auto& x : v) x = n(rng);
      vectors.emplace("spk" + std::to_string(s), v);
    }
    vectors["spk0"][0] = std::numeric_limits<float>::denorm_min();
    vectors["spk1"][0] = -0.0f;
    store.write_prompt(k, {5 + k, 4, "baseline/stage1/prompt" + std::to_string(k)}, vectors);
  }
  const auto path = std::filesystem::temp_directory_path() / "speakerctx_store.bin";
  store.save(path);
  const ContextStore back = ContextStore::load(path);
  EXPECT_TRUE(back == store);
  EXPECT_EQ(back.prompt_info(2), store.prompt_info(2));
  EXPECT_TRUE(std::signbit(back.get("spk1", 1)[0]));
}

TEST(ContextStoreTest, RejectsForeignFile) {
  const auto path = std::filesystem::temp_directory_path() / "speakerctx_not_a_store.bin";
  {
    std::ofstream out(path, std::ios::binary);
    out << "CTXSTORE0 garbage";
  }
  EXPECT_THROW(ContextStore::load(path), Error);
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

struct Fixture {
  Corpus corpus;
  SplitAssignment split;
};

Fixture make_fixture(int speakers, int prompts, std::uint64_t seed) {
  SyntheticCorpusOptions o;
  o.num_speakers = speakers;
  o.prompts = default_prompt_specs(prompts);
  o.seed = seed;
  o.audio_dim = 0;
  Corpus corpus = generate_synthetic_corpus(o);
  SplitAssignment split = stratified_split(corpus.panels(), derive_seed(seed, "split"));
  return {std::move(corpus), std::move(split)};
}

PipelineConfig pipeline_config(Strategy strategy, const Corpus& corpus, int epochs = 3) {
  PipelineConfig c;
  c.strategy = strategy;
  c.encoder = small_encoder(corpus.vocab_size());
  c.train.max_epochs = epochs;
  c.train.learning_rate = 0.01;
  c.seed = 21;
  return c;
}

std::set<std::string> all_speakers(const Corpus& corpus) {
  std::set<std::string> s;
  for (const auto& p : corpus.panels()) s.insert(p.speaker_id);
  return s;
}

TEST(PipelineTest, BaselineStoreSize) {
  const Fixture f = make_fixture(60, 3, 1);
  const auto r = run_pipeline(f.corpus, f.split, pipeline_config(Strategy::kBaseline, f.corpus));
  EXPECT_EQ(r.models.size(), 3u);
  EXPECT_EQ(r.store.size(), 60u * 3);
  for (const auto& run : r.models) EXPECT_EQ(run.model.prefix_dim(), 0);
}

TEST(PipelineTest, OneStageStoreAndDimensions) {
  const Fixture f = make_fixture(60, 3, 2);
  const auto r = run_pipeline(f.corpus, f.split, pipeline_config(Strategy::kOneStage, f.corpus));
  EXPECT_EQ(r.store.size(), 60u * 3);
  for (const auto& run : r.models) {
    EXPECT_EQ(run.model.expected_context_dim(), 6 * run.model.prompt_index());
  }
}

TEST(PipelineTest, TwoStageStructure) {
  const Fixture f = make_fixture(60, 4, 3);
  const auto r = run_pipeline(f.corpus, f.split, pipeline_config(Strategy::kTwoStage, f.corpus));
  EXPECT_EQ(r.stage_one.size(), 4u);
  EXPECT_EQ(r.models.size(), 4u);
  for (const auto& run : r.models) {
    EXPECT_EQ(run.stage, 2);
    EXPECT_EQ(run.model.expected_context_dim(), 4 * 6);
  }
  EXPECT_EQ(r.store.size(), 60u * 4);
}

TEST(PipelineTest, PromptOneEquivalence) {
  const Fixture f = make_fixture(60, 3, 4);
  const auto base = run_pipeline(f.corpus, f.split, pipeline_config(Strategy::kBaseline, f.corpus));
  const auto one = run_pipeline(f.corpus, f.split, pipeline_config(Strategy::kOneStage, f.corpus));
  const auto speakers = all_speakers(f.corpus);
  const auto pb = predict_prompt(f.corpus, base.store, base.models[0].model, speakers);
  const auto po = predict_prompt(f.corpus, one.store, one.models[0].model, speakers);
  EXPECT_EQ(pb, po);
  EXPECT_EQ(base.models[0].log, one.models[0].log);
}

TEST(PipelineTest, SinglePromptStrategiesCoincide) {
  const Fixture f = make_fixture(40, 1, 5);
  const auto speakers = all_speakers(f.corpus);
  std::map<std::string, double> reference;
  for (Strategy s : {Strategy::kBaseline, Strategy::kOneStage, Strategy::kTwoStage}) {
    const auto r = run_pipeline(f.corpus, f.split, pipeline_config(s, f.corpus));
    ASSERT_EQ(r.models.size(), 1u);
    const auto p = predict_prompt(f.corpus, r.store, r.models[0].model, speakers);
    if (reference.empty()) reference = p;
    EXPECT_EQ(p, reference) << strategy_name(s);
  }
}

TEST(PipelineTest, NoTestLabelsRead) {
  const Fixture f = make_fixture(60, 3, 6);
  for (Strategy s : {Strategy::kBaseline, Strategy::kOneStage, Strategy::kTwoStage}) {
    const auto r = run_pipeline(f.corpus, f.split, pipeline_config(s, f.corpus, 1));
    EXPECT_GT(r.audit.reads, 0);
    for (const auto& speaker : f.split.test) {
      EXPECT_EQ(r.audit.speakers.count(speaker), 0u) << strategy_name(s) << " read " << speaker;
    }
    // Test speakers still get stored vectors, from forward passes.
    for (const auto& speaker : f.split.test) EXPECT_TRUE(r.store.contains(speaker, 1));
  }
}

TEST(PipelineTest, StoredVectorsMatchFinalEncoders) {
  const Fixture f = make_fixture(40, 3, 7);
  const auto r = run_pipeline(f.corpus, f.split, pipeline_config(Strategy::kOneStage, f.corpus));
  // Prompt 1's vectors were written before prompts 2 and 3 trained; they must
  // still equal what prompt 1's model produces.
  for (const auto& panel : f.corpus.panels()) {
    const Response& resp = panel.responses.at(1);
    const Eigen::VectorXf expected =
        r.models[0].model.encode(resp.tokens, Eigen::VectorXd()).cast<float>();
    EXPECT_EQ(r.store.get(panel.speaker_id, 1), expected);
  }
}

TEST(PipelineTest, WarmStartReproducesStageOne) {
  const Fixture f = make_fixture(60, 3, 8);
  const auto r = run_pipeline(f.corpus, f.split, pipeline_config(Strategy::kTwoStage, f.corpus));
  const auto speakers = all_speakers(f.corpus);
  for (const auto& stage_one : r.stage_one) {
    const int j = stage_one.model.prompt_index();
    std::vector<Segment> layout;
    int offset = 0;
    for (int k : conditioning_sources(Strategy::kTwoStage, j, 3)) {
      layout.push_back({k, {offset, offset + 6}});
      offset += 6;
    }
    const ScoringModel warm = ScoringModel::warm_start(stage_one.model, Strategy::kTwoStage, layout);
    EXPECT_TRUE(warm.head_weights().head(offset).isZero(0.0));
    const auto a = predict_prompt(f.corpus, r.store, stage_one.model, speakers);
    const auto b = predict_prompt(f.corpus, r.store, warm, speakers);
    for (const auto& [s, v] : a) EXPECT_NEAR(b.at(s), v, 1e-12);
  }
}

TEST(PipelineTest, DeterministicAcrossJobCounts) {
  const Fixture f = make_fixture(60, 3, 9);
  auto c1 = pipeline_config(Strategy::kTwoStage, f.corpus);
  auto c2 = c1;
  c2.jobs = 3;
  const auto a = run_pipeline(f.corpus, f.split, c1);
  const auto b = run_pipeline(f.corpus, f.split, c2);
  EXPECT_TRUE(a.store == b.store);
  for (std::size_t j = 0; j < a.models.size(); ++j) {
    EXPECT_EQ(a.models[j].model.parameters(), b.models[j].model.parameters());
  }
}

TEST(PipelineTest, CallbackSeesEveryModel) {
  const Fixture f = make_fixture(40, 3, 10);
  std::vector<std::pair<int, int>> seen;
  run_pipeline(f.corpus, f.split, pipeline_config(Strategy::kTwoStage, f.corpus, 1),
               [&](const PromptRun& run) { seen.emplace_back(run.model.prompt_index(), run.stage); });
  const std::vector<std::pair<int, int>> expected = {{1, 1}, {2, 1}, {3, 1}, {1, 2}, {2, 2}, {3, 2}};
  EXPECT_EQ(seen, expected);
}

TEST(CheckpointTest, RoundTrip) {
  const Fixture f = make_fixture(40, 2, 11);
  const auto r = run_pipeline(f.corpus, f.split, pipeline_config(Strategy::kTwoStage, f.corpus, 1));
  const auto path = std::filesystem::temp_directory_path() / "speakerctx_ckpt.json";
  const ScoringModel& model = r.models[1].model;
  save_checkpoint(model, "abc123", path);
  std::string hash;
  const ScoringModel back = load_checkpoint(path, &hash);
  EXPECT_EQ(hash, "abc123");
  EXPECT_EQ(back.parameters(), model.parameters());
  EXPECT_EQ(back.prefix_layout(), model.prefix_layout());
  EXPECT_EQ(back.strategy(), Strategy::kTwoStage);
  EXPECT_EQ(back.encoder().config(), model.encoder().config());
}

TEST(StrategyNameTest, RoundTrip) {
  for (Strategy s : {Strategy::kBaseline, Strategy::kOneStage, Strategy::kTwoStage}) {
    EXPECT_EQ(parse_strategy(strategy_name(s)), s);
  }
  EXPECT_THROW(parse_strategy("three-stage"), Error);
}

}  // namespace
}  // namespace speakerctx
