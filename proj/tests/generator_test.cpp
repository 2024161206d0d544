// Copyright 2026 The Synthesis Harness Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <thread>

#include <json.hpp>

#include "synth/error.h"
#include "synth/generator.h"
#include "testing.h"

namespace synth {
namespace {

using testing::RandomScorer;

Instance sample_instance() {
  Instance inst;
  inst.id = "inst-1";
  inst.documents = {{"d1", "good"}, {"d2", "bad"}};
  inst.reference_summary = "mixed";
  inst.gold.value = 0.5;
  return inst;
}

TEST(DecodingGenerator, DispatchesOnMode) {
  auto scorer = std::make_shared<RandomScorer>(3, 12);
  const Instance inst = sample_instance();

  DecodeConfig b;
  b.beam_width = 3;
  b.max_tokens = 4;
  const auto via_gen = DecodingGenerator(scorer, b).generate({inst, "cond", std::nullopt});
  const auto direct = beam_search(*scorer, "cond", b);
  ASSERT_EQ(via_gen.candidates.size(), direct.candidates.size());
  for (std::size_t i = 0; i < direct.candidates.size(); ++i)
    EXPECT_EQ(via_gen.candidates[i].tokens, direct.candidates[i].tokens);
  EXPECT_EQ(via_gen.source_instance, "inst-1");

  DecodeConfig d = b;
  d.mode = DecodeMode::kDiverseBeam;
  d.groups = 3;
  const auto diverse = DecodingGenerator(scorer, d).generate({inst, "cond", std::nullopt});
  EXPECT_EQ(diverse.candidates.size(), 3u);
  EXPECT_EQ(diverse.candidates[2].group, 2u);
}

TEST(DecodingGenerator, ConstrainedNeedsMeasurerAndTarget) {
  auto scorer = std::make_shared<RandomScorer>(3, 12);
  DecodeConfig c;
  c.mode = DecodeMode::kConstrainedBeam;
  c.epsilon = 0.5;
  c.max_tokens = 3;
  EXPECT_THROW(DecodingGenerator(scorer, c), ConfigError);
  const DecodingGenerator gen(scorer, c, std::make_shared<testing::TagMeasurer>());
  const Instance inst = sample_instance();
  EXPECT_THROW(gen.generate({inst, "x", std::nullopt}), DomainError);
  EXPECT_FALSE(gen.generate({inst, "x", 0.5}).candidates.empty());
}

TEST(DecodingGenerator, RejectsBadConfig) {
  auto scorer = std::make_shared<RandomScorer>(3, 12);
  DecodeConfig c;
  c.beam_width = 0;
  EXPECT_THROW(DecodingGenerator(scorer, c), ConfigError);
  EXPECT_THROW(DecodingGenerator(nullptr, DecodeConfig{}), ConfigError);
}

TEST(DecodingGenerator, DeterministicAcrossThreads) {
  auto scorer = std::make_shared<RandomScorer>(4, 3);
  DecodeConfig c;
  c.mode = DecodeMode::kDiverseBeam;
  c.max_tokens = 6;
  const DecodingGenerator gen(scorer, c);
  const Instance inst = sample_instance();
  const auto ref = gen.generate({inst, "q", std::nullopt});
  std::vector<std::thread> threads;
  std::vector<CandidateSet> out(4);
  for (std::size_t t = 0; t < out.size(); ++t)
    threads.emplace_back([&, t] { out[t] = gen.generate({inst, "q", std::nullopt}); });
  for (auto& th : threads) th.join();
  for (const auto& o : out) {
    ASSERT_EQ(o.candidates.size(), ref.candidates.size());
    for (std::size_t i = 0; i < o.candidates.size(); ++i) EXPECT_EQ(o.candidates[i].tokens, ref.candidates[i].tokens);
  }
}

TEST(GenerationRequest, WireFormat) {
  const auto line = format_generation_request("g7", "a \"quoted\"\ntext", 5, 0.6, "sample");
  const auto j = nlohmann::json::parse(line);
  EXPECT_EQ(j["req_id"], "g7");
  EXPECT_EQ(j["conditioning"], "a \"quoted\"\ntext");
  EXPECT_EQ(j["n"], 5);
  EXPECT_EQ(j["temperature"], 0.6);
  EXPECT_EQ(j["mode"], "sample");
  EXPECT_EQ(line.find('\n'), std::string::npos);
}

TEST(SampleExternal, ZeroSamplesRejected) {
  EXPECT_THROW(sample_external("exec:cat", "x", 0, 0.6), DomainError);
}

}  // namespace
}  // namespace synth
