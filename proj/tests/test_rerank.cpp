// Copyright 2026 The metarec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <doctest.h>

#include <atomic>
#include <mutex>

#include "metarec/errors.hpp"
#include "metarec/fixtures.hpp"
#include "metarec/rerank.hpp"

using namespace metarec;

namespace {

struct Built {
  std::vector<PromptRecord> records;
  Pipeline pipeline;
};

Built build(std::size_t docs, std::uint64_t seed) {
  auto cat = fixtures::synthetic_catalog(fixtures::sales_schema(), docs, seed);
  Built b;
  b.records = compile_all(cat);
  BackendConfig cfg;
  cfg.dim = 128;
  auto bi = make_bi_encoder(cfg);
  b.pipeline = Pipeline{bi, make_cross_encoder(cfg),
                        std::make_shared<const EmbeddingIndex>(build_index(b.records, *bi)),
                        std::make_shared<const PromptMap>(to_prompt_map(b.records))};
  return b;
}

// Records the size of every call and returns a constant score.
class CountingCross : public CrossEncoder {
 public:
  std::vector<PairScore> score_pairs(std::string_view,
                                     std::span<const std::string> prompts) const override {
    std::lock_guard lock(mu_);
    calls.push_back(prompts.size());
    return std::vector<PairScore>(prompts.size(), PairScore{0.5});
  }
  std::string model_tag() const override { return "counting"; }
  mutable std::vector<std::size_t> calls;

 private:
  mutable std::mutex mu_;
};

}  // namespace

TEST_SUITE("rerank") {
  TEST_CASE("config validation") {
    RerankConfig c;
    CHECK_NOTHROW(c.validate());
    c.top_n = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.top_n = 101;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }

  TEST_CASE("pairs follow candidate order") {
    PromptMap prompts{{"a", "pa"}, {"b", "pb"}};
    std::vector<Candidate> cands = {{"b", 0.9}, {"a", 0.1}};
    auto pairs = make_pairs("q", cands, prompts);
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0].prompt == "pb");
    CHECK(pairs[1].query == "q");
    CHECK(make_pairs("q", {}, prompts).empty());
    cands.push_back({"c", 0.0});
    try {
      make_pairs("q", cands, prompts);
      FAIL("no error for a missing prompt");
    } catch (const MissingPrompt& e) {
      CHECK(std::string(e.what()).find("\"c\"") != std::string::npos);
    }
  }

  TEST_CASE("exact query prompt wins") {
    const std::string q = "Dynamics 365 licensing PDF";
    PromptMap prompts{{"exact", q}, {"other", "format is MP4. topic is pricing."}};
    std::vector<Candidate> cands = {{"other", 0.9}, {"exact", 0.1}};
    RerankConfig cfg;
    cfg.top_n = 1;
    BackendConfig backend;
    // direct computation: 1 + 0.1 for the exact prompt against well under 1 for the other
    REQUIRE(stub_pair_score(q, q, backend.dim) > stub_pair_score(q, prompts["other"], backend.dim));
    auto out = rerank(q, cands, prompts, cfg, backend);
    REQUIRE(out.size() == 1);
    CHECK(out[0].doc_id == "exact");
    CHECK(out[0].cross_score == doctest::Approx(1.1));
  }

  TEST_CASE("batches are sequential slices of size b") {
    PromptMap prompts;
    std::vector<Candidate> cands;
    for (int i = 0; i < 10; ++i) {
      prompts["d" + std::to_string(i)] = "p";
      cands.push_back({"d" + std::to_string(i), 0.0});
    }
    CountingCross cross;
    RerankConfig cfg;
    cfg.batch_size = 4;
    cfg.top_n = 3;
    auto out = rerank("q", cands, prompts, cfg, cross);
    CHECK(cross.calls == std::vector<std::size_t>{4, 4, 2});
    // all scores tie: ascending id
    REQUIRE(out.size() == 3);
    CHECK(out[0].doc_id == "d0");
    CHECK(out[2].doc_id == "d2");
    CHECK(out[2].rank == 3);
  }

  TEST_CASE("fewer candidates than top_n") {
    PromptMap prompts{{"a", "pa"}};
    std::vector<Candidate> cands = {{"a", 0.3}};
    BackendConfig backend;
    auto out = rerank("q", cands, prompts, RerankConfig{}, backend);
    REQUIRE(out.size() == 1);
    CHECK(out[0].rank == 1);
    CHECK(out[0].retrieval_score == 0.3);
    CHECK_THROWS_AS(rerank("q", {}, prompts, RerankConfig{}, backend), ValidationError);
  }

  TEST_CASE("result is independent of the batch size") {
    auto b = build(400, 21);
    auto queries = fixtures::evaluation_queries();
    for (std::size_t qi = 0; qi < 6; ++qi) {
      RerankConfig cfg;
      cfg.top_k = 64;
      cfg.top_n = 10;
      cfg.batch_size = 1;
      auto ref = run_pipeline(queries[qi], b.pipeline, cfg);
      for (std::size_t bs : {2u, 3u, 7u, 16u, 64u}) {
        cfg.batch_size = bs;
        CHECK(run_pipeline(queries[qi], b.pipeline, cfg) == ref);
      }
    }
  }

  TEST_CASE("ranking agrees with pointwise scores") {
    auto b = build(300, 4);
    auto prompts = to_prompt_map(b.records);
    for (const auto& q : fixtures::evaluation_queries()) {
      auto cands = retrieve(q, b.pipeline, 50);
      RerankConfig cfg;
      cfg.top_k = 50;
      cfg.top_n = 10;
      auto out = rerank(q, cands, prompts, cfg, *b.pipeline.cross_encoder);
      REQUIRE(out.size() == 10);
      // best by argmax over an independent scoring of every candidate
      std::string best;
      double best_score = -1e9;
      for (const auto& c : cands) {
        double s = stub_pair_score(q, prompts.at(c.doc_id), 128);
        if (s > best_score || (s == best_score && c.doc_id < best)) {
          best = c.doc_id;
          best_score = s;
        }
      }
      CHECK(out.front().doc_id == best);
      for (std::size_t i = 0; i < out.size(); ++i) {
        CHECK(out[i].rank == i + 1);
        if (i > 0) CHECK(out[i - 1].cross_score >= out[i].cross_score);
      }
      // top_n = 3 is a prefix of top_n = 10
      cfg.top_n = 3;
      auto three = rerank(q, cands, prompts, cfg, *b.pipeline.cross_encoder);
      CHECK(std::equal(three.begin(), three.end(), out.begin()));
    }
  }

  TEST_CASE("retrieve and pipeline errors") {
    Pipeline empty{make_bi_encoder({}), make_cross_encoder({}),
                   std::make_shared<const EmbeddingIndex>(), std::make_shared<const PromptMap>()};
    CHECK_THROWS_AS(retrieve("q", empty, 5), EmptyIndex);
    auto b = build(20, 1);
    RerankConfig cfg;
    cfg.top_n = 0;
    CHECK_THROWS_AS(run_pipeline("q", b.pipeline, cfg), ConfigError);
  }
}
