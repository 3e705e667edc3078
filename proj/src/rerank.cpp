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

#include "metarec/rerank.hpp"

#include <algorithm>

#include "metarec/errors.hpp"
#include "metarec/log.hpp"

namespace metarec {

void RerankConfig::validate() const {
  if (top_k < 1) throw ConfigError("top_k must be >= 1");
  if (top_n < 1 || top_n > top_k) {
    throw ConfigError("top_n must be in [1, top_k], got " + std::to_string(top_n));
  }
  if (batch_size < 1 || batch_size > top_k) {
    throw ConfigError("batch_size must be in [1, top_k], got " + std::to_string(batch_size));
  }
}

PromptMap to_prompt_map(std::span<const PromptRecord> records) {
  PromptMap map;
  map.reserve(records.size());
  for (const auto& r : records) map.emplace(r.doc_id, r.prompt);
  return map;
}

std::vector<ScoringPair> make_pairs(std::string_view query, std::span<const Candidate> candidates,
                                    const PromptMap& prompts) {
  std::vector<ScoringPair> pairs;
  pairs.reserve(candidates.size());
  for (const auto& c : candidates) {
    auto it = prompts.find(c.doc_id);
    if (it == prompts.end()) throw MissingPrompt("no prompt for candidate \"" + c.doc_id + "\"");
    pairs.push_back({query, it->second});
  }
  return pairs;
}

std::vector<RankedResult> rerank(std::string_view query, std::span<const Candidate> candidates,
                                 const PromptMap& prompts, const RerankConfig& cfg,
                                 const CrossEncoder& encoder) {
  if (candidates.empty()) throw ValidationError("rerank: no candidates");
  if (cfg.batch_size < 1 || cfg.top_n < 1) throw ConfigError("batch_size and top_n must be >= 1");

  auto pairs = make_pairs(query, candidates, prompts);
  std::vector<std::string> texts;
  texts.reserve(pairs.size());
  std::size_t overlong = 0;
  const std::size_t query_tokens = estimate_tokens(query);
  for (const auto& p : pairs) {
    if (query_tokens + estimate_tokens(p.prompt) > kDefaultTokenBudget) ++overlong;
    texts.emplace_back(p.prompt);
  }
  if (overlong > 0) {
    log_warn(std::to_string(overlong) + " query/prompt pair(s) exceed the " +
             std::to_string(kDefaultTokenBudget) + "-token context estimate");
  }

  std::vector<double> scores;
  scores.reserve(texts.size());
  std::span<const std::string> all(texts);
  for (std::size_t begin = 0; begin < all.size(); begin += cfg.batch_size) {
    auto batch = all.subspan(begin, std::min(cfg.batch_size, all.size() - begin));
    auto got = encoder.score_pairs(query, batch);
    if (got.size() != batch.size()) {
      throw BackendUnavailable("cross-encoder returned " + std::to_string(got.size()) +
                               " scores for a batch of " + std::to_string(batch.size()));
    }
    for (const auto& s : got) scores.push_back(s.score);
  }

  std::vector<std::size_t> order(candidates.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto better = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return candidates[a].doc_id < candidates[b].doc_id;
  };
  std::size_t take = std::min(cfg.top_n, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    better);

  std::vector<RankedResult> out;
  out.reserve(take);
  for (std::size_t r = 0; r < take; ++r) {
    const auto& c = candidates[order[r]];
    out.push_back({c.doc_id, scores[order[r]], c.retrieval_score, r + 1});
  }
  return out;
}

std::vector<RankedResult> rerank(std::string_view query, std::span<const Candidate> candidates,
                                 const PromptMap& prompts, const RerankConfig& cfg,
                                 const BackendConfig& backend) {
  return rerank(query, candidates, prompts, cfg, *make_cross_encoder(backend));
}

std::vector<Candidate> retrieve(std::string_view query, const Pipeline& pipeline, std::size_t k) {
  if (!pipeline.index || pipeline.index->empty()) throw EmptyIndex("pipeline has an empty index");
  std::string text(query);
  auto vecs = pipeline.bi_encoder->embed(std::span<const std::string>(&text, 1));
  if (vecs.size() != 1) throw BackendUnavailable("encoder returned no query embedding");
  return top_k(*pipeline.index, vecs.front(), k);
}

std::vector<RankedResult> run_pipeline(std::string_view query, const Pipeline& pipeline,
                                       const RerankConfig& cfg) {
  cfg.validate();
  auto candidates = retrieve(query, pipeline, cfg.top_k);
  return rerank(query, candidates, *pipeline.prompts, cfg, *pipeline.cross_encoder);
}

}  // namespace metarec
