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

#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "metarec/encoder.hpp"
#include "metarec/index.hpp"

namespace metarec {

struct RerankConfig {
  // Pairs per cross-encoder call.
  std::size_t batch_size = 4;
  std::size_t top_n = 5;
  // Stage-1 shortlist size.
  std::size_t top_k = 100;

  // Throws ConfigError unless 1 <= top_n <= top_k and 1 <= batch_size <= top_k.
  void validate() const;
};

struct RankedResult {
  std::string doc_id;
  double cross_score = 0.0;
  // Stage-1 cosine, carried for diagnostics only.
  double retrieval_score = 0.0;
  std::size_t rank = 0;

  friend bool operator==(const RankedResult&, const RankedResult&) = default;
};

using PromptMap = std::unordered_map<std::string, std::string>;

PromptMap to_prompt_map(std::span<const PromptRecord> records);

// Views into `query` and `prompts`; they must outlive the result.
struct ScoringPair {
  std::string_view query;
  std::string_view prompt;
};

// One pair per candidate, in candidate order. Throws MissingPrompt.
std::vector<ScoringPair> make_pairs(std::string_view query, std::span<const Candidate> candidates,
                                    const PromptMap& prompts);

// Scores every candidate in ceil(|candidates| / batch_size) sequential calls
// and keeps the best min(top_n, |candidates|) by cross score, ties by id.
std::vector<RankedResult> rerank(std::string_view query, std::span<const Candidate> candidates,
                                 const PromptMap& prompts, const RerankConfig& cfg,
                                 const CrossEncoder& encoder);
std::vector<RankedResult> rerank(std::string_view query, std::span<const Candidate> candidates,
                                 const PromptMap& prompts, const RerankConfig& cfg,
                                 const BackendConfig& backend);

// Everything one query needs. All members come from the same build.
struct Pipeline {
  std::shared_ptr<const BiEncoder> bi_encoder;
  std::shared_ptr<const CrossEncoder> cross_encoder;
  std::shared_ptr<const EmbeddingIndex> index;
  std::shared_ptr<const PromptMap> prompts;
};

// Stage 1 alone: embed the query and take the top `k` by cosine.
std::vector<Candidate> retrieve(std::string_view query, const Pipeline& pipeline, std::size_t k);

// Embed, retrieve top_k, rerank, return top_n.
std::vector<RankedResult> run_pipeline(std::string_view query, const Pipeline& pipeline,
                                       const RerankConfig& cfg);

}  // namespace metarec
