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

#include <chrono>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace httplib {
class Server;
}

namespace metarec {

struct EmbeddingVector {
  std::vector<float> values;
  std::string model_tag;

  std::size_t dim() const { return values.size(); }

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

// Higher is more relevant. Only comparable within one cross-encoder backend.
struct PairScore {
  double score = 0.0;

  friend bool operator==(const PairScore&, const PairScore&) = default;
};

enum class BackendKind { kStub, kRemote };

struct BackendConfig {
  BackendKind kind = BackendKind::kStub;
  std::size_t dim = 384;
  // Base URL of a model server speaking the /embed + /score JSON contract,
  // e.g. "http://127.0.0.1:9000". Required for kRemote.
  std::string endpoint;
  std::chrono::milliseconds timeout{10'000};
  // Texts per HTTP request.
  std::size_t max_batch = 64;
  // Concurrent requests per remote client.
  std::size_t max_in_flight = 8;

  // Throws ConfigError.
  void validate() const;
};

class BiEncoder {
 public:
  virtual ~BiEncoder() = default;
  // One vector per text, in order.
  virtual std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::string model_tag() const = 0;
};

class CrossEncoder {
 public:
  virtual ~CrossEncoder() = default;
  // One score per (query, prompt) pair, in prompt order.
  virtual std::vector<PairScore> score_pairs(std::string_view query,
                                             std::span<const std::string> prompts) const = 0;
  virtual std::string model_tag() const = 0;
};

std::shared_ptr<const BiEncoder> make_bi_encoder(const BackendConfig& cfg);
std::shared_ptr<const CrossEncoder> make_cross_encoder(const BackendConfig& cfg);

// One-shot helpers that build the backend from `cfg` for a single call.
std::vector<EmbeddingVector> embed(std::span<const std::string> texts, const BackendConfig& cfg);
std::vector<PairScore> score_pairs(std::string_view query, std::span<const std::string> prompts,
                                   const BackendConfig& cfg);

// Hermetic reference embedding: signed hashed character 3-grams of the
// ASCII-lowercased text, L2-normalized. Texts shorter than three bytes hash
// as a single gram. Empty text (or a bag that cancels to zero) maps to e0.
EmbeddingVector stub_embed(std::string_view text, std::size_t dim);

// Reference cross-encoder score: cosine of the stub embeddings plus
// 0.1 * Jaccard overlap of the lowercased word sets.
double stub_pair_score(std::string_view query, std::string_view prompt, std::size_t dim);

// Jaccard index of the lowercased alphanumeric word sets; 0 when both are empty.
double word_jaccard(std::string_view a, std::string_view b);

// Registers POST /embed and POST /score on `server`, answering with the
// given backends. This is the server half of the remote wire contract.
void register_backend_routes(httplib::Server& server, std::shared_ptr<const BiEncoder> bi,
                             std::shared_ptr<const CrossEncoder> cross);

}  // namespace metarec
