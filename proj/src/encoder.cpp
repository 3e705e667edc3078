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

#include "metarec/encoder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <semaphore>
#include <set>

#include "httplib.h"
#include "json.hpp"
#include "metarec/errors.hpp"

namespace metarec {

using nlohmann::json;

void BackendConfig::validate() const {
  if (dim < 8) throw ConfigError("embedding dim must be >= 8, got " + std::to_string(dim));
  if (max_batch < 1) throw ConfigError("max_batch must be >= 1");
  if (max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
  if (kind == BackendKind::kRemote && endpoint.empty()) {
    throw ConfigError("remote backend requires an endpoint");
  }
}

namespace {

constexpr double kJaccardWeight = 0.1;

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

char ascii_lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

// Normalized double-precision stub embedding; the public function rounds it to
// float.
std::vector<double> stub_embed_raw(std::string_view text, std::size_t dim) {
  std::vector<double> v(dim, 0.0);
  std::string lowered(text);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(), ascii_lower);

  auto add_gram = [&](std::string_view gram) {
    std::uint64_t h = fnv1a(gram);
    // High bit picks the sign, the rest picks the bucket.
    double sign = (h >> 63) ? -1.0 : 1.0;
    v[(h & 0x7fffffffffffffffULL) % dim] += sign;
  };
  if (!lowered.empty() && lowered.size() < 3) {
    add_gram(lowered);
  } else {
    for (std::size_t i = 0; i + 3 <= lowered.size(); ++i) {
      add_gram(std::string_view(lowered).substr(i, 3));
    }
  }

  double norm2 = 0.0;
  for (double x : v) norm2 += x * x;
  if (norm2 == 0.0) {
    v[0] = 1.0;
    return v;
  }
  double inv = 1.0 / std::sqrt(norm2);
  for (double& x : v) x *= inv;
  return v;
}

std::set<std::string> word_set(std::string_view text) {
  std::set<std::string> words;
  std::string cur;
  for (char c : text) {
    auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u) || u >= 0x80) {
      cur.push_back(ascii_lower(c));
    } else if (!cur.empty()) {
      words.insert(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.insert(std::move(cur));
  return words;
}

std::string stub_tag(std::size_t dim) { return "stub-3gram-d" + std::to_string(dim); }

class StubBiEncoder final : public BiEncoder {
 public:
  explicit StubBiEncoder(std::size_t dim) : dim_(dim) {}

  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const override {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(stub_embed(t, dim_));
    return out;
  }
  std::size_t dim() const override { return dim_; }
  std::string model_tag() const override { return stub_tag(dim_); }

 private:
  std::size_t dim_;
};

class StubCrossEncoder final : public CrossEncoder {
 public:
  explicit StubCrossEncoder(std::size_t dim) : dim_(dim) {}

  std::vector<PairScore> score_pairs(std::string_view query,
                                     std::span<const std::string> prompts) const override {
    std::vector<PairScore> out;
    out.reserve(prompts.size());
    for (const auto& p : prompts) out.push_back({stub_pair_score(query, p, dim_)});
    return out;
  }
  std::string model_tag() const override { return "stub-cross-d" + std::to_string(dim_); }

 private:
  std::size_t dim_;
};

// Thin JSON-over-HTTP client. Requests beyond max_in_flight block until a
// slot frees up.
class RemoteClient {
 public:
  explicit RemoteClient(const BackendConfig& cfg)
      : cfg_(cfg), slots_(static_cast<std::ptrdiff_t>(cfg.max_in_flight)) {}

  json post(const std::string& path, const json& body) const {
    slots_.acquire();
    struct Release {
      std::counting_semaphore<>& s;
      ~Release() { s.release(); }
    } release{slots_};

    httplib::Client cli(cfg_.endpoint);
    cli.set_connection_timeout(cfg_.timeout);
    cli.set_read_timeout(cfg_.timeout);
    cli.set_write_timeout(cfg_.timeout);
    auto res = cli.Post(path, body.dump(), "application/json");
    if (!res) {
      throw BackendUnavailable(cfg_.endpoint + path + ": " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      throw BackendUnavailable(cfg_.endpoint + path + ": HTTP " + std::to_string(res->status));
    }
    try {
      return json::parse(res->body);
    } catch (const json::parse_error& e) {
      throw BackendUnavailable(cfg_.endpoint + path + ": malformed response: " + e.what());
    }
  }

  const BackendConfig& config() const { return cfg_; }

 private:
  BackendConfig cfg_;
  mutable std::counting_semaphore<> slots_;
};

class RemoteBiEncoder final : public BiEncoder {
 public:
  explicit RemoteBiEncoder(const BackendConfig& cfg) : client_(cfg) {}

  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const override {
    const auto& cfg = client_.config();
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (std::size_t begin = 0; begin < texts.size(); begin += cfg.max_batch) {
      auto chunk = texts.subspan(begin, std::min(cfg.max_batch, texts.size() - begin));
      json reply = client_.post("/embed", {{"texts", chunk}});
      try {
        auto dim = reply.at("dim").get<std::size_t>();
        const auto& vectors = reply.at("vectors");
        if (dim != cfg.dim) {
          throw DimensionMismatch("remote /embed returned dim " + std::to_string(dim) +
                                  ", expected " + std::to_string(cfg.dim));
        }
        if (vectors.size() != chunk.size()) {
          throw BackendUnavailable("remote /embed returned " + std::to_string(vectors.size()) +
                                   " vectors for " + std::to_string(chunk.size()) + " texts");
        }
        for (const auto& v : vectors) {
          EmbeddingVector ev{v.get<std::vector<float>>(), model_tag()};
          if (ev.dim() != cfg.dim) {
            throw DimensionMismatch("remote /embed vector has length " +
                                    std::to_string(ev.dim()) + ", expected " +
                                    std::to_string(cfg.dim));
          }
          if (!std::all_of(ev.values.begin(), ev.values.end(),
                           [](float x) { return std::isfinite(x); })) {
            throw BackendUnavailable("remote /embed returned a non-finite value");
          }
          out.push_back(std::move(ev));
        }
      } catch (const json::exception& e) {
        throw BackendUnavailable(std::string("remote /embed: malformed response: ") + e.what());
      }
    }
    return out;
  }
  std::size_t dim() const override { return client_.config().dim; }
  std::string model_tag() const override { return "remote:" + client_.config().endpoint; }

 private:
  RemoteClient client_;
};

class RemoteCrossEncoder final : public CrossEncoder {
 public:
  explicit RemoteCrossEncoder(const BackendConfig& cfg) : client_(cfg) {}

  std::vector<PairScore> score_pairs(std::string_view query,
                                     std::span<const std::string> prompts) const override {
    const auto& cfg = client_.config();
    std::vector<PairScore> out;
    out.reserve(prompts.size());
    for (std::size_t begin = 0; begin < prompts.size(); begin += cfg.max_batch) {
      auto chunk = prompts.subspan(begin, std::min(cfg.max_batch, prompts.size() - begin));
      json reply = client_.post("/score", {{"query", query}, {"texts", chunk}});
      try {
        auto scores = reply.at("scores").get<std::vector<double>>();
        if (scores.size() != chunk.size()) {
          throw BackendUnavailable("remote /score returned " + std::to_string(scores.size()) +
                                   " scores for " + std::to_string(chunk.size()) + " texts");
        }
        for (double s : scores) {
          if (!std::isfinite(s)) throw BackendUnavailable("remote /score returned a non-finite score");
          out.push_back({s});
        }
      } catch (const json::exception& e) {
        throw BackendUnavailable(std::string("remote /score: malformed response: ") + e.what());
      }
    }
    return out;
  }
  std::string model_tag() const override { return "remote:" + client_.config().endpoint; }

 private:
  RemoteClient client_;
};

}  // namespace

EmbeddingVector stub_embed(std::string_view text, std::size_t dim) {
  if (dim < 8) throw ConfigError("embedding dim must be >= 8");
  auto raw = stub_embed_raw(text, dim);
  EmbeddingVector out{std::vector<float>(raw.begin(), raw.end()), stub_tag(dim)};
  return out;
}

double word_jaccard(std::string_view a, std::string_view b) {
  auto wa = word_set(a);
  auto wb = word_set(b);
  if (wa.empty() && wb.empty()) return 0.0;
  std::size_t common = 0;
  for (const auto& w : wa) common += wb.count(w);
  return static_cast<double>(common) / static_cast<double>(wa.size() + wb.size() - common);
}

double stub_pair_score(std::string_view query, std::string_view prompt, std::size_t dim) {
  auto q = stub_embed_raw(query, dim);
  auto p = stub_embed_raw(prompt, dim);
  double dot = 0.0;
  for (std::size_t i = 0; i < dim; ++i) dot += q[i] * p[i];
  return dot + kJaccardWeight * word_jaccard(query, prompt);
}

std::shared_ptr<const BiEncoder> make_bi_encoder(const BackendConfig& cfg) {
  cfg.validate();
  if (cfg.kind == BackendKind::kRemote) return std::make_shared<RemoteBiEncoder>(cfg);
  return std::make_shared<StubBiEncoder>(cfg.dim);
}

std::shared_ptr<const CrossEncoder> make_cross_encoder(const BackendConfig& cfg) {
  cfg.validate();
  if (cfg.kind == BackendKind::kRemote) return std::make_shared<RemoteCrossEncoder>(cfg);
  return std::make_shared<StubCrossEncoder>(cfg.dim);
}

std::vector<EmbeddingVector> embed(std::span<const std::string> texts, const BackendConfig& cfg) {
  if (texts.empty()) throw ValidationError("embed: no texts given");
  return make_bi_encoder(cfg)->embed(texts);
}

std::vector<PairScore> score_pairs(std::string_view query, std::span<const std::string> prompts,
                                   const BackendConfig& cfg) {
  if (prompts.empty()) throw ValidationError("score_pairs: no prompts given");
  return make_cross_encoder(cfg)->score_pairs(query, prompts);
}

void register_backend_routes(httplib::Server& server, std::shared_ptr<const BiEncoder> bi,
                             std::shared_ptr<const CrossEncoder> cross) {
  auto fail = [](httplib::Response& res, const std::string& msg) {
    res.status = 400;
    res.set_content(json{{"error", msg}}.dump(), "application/json");
  };
  server.Post("/embed", [bi, fail](const httplib::Request& req, httplib::Response& res) {
    try {
      auto texts = json::parse(req.body).at("texts").get<std::vector<std::string>>();
      json vectors = json::array();
      for (const auto& v : bi->embed(texts)) vectors.push_back(v.values);
      res.set_content(json{{"dim", bi->dim()}, {"vectors", std::move(vectors)}}.dump(),
                      "application/json");
    } catch (const std::exception& e) {
      fail(res, e.what());
    }
  });
  server.Post("/score", [cross, fail](const httplib::Request& req, httplib::Response& res) {
    try {
      auto body = json::parse(req.body);
      auto query = body.at("query").get<std::string>();
      auto texts = body.at("texts").get<std::vector<std::string>>();
      json scores = json::array();
      for (const auto& s : cross->score_pairs(query, texts)) scores.push_back(s.score);
      res.set_content(json{{"scores", std::move(scores)}}.dump(), "application/json");
    } catch (const std::exception& e) {
      fail(res, e.what());
    }
  });
}

}  // namespace metarec
