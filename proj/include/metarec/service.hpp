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

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include "metarec/catalog.hpp"
#include "metarec/encoder.hpp"
#include "metarec/errors.hpp"
#include "metarec/index.hpp"
#include "metarec/promptc.hpp"
#include "metarec/rerank.hpp"

namespace httplib {
class Server;
}

namespace metarec {

inline constexpr std::size_t kMaxQueryChars = 2000;
inline constexpr std::size_t kMaxTopK = 10'000;

// Raised by request handling; `status` is the HTTP status to answer with.
class HttpError : public Error {
 public:
  HttpError(int status, const std::string& message) : Error(message), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

struct ServiceConfig {
  std::string host = "0.0.0.0";
  int port = 8080;
  std::filesystem::path index_dir;
  BackendConfig backend;
  RerankConfig rerank;
  std::size_t token_budget = kDefaultTokenBudget;
  // HTTP worker threads; 0 picks max(8, 2 x hardware threads).
  std::size_t threads = 0;
};

// Reads the JSON config file. Keys mirror the structs: "host", "port",
// "index", "token_budget", "threads", "backend": {"kind", "dim", "endpoint",
// "timeout_ms", "max_batch", "max_in_flight"}, "rerank": {"top_k",
// "batch_size", "top_n"}. Absent keys keep their defaults.
ServiceConfig parse_service_config(std::string_view json_text);
ServiceConfig load_service_config(const std::filesystem::path& path);

// One immutable build: catalog, prompts, thresholds and index.
struct Snapshot {
  std::uint64_t generation = 0;
  std::shared_ptr<const Catalog> catalog;
  std::vector<PromptRecord> records;
  ThresholdMap thresholds;
  std::shared_ptr<const PromptMap> prompts;
  std::shared_ptr<const EmbeddingIndex> index;
  std::unordered_map<std::string, DisplayInfo> display;
  // Where the catalog came from; refresh re-reads these when given no paths.
  std::filesystem::path schema_source;
  std::filesystem::path catalog_source;
};

// ingest -> compile_all -> build_index.
Snapshot build_snapshot(const std::filesystem::path& schema_path,
                        const std::filesystem::path& catalog_path, const BiEncoder& encoder,
                        std::size_t token_budget = kDefaultTokenBudget);

// Build directory layout: index.msxe, prompts.jsonl, schema.json,
// catalog.jsonl, manifest.json.
void write_build(const Snapshot& snapshot, const std::filesystem::path& dir);
// Throws ConfigError when the stored model tag differs from `encoder`.
Snapshot load_build(const std::filesystem::path& dir, const BiEncoder& encoder);

std::string format_timestamp(Timestamp t);
Timestamp parse_timestamp(std::string_view text);

struct QueryRequest {
  std::string query;
  std::size_t top_k = 100;
  std::size_t top_n = 5;
};

// Parses and validates a /v1/recommend body. Absent top_k/top_n take the
// given defaults; an optional "context" field is accepted and ignored.
// Throws HttpError(400).
QueryRequest parse_query_request(std::string_view body, const RerankConfig& defaults);

struct ResultItem {
  RankedResult result;
  std::optional<DisplayInfo> display;
};

struct QueryResponse {
  std::vector<ResultItem> results;
  std::int64_t latency_ms = 0;
  Timestamp index_built_at{};
  std::string model_tag;
  std::uint64_t generation = 0;
};

std::string to_json(const QueryResponse& response);

// Owns the current snapshot and swaps it atomically on refresh. Query
// handlers take a reference to one snapshot for the whole request, so a
// response never mixes generations.
class RecommendService {
 public:
  RecommendService(ServiceConfig cfg, std::shared_ptr<const BiEncoder> bi,
                   std::shared_ptr<const CrossEncoder> cross);
  ~RecommendService();

  RecommendService(const RecommendService&) = delete;
  RecommendService& operator=(const RecommendService&) = delete;

  // Current snapshot, or null before the first install.
  std::shared_ptr<const Snapshot> snapshot() const;
  // Publishes `snapshot` as the next generation and returns its number.
  std::uint64_t install(Snapshot snapshot);
  std::uint64_t generation() const;

  // Full rebuild from the given sources (or the current snapshot's sources)
  // followed by an atomic swap. Refreshes run one at a time. On failure the
  // current snapshot stays active and the error propagates.
  std::uint64_t refresh(std::optional<std::filesystem::path> schema_path = std::nullopt,
                        std::optional<std::filesystem::path> catalog_path = std::nullopt);

  // Throws HttpError: 503 without a snapshot or with the backend down, 400
  // for an invalid request, 500 otherwise.
  QueryResponse handle_query(const QueryRequest& request) const;

  // HTTP front end. start() binds (port 0 picks a free port) and serves on a
  // background thread; it returns the bound port.
  int start(const std::string& host, int port);
  void stop();
  // Blocks until stop() is called from another thread or a signal handler.
  void wait();

  const ServiceConfig& config() const { return cfg_; }

 private:
  void register_routes();
  void refresh_in_background(std::optional<std::filesystem::path> schema_path,
                             std::optional<std::filesystem::path> catalog_path);

  ServiceConfig cfg_;
  std::shared_ptr<const BiEncoder> bi_;
  std::shared_ptr<const CrossEncoder> cross_;

  mutable std::mutex snapshot_mu_;
  std::shared_ptr<const Snapshot> snapshot_;
  std::mutex refresh_mu_;

  std::unique_ptr<httplib::Server> server_;
  std::thread server_thread_;
  std::mutex workers_mu_;
  std::vector<std::thread> workers_;
};

}  // namespace metarec
