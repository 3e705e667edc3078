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

#include "metarec/service.hpp"

#include <algorithm>
#include <chrono>
#include <iomanip>
#include <ctime>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "httplib.h"
#include "json.hpp"
#include "metarec/errors.hpp"
#include "metarec/log.hpp"

namespace metarec {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kIndexFile = "index.msxe";
constexpr const char* kPromptsFile = "prompts.jsonl";
constexpr const char* kSchemaFile = "schema.json";
constexpr const char* kCatalogFile = "catalog.jsonl";
constexpr const char* kManifestFile = "manifest.json";

std::size_t utf8_length(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80;
  return n;
}

template <typename Fn>
void write_atomically(const fs::path& path, Fn&& writer) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    writer(out);
    out.flush();
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

BackendKind parse_backend_kind(const std::string& s) {
  if (s == "stub") return BackendKind::kStub;
  if (s == "remote") return BackendKind::kRemote;
  throw ConfigError("unknown backend kind '" + s + "'");
}

std::unordered_map<std::string, DisplayInfo> display_map(const Catalog& catalog) {
  std::unordered_map<std::string, DisplayInfo> out;
  for (const auto& d : catalog.documents) {
    if (d.display) out.emplace(d.id, *d.display);
  }
  return out;
}

Snapshot assemble(Catalog catalog, std::vector<PromptRecord> records, ThresholdMap thresholds,
                  EmbeddingIndex index) {
  Snapshot s;
  s.display = display_map(catalog);
  s.catalog = std::make_shared<const Catalog>(std::move(catalog));
  s.prompts = std::make_shared<const PromptMap>(to_prompt_map(records));
  s.records = std::move(records);
  s.thresholds = std::move(thresholds);
  s.index = std::make_shared<const EmbeddingIndex>(std::move(index));
  return s;
}

void reply_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

}  // namespace

ServiceConfig parse_service_config(std::string_view json_text) {
  ServiceConfig cfg;
  try {
    auto j = json::parse(json_text);
    if (!j.is_object()) throw ConfigError("service config must be a JSON object");
    cfg.host = j.value("host", cfg.host);
    cfg.port = j.value("port", cfg.port);
    if (j.contains("index")) cfg.index_dir = j["index"].get<std::string>();
    cfg.token_budget = j.value("token_budget", cfg.token_budget);
    cfg.threads = j.value("threads", cfg.threads);
    if (j.contains("backend")) {
      const auto& b = j["backend"];
      if (b.contains("kind")) cfg.backend.kind = parse_backend_kind(b["kind"].get<std::string>());
      cfg.backend.dim = b.value("dim", cfg.backend.dim);
      cfg.backend.endpoint = b.value("endpoint", cfg.backend.endpoint);
      cfg.backend.timeout =
          std::chrono::milliseconds(b.value("timeout_ms", cfg.backend.timeout.count()));
      cfg.backend.max_batch = b.value("max_batch", cfg.backend.max_batch);
      cfg.backend.max_in_flight = b.value("max_in_flight", cfg.backend.max_in_flight);
    }
    if (j.contains("rerank")) {
      const auto& r = j["rerank"];
      cfg.rerank.top_k = r.value("top_k", cfg.rerank.top_k);
      cfg.rerank.batch_size = r.value("batch_size", cfg.rerank.batch_size);
      cfg.rerank.top_n = r.value("top_n", cfg.rerank.top_n);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("service config: ") + e.what());
  }
  cfg.backend.validate();
  cfg.rerank.validate();
  return cfg;
}

ServiceConfig load_service_config(const fs::path& path) {
  return parse_service_config(read_text(path));
}

std::string format_timestamp(Timestamp t) {
  std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Timestamp parse_timestamp(std::string_view text) {
  std::tm tm{};
  std::istringstream in{std::string(text)};
  in >> std::get_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  if (in.fail()) throw ParseError("bad timestamp '" + std::string(text) + "'");
  return std::chrono::time_point_cast<std::chrono::seconds>(
      std::chrono::system_clock::from_time_t(timegm(&tm)));
}

Snapshot build_snapshot(const fs::path& schema_path, const fs::path& catalog_path,
                        const BiEncoder& encoder, std::size_t token_budget) {
  auto schema = load_schema(schema_path);
  auto catalog = load_catalog(schema, catalog_path);
  if (catalog.documents.empty()) throw ValidationError("catalog " + catalog_path.string() + " is empty");
  auto thresholds = fit_all_thresholds(catalog);
  auto records = compile_all(catalog, thresholds, token_budget);
  auto index = build_index(records, encoder);
  Snapshot s = assemble(std::move(catalog), std::move(records), std::move(thresholds),
                        std::move(index));
  s.schema_source = fs::absolute(schema_path);
  s.catalog_source = fs::absolute(catalog_path);
  return s;
}

void write_build(const Snapshot& snapshot, const fs::path& dir) {
  fs::create_directories(dir);
  write_atomically(dir / kIndexFile, [&](std::ostream& out) { write_index(*snapshot.index, out); });
  write_atomically(dir / kPromptsFile,
                   [&](std::ostream& out) { save_prompts(snapshot.records, out); });
  write_atomically(dir / kSchemaFile,
                   [&](std::ostream& out) { save_schema(snapshot.catalog->schema, out); });
  write_atomically(dir / kCatalogFile,
                   [&](std::ostream& out) { save_catalog(*snapshot.catalog, out); });

  json thresholds = json::object();
  for (const auto& [name, t] : snapshot.thresholds) thresholds[name] = {{"p65", t.p65}, {"p85", t.p85}};
  json manifest{{"model_tag", snapshot.index->model_tag()},
                {"built_at", format_timestamp(snapshot.index->built_at())},
                {"dim", snapshot.index->dim()},
                {"docs", snapshot.index->size()},
                {"schema_version", snapshot.catalog->schema.version()},
                {"thresholds", thresholds},
                {"sources",
                 {{"schema", snapshot.schema_source.string()},
                  {"catalog", snapshot.catalog_source.string()}}}};
  write_atomically(dir / kManifestFile,
                   [&](std::ostream& out) { out << manifest.dump(2) << '\n'; });
}

Snapshot load_build(const fs::path& dir, const BiEncoder& encoder) {
  json manifest;
  try {
    manifest = json::parse(read_text(dir / kManifestFile));
  } catch (const json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
  auto model_tag = manifest.value("model_tag", std::string());
  if (model_tag != encoder.model_tag()) {
    throw ConfigError("index was built with '" + model_tag + "' but the configured encoder is '" +
                      encoder.model_tag() + "'");
  }

  auto schema = load_schema(dir / kSchemaFile);
  auto catalog = load_catalog(schema, dir / kCatalogFile);
  std::vector<PromptRecord> records;
  {
    std::ifstream in(dir / kPromptsFile, std::ios::binary);
    if (!in) throw IoError("cannot open " + (dir / kPromptsFile).string());
    records = parse_prompts(in);
  }
  auto index = load_index(dir / kIndexFile);
  index.set_metadata(model_tag, parse_timestamp(manifest.value("built_at", std::string())));

  ThresholdMap thresholds;
  const json stored = manifest.value("thresholds", json::object());
  for (const auto& [name, t] : stored.items()) {
    thresholds.emplace(name, BucketThresholds{t.at("p65").get<double>(), t.at("p85").get<double>()});
  }

  std::unordered_set<std::string_view> prompt_ids;
  for (const auto& r : records) prompt_ids.insert(r.doc_id);
  if (prompt_ids.size() != index.size() || catalog.documents.size() != index.size()) {
    throw FormatError("build in " + dir.string() + " is inconsistent: " +
                      std::to_string(catalog.documents.size()) + " documents, " +
                      std::to_string(records.size()) + " prompts, " +
                      std::to_string(index.size()) + " index entries");
  }
  for (const auto& id : index.ids()) {
    if (!prompt_ids.count(id)) throw FormatError("index entry \"" + id + "\" has no prompt");
  }

  Snapshot s = assemble(std::move(catalog), std::move(records), std::move(thresholds),
                        std::move(index));
  if (manifest.contains("sources")) {
    s.schema_source = manifest["sources"].value("schema", std::string());
    s.catalog_source = manifest["sources"].value("catalog", std::string());
  }
  return s;
}

QueryRequest parse_query_request(std::string_view body, const RerankConfig& defaults) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    throw HttpError(400, std::string("request body is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw HttpError(400, "request body must be a JSON object");

  QueryRequest req;
  req.top_k = defaults.top_k;
  req.top_n = defaults.top_n;
  if (!j.contains("query") || !j["query"].is_string()) {
    throw HttpError(400, "\"query\" must be a string");
  }
  req.query = j["query"].get<std::string>();
  auto read_count = [&](const char* key, std::size_t& dst) {
    if (!j.contains(key) || j[key].is_null()) return;
    if (!j[key].is_number_integer() || j[key].get<std::int64_t>() < 1) {
      throw HttpError(400, std::string("\"") + key + "\" must be a positive integer");
    }
    dst = j[key].get<std::size_t>();
  };
  read_count("top_k", req.top_k);
  read_count("top_n", req.top_n);
  // "context" is reserved for caller-side business rules and ignored.

  if (req.query.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw HttpError(400, "\"query\" must be non-empty");
  }
  if (utf8_length(req.query) > kMaxQueryChars) {
    throw HttpError(400, "\"query\" exceeds " + std::to_string(kMaxQueryChars) + " characters");
  }
  if (req.top_k > kMaxTopK) {
    throw HttpError(400, "\"top_k\" must be <= " + std::to_string(kMaxTopK));
  }
  if (req.top_n > req.top_k) throw HttpError(400, "\"top_n\" must be <= \"top_k\"");
  return req;
}

std::string to_json(const QueryResponse& response) {
  json results = json::array();
  for (const auto& item : response.results) {
    json r{{"doc_id", item.result.doc_id},
           {"cross_score", item.result.cross_score},
           {"retrieval_score", item.result.retrieval_score},
           {"rank", item.result.rank}};
    if (item.display) {
      r["title"] = item.display->title;
      r["url"] = item.display->url;
    }
    results.push_back(std::move(r));
  }
  return json{{"results", std::move(results)},
              {"latency_ms", response.latency_ms},
              {"index_built_at", format_timestamp(response.index_built_at)},
              {"model_tag", response.model_tag},
              {"generation", response.generation}}
      .dump();
}

RecommendService::RecommendService(ServiceConfig cfg, std::shared_ptr<const BiEncoder> bi,
                                   std::shared_ptr<const CrossEncoder> cross)
    : cfg_(std::move(cfg)), bi_(std::move(bi)), cross_(std::move(cross)) {}

RecommendService::~RecommendService() { stop(); }

std::shared_ptr<const Snapshot> RecommendService::snapshot() const {
  std::lock_guard lock(snapshot_mu_);
  return snapshot_;
}

std::uint64_t RecommendService::install(Snapshot snapshot) {
  std::lock_guard lock(snapshot_mu_);
  snapshot.generation = (snapshot_ ? snapshot_->generation : 0) + 1;
  snapshot_ = std::make_shared<const Snapshot>(std::move(snapshot));
  return snapshot_->generation;
}

std::uint64_t RecommendService::generation() const {
  auto s = snapshot();
  return s ? s->generation : 0;
}

std::uint64_t RecommendService::refresh(std::optional<fs::path> schema_path,
                                        std::optional<fs::path> catalog_path) {
  std::lock_guard lock(refresh_mu_);
  auto current = snapshot();
  fs::path schema = schema_path ? *schema_path : (current ? current->schema_source : fs::path());
  fs::path catalog = catalog_path ? *catalog_path : (current ? current->catalog_source : fs::path());
  if (schema.empty() || catalog.empty()) {
    throw ConfigError("refresh needs schema and catalog paths");
  }
  auto started = std::chrono::steady_clock::now();
  Snapshot next = build_snapshot(schema, catalog, *bi_, cfg_.token_budget);
  auto gen = install(std::move(next));
  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - started)
                .count();
  log_info("refresh complete: generation " + std::to_string(gen) + " in " + std::to_string(ms) +
           " ms");
  return gen;
}

QueryResponse RecommendService::handle_query(const QueryRequest& request) const {
  auto snap = snapshot();
  if (!snap) throw HttpError(503, "no snapshot loaded");
  if (request.query.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw HttpError(400, "\"query\" must be non-empty");
  }
  if (request.top_n < 1 || request.top_n > request.top_k || request.top_k > kMaxTopK) {
    throw HttpError(400, "require 1 <= top_n <= top_k <= " + std::to_string(kMaxTopK));
  }

  RerankConfig rc = cfg_.rerank;
  rc.top_k = request.top_k;
  rc.top_n = request.top_n;
  rc.batch_size = std::min(rc.batch_size, rc.top_k);
  Pipeline pipeline{bi_, cross_, snap->index, snap->prompts};

  QueryResponse resp;
  auto started = std::chrono::steady_clock::now();
  std::vector<RankedResult> ranked;
  try {
    ranked = run_pipeline(request.query, pipeline, rc);
  } catch (const BackendUnavailable& e) {
    throw HttpError(503, e.what());
  } catch (const EmptyIndex& e) {
    throw HttpError(503, e.what());
  } catch (const Error& e) {
    throw HttpError(500, e.what());
  }
  resp.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - started)
                        .count();
  resp.results.reserve(ranked.size());
  for (auto& r : ranked) {
    ResultItem item{std::move(r), std::nullopt};
    if (auto it = snap->display.find(item.result.doc_id); it != snap->display.end()) {
      item.display = it->second;
    }
    resp.results.push_back(std::move(item));
  }
  resp.index_built_at = snap->index->built_at();
  resp.model_tag = snap->index->model_tag();
  resp.generation = snap->generation;
  return resp;
}

void RecommendService::register_routes() {
  server_->Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
    auto snap = snapshot();
    if (!snap) {
      reply_json(res, 503, {{"status", "unavailable"}, {"generation", 0}, {"docs", 0}});
      return;
    }
    reply_json(res, 200,
               {{"status", "ok"}, {"generation", snap->generation}, {"docs", snap->index->size()}});
  });

  server_->Post("/v1/recommend", [this](const httplib::Request& req, httplib::Response& res) {
    try {
      auto request = parse_query_request(req.body, cfg_.rerank);
      auto response = handle_query(request);
      res.status = 200;
      res.set_content(to_json(response), "application/json");
    } catch (const HttpError& e) {
      if (e.status() >= 500) log_error(std::string("recommend: ") + e.what());
      reply_json(res, e.status(), {{"error", e.what()}});
    } catch (const std::exception& e) {
      log_error(std::string("recommend: ") + e.what());
      reply_json(res, 500, {{"error", e.what()}});
    }
  });

  server_->Post("/v1/refresh", [this](const httplib::Request& req, httplib::Response& res) {
    std::optional<fs::path> schema;
    std::optional<fs::path> catalog;
    if (!req.body.empty()) {
      try {
        auto j = json::parse(req.body);
        if (j.contains("schema")) schema = j["schema"].get<std::string>();
        if (j.contains("catalog")) catalog = j["catalog"].get<std::string>();
      } catch (const json::exception& e) {
        reply_json(res, 400, {{"error", std::string("bad refresh body: ") + e.what()}});
        return;
      }
    }
    refresh_in_background(std::move(schema), std::move(catalog));
    reply_json(res, 202, {{"status", "accepted"}, {"generation", generation()}});
  });
}

void RecommendService::refresh_in_background(std::optional<fs::path> schema_path,
                                             std::optional<fs::path> catalog_path) {
  std::lock_guard lock(workers_mu_);
  workers_.emplace_back([this, schema_path = std::move(schema_path),
                         catalog_path = std::move(catalog_path)] {
    try {
      refresh(schema_path, catalog_path);
    } catch (const std::exception& e) {
      log_error(std::string("refresh failed, previous generation still serving: ") + e.what());
    }
  });
}

int RecommendService::start(const std::string& host, int port) {
  if (server_) throw ConfigError("service already started");
  server_ = std::make_unique<httplib::Server>();
  std::size_t threads = cfg_.threads;
  if (threads == 0) threads = std::max<std::size_t>(8, 2 * std::thread::hardware_concurrency());
  server_->new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
  register_routes();
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
  } else if (!server_->bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) {
    server_.reset();
    throw IoError("cannot bind " + host + ":" + std::to_string(port));
  }
  server_thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void RecommendService::wait() {
  if (server_thread_.joinable()) server_thread_.join();
}

void RecommendService::stop() {
  if (server_) server_->stop();
  if (server_thread_.joinable()) server_thread_.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(workers_mu_);
    workers.swap(workers_);
  }
  for (auto& t : workers) t.join();
}

}  // namespace metarec
