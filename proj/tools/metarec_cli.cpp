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


// metarec: command-line front end for building, serving and evaluating the
// two-stage recommender.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <cctype>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "metarec/catalog.hpp"
#include "metarec/encoder.hpp"
#include "metarec/errors.hpp"
#include "metarec/evalkit.hpp"
#include "metarec/fixtures.hpp"
#include "metarec/index.hpp"
#include "metarec/log.hpp"
#include "metarec/promptc.hpp"
#include "metarec/rerank.hpp"
#include "metarec/service.hpp"

namespace fs = std::filesystem;
using namespace metarec;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop.store(true); }

void install_signal_handlers() {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
}

void wait_for_signal() {
  while (!g_stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") != std::string::npos) out.push_back(line);
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

// Common service/backend options shared by several subcommands.
struct CommonOpts {
  std::string config_path;
  std::string backend_kind;
  std::string endpoint;
  std::size_t dim = 0;

  ServiceConfig resolve() const {
    ServiceConfig cfg = config_path.empty() ? ServiceConfig{} : load_service_config(config_path);
    if (!backend_kind.empty()) {
      if (backend_kind == "stub") {
        cfg.backend.kind = BackendKind::kStub;
      } else if (backend_kind == "remote") {
        cfg.backend.kind = BackendKind::kRemote;
      } else {
        throw ConfigError("unknown backend kind: " + backend_kind);
      }
    }
    if (!endpoint.empty()) cfg.backend.endpoint = endpoint;
    if (dim != 0) cfg.backend.dim = dim;
    cfg.backend.validate();
    return cfg;
  }

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON service config")->check(CLI::ExistingFile);
    cmd->add_option("--backend", backend_kind, "stub or remote")
        ->check(CLI::IsMember({"stub", "remote"}));
    cmd->add_option("--endpoint", endpoint, "remote backend base URL");
    cmd->add_option("--dim", dim, "embedding dimension");
  }
};

Pipeline pipeline_from(const Snapshot& snap, std::shared_ptr<const BiEncoder> bi,
                       std::shared_ptr<const CrossEncoder> cross) {
  return Pipeline{std::move(bi), std::move(cross), snap.index, snap.prompts};
}

// Relevant when the document's value for `feature` occurs in the query as a
// whole word, ignoring ASCII case.
RelevanceJudge feature_judge(const Catalog& catalog, const std::string& feature) {
  auto idx = catalog.schema.index_of(feature);
  if (!idx) throw UnknownFeature("judge feature not in schema: " + feature);
  auto lower = [](std::string s) {
    for (auto& c : s) {
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return s;
  };
  std::unordered_map<std::string, std::string> values;
  for (const auto& d : catalog.documents) {
    if (const auto* s = std::get_if<std::string>(&d.values[*idx])) values.emplace(d.id, lower(*s));
  }
  return [values = std::move(values), lower](std::string_view doc_id, std::string_view query) {
    auto it = values.find(std::string(doc_id));
    if (it == values.end() || it->second.empty()) return false;
    std::string q = lower(std::string(query));
    auto word = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
    for (auto pos = q.find(it->second); pos != std::string::npos;
         pos = q.find(it->second, pos + 1)) {
      auto end = pos + it->second.size();
      if ((pos == 0 || !word(q[pos - 1])) && (end == q.size() || !word(q[end]))) return true;
    }
    return false;
  };
}

int cmd_ingest(const std::string& schema_path, const std::string& catalog_path) {
  auto schema = load_schema(schema_path);
  auto catalog = load_catalog(schema, catalog_path);
  std::size_t missing = 0;
  for (const auto& d : catalog.documents) {
    for (const auto& v : d.values) missing += is_missing(v) ? 1 : 0;
  }
  std::cout << "ok: " << catalog.documents.size() << " documents, " << schema.size()
            << " features, " << missing << " missing values\n";
  return 0;
}

int cmd_build(const CommonOpts& common, const std::string& schema_path,
              const std::string& catalog_path, const std::string& out, std::size_t budget) {
  auto cfg = common.resolve();
  auto bi = make_bi_encoder(cfg.backend);
  auto t0 = std::chrono::steady_clock::now();
  auto snap = build_snapshot(schema_path, catalog_path, *bi, budget);
  write_build(snap, out);
  auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::size_t truncated = 0;
  for (const auto& r : snap.records) truncated += r.truncated ? 1 : 0;
  std::printf("built %zu documents (dim %zu, %zu truncated prompts) into %s in %.2f s\n",
              snap.index->size(), snap.index->dim(), truncated, out.c_str(), secs);
  return 0;
}

int cmd_serve(const CommonOpts& common, const std::string& index_dir, const std::string& host,
              int port) {
  auto cfg = common.resolve();
  if (!index_dir.empty()) cfg.index_dir = index_dir;
  if (!host.empty()) cfg.host = host;
  if (port >= 0) cfg.port = port;
  if (cfg.index_dir.empty()) throw ConfigError("serve needs --index or an \"index\" config key");
  auto bi = make_bi_encoder(cfg.backend);
  auto cross = make_cross_encoder(cfg.backend);
  RecommendService service(cfg, bi, cross);
  auto gen = service.install(load_build(cfg.index_dir, *bi));
  install_signal_handlers();
  int bound = service.start(cfg.host, cfg.port);
  log_info("serving generation " + std::to_string(gen) + " on " + cfg.host + ":" +
           std::to_string(bound));
  std::cout << "listening on " << cfg.host << ":" << bound << std::endl;
  wait_for_signal();
  log_info("shutting down");
  service.stop();
  return 0;
}

int cmd_refresh(const CommonOpts& common, const std::string& url, const std::string& index_dir,
                const std::string& schema_path, const std::string& catalog_path) {
  if (!url.empty()) {
    httplib::Client client(url);
    client.set_connection_timeout(5);
    nlohmann::json body = nlohmann::json::object();
    if (!schema_path.empty()) body["schema"] = fs::absolute(schema_path).string();
    if (!catalog_path.empty()) body["catalog"] = fs::absolute(catalog_path).string();
    auto res = client.Post("/v1/refresh", body.dump(), "application/json");
    if (!res) throw BackendUnavailable("cannot reach " + url);
    if (res->status != 202) {
      throw Error("refresh rejected with HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    std::cout << res->body << "\n";
    return 0;
  }
  auto cfg = common.resolve();
  auto bi = make_bi_encoder(cfg.backend);
  auto current = load_build(index_dir, *bi);
  fs::path schema = schema_path.empty() ? current.schema_source : fs::path(schema_path);
  fs::path catalog = catalog_path.empty() ? current.catalog_source : fs::path(catalog_path);
  auto next = build_snapshot(schema, catalog, *bi, cfg.token_budget);
  write_build(next, index_dir);
  std::cout << "rebuilt " << index_dir << ": " << next.index->size() << " documents\n";
  return 0;
}

int cmd_bench(const CommonOpts& common, const std::string& index_dir,
              const std::string& queries_path, const std::vector<std::size_t>& batch_sizes,
              std::string label, const std::string& out, std::size_t top_k, std::size_t top_n,
              std::size_t warmup) {
  auto cfg = common.resolve();
  auto bi = make_bi_encoder(cfg.backend);
  auto cross = make_cross_encoder(cfg.backend);
  auto snap = load_build(index_dir, *bi);
  auto queries = read_lines(queries_path);
  if (queries.empty()) throw ValidationError("no queries in " + queries_path);
  RerankConfig rc = cfg.rerank;
  if (top_k != 0) rc.top_k = top_k;
  if (top_n != 0) rc.top_n = top_n;
  if (label.empty()) label = bi->model_tag();
  std::vector<LatencyReport> reports;
  reports.push_back(bench(queries, batch_sizes, pipeline_from(snap, bi, cross), rc, label, warmup));
  auto md = latency_markdown(reports);
  std::cout << md;
  for (const auto& row : reports.front().rows) {
    if (row.error) std::cerr << "b=" << row.batch_size << " failed: " << *row.error << "\n";
  }
  if (!out.empty()) {
    write_text(out + ".md", md);
    write_text(out + ".csv", latency_csv(reports));
  }
  return 0;
}

int cmd_eval(const CommonOpts& common, const std::string& annotations, const std::string& index_dir,
             const std::string& queries_path, const std::string& judge_feature, bool fixture,
             std::size_t top_n) {
  if (annotations.empty() && index_dir.empty() && !fixture) {
    throw CLI::ValidationError("eval", "give --annotations, --index or --format-fixture");
  }
  if (!annotations.empty()) {
    std::ifstream in(annotations);
    if (!in) throw IoError("cannot open " + annotations);
    auto records = parse_annotations(in);
    std::cout << relevance_markdown(table2_summary(records), annotator_bias(records)) << "\n";
  }
  if (index_dir.empty() && !fixture) return 0;

  auto cfg = common.resolve();
  auto bi = make_bi_encoder(cfg.backend);
  auto cross = make_cross_encoder(cfg.backend);
  RerankConfig rc = cfg.rerank;
  if (top_n != 0) rc.top_n = top_n;
  Pipeline pipeline;
  std::vector<std::string> queries;
  RelevanceJudge judge;
  if (fixture) {
    auto fx = fixtures::format_fixture();
    auto recs = compile_all(fx.catalog, fit_all_thresholds(fx.catalog));
    pipeline = Pipeline{bi, cross, std::make_shared<const EmbeddingIndex>(build_index(recs, *bi)),
                        std::make_shared<const PromptMap>(to_prompt_map(recs))};
    queries = fx.queries;
    judge = fx.judge();
  } else {
    if (queries_path.empty() || judge_feature.empty()) {
      throw CLI::ValidationError("eval", "--index needs --queries and --judge-feature");
    }
    auto snap = load_build(index_dir, *bi);
    pipeline = pipeline_from(snap, bi, cross);
    queries = read_lines(queries_path);
    judge = feature_judge(*snap.catalog, judge_feature);
  }
  std::cout << ablation_markdown(ablation(queries, judge, pipeline, rc));
  return 0;
}

int cmd_synth(const std::string& out, std::size_t docs, std::uint64_t seed) {
  fs::create_directories(out);
  auto schema = fixtures::sales_schema();
  std::ostringstream s;
  save_schema(schema, s);
  write_text(fs::path(out) / "schema.json", s.str());
  std::ostringstream c;
  save_catalog(fixtures::synthetic_catalog(schema, docs, seed), c);
  write_text(fs::path(out) / "catalog.jsonl", c.str());
  std::string q;
  for (const auto& line : fixtures::evaluation_queries()) q += line + "\n";
  write_text(fs::path(out) / "queries.txt", q);
  std::ostringstream a;
  save_annotations(fixtures::reference_annotations(), a);
  write_text(fs::path(out) / "annotations.jsonl", a.str());
  std::cout << "wrote " << docs << " documents to " << out << "\n";
  return 0;
}

int cmd_backend(const CommonOpts& common, const std::string& host, int port) {
  auto cfg = common.resolve();
  if (cfg.backend.kind != BackendKind::kStub) {
    throw ConfigError("the backend command only serves the stub models");
  }
  httplib::Server server;
  register_backend_routes(server, make_bi_encoder(cfg.backend), make_cross_encoder(cfg.backend));
  int bound = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  install_signal_handlers();
  std::thread t([&] { server.listen_after_bind(); });
  std::cout << "stub backend on " << host << ":" << bound << std::endl;
  wait_for_signal();
  server.stop();
  t.join();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"metarec: metadata-driven two-stage document recommender"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "debug logging");

  CommonOpts common;
  std::string schema_path, catalog_path, out, index_dir, host, url, queries_path, label,
      annotations, judge_feature;
  int port = -1;
  std::size_t budget = kDefaultTokenBudget, docs = 1000, top_k = 0, top_n = 0, warmup = 1;
  std::uint64_t seed = 42;
  bool fixture = false;
  std::vector<std::size_t> batch_sizes(std::begin(kReferenceBatchSizes),
                                       std::end(kReferenceBatchSizes));

  auto* ingest = app.add_subcommand("ingest", "validate a catalog against its schema");
  ingest->add_option("--schema", schema_path)->required()->check(CLI::ExistingFile);
  ingest->add_option("--catalog", catalog_path)->required()->check(CLI::ExistingFile);

  auto* build = app.add_subcommand("build", "compile prompts and the embedding index");
  build->add_option("--schema", schema_path)->required()->check(CLI::ExistingFile);
  build->add_option("--catalog", catalog_path)->required()->check(CLI::ExistingFile);
  build->add_option("--out", out, "build directory")->required();
  build->add_option("--token-budget", budget)->check(CLI::PositiveNumber);
  common.attach(build);

  auto* serve = app.add_subcommand("serve", "load a build and answer HTTP queries");
  serve->add_option("--index", index_dir, "build directory");
  serve->add_option("--host", host);
  serve->add_option("--port", port)->check(CLI::Range(0, 65535));
  common.attach(serve);

  auto* refresh = app.add_subcommand("refresh", "refresh a running service or rebuild files");
  auto* url_opt = refresh->add_option("--url", url, "running service, e.g. http://localhost:8080");
  refresh->add_option("--index", index_dir, "build directory to rebuild in place")
      ->excludes(url_opt);
  refresh->add_option("--schema", schema_path);
  refresh->add_option("--catalog", catalog_path);
  common.attach(refresh);

  auto* benchc = app.add_subcommand("bench", "latency sweep over rerank batch sizes");
  benchc->add_option("--index", index_dir)->required()->check(CLI::ExistingDirectory);
  benchc->add_option("--queries", queries_path, "one query per line")
      ->required()
      ->check(CLI::ExistingFile);
  benchc->add_option("--batch-sizes", batch_sizes)->delimiter(',')->check(CLI::PositiveNumber);
  benchc->add_option("--label", label, "row label (default: model tag)");
  benchc->add_option("--out", out, "write <out>.md and <out>.csv");
  benchc->add_option("--top-k", top_k);
  benchc->add_option("--top-n", top_n);
  benchc->add_option("--warmup", warmup, "untimed passes per batch size");
  common.attach(benchc);

  auto* eval = app.add_subcommand("eval", "relevance summary and stage ablation");
  eval->add_option("--annotations", annotations, "JSONL of {query_id, scores}")
      ->check(CLI::ExistingFile);
  eval->add_option("--index", index_dir)->check(CLI::ExistingDirectory);
  eval->add_option("--queries", queries_path)->check(CLI::ExistingFile);
  eval->add_option("--judge-feature", judge_feature,
                   "a document is relevant when this feature's value appears in the query");
  eval->add_flag("--format-fixture", fixture, "run the ablation on the built-in format fixture");
  eval->add_option("--top-n", top_n);
  common.attach(eval);

  auto* synth = app.add_subcommand("synth", "write a synthetic schema, catalog and queries");
  synth->add_option("--out", out)->required();
  synth->add_option("--docs", docs)->check(CLI::PositiveNumber);
  synth->add_option("--seed", seed);

  auto* backend = app.add_subcommand("backend", "serve the stub models over the remote protocol");
  backend->add_option("--host", host);
  backend->add_option("--port", port)->check(CLI::Range(0, 65535));
  common.attach(backend);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  set_log_level(verbose ? LogLevel::kDebug : LogLevel::kInfo);

  try {
    if (*ingest) return cmd_ingest(schema_path, catalog_path);
    if (*build) return cmd_build(common, schema_path, catalog_path, out, budget);
    if (*serve) return cmd_serve(common, index_dir, host, port);
    if (*refresh) {
      if (url.empty() && index_dir.empty()) {
        throw CLI::ValidationError("refresh", "give --url or --index");
      }
      return cmd_refresh(common, url, index_dir, schema_path, catalog_path);
    }
    if (*benchc) {
      return cmd_bench(common, index_dir, queries_path, batch_sizes, label, out, top_k, top_n,
                       warmup);
    }
    if (*eval) {
      return cmd_eval(common, annotations, index_dir, queries_path, judge_feature, fixture, top_n);
    }
    if (*synth) return cmd_synth(out, docs, seed);
    if (*backend) {
      return cmd_backend(common, host.empty() ? "127.0.0.1" : host, port < 0 ? 8090 : port);
    }
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
