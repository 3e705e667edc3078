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

#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "metarec/errors.hpp"
#include "metarec/fixtures.hpp"
#include "metarec/service.hpp"
#include "test_util.hpp"

using namespace metarec;
using json = nlohmann::json;
using metarec::testing::TempDir;

namespace {

void write_sources(const TempDir& dir, std::size_t docs, std::uint64_t seed,
                   const std::string& catalog_name = "catalog.jsonl") {
  auto schema = fixtures::sales_schema();
  std::ofstream s(dir / "schema.json");
  save_schema(schema, s);
  std::ofstream c(dir / catalog_name);
  save_catalog(fixtures::synthetic_catalog(schema, docs, seed), c);
}

ServiceConfig small_config() {
  ServiceConfig cfg;
  cfg.backend.dim = 64;
  return cfg;
}

std::unique_ptr<RecommendService> make_service(const ServiceConfig& cfg) {
  return std::make_unique<RecommendService>(cfg, make_bi_encoder(cfg.backend),
                                            make_cross_encoder(cfg.backend));
}

int status_of(const std::string& body) {
  try {
    parse_query_request(body, RerankConfig{});
  } catch (const HttpError& e) {
    return e.status();
  }
  return 200;
}

}  // namespace

TEST_SUITE("service") {
  TEST_CASE("request validation") {
    CHECK(status_of(R"({"query":"pdf"})") == 200);
    CHECK(status_of(R"({"query":"pdf","context":{"rules":["x"]}})") == 200);
    CHECK(status_of(R"({"query":""})") == 400);
    CHECK(status_of(R"({"query":"   "})") == 400);
    CHECK(status_of(R"({"query":7})") == 400);
    CHECK(status_of(R"({})") == 400);
    CHECK(status_of("[1]") == 400);
    CHECK(status_of("not json") == 400);
    CHECK(status_of(R"({"query":"a","top_k":0})") == 400);
    CHECK(status_of(R"({"query":"a","top_n":-1})") == 400);
    CHECK(status_of(R"({"query":"a","top_n":1.5})") == 400);
    CHECK(status_of(R"({"query":"a","top_k":10001})") == 400);
    CHECK(status_of(R"({"query":"a","top_k":10000,"top_n":10000})") == 200);
    CHECK(status_of(R"({"query":"a","top_k":3,"top_n":4})") == 400);
    CHECK(status_of(json{{"query", std::string(2000, 'x')}}.dump()) == 200);
    CHECK(status_of(json{{"query", std::string(2001, 'x')}}.dump()) == 400);
    // the cap counts characters, not bytes
    std::string accents;
    for (int i = 0; i < 2000; ++i) accents += "\xc3\xa9";
    CHECK(status_of(json{{"query", accents}}.dump()) == 200);

    auto req = parse_query_request(R"({"query":"x"})", RerankConfig{4, 7, 50});
    CHECK(req.top_k == 50);
    CHECK(req.top_n == 7);
  }

  TEST_CASE("config file") {
    auto cfg = parse_service_config(R"({"port":9000,"index":"idx","backend":{"kind":"remote",
      "endpoint":"http://m:1","dim":16,"timeout_ms":250,"max_batch":8},
      "rerank":{"top_k":20,"batch_size":2,"top_n":3}})");
    CHECK(cfg.port == 9000);
    CHECK(cfg.index_dir == "idx");
    CHECK(cfg.backend.kind == BackendKind::kRemote);
    CHECK(cfg.backend.dim == 16);
    CHECK(cfg.backend.timeout == std::chrono::milliseconds(250));
    CHECK(cfg.rerank.top_k == 20);
    CHECK(cfg.rerank.batch_size == 2);
    CHECK_THROWS_AS(parse_service_config(R"({"backend":{"kind":"gpu"}})"), ConfigError);
    CHECK_THROWS_AS(parse_service_config(R"({"rerank":{"top_n":0}})"), ConfigError);
    CHECK_THROWS_AS(parse_service_config("{"), Error);
  }

  TEST_CASE("timestamps") {
    auto t = parse_timestamp("2024-03-05T07:08:09Z");
    CHECK(format_timestamp(t) == "2024-03-05T07:08:09Z");
    CHECK(t.time_since_epoch().count() == 1709622489);
    CHECK_THROWS_AS(parse_timestamp("yesterday"), Error);
  }

  TEST_CASE("build directory round trip") {
    TempDir dir;
    write_sources(dir, 120, 3);
    auto cfg = small_config();
    auto bi = make_bi_encoder(cfg.backend);
    auto snap = build_snapshot(dir / "schema.json", dir / "catalog.jsonl", *bi);
    write_build(snap, dir / "build");
    for (const char* f : {"index.msxe", "prompts.jsonl", "schema.json", "catalog.jsonl",
                          "manifest.json"}) {
      CHECK(std::filesystem::exists(dir / "build" / f));
    }
    auto back = load_build(dir / "build", *bi);
    CHECK(back.index->same_content(*snap.index));
    CHECK(back.index->model_tag() == bi->model_tag());
    CHECK(back.index->built_at() == snap.index->built_at());
    CHECK(back.records == snap.records);
    CHECK(back.thresholds == snap.thresholds);
    CHECK(back.catalog->documents == snap.catalog->documents);
    CHECK(back.schema_source == snap.schema_source);

    BackendConfig other;
    other.dim = 32;
    CHECK_THROWS_AS(load_build(dir / "build", *make_bi_encoder(other)), ConfigError);
    std::filesystem::remove(dir / "build" / "prompts.jsonl");
    CHECK_THROWS_AS(load_build(dir / "build", *bi), Error);
  }

  TEST_CASE("queries against an installed snapshot") {
    TempDir dir;
    write_sources(dir, 150, 8);
    auto cfg = small_config();
    auto svc = make_service(cfg);
    CHECK(svc->generation() == 0);
    try {
      svc->handle_query({"anything", 100, 5});
      FAIL("answered without a snapshot");
    } catch (const HttpError& e) {
      CHECK(e.status() == 503);
    }
    CHECK(svc->refresh(dir / "schema.json", dir / "catalog.jsonl") == 1);
    auto res = svc->handle_query({"Azure migration pitch deck", 100, 5});
    CHECK(res.results.size() == 5);
    CHECK(res.generation == 1);
    CHECK(res.latency_ms >= 0);
    CHECK(res.model_tag == "stub-3gram-d64");
    for (std::size_t i = 0; i < res.results.size(); ++i) {
      CHECK(res.results[i].result.rank == i + 1);
      REQUIRE(res.results[i].display.has_value());
      CHECK(res.results[i].display->url.find(res.results[i].result.doc_id) != std::string::npos);
    }
    auto j = json::parse(to_json(res));
    CHECK(j["results"].size() == 5);
    CHECK(j["results"][0].contains("title"));
    CHECK(j["results"][0].contains("cross_score"));
    CHECK(j["results"][0].contains("retrieval_score"));
    CHECK(j["index_built_at"].get<std::string>().back() == 'Z');
  }

  TEST_CASE("refresh failure keeps the old generation") {
    TempDir dir;
    write_sources(dir, 60, 2);
    {
      std::ofstream bad(dir / "bad.jsonl");
      bad << "{\"id\":\"x\",\"features\":{\"views\":\"many\"}}\n";
    }
    auto svc = make_service(small_config());
    svc->refresh(dir / "schema.json", dir / "catalog.jsonl");
    auto before = svc->snapshot();
    CHECK_THROWS_AS(svc->refresh(dir / "schema.json", dir / "bad.jsonl"), ValidationError);
    CHECK(svc->snapshot() == before);
    CHECK(svc->generation() == 1);
    // without paths the previous sources are re-read
    CHECK(svc->refresh() == 2);
  }

  TEST_CASE("modified catalog shows up after refresh") {
    TempDir dir;
    write_sources(dir, 40, 2);
    write_sources(dir, 80, 2, "bigger.jsonl");
    auto svc = make_service(small_config());
    svc->refresh(dir / "schema.json", dir / "catalog.jsonl");
    CHECK(svc->snapshot()->index->size() == 40);
    svc->refresh(dir / "schema.json", dir / "bigger.jsonl");
    CHECK(svc->snapshot()->index->size() == 80);
    CHECK(svc->generation() == 2);
  }

  TEST_CASE("concurrent refreshes are serialized") {
    TempDir dir;
    write_sources(dir, 100, 5);
    auto svc = make_service(small_config());
    svc->refresh(dir / "schema.json", dir / "catalog.jsonl");
    std::thread a([&] { svc->refresh(); });
    std::thread b([&] { svc->refresh(); });
    a.join();
    b.join();
    CHECK(svc->generation() == 3);
  }

  TEST_CASE("http endpoints") {
    TempDir dir;
    write_sources(dir, 100, 6);
    auto svc = make_service(small_config());
    int port = svc->start("127.0.0.1", 0);
    REQUIRE(port > 0);
    httplib::Client c("127.0.0.1", port);

    auto h = c.Get("/v1/health");
    REQUIRE(h);
    CHECK(h->status == 503);

    svc->refresh(dir / "schema.json", dir / "catalog.jsonl");
    h = c.Get("/v1/health");
    REQUIRE(h);
    CHECK(h->status == 200);
    auto hj = json::parse(h->body);
    CHECK(hj == json{{"status", "ok"}, {"generation", 1}, {"docs", 100}});

    auto r = c.Post("/v1/recommend", R"({"query":"security battlecard","top_n":3})",
                    "application/json");
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(json::parse(r->body)["results"].size() == 3);

    r = c.Post("/v1/recommend", R"({"query":""})", "application/json");
    REQUIRE(r);
    CHECK(r->status == 400);
    CHECK(json::parse(r->body).contains("error"));

    r = c.Post("/v1/refresh", "", "application/json");
    REQUIRE(r);
    CHECK(r->status == 202);
    for (int i = 0; i < 200 && svc->generation() < 2; ++i) {
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    CHECK(svc->generation() == 2);

    // a refresh that fails in the background leaves health at 200
    r = c.Post("/v1/refresh", json{{"catalog", (dir / "nope.jsonl").string()}}.dump(),
               "application/json");
    REQUIRE(r);
    CHECK(r->status == 202);
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    h = c.Get("/v1/health");
    REQUIRE(h);
    CHECK(h->status == 200);
    CHECK(svc->generation() == 2);

    r = c.Post("/v1/refresh", "[", "application/json");
    REQUIRE(r);
    CHECK(r->status == 400);
    svc->stop();
  }

  TEST_CASE("remote backend down answers 503") {
    TempDir dir;
    write_sources(dir, 30, 1);
    auto stub_cfg = small_config();
    auto snap = build_snapshot(dir / "schema.json", dir / "catalog.jsonl",
                               *make_bi_encoder(stub_cfg.backend));
    auto cfg = small_config();
    cfg.backend.kind = BackendKind::kRemote;
    cfg.backend.endpoint = "http://127.0.0.1:" + std::to_string(testing::unused_port());
    cfg.backend.timeout = std::chrono::milliseconds(500);
    auto svc = make_service(cfg);
    svc->install(std::move(snap));
    try {
      svc->handle_query({"pdf", 10, 5});
      FAIL("answered with the backend down");
    } catch (const HttpError& e) {
      CHECK(e.status() == 503);
    }
  }
}
