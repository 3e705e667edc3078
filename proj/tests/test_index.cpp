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

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "metarec/errors.hpp"
#include "metarec/fixtures.hpp"
#include "metarec/index.hpp"
#include "test_util.hpp"

using namespace metarec;

namespace {

EmbeddingIndex random_index(std::size_t n, std::size_t dim, std::uint64_t seed) {
  fixtures::Rng rng(seed);
  std::vector<EmbeddingIndex::Entry> entries;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<float> v(dim);
    for (auto& x : v) x = static_cast<float>(rng.unit() * 2.0 - 1.0);
    // coarse values so that exact ties happen
    if (i % 7 == 0) std::fill(v.begin(), v.end(), 0.5f);
    entries.push_back({"id-" + std::to_string(n - i), std::move(v)});
  }
  return EmbeddingIndex(dim, std::move(entries), "t");
}

// Score every entry, sort everything, cut.
std::vector<Candidate> brute_force(const EmbeddingIndex& idx, std::span<const float> q,
                                   std::size_t k) {
  std::vector<Candidate> all;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    double d = 0, na = 0, nb = 0;
    auto v = idx.vector(i);
    for (std::size_t j = 0; j < v.size(); ++j) {
      d += double(v[j]) * q[j];
      na += double(v[j]) * v[j];
      nb += double(q[j]) * q[j];
    }
    all.push_back({idx.id(i), d / (std::sqrt(na) * std::sqrt(nb))});
  }
  std::stable_sort(all.begin(), all.end(), [](const Candidate& a, const Candidate& b) {
    if (a.retrieval_score != b.retrieval_score) return a.retrieval_score > b.retrieval_score;
    return a.doc_id < b.doc_id;
  });
  all.resize(std::min(k, all.size()));
  return all;
}

std::string serialize(const EmbeddingIndex& idx) {
  std::ostringstream out;
  write_index(idx, out);
  return out.str();
}

EmbeddingIndex deserialize(const std::string& bytes) {
  std::istringstream in(bytes);
  return read_index(in);
}

}  // namespace

TEST_SUITE("index") {
  TEST_CASE("cosine examples") {
    std::vector<float> a = {1, 0}, b = {0, 1}, c = {2, 0}, d = {-1, 0}, z = {0, 0};
    CHECK(cosine(a, b) == 0.0);
    CHECK(cosine(a, c) == 1.0);
    CHECK(cosine(a, d) == -1.0);
    std::vector<float> e = {1, 1};
    CHECK(cosine(a, e) == doctest::Approx(1 / std::sqrt(2.0)));
    CHECK_THROWS_AS(cosine(a, z), ZeroVector);
    std::vector<float> three = {1, 0, 0};
    CHECK_THROWS_AS(cosine(a, three), DimensionMismatch);
  }

  TEST_CASE("constructor validation and ordering") {
    using E = EmbeddingIndex::Entry;
    CHECK_THROWS_AS(EmbeddingIndex(2, {E{"a", {1, 0}}, E{"a", {0, 1}}}), DuplicateId);
    CHECK_THROWS_AS(EmbeddingIndex(2, {E{"a", {1, 0, 0}}}), DimensionMismatch);
    CHECK_THROWS_AS(EmbeddingIndex(2, {E{"a", {0, 0}}}), ZeroVector);
    EmbeddingIndex idx(2, {E{"b", {1, 0}}, E{"a", {0, 1}}});
    CHECK(idx.ids() == std::vector<std::string>{"a", "b"});
    CHECK(idx.vector(1)[0] == 1.0f);
  }

  TEST_CASE("top_k matches a full sort") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      auto idx = random_index(50 + seed * 13, 8, seed);
      fixtures::Rng rng(seed * 101);
      std::vector<float> q(8);
      for (auto& x : q) x = static_cast<float>(rng.unit() - 0.5);
      if (seed % 4 == 0) std::fill(q.begin(), q.end(), 1.0f);
      for (std::size_t k : {1u, 5u, 40u, 10000u}) {
        CHECK(top_k(idx, q, k) == brute_force(idx, q, k));
      }
    }
  }

  TEST_CASE("top_k errors") {
    auto idx = random_index(10, 8, 1);
    std::vector<float> q(8, 1.0f), zero(8, 0.0f), short_q(4, 1.0f);
    CHECK_THROWS_AS(top_k(EmbeddingIndex{}, q, 3), EmptyIndex);
    CHECK_THROWS_AS(top_k(idx, q, 0), ValidationError);
    CHECK_THROWS_AS(top_k(idx, zero, 3), ZeroVector);
    CHECK_THROWS_AS(top_k(idx, short_q, 3), DimensionMismatch);
  }

  TEST_CASE("build_index embeds prompts") {
    std::vector<PromptRecord> recs = {{"b", "format is PDF.", 4, false},
                                      {"a", "format is PPTX.", 4, false}};
    BackendConfig cfg;
    cfg.dim = 16;
    auto idx = build_index(recs, cfg);
    CHECK(idx.size() == 2);
    CHECK(idx.dim() == 16);
    CHECK(idx.model_tag() == "stub-3gram-d16");
    auto want = stub_embed("format is PDF.", 16);
    CHECK(std::vector<float>(idx.vector(1).begin(), idx.vector(1).end()) == want.values);
    auto hit = top_k(idx, want, 1);
    CHECK(hit.front().doc_id == "b");
    CHECK(hit.front().retrieval_score == doctest::Approx(1.0));
    recs.push_back({"a", "dup", 1, false});
    CHECK_THROWS_AS(build_index(recs, cfg), DuplicateId);
    CHECK_THROWS_AS(build_index(std::span<const PromptRecord>{}, cfg), ValidationError);
  }

  TEST_CASE("binary round trip is bit exact") {
    auto idx = random_index(300, 24, 5);
    auto bytes = serialize(idx);
    auto back = deserialize(bytes);
    CHECK(back.same_content(idx));
    CHECK(serialize(back) == bytes);
    CHECK(bytes.substr(0, 4) == "MSXE");
    CHECK(bytes.size() == 4 + 4 + 4 + 8 + 300 * 4 + [&] {
      std::size_t s = 0;
      for (const auto& id : idx.ids()) s += id.size() + 24 * 4;
      return s;
    }() + 8);

    metarec::testing::TempDir dir;
    save_index(idx, dir / "x.msxe");
    CHECK(load_index(dir / "x.msxe").same_content(idx));
    CHECK_THROWS_AS(load_index(dir / "missing.msxe"), IoError);
  }

  TEST_CASE("corrupt files are rejected") {
    auto bytes = serialize(random_index(20, 8, 2));
    auto expect_format_error = [](const std::string& b) {
      CHECK_THROWS_AS(deserialize(b), FormatError);
    };
    SUBCASE("bad magic") {
      auto b = bytes;
      b[0] = 'X';
      expect_format_error(b);
    }
    SUBCASE("unknown version names the version") {
      auto b = bytes;
      std::uint32_t v = 99;
      std::memcpy(b.data() + 4, &v, 4);
      try {
        deserialize(b);
        FAIL("accepted version 99");
      } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("99") != std::string::npos);
      }
    }
    SUBCASE("every truncation") {
      for (std::size_t n = 0; n < bytes.size(); n += 3) expect_format_error(bytes.substr(0, n));
      expect_format_error(bytes.substr(0, bytes.size() - 1));
    }
    SUBCASE("trailing garbage") { expect_format_error(bytes + "x"); }
    SUBCASE("trailer mismatch") {
      auto b = bytes;
      b[b.size() - 8] ^= 1;
      expect_format_error(b);
    }
    SUBCASE("impossible count") {
      auto b = bytes;
      std::uint64_t n = 1ULL << 60;
      std::memcpy(b.data() + 12, &n, 8);
      expect_format_error(b);
    }
  }
}
