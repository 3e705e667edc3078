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
#include <cstdint>
#include <string>
#include <vector>

#include "metarec/catalog.hpp"
#include "metarec/evalkit.hpp"

// Synthetic data used by the tests, the acceptance suite and the CLI's
// `synth` command. Everything here is deterministic across platforms.
namespace metarec::fixtures {

// splitmix64; the standard distributions are implementation-defined, so the
// generators draw from this directly.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  // Uniform in [0, n).
  std::size_t below(std::size_t n);
  // Uniform in [0, 1).
  double unit();

 private:
  std::uint64_t state_;
};

// Twenty sales-content features, twelve categorical then eight numerical.
FeatureSchema sales_schema();

// `count` documents over `schema` with ids "doc-00000", ... Categorical
// values come from per-feature vocabularies, numerical values are
// heavy-tailed counts with a share of zeros, and about 5% of values are
// missing. Works for any schema.
Catalog synthetic_catalog(const FeatureSchema& schema, std::size_t count, std::uint64_t seed);

// 31 seller-style evaluation queries.
std::vector<std::string> evaluation_queries();

// 31 queries x 4 annotators, reconstructed so that the relevance buckets are
// 15 / 9 / 7 and the annotator means span 85/31 .. 101/31.
std::vector<AnnotationRecord> reference_annotations();

// Catalog whose documents differ mainly in their "format" feature, with ten
// queries that each ask for one format. Decoy documents share many
// character 3-grams with the queries but few whole words, so the bi-encoder
// ranks them high and the cross-encoder's word overlap pushes them down.
struct FormatFixture {
  Catalog catalog;
  std::vector<std::string> queries;
  // Requested format per query.
  std::vector<std::string> formats;

  // True when the document's format equals the format the query asks for.
  RelevanceJudge judge() const;
};

FormatFixture format_fixture();

}  // namespace metarec::fixtures
