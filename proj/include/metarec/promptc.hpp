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
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "metarec/catalog.hpp"

namespace metarec {

// Context length of the reference sentence-transformer models.
inline constexpr std::size_t kDefaultTokenBudget = 512;

// Corpus percentiles that split a numerical feature into buckets.
struct BucketThresholds {
  double p65 = 0.0;
  double p85 = 0.0;

  friend bool operator==(const BucketThresholds&, const BucketThresholds&) = default;
};

// Ordered so that kLow < kMedium < kHigh; kZero sits outside that scale.
enum class BucketLabel { kZero, kLow, kMedium, kHigh };

std::string_view to_string(BucketLabel label);

using ThresholdMap = std::map<std::string, BucketThresholds, std::less<>>;

struct PromptRecord {
  std::string doc_id;
  std::string prompt;
  std::size_t est_tokens = 0;
  bool truncated = false;

  friend bool operator==(const PromptRecord&, const PromptRecord&) = default;
};

// Nearest-rank percentile: the element at 1-based rank ceil(r/100 * N) of the
// sorted sample. `percent` must be in (0, 100].
double nearest_rank_percentile(std::span<const double> sorted, int percent);

// p65 and p85 of the column, zeros included. Throws EmptyColumn.
BucketThresholds fit_thresholds(std::span<const double> column);

// Zero is checked first; the upper boundary of each range is closed, so
// value == p65 is low and value == p85 is medium.
BucketLabel bucketize(double value, const BucketThresholds& t);

// Categorical text passes through unchanged; numbers become a bucket label.
// Throws MissingThresholds for a numerical feature without thresholds and
// ValidationError when `value` is Missing or does not match the kind.
std::string render_value(const Feature& feature, const FeatureValue& value,
                         const std::optional<BucketThresholds>& t);

// ceil(characters / 4), counting UTF-8 code points.
std::size_t estimate_tokens(std::string_view text);

// Builds "<name> is <value>." for every non-missing feature in schema order,
// joined by single spaces. When the estimate exceeds `budget`, whole trailing
// fragments are dropped (the first fragment is always kept) and the record is
// marked truncated.
PromptRecord compile_prompt(const Document& doc, const FeatureSchema& schema,
                            const ThresholdMap& thresholds,
                            std::size_t budget = kDefaultTokenBudget);

// Thresholds for every numerical feature that has at least one value.
ThresholdMap fit_all_thresholds(const Catalog& catalog);

std::vector<PromptRecord> compile_all(const Catalog& catalog, const ThresholdMap& thresholds,
                                      std::size_t budget = kDefaultTokenBudget);
std::vector<PromptRecord> compile_all(const Catalog& catalog,
                                      std::size_t budget = kDefaultTokenBudget);

// JSONL dump: {"id", "prompt", "est_tokens", "truncated"} per line.
void save_prompts(std::span<const PromptRecord> records, std::ostream& out);
std::vector<PromptRecord> parse_prompts(std::istream& in);

}  // namespace metarec
