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

#include "metarec/promptc.hpp"

#include <algorithm>
#include <ostream>
#include <istream>

#include "json.hpp"
#include "metarec/errors.hpp"

namespace metarec {

namespace {

std::size_t count_chars(std::string_view text) {
  std::size_t n = 0;
  for (unsigned char c : text) n += (c & 0xC0) != 0x80;
  return n;
}

}  // namespace

std::string_view to_string(BucketLabel label) {
  switch (label) {
    case BucketLabel::kZero:
      return "zero";
    case BucketLabel::kLow:
      return "low";
    case BucketLabel::kMedium:
      return "medium";
    case BucketLabel::kHigh:
      return "high";
  }
  return "low";
}

double nearest_rank_percentile(std::span<const double> sorted, int percent) {
  if (sorted.empty()) throw EmptyColumn("percentile of an empty column");
  // Integer ceil avoids r/100 * N rounding up past an exact rank.
  std::size_t n = sorted.size();
  std::size_t rank = (static_cast<std::size_t>(percent) * n + 99) / 100;
  rank = std::clamp<std::size_t>(rank, 1, n);
  return sorted[rank - 1];
}

BucketThresholds fit_thresholds(std::span<const double> column) {
  if (column.empty()) throw EmptyColumn("cannot fit thresholds on an empty column");
  std::vector<double> sorted(column.begin(), column.end());
  std::sort(sorted.begin(), sorted.end());
  return {nearest_rank_percentile(sorted, 65), nearest_rank_percentile(sorted, 85)};
}

BucketLabel bucketize(double value, const BucketThresholds& t) {
  if (value == 0.0) return BucketLabel::kZero;
  if (value > t.p85) return BucketLabel::kHigh;
  if (value > t.p65) return BucketLabel::kMedium;
  return BucketLabel::kLow;
}

std::string render_value(const Feature& feature, const FeatureValue& value,
                         const std::optional<BucketThresholds>& t) {
  if (is_missing(value)) {
    throw ValidationError("feature '" + feature.name + "' has no value to render");
  }
  if (feature.kind == FeatureKind::kCategorical) {
    const auto* text = std::get_if<std::string>(&value);
    if (text == nullptr) {
      throw ValidationError("categorical feature '" + feature.name + "' holds a number");
    }
    return *text;
  }
  const auto* number = std::get_if<double>(&value);
  if (number == nullptr) {
    throw ValidationError("numerical feature '" + feature.name + "' holds text");
  }
  if (!t) throw MissingThresholds("no thresholds for numerical feature '" + feature.name + "'");
  return std::string(to_string(bucketize(*number, *t)));
}

std::size_t estimate_tokens(std::string_view text) { return (count_chars(text) + 3) / 4; }

PromptRecord compile_prompt(const Document& doc, const FeatureSchema& schema,
                            const ThresholdMap& thresholds, std::size_t budget) {
  std::vector<std::string> fragments;
  const auto& features = schema.features();
  for (std::size_t i = 0; i < features.size(); ++i) {
    const FeatureValue& v = doc.values.at(i);
    if (is_missing(v)) continue;
    std::optional<BucketThresholds> t;
    if (features[i].kind == FeatureKind::kNumerical) {
      auto it = thresholds.find(features[i].name);
      if (it != thresholds.end()) t = it->second;
    }
    fragments.push_back(features[i].name + " is " + render_value(features[i], v, t) + ".");
  }

  // Joined length of the first k fragments, in code points.
  std::vector<std::size_t> prefix_chars;
  prefix_chars.reserve(fragments.size());
  std::size_t running = 0;
  for (const auto& f : fragments) {
    running += count_chars(f) + (prefix_chars.empty() ? 0 : 1);
    prefix_chars.push_back(running);
  }
  auto tokens_for = [&](std::size_t k) { return (prefix_chars[k - 1] + 3) / 4; };
  std::size_t kept = fragments.size();
  while (kept > 1 && tokens_for(kept) > budget) --kept;
  bool truncated = kept < fragments.size() || (kept == 1 && tokens_for(1) > budget);

  PromptRecord rec;
  rec.doc_id = doc.id;
  for (std::size_t i = 0; i < kept; ++i) {
    if (i > 0) rec.prompt += ' ';
    rec.prompt += fragments[i];
  }
  rec.est_tokens = estimate_tokens(rec.prompt);
  rec.truncated = truncated;
  return rec;
}

ThresholdMap fit_all_thresholds(const Catalog& catalog) {
  ThresholdMap out;
  for (const auto& f : catalog.schema.features()) {
    if (f.kind != FeatureKind::kNumerical) continue;
    auto column = numeric_column(catalog, f.name);
    if (!column.empty()) out.emplace(f.name, fit_thresholds(column));
  }
  return out;
}

std::vector<PromptRecord> compile_all(const Catalog& catalog, const ThresholdMap& thresholds,
                                      std::size_t budget) {
  std::vector<PromptRecord> out;
  out.reserve(catalog.documents.size());
  for (const auto& doc : catalog.documents) {
    out.push_back(compile_prompt(doc, catalog.schema, thresholds, budget));
  }
  return out;
}

std::vector<PromptRecord> compile_all(const Catalog& catalog, std::size_t budget) {
  return compile_all(catalog, fit_all_thresholds(catalog), budget);
}

void save_prompts(std::span<const PromptRecord> records, std::ostream& out) {
  for (const auto& r : records) {
    nlohmann::json j{{"id", r.doc_id},
                     {"prompt", r.prompt},
                     {"est_tokens", r.est_tokens},
                     {"truncated", r.truncated}};
    out << j.dump() << '\n';
  }
}

std::vector<PromptRecord> parse_prompts(std::istream& in) {
  std::vector<PromptRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      out.push_back({j.at("id").get<std::string>(), j.at("prompt").get<std::string>(),
                     j.at("est_tokens").get<std::size_t>(), j.at("truncated").get<bool>()});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("prompts line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace metarec
