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
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace metarec {

enum class FeatureKind { kCategorical, kNumerical };

std::string_view to_string(FeatureKind kind);

struct Feature {
  std::string name;
  FeatureKind kind = FeatureKind::kCategorical;

  friend bool operator==(const Feature&, const Feature&) = default;
};

// Ordered feature list. The order is the concatenation order used when a
// document is compiled into a prompt, so it is preserved exactly as loaded.
class FeatureSchema {
 public:
  // Throws SchemaError on an empty list, an empty name or a duplicate name.
  FeatureSchema(std::string version, std::vector<Feature> features);

  const std::string& version() const { return version_; }
  const std::vector<Feature>& features() const { return features_; }
  std::size_t size() const { return features_.size(); }

  // Position of `name` in the schema, or nullopt.
  std::optional<std::size_t> index_of(std::string_view name) const;
  // Throws UnknownFeature.
  const Feature& feature(std::string_view name) const;

  friend bool operator==(const FeatureSchema&, const FeatureSchema&) = default;

 private:
  std::string version_;
  std::vector<Feature> features_;
};

struct Missing {
  friend bool operator==(Missing, Missing) = default;
};

// Missing, Text (categorical) or Number (numerical, always finite).
using FeatureValue = std::variant<Missing, std::string, double>;

inline bool is_missing(const FeatureValue& v) {
  return std::holds_alternative<Missing>(v);
}

struct DisplayInfo {
  std::string title;
  std::string url;

  friend bool operator==(const DisplayInfo&, const DisplayInfo&) = default;
};

struct Document {
  std::string id;
  // Aligned with the schema: values[i] belongs to schema.features()[i].
  std::vector<FeatureValue> values;
  std::optional<DisplayInfo> display;

  friend bool operator==(const Document&, const Document&) = default;
};

// Immutable after load; share it read-only across query handlers.
struct Catalog {
  FeatureSchema schema;
  std::vector<Document> documents;

  const FeatureValue& value(const Document& doc, std::string_view feature) const;
  const Document* find(std::string_view id) const;
};

FeatureSchema parse_schema(std::string_view json_text);
FeatureSchema load_schema(const std::filesystem::path& path);
void save_schema(const FeatureSchema& schema, std::ostream& out);

// One JSON document per non-blank line. Throws ParseError for malformed JSON
// and ValidationError for records that break the catalog invariants. Error
// messages carry the 1-based line number.
Catalog parse_catalog(const FeatureSchema& schema, std::istream& in);
Catalog load_catalog(const FeatureSchema& schema, const std::filesystem::path& path);
void save_catalog(const Catalog& catalog, std::ostream& out);

// Non-missing values of a numerical feature, in document order.
std::vector<double> numeric_column(const Catalog& catalog, std::string_view feature);

}  // namespace metarec
