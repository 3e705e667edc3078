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

#include "metarec/catalog.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "metarec/errors.hpp"

namespace metarec {

using nlohmann::json;

std::string_view to_string(FeatureKind kind) {
  return kind == FeatureKind::kCategorical ? "categorical" : "numerical";
}

FeatureSchema::FeatureSchema(std::string version, std::vector<Feature> features)
    : version_(std::move(version)), features_(std::move(features)) {
  if (features_.empty()) throw SchemaError("schema must list at least one feature");
  std::unordered_set<std::string_view> seen;
  for (const auto& f : features_) {
    if (f.name.empty()) throw SchemaError("feature name must be non-empty");
    if (!seen.insert(f.name).second) {
      throw SchemaError("duplicate feature name '" + f.name + "'");
    }
  }
}

std::optional<std::size_t> FeatureSchema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (features_[i].name == name) return i;
  }
  return std::nullopt;
}

const Feature& FeatureSchema::feature(std::string_view name) const {
  auto i = index_of(name);
  if (!i) throw UnknownFeature("unknown feature '" + std::string(name) + "'");
  return features_[*i];
}

const FeatureValue& Catalog::value(const Document& doc, std::string_view feature) const {
  auto i = schema.index_of(feature);
  if (!i) throw UnknownFeature("unknown feature '" + std::string(feature) + "'");
  return doc.values.at(*i);
}

const Document* Catalog::find(std::string_view id) const {
  for (const auto& d : documents) {
    if (d.id == id) return &d;
  }
  return nullptr;
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

FeatureKind parse_kind(const std::string& s) {
  if (s == "categorical") return FeatureKind::kCategorical;
  if (s == "numerical") return FeatureKind::kNumerical;
  throw SchemaError("unknown feature kind '" + s + "'");
}

std::string at_line(std::size_t line) { return "line " + std::to_string(line) + ": "; }

Document parse_document(const FeatureSchema& schema, const json& rec, std::size_t line) {
  if (!rec.is_object()) throw ValidationError(at_line(line) + "record must be a JSON object");
  Document doc;
  doc.values.assign(schema.size(), Missing{});
  DisplayInfo display;
  bool has_display = false;
  const json* features = nullptr;

  for (const auto& [key, val] : rec.items()) {
    if (key == "id") {
      if (!val.is_string() || val.get_ref<const std::string&>().empty()) {
        throw ValidationError(at_line(line) + "\"id\" must be a non-empty string");
      }
      doc.id = val.get<std::string>();
    } else if (key == "title" || key == "url") {
      if (!val.is_string()) throw ValidationError(at_line(line) + "\"" + key + "\" must be a string");
      (key == "title" ? display.title : display.url) = val.get<std::string>();
      has_display = true;
    } else if (key == "features") {
      if (!val.is_object()) throw ValidationError(at_line(line) + "\"features\" must be an object");
      features = &val;
    } else {
      throw ValidationError(at_line(line) + "unexpected field \"" + key + "\"");
    }
  }
  if (doc.id.empty()) throw ValidationError(at_line(line) + "missing \"id\"");
  if (has_display) doc.display = std::move(display);
  if (features == nullptr) return doc;

  for (const auto& [name, val] : features->items()) {
    auto idx = schema.index_of(name);
    if (!idx) {
      throw ValidationError(at_line(line) + "feature \"" + name + "\" is not in the schema");
    }
    if (val.is_null()) continue;
    const Feature& f = schema.features()[*idx];
    if (f.kind == FeatureKind::kCategorical) {
      if (!val.is_string()) {
        throw ValidationError(at_line(line) + "categorical feature \"" + name + "\" must be a string");
      }
      auto text = val.get<std::string>();
      if (!text.empty()) doc.values[*idx] = std::move(text);
    } else {
      if (!val.is_number()) {
        throw ValidationError(at_line(line) + "numerical feature \"" + name + "\" must be a number");
      }
      double x = val.get<double>();
      if (!std::isfinite(x)) {
        throw ValidationError(at_line(line) + "numerical feature \"" + name + "\" is not finite");
      }
      doc.values[*idx] = x;
    }
  }
  return doc;
}

}  // namespace

FeatureSchema parse_schema(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("schema: ") + e.what());
  }
  if (!j.is_object() || !j.contains("features") || !j["features"].is_array()) {
    throw ParseError("schema: expected an object with a \"features\" array");
  }
  std::string version;
  if (j.contains("version")) {
    if (!j["version"].is_string()) throw ParseError("schema: \"version\" must be a string");
    version = j["version"].get<std::string>();
  }
  std::vector<Feature> features;
  for (const auto& f : j["features"]) {
    if (!f.is_object() || !f.contains("name") || !f["name"].is_string() ||
        !f.contains("kind") || !f["kind"].is_string()) {
      throw ParseError("schema: each feature needs string \"name\" and \"kind\"");
    }
    features.push_back({f["name"].get<std::string>(), parse_kind(f["kind"].get<std::string>())});
  }
  return FeatureSchema(std::move(version), std::move(features));
}

FeatureSchema load_schema(const std::filesystem::path& path) {
  return parse_schema(read_file(path));
}

void save_schema(const FeatureSchema& schema, std::ostream& out) {
  json features = json::array();
  for (const auto& f : schema.features()) {
    features.push_back({{"name", f.name}, {"kind", to_string(f.kind)}});
  }
  out << json{{"version", schema.version()}, {"features", features}}.dump(2) << '\n';
}

Catalog parse_catalog(const FeatureSchema& schema, std::istream& in) {
  Catalog catalog{schema, {}};
  std::unordered_set<std::string> ids;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(at_line(line) + e.what());
    }
    Document doc = parse_document(schema, rec, line);
    if (!ids.insert(doc.id).second) {
      throw ValidationError(at_line(line) + "duplicate document id \"" + doc.id + "\"");
    }
    catalog.documents.push_back(std::move(doc));
  }
  return catalog;
}

Catalog load_catalog(const FeatureSchema& schema, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_catalog(schema, in);
}

void save_catalog(const Catalog& catalog, std::ostream& out) {
  const auto& features = catalog.schema.features();
  for (const auto& doc : catalog.documents) {
    json rec;
    rec["id"] = doc.id;
    if (doc.display) {
      rec["title"] = doc.display->title;
      rec["url"] = doc.display->url;
    }
    json values = json::object();
    for (std::size_t i = 0; i < features.size(); ++i) {
      const auto& v = doc.values[i];
      if (const auto* s = std::get_if<std::string>(&v)) {
        values[features[i].name] = *s;
      } else if (const auto* x = std::get_if<double>(&v)) {
        values[features[i].name] = *x;
      }
    }
    rec["features"] = std::move(values);
    out << rec.dump() << '\n';
  }
}

std::vector<double> numeric_column(const Catalog& catalog, std::string_view feature) {
  auto idx = catalog.schema.index_of(feature);
  if (!idx) throw UnknownFeature("unknown feature '" + std::string(feature) + "'");
  if (catalog.schema.features()[*idx].kind != FeatureKind::kNumerical) {
    throw KindMismatch("feature '" + std::string(feature) + "' is not numerical");
  }
  std::vector<double> column;
  column.reserve(catalog.documents.size());
  for (const auto& doc : catalog.documents) {
    if (const auto* x = std::get_if<double>(&doc.values[*idx])) column.push_back(*x);
  }
  return column;
}

}  // namespace metarec
