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

#include "metarec/fixtures.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <string_view>
#include <unordered_map>

namespace metarec::fixtures {

std::uint64_t Rng::next() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::size_t Rng::below(std::size_t n) { return n == 0 ? 0 : static_cast<std::size_t>(next() % n); }

double Rng::unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

namespace {

using Vocab = std::vector<std::string_view>;

const std::unordered_map<std::string_view, Vocab>& vocabularies() {
  static const std::unordered_map<std::string_view, Vocab> v = {
      {"format", {"PDF", "PPTX", "DOCX", "OFT", "XLSX", "URL", "MP4"}},
      {"product",
       {"Dynamics 365", "Azure", "Microsoft 365", "Power BI", "Microsoft Teams", "Power Apps",
        "GitHub Copilot", "Microsoft Sentinel"}},
      {"content_type",
       {"pitch deck", "case study", "datasheet", "whitepaper", "demo script", "battlecard",
        "email template", "training"}},
      {"industry",
       {"retail", "healthcare", "financial services", "manufacturing", "public sector",
        "education", "cross-industry"}},
      {"audience", {"seller", "customer", "partner", "technical specialist"}},
      {"sales_stage", {"prospect", "qualify", "propose", "close", "adopt"}},
      {"solution_area",
       {"business applications", "modern work", "data and AI", "infrastructure", "security"}},
      {"language", {"English", "French", "German", "Japanese", "Spanish"}},
      {"region", {"global", "Americas", "EMEA", "Asia Pacific"}},
      {"owner_team",
       {"product marketing", "field enablement", "partner marketing", "industry team"}},
      {"confidentiality", {"internal", "customer ready", "partner ready"}},
      {"topic",
       {"licensing", "migration", "copilot", "analytics", "collaboration", "compliance", "pricing",
        "customer service"}},
  };
  return v;
}

std::string padded_id(std::string_view prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%05zu", i);
  return std::string(prefix) + buf;
}

}  // namespace

FeatureSchema sales_schema() {
  using K = FeatureKind;
  return FeatureSchema("sales-content-v1",
                       {{"format", K::kCategorical},
                        {"product", K::kCategorical},
                        {"content_type", K::kCategorical},
                        {"industry", K::kCategorical},
                        {"audience", K::kCategorical},
                        {"sales_stage", K::kCategorical},
                        {"solution_area", K::kCategorical},
                        {"language", K::kCategorical},
                        {"region", K::kCategorical},
                        {"owner_team", K::kCategorical},
                        {"confidentiality", K::kCategorical},
                        {"topic", K::kCategorical},
                        {"views", K::kNumerical},
                        {"downloads", K::kNumerical},
                        {"shares", K::kNumerical},
                        {"livesends", K::kNumerical},
                        {"bookmarks", K::kNumerical},
                        {"pages", K::kNumerical},
                        {"age_days", K::kNumerical},
                        {"rating", K::kNumerical}});
}

Catalog synthetic_catalog(const FeatureSchema& schema, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  Catalog catalog{schema, {}};
  catalog.documents.reserve(count);
  const auto& vocab = vocabularies();
  for (std::size_t i = 0; i < count; ++i) {
    Document doc;
    doc.id = padded_id("doc-", i);
    doc.values.reserve(schema.size());
    for (const auto& f : schema.features()) {
      if (rng.below(20) == 0) {
        doc.values.emplace_back(Missing{});
        continue;
      }
      if (f.kind == FeatureKind::kCategorical) {
        if (auto it = vocab.find(f.name); it != vocab.end()) {
          doc.values.emplace_back(std::string(it->second[rng.below(it->second.size())]));
        } else {
          doc.values.emplace_back(f.name + "-" + std::to_string(rng.below(8)));
        }
      } else if (f.name == "rating") {
        doc.values.emplace_back(static_cast<double>(rng.below(51)) / 10.0);
      } else if (rng.below(5) == 0) {
        doc.values.emplace_back(0.0);
      } else {
        doc.values.emplace_back(std::floor(std::exp(rng.unit() * 9.0)));
      }
    }
    doc.display = DisplayInfo{"Sales asset " + std::to_string(i),
                              "https://content.example.com/assets/" + doc.id};
    catalog.documents.push_back(std::move(doc));
  }
  return catalog;
}

std::vector<std::string> evaluation_queries() {
  return {
      "Give a PDF format document about Dynamics 365 licensing",
      "pitch deck for Azure migration",
      "case study healthcare Microsoft Teams",
      "Power BI datasheet for retail customers",
      "Which Dynamics 365 assets are available as PDF?",
      "security battlecard Microsoft Sentinel",
      "email template to follow up after a Copilot demo",
      "whitepaper on data and AI for financial services",
      "training material for partners on Power Apps",
      "Microsoft 365 pricing overview",
      "customer ready deck about compliance in the public sector",
      "most viewed pitch deck for manufacturing",
      "demo script for GitHub Copilot",
      "I have a meeting tomorrow with a large retail customer who is evaluating several cloud "
      "vendors and I want something that explains our overall value proposition",
      "German language content for Azure infrastructure",
      "analytics case study with high number of views",
      "Teams collaboration content for education",
      "Dynamics 365 customer service PPTX",
      "content for the close stage of a sales cycle",
      "technical specialist documentation on migration",
      "Give me something good",
      "Power BI analytics whitepaper in Spanish",
      "latest Copilot licensing FAQ",
      "EMEA partner marketing assets for modern work",
      "Can you help me find documents that would be useful for a customer conversation about "
      "digital transformation and the future of work across industries",
      "XLSX pricing calculator",
      "short video about Microsoft Sentinel",
      "Azure OpenAI overview for healthcare",
      "battlecard comparing Dynamics 365 with competitors",
      "help",
      "low touch nurture email OFT template for prospects",
  };
}

std::vector<AnnotationRecord> reference_annotations() {
  static constexpr std::array<std::array<int, 4>, 31> kScores = {{
      {4, 3, 4, 4}, {3, 4, 5, 5}, {2, 2, 4, 3}, {0, 1, 1, 1}, {0, 2, 2, 2}, {2, 4, 2, 3},
      {1, 1, 0, 2}, {3, 3, 1, 3}, {5, 4, 4, 3}, {4, 4, 3, 5}, {2, 0, 2, 1}, {3, 5, 5, 5},
      {0, 2, 2, 1}, {4, 5, 4, 5}, {3, 2, 1, 2}, {4, 4, 4, 3}, {4, 5, 4, 4}, {3, 3, 3, 3},
      {4, 4, 5, 4}, {4, 5, 3, 4}, {0, 1, 2, 1}, {4, 4, 5, 5}, {5, 3, 4, 4}, {3, 3, 2, 4},
      {4, 3, 4, 5}, {2, 2, 4, 2}, {1, 2, 1, 2}, {4, 4, 4, 4}, {1, 3, 4, 3}, {3, 1, 3, 4},
      {3, 3, 4, 4},
  }};
  std::vector<AnnotationRecord> out;
  out.reserve(kScores.size());
  for (std::size_t i = 0; i < kScores.size(); ++i) {
    out.push_back({"q" + std::to_string(i + 1), {kScores[i].begin(), kScores[i].end()}});
  }
  return out;
}

RelevanceJudge FormatFixture::judge() const {
  std::unordered_map<std::string, std::string> doc_format;
  const auto idx = catalog.schema.index_of("format").value();
  for (const auto& d : catalog.documents) {
    if (const auto* s = std::get_if<std::string>(&d.values[idx])) doc_format.emplace(d.id, *s);
  }
  std::unordered_map<std::string, std::string> wanted;
  for (std::size_t i = 0; i < queries.size(); ++i) wanted.emplace(queries[i], formats[i]);
  return [doc_format = std::move(doc_format), wanted = std::move(wanted)](
             std::string_view doc_id, std::string_view query) {
    auto d = doc_format.find(std::string(doc_id));
    auto q = wanted.find(std::string(query));
    return d != doc_format.end() && q != wanted.end() && d->second == q->second;
  };
}

FormatFixture format_fixture() {
  using K = FeatureKind;
  FeatureSchema schema("format-fixture-v1", {{"format", K::kCategorical},
                                             {"product", K::kCategorical},
                                             {"topic", K::kCategorical},
                                             {"content_type", K::kCategorical},
                                             {"keywords", K::kCategorical},
                                             {"views", K::kNumerical}});
  static constexpr std::array<std::string_view, 5> kFormats = {"PDF", "PPTX", "OFT", "DOCX",
                                                               "XLSX"};
  static constexpr std::array<std::string_view, 4> kTopics = {"licensing", "migration",
                                                              "customer service", "sales insights"};
  // Per (format, topic) cell: five plain documents spanning the view buckets
  // and one decoy whose keywords glue the query's words into a single token.
  static constexpr std::array<double, 5> kCleanViews = {5.0, 12.0, 40.0, 900.0, 2400.0};
  static constexpr double kDecoyViews = 900.0;

  FormatFixture fx{Catalog{schema, {}}, {}, {}};
  std::size_t n = 0;
  for (auto format : kFormats) {
    for (auto topic : kTopics) {
      auto add = [&](std::string_view content_type, std::string_view keywords, double views) {
        Document d;
        d.id = padded_id("fmt-", n++);
        d.values = {std::string(format), std::string("Dynamics 365"), std::string(topic),
                    std::string(content_type), std::string(keywords), views};
        d.display = DisplayInfo{"Dynamics 365 " + std::string(topic) + " (" + std::string(format) + ")",
                                "https://content.example.com/fixture/" + d.id};
        fx.catalog.documents.push_back(std::move(d));
      };
      for (double v : kCleanViews) add("document", "contents available", v);
      add("documentation", "contentsavailablefordynamics365givea", kDecoyViews);
    }
  }
  for (std::size_t i = 0; i < 10; ++i) {
    auto format = kFormats[i % kFormats.size()];
    auto topic = kTopics[i % kTopics.size()];
    fx.queries.push_back("What are contents available for Dynamics 365 " + std::string(topic) +
                         "? Give a " + std::string(format) + " format document.");
    fx.formats.emplace_back(format);
  }
  return fx;
}

}  // namespace metarec::fixtures
