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

#include "metarec/evalkit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "metarec/errors.hpp"
#include "metarec/log.hpp"

namespace metarec {

LatencyStats summarize(std::span<const double> samples) {
  if (samples.empty()) throw ValidationError("summarize: no samples");
  LatencyStats s;
  s.count = samples.size();
  const double n = static_cast<double>(samples.size());
  s.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  if (samples.size() > 1) {
    double ss = 0.0;
    for (double x : samples) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / (n - 1.0));
  }
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  s.median = sorted.size() % 2 == 1 ? sorted[mid] : (sorted[mid - 1] + sorted[mid]) / 2.0;
  return s;
}

LatencyReport bench(std::span<const std::string> queries, std::span<const std::size_t> batch_sizes,
                    const Pipeline& pipeline, const RerankConfig& base, std::string label,
                    std::size_t warmup) {
  if (queries.empty()) throw ValidationError("bench: no queries");
  LatencyReport report;
  report.label = std::move(label);

  for (std::size_t i = 0; i < warmup; ++i) run_pipeline(queries.front(), pipeline, base);

  using clock = std::chrono::steady_clock;
  for (std::size_t b : batch_sizes) {
    LatencyRow row;
    row.batch_size = b;
    RerankConfig cfg = base;
    cfg.batch_size = b;
    std::vector<double> times;
    times.reserve(queries.size());
    try {
      for (std::size_t q = 0; q < queries.size(); ++q) {
        auto t0 = clock::now();
        run_pipeline(queries[q], pipeline, cfg);
        double secs = std::chrono::duration<double>(clock::now() - t0).count();
        times.push_back(secs);
        report.samples.push_back({q, b, secs});
      }
      row.stats = summarize(times);
    } catch (const Error& e) {
      row.error = e.what();
      log_error("bench cell b=" + std::to_string(b) + " aborted: " + e.what());
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

namespace {

std::vector<std::size_t> batch_columns(std::span<const LatencyReport> reports) {
  std::vector<std::size_t> cols;
  for (const auto& r : reports) {
    for (const auto& row : r.rows) {
      if (std::find(cols.begin(), cols.end(), row.batch_size) == cols.end()) {
        cols.push_back(row.batch_size);
      }
    }
  }
  std::sort(cols.begin(), cols.end());
  return cols;
}

const LatencyRow* find_row(const LatencyReport& r, std::size_t b) {
  for (const auto& row : r.rows) {
    if (row.batch_size == b) return &row;
  }
  return nullptr;
}

}  // namespace

std::string latency_markdown(std::span<const LatencyReport> reports) {
  auto cols = batch_columns(reports);
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << "| |";
  for (auto b : cols) out << " b=" << b << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < cols.size(); ++i) out << "---|";
  out << '\n';
  for (const auto& r : reports) {
    out << "| **" << r.label << "** |";
    for (auto b : cols) {
      const auto* row = find_row(r, b);
      if (row == nullptr) {
        out << " |";
      } else if (row->error) {
        out << " error |";
      } else {
        out << ' ' << row->stats.mean << " ± " << row->stats.stddev << " |";
      }
    }
    out << "\n| " << r.label << " (median) |";
    for (auto b : cols) {
      const auto* row = find_row(r, b);
      if (row == nullptr || row->error) {
        out << " |";
      } else {
        out << ' ' << row->stats.median << " |";
      }
    }
    out << '\n';
  }
  out << "\nTimes in seconds; mean ± sample std over the evaluation queries.\n";
  return out.str();
}

std::string latency_csv(std::span<const LatencyReport> reports) {
  auto cols = batch_columns(reports);
  std::ostringstream out;
  out << std::setprecision(9);
  out << "label,stat";
  for (auto b : cols) out << ",b=" << b;
  out << '\n';
  const char* stats[] = {"mean", "std", "median", "count"};
  for (const auto& r : reports) {
    for (const char* stat : stats) {
      out << r.label << ',' << stat;
      for (auto b : cols) {
        out << ',';
        const auto* row = find_row(r, b);
        if (row == nullptr || row->error) continue;
        std::string_view s = stat;
        if (s == "mean") out << row->stats.mean;
        if (s == "std") out << row->stats.stddev;
        if (s == "median") out << row->stats.median;
        if (s == "count") out << row->stats.count;
      }
      out << '\n';
    }
  }
  return out.str();
}

std::string_view to_string(RelevanceBucket bucket) {
  switch (bucket) {
    case RelevanceBucket::kRelevant:
      return "relevant";
    case RelevanceBucket::kSomewhat:
      return "somewhat relevant";
    case RelevanceBucket::kNot:
      return "not relevant";
  }
  return "not relevant";
}

RelevanceBucket relevance_bucket(double average) {
  if (average >= 3.5) return RelevanceBucket::kRelevant;
  if (average >= 2.0) return RelevanceBucket::kSomewhat;
  return RelevanceBucket::kNot;
}

QueryRelevance bucketize_query(const AnnotationRecord& record) {
  if (record.scores.empty()) {
    throw ValidationError("query \"" + record.query_id + "\" has no annotator scores");
  }
  double sum = std::accumulate(record.scores.begin(), record.scores.end(), 0.0);
  double avg = sum / static_cast<double>(record.scores.size());
  return {avg, relevance_bucket(avg)};
}

AnnotatorBias annotator_bias(std::span<const AnnotationRecord> records) {
  if (records.empty()) throw ValidationError("annotator_bias: no records");
  const std::size_t annotators = records.front().scores.size();
  if (annotators == 0) throw ValidationError("annotator_bias: records have no scores");
  std::vector<double> sums(annotators, 0.0);
  for (const auto& r : records) {
    if (r.scores.size() != annotators) {
      throw RaggedRecords("query \"" + r.query_id + "\" has " + std::to_string(r.scores.size()) +
                          " scores, expected " + std::to_string(annotators));
    }
    for (std::size_t a = 0; a < annotators; ++a) sums[a] += r.scores[a];
  }
  AnnotatorBias bias;
  for (double s : sums) bias.means.push_back(s / static_cast<double>(records.size()));
  auto [lo, hi] = std::minmax_element(bias.means.begin(), bias.means.end());
  bias.spread = *hi - *lo;
  return bias;
}

BucketCounts table2_summary(std::span<const AnnotationRecord> records) {
  BucketCounts c;
  for (const auto& r : records) {
    switch (bucketize_query(r).bucket) {
      case RelevanceBucket::kRelevant:
        ++c.relevant;
        break;
      case RelevanceBucket::kSomewhat:
        ++c.somewhat;
        break;
      case RelevanceBucket::kNot:
        ++c.not_relevant;
        break;
    }
  }
  return c;
}

std::string relevance_markdown(const BucketCounts& counts, const AnnotatorBias& bias) {
  std::ostringstream out;
  const auto n = counts.total();
  out << "| Bucket | Score Range | Number of Queries |\n|---|---|---|\n";
  out << "| Relevant | [3.5-5] | " << counts.relevant << '/' << n << " |\n";
  out << "| Somewhat relevant | [2-3.5) | " << counts.somewhat << '/' << n << " |\n";
  out << "| Not relevant | [0-2) | " << counts.not_relevant << '/' << n << " |\n\n";
  out << std::fixed << std::setprecision(2) << "Annotator means:";
  for (double m : bias.means) out << ' ' << m;
  out << " (spread " << bias.spread << ")\n";
  return out.str();
}

std::vector<AnnotationRecord> parse_annotations(std::istream& in) {
  std::vector<AnnotationRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    AnnotationRecord rec;
    try {
      auto j = nlohmann::json::parse(line);
      const auto& id = j.at("query_id");
      rec.query_id = id.is_string() ? id.get<std::string>() : id.dump();
      for (const auto& s : j.at("scores")) {
        if (!s.is_number_integer()) throw ValidationError("score is not an integer");
        rec.scores.push_back(s.get<int>());
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("annotations line " + std::to_string(n) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError("annotations line " + std::to_string(n) + ": " + e.what());
    }
    if (rec.scores.empty()) {
      throw ValidationError("annotations line " + std::to_string(n) + ": no scores");
    }
    for (int s : rec.scores) {
      if (s < 0 || s > 5) {
        throw ValidationError("annotations line " + std::to_string(n) + ": score " +
                              std::to_string(s) + " outside [0,5]");
      }
    }
    out.push_back(std::move(rec));
  }
  return out;
}

void save_annotations(std::span<const AnnotationRecord> records, std::ostream& out) {
  for (const auto& r : records) {
    out << nlohmann::json{{"query_id", r.query_id}, {"scores", r.scores}}.dump() << '\n';
  }
}

AblationReport ablation(std::span<const std::string> queries, const RelevanceJudge& judge,
                        const Pipeline& pipeline, const RerankConfig& cfg) {
  if (queries.empty()) throw ValidationError("ablation: no queries");
  cfg.validate();
  AblationReport report;
  std::size_t ok = 0;
  for (const auto& q : queries) {
    AblationRow row;
    row.query = q;
    for (const auto& c : retrieve(q, pipeline, cfg.top_n)) {
      row.stage1_relevant += judge(c.doc_id, q) ? 1 : 0;
    }
    for (const auto& r : run_pipeline(q, pipeline, cfg)) {
      row.full_relevant += judge(r.doc_id, q) ? 1 : 0;
    }
    ok += row.full_relevant >= row.stage1_relevant ? 1 : 0;
    report.rows.push_back(std::move(row));
  }
  report.fraction_full_at_least_stage1 =
      static_cast<double>(ok) / static_cast<double>(queries.size());
  return report;
}

std::string ablation_markdown(const AblationReport& report) {
  std::ostringstream out;
  out << "| Query | 1-stage | 2-stage |\n|---|---|---|\n";
  for (const auto& r : report.rows) {
    out << "| " << r.query << " | " << r.stage1_relevant << " | " << r.full_relevant << " |\n";
  }
  out << std::fixed << std::setprecision(2)
      << "\n2-stage >= 1-stage on " << report.fraction_full_at_least_stage1 * 100.0
      << "% of queries\n";
  return out.str();
}

}  // namespace metarec
