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
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "metarec/rerank.hpp"

namespace metarec {

// ---------------------------------------------------------------------------
// Latency

struct LatencySample {
  std::size_t query_index = 0;
  std::size_t batch_size = 0;
  double wall_time_s = 0.0;
};

struct LatencyStats {
  double mean = 0.0;
  // Sample (N-1) standard deviation; 0 for a single sample.
  double stddev = 0.0;
  // Mean of the two central values for even N.
  double median = 0.0;
  std::size_t count = 0;
};

// Throws ValidationError on an empty sample.
LatencyStats summarize(std::span<const double> samples);

struct LatencyRow {
  std::size_t batch_size = 0;
  LatencyStats stats;
  // Set when a pipeline error aborted this cell.
  std::optional<std::string> error;
};

struct LatencyReport {
  std::string label;
  std::vector<LatencyRow> rows;
  std::vector<LatencySample> samples;
};

// The batch sizes of the reference latency grid.
inline constexpr std::size_t kReferenceBatchSizes[] = {1, 2, 4, 8, 16, 32, 64};

// Runs every query end to end once per batch size, sequentially, after
// `warmup` untimed runs of the first query.
LatencyReport bench(std::span<const std::string> queries, std::span<const std::size_t> batch_sizes,
                    const Pipeline& pipeline, const RerankConfig& base, std::string label,
                    std::size_t warmup = 1);

// Rows are report labels, columns are batch sizes; cells are mean ± std in
// seconds, followed by a median row per label.
std::string latency_markdown(std::span<const LatencyReport> reports);
// label,stat,b=1,b=2,... with stat in {mean,std,median,count}.
std::string latency_csv(std::span<const LatencyReport> reports);

// ---------------------------------------------------------------------------
// Annotator relevance

enum class RelevanceBucket { kRelevant, kSomewhat, kNot };

std::string_view to_string(RelevanceBucket bucket);

struct AnnotationRecord {
  std::string query_id;
  // One score in [0, 5] per annotator, in a fixed annotator order.
  std::vector<int> scores;
};

// [3.5, 5] relevant, [2, 3.5) somewhat, [0, 2) not.
RelevanceBucket relevance_bucket(double average);

struct QueryRelevance {
  double average = 0.0;
  RelevanceBucket bucket = RelevanceBucket::kNot;
};

QueryRelevance bucketize_query(const AnnotationRecord& record);

struct AnnotatorBias {
  std::vector<double> means;
  // max(means) - min(means)
  double spread = 0.0;
};

// Per-annotator mean score. Throws RaggedRecords when records disagree on the
// number of annotators, ValidationError when there are none.
AnnotatorBias annotator_bias(std::span<const AnnotationRecord> records);

struct BucketCounts {
  std::size_t relevant = 0;
  std::size_t somewhat = 0;
  std::size_t not_relevant = 0;

  std::size_t total() const { return relevant + somewhat + not_relevant; }
  friend bool operator==(const BucketCounts&, const BucketCounts&) = default;
};

BucketCounts table2_summary(std::span<const AnnotationRecord> records);

std::string relevance_markdown(const BucketCounts& counts, const AnnotatorBias& bias);

// JSONL {"query_id": ..., "scores": [...]}; scores must be integers in [0,5].
std::vector<AnnotationRecord> parse_annotations(std::istream& in);
void save_annotations(std::span<const AnnotationRecord> records, std::ostream& out);

// ---------------------------------------------------------------------------
// One-stage vs two-stage ablation

using RelevanceJudge = std::function<bool(std::string_view doc_id, std::string_view query)>;

struct AblationRow {
  std::string query;
  std::size_t stage1_relevant = 0;
  std::size_t full_relevant = 0;
};

struct AblationReport {
  std::vector<AblationRow> rows;
  // Share of queries where the two-stage count is >= the stage-1 count.
  double fraction_full_at_least_stage1 = 1.0;
};

// Counts judged-relevant documents in the top_n of stage 1 alone and of the
// full pipeline. Throws ValidationError on an empty query list.
AblationReport ablation(std::span<const std::string> queries, const RelevanceJudge& judge,
                        const Pipeline& pipeline, const RerankConfig& cfg);

std::string ablation_markdown(const AblationReport& report);

}  // namespace metarec
