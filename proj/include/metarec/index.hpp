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

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "metarec/encoder.hpp"
#include "metarec/promptc.hpp"

namespace metarec {

using Timestamp = std::chrono::sys_seconds;

struct Candidate {
  std::string doc_id;
  double retrieval_score = 0.0;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

// Flat, id-sorted array of prompt embeddings. Immutable once built, so any
// number of threads may query it concurrently.
class EmbeddingIndex {
 public:
  struct Entry {
    std::string doc_id;
    std::vector<float> values;
  };

  EmbeddingIndex() = default;
  // Sorts entries by id. Throws DuplicateId, DimensionMismatch (a vector of
  // the wrong length) and ZeroVector.
  EmbeddingIndex(std::size_t dim, std::vector<Entry> entries, std::string model_tag = {},
                 Timestamp built_at = {});

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  const std::string& id(std::size_t i) const { return ids_[i]; }
  const std::vector<std::string>& ids() const { return ids_; }
  std::span<const float> vector(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }
  double norm(std::size_t i) const { return norms_[i]; }
  const std::string& model_tag() const { return model_tag_; }
  Timestamp built_at() const { return built_at_; }

  // Metadata is not stored in the binary file; loaders reattach it here.
  void set_metadata(std::string model_tag, Timestamp built_at) {
    model_tag_ = std::move(model_tag);
    built_at_ = built_at;
  }

  // Dimension, ids and the bit patterns of every vector. Metadata is ignored.
  bool same_content(const EmbeddingIndex& other) const;

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<float> data_;
  std::vector<double> norms_;
  std::string model_tag_;
  Timestamp built_at_{};
};

// a.b / (|a| |b|) accumulated in double. Throws DimensionMismatch, ZeroVector.
double cosine(std::span<const float> a, std::span<const float> b);
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

// Embeds every prompt offline. Throws DuplicateId, ValidationError (no
// records) and whatever the encoder raises.
EmbeddingIndex build_index(std::span<const PromptRecord> records, const BiEncoder& encoder);
EmbeddingIndex build_index(std::span<const PromptRecord> records, const BackendConfig& cfg);

// Exact stage-1 retrieval: the min(k, size) most similar entries sorted by
// score descending, ties by ascending doc id. Throws EmptyIndex,
// DimensionMismatch, ZeroVector and ValidationError (k == 0).
std::vector<Candidate> top_k(const EmbeddingIndex& index, std::span<const float> query,
                             std::size_t k);
std::vector<Candidate> top_k(const EmbeddingIndex& index, const EmbeddingVector& query,
                             std::size_t k);

// Binary cache: "MSXE", u32 version (1), u32 dim, u64 count, then per entry a
// u32 id length, the id bytes and dim little-endian f32; a trailing u64 repeats
// the count. Model tag and build time are not part of the file.
inline constexpr std::uint32_t kIndexFormatVersion = 1;

void write_index(const EmbeddingIndex& index, std::ostream& out);
// Throws FormatError on a bad magic, an unknown version or a corrupt body.
EmbeddingIndex read_index(std::istream& in);
// Throws IoError when the path cannot be opened.
void save_index(const EmbeddingIndex& index, const std::filesystem::path& path);
EmbeddingIndex load_index(const std::filesystem::path& path);

}  // namespace metarec
