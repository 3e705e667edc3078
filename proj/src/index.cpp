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

#include "metarec/index.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <unordered_set>

#include "metarec/errors.hpp"

namespace metarec {

namespace {

constexpr char kMagic[4] = {'M', 'S', 'X', 'E'};

double l2_norm(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(s);
}

double dot(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return s;
}

template <typename T>
void put_le(std::string& buf, T value) {
  static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  buf.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& buf) : buf_(buf) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, buf_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
  }

  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string out = buf_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::size_t remaining() const { return buf_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (remaining() < n) {
      throw FormatError(std::string("index file truncated while reading ") + what);
    }
  }

  const std::string& buf_;
  std::size_t pos_ = 0;
};

}  // namespace

EmbeddingIndex::EmbeddingIndex(std::size_t dim, std::vector<Entry> entries, std::string model_tag,
                               Timestamp built_at)
    : dim_(dim), model_tag_(std::move(model_tag)), built_at_(built_at) {
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.doc_id < b.doc_id; });
  ids_.reserve(entries.size());
  data_.reserve(entries.size() * dim);
  norms_.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& e = entries[i];
    if (i > 0 && e.doc_id == ids_.back()) throw DuplicateId("duplicate doc id \"" + e.doc_id + "\"");
    if (e.values.size() != dim) {
      throw DimensionMismatch("vector for \"" + e.doc_id + "\" has length " +
                              std::to_string(e.values.size()) + ", index dim is " +
                              std::to_string(dim));
    }
    double n = l2_norm(e.values);
    if (!(n > 0.0) || !std::isfinite(n)) {
      throw ZeroVector("vector for \"" + e.doc_id + "\" has zero or non-finite norm");
    }
    ids_.push_back(std::move(e.doc_id));
    data_.insert(data_.end(), e.values.begin(), e.values.end());
    norms_.push_back(n);
  }
}

bool EmbeddingIndex::same_content(const EmbeddingIndex& other) const {
  return dim_ == other.dim_ && ids_ == other.ids_ && data_.size() == other.data_.size() &&
         std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0;
}

double cosine(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw DimensionMismatch("cosine of vectors with dims " + std::to_string(a.size()) + " and " +
                            std::to_string(b.size()));
  }
  double na = l2_norm(a);
  double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) throw ZeroVector("cosine of a zero vector");
  return dot(a, b) / (na * nb);
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  return cosine(std::span<const float>(a.values), std::span<const float>(b.values));
}

EmbeddingIndex build_index(std::span<const PromptRecord> records, const BiEncoder& encoder) {
  if (records.empty()) throw ValidationError("build_index: no prompt records");
  std::unordered_set<std::string_view> seen;
  std::vector<std::string> texts;
  texts.reserve(records.size());
  for (const auto& r : records) {
    if (!seen.insert(r.doc_id).second) throw DuplicateId("duplicate doc id \"" + r.doc_id + "\"");
    texts.push_back(r.prompt);
  }
  auto vectors = encoder.embed(texts);
  if (vectors.size() != records.size()) {
    throw BackendUnavailable("encoder returned " + std::to_string(vectors.size()) +
                             " vectors for " + std::to_string(records.size()) + " prompts");
  }
  std::vector<EmbeddingIndex::Entry> entries;
  entries.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    entries.push_back({records[i].doc_id, std::move(vectors[i].values)});
  }
  auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  return EmbeddingIndex(encoder.dim(), std::move(entries), encoder.model_tag(), now);
}

EmbeddingIndex build_index(std::span<const PromptRecord> records, const BackendConfig& cfg) {
  return build_index(records, *make_bi_encoder(cfg));
}

std::vector<Candidate> top_k(const EmbeddingIndex& index, std::span<const float> query,
                             std::size_t k) {
  if (index.empty()) throw EmptyIndex("top_k on an empty index");
  if (k == 0) throw ValidationError("top_k: K must be >= 1");
  if (query.size() != index.dim()) {
    throw DimensionMismatch("query has dim " + std::to_string(query.size()) + ", index has " +
                            std::to_string(index.dim()));
  }
  double qn = l2_norm(query);
  if (qn == 0.0) throw ZeroVector("query vector is zero");

  const std::size_t n = index.size();
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = dot(query, index.vector(i)) / (qn * index.norm(i));
  }
  // Entries are id-sorted, so the position breaks ties by ascending id.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto better = [&](std::size_t a, std::size_t b) {
    return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
  };
  std::size_t take = std::min(k, n);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    better);

  std::vector<Candidate> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back({index.id(order[i]), scores[order[i]]});
  return out;
}

std::vector<Candidate> top_k(const EmbeddingIndex& index, const EmbeddingVector& query,
                             std::size_t k) {
  return top_k(index, std::span<const float>(query.values), k);
}

void write_index(const EmbeddingIndex& index, std::ostream& out) {
  std::string buf;
  buf.append(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(buf, kIndexFormatVersion);
  put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(index.dim()));
  put_le<std::uint64_t>(buf, index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto& id = index.id(i);
    put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(id.size()));
    buf.append(id);
    for (float x : index.vector(i)) put_le<float>(buf, x);
  }
  put_le<std::uint64_t>(buf, index.size());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("failed to write index");
}

EmbeddingIndex read_index(std::istream& in) {
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(buf);
  auto magic = r.bytes(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw FormatError("bad index magic");
  auto version = r.get<std::uint32_t>("version");
  if (version != kIndexFormatVersion) {
    throw FormatError("unsupported index version " + std::to_string(version) + " (expected " +
                      std::to_string(kIndexFormatVersion) + ")");
  }
  auto dim = r.get<std::uint32_t>("dim");
  auto count = r.get<std::uint64_t>("count");
  if (dim == 0) throw FormatError("index dim is zero");
  // Each entry needs at least 4 + 4*dim bytes; reject impossible counts early.
  if (count > r.remaining() / (4 + 4 * static_cast<std::uint64_t>(dim))) {
    throw FormatError("index count " + std::to_string(count) + " exceeds file size");
  }

  std::vector<EmbeddingIndex::Entry> entries;
  entries.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    auto len = r.get<std::uint32_t>("id length");
    EmbeddingIndex::Entry e;
    e.doc_id = r.bytes(len, "id");
    e.values.resize(dim);
    for (auto& x : e.values) x = r.get<float>("vector");
    entries.push_back(std::move(e));
  }
  auto trailer = r.get<std::uint64_t>("trailer");
  if (trailer != count) {
    throw FormatError("index trailer count " + std::to_string(trailer) + " != header count " +
                      std::to_string(count));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after index trailer");
  try {
    return EmbeddingIndex(dim, std::move(entries));
  } catch (const Error& e) {
    throw FormatError(std::string("corrupt index: ") + e.what());
  }
}

void save_index(const EmbeddingIndex& index, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_index(index, out);
}

EmbeddingIndex load_index(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_index(in);
}

}  // namespace metarec
