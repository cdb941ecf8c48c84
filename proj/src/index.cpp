#include "dialectrag/index.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <unordered_set>

#include "dialectrag/hashing.hpp"

namespace dialectrag::index {

void rank_hits(std::vector<Hit>& hits, const std::vector<std::string>& ids, std::size_t k) {
  const auto better = [&ids](const Hit& a, const Hit& b) {
    if (a.score != b.score) return a.score > b.score;
    return ids[a.doc] < ids[b.doc];
  };
  const std::size_t keep = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(), better);
  hits.resize(keep);
}

// ---------------------------------------------------------------------------
// SparseIndex

namespace {

double mean_length(const std::vector<std::uint32_t>& lengths) {
  if (lengths.empty()) return 0.0;
  double total = 0.0;
  for (auto l : lengths) total += static_cast<double>(l);
  return total / static_cast<double>(lengths.size());
}

}  // namespace

SparseIndex SparseIndex::build(const std::vector<std::vector<std::string>>& documents, Bm25Params params) {
  SparseIndex index;
  index.params_ = params;
  index.doc_lengths_.reserve(documents.size());
  for (std::size_t d = 0; d < documents.size(); ++d) {
    std::map<std::string, std::uint32_t> tf;
    for (const auto& term : documents[d]) tf[term]++;
    for (const auto& [term, count] : tf) {
      index.postings_[term].push_back({static_cast<std::uint32_t>(d), count});
    }
    index.doc_lengths_.push_back(static_cast<std::uint32_t>(documents[d].size()));
  }
  index.avgdl_ = mean_length(index.doc_lengths_);
  return index;
}

SparseIndex SparseIndex::from_parts(std::unordered_map<std::string, std::vector<Posting>> postings,
                                    std::vector<std::uint32_t> doc_lengths, Bm25Params params) {
  std::vector<std::uint64_t> covered(doc_lengths.size(), 0);
  for (const auto& [term, list] : postings) {
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto& p = list[i];
      if (p.doc >= doc_lengths.size() || p.tf == 0 || (i > 0 && list[i - 1].doc >= p.doc)) {
        throw Error(ErrorCode::FormatError, "inconsistent postings for term '" + term + "'");
      }
      covered[p.doc] += p.tf;
    }
  }
  for (std::size_t d = 0; d < doc_lengths.size(); ++d) {
    if (covered[d] != doc_lengths[d]) {
      throw Error(ErrorCode::FormatError, "postings do not cover document " + std::to_string(d));
    }
  }
  SparseIndex index;
  index.postings_ = std::move(postings);
  index.doc_lengths_ = std::move(doc_lengths);
  index.avgdl_ = mean_length(index.doc_lengths_);
  index.params_ = params;
  return index;
}

std::size_t SparseIndex::document_frequency(const std::string& term) const {
  const auto it = postings_.find(term);
  return it == postings_.end() ? 0 : it->second.size();
}

double SparseIndex::idf(const std::string& term) const {
  const double n = static_cast<double>(doc_lengths_.size());
  const double df = static_cast<double>(document_frequency(term));
  return std::log((n - df + 0.5) / (df + 0.5) + 1.0);
}

double SparseIndex::term_score(double idf, std::uint32_t tf, std::uint32_t doc_length) const {
  const double k1 = params_.k1;
  const double b = params_.b;
  const double f = static_cast<double>(tf);
  const double dl = static_cast<double>(doc_length);
  const double avgdl = avgdl_ > 0.0 ? avgdl_ : 1.0;
  return idf * (f * (k1 + 1.0)) / (f + k1 * (1.0 - b + b * dl / avgdl));
}

SparseScores bm25_scores(const SparseIndex& index, std::span<const std::string> query_tokens) {
  SparseScores scores;
  for (const auto& term : query_tokens) {
    const auto it = index.postings().find(term);
    if (it == index.postings().end()) continue;
    const double idf = index.idf(term);
    for (const auto& p : it->second) {
      scores[p.doc] += index.term_score(idf, p.tf, index.doc_lengths()[p.doc]);
    }
  }
  return scores;
}

std::vector<Hit> top_k(const SparseScores& scores, const std::vector<std::string>& ids, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::InvalidK, "k must be >= 1");
  std::vector<Hit> hits;
  hits.reserve(scores.size());
  for (const auto& [doc, score] : scores) hits.push_back({doc, score});
  rank_hits(hits, ids, k);
  return hits;
}

std::vector<Hit> search_sparse(const SparseIndex& index, const std::vector<std::string>& ids,
                               std::span<const std::string> query_tokens, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::InvalidK, "k must be >= 1");
  return top_k(bm25_scores(index, query_tokens), ids, k);
}

// ---------------------------------------------------------------------------
// Building

namespace {

void check_records(const std::vector<corpus::CorpusRecord>& records) {
  if (records.empty()) throw Error(ErrorCode::EmptyCorpus, "no records to index");
  std::unordered_set<std::string> seen;
  for (const auto& r : records) {
    if (!seen.insert(r.id).second) throw Error(ErrorCode::DuplicateId, "record id '" + r.id + "' repeats");
  }
}

std::vector<std::string> record_ids(const std::vector<corpus::CorpusRecord>& records) {
  std::vector<std::string> ids;
  ids.reserve(records.size());
  for (const auto& r : records) ids.push_back(r.id);
  return ids;
}

}  // namespace

DenseIndexF build_dense(const std::vector<corpus::CorpusRecord>& records,
                        const embedding::EmbeddingProvider& provider) {
  check_records(records);
  std::vector<std::string> texts;
  texts.reserve(records.size());
  for (const auto& r : records) texts.push_back(r.index_text());
  embedding::EmbeddingMatrix rows = provider.embed_sentences(texts);
  if (rows.cols() != provider.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "provider returned dimension " + std::to_string(rows.cols()) +
                                                  ", declared " + std::to_string(provider.dim()));
  }
  return DenseIndexF(std::move(rows), record_ids(records));
}

SparseIndex build_sparse(const std::vector<corpus::CorpusRecord>& records, Bm25Params params) {
  std::vector<std::vector<std::string>> documents;
  documents.reserve(records.size());
  for (const auto& r : records) documents.push_back(corpus::tokenize(r.index_text()));
  return SparseIndex::build(documents, params);
}

HybridIndex build_hybrid(std::vector<corpus::CorpusRecord> records, const embedding::EmbeddingProvider& provider,
                         Bm25Params params) {
  HybridIndex index;
  index.dense = build_dense(records, provider);
  index.sparse = build_sparse(records, params);
  index.format = records.front().format;
  for (const auto& r : records) {
    if (r.format != index.format) throw Error(ErrorCode::InvalidArgument, "records mix corpus formats");
  }
  index.model = provider.model();
  index.ids = record_ids(records);
  index.docs = std::move(records);
  return index;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr char kMagic[4] = {'D', 'F', 'I', 'X'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::string& buffer() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(std::string_view data) : data_(data) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(data_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(data_[pos_++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(data_[pos_++])) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw Error(ErrorCode::FormatError, "index file section is truncated");
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize(const HybridIndex& index) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kIndexFormatVersion);
  w.u32(static_cast<std::uint32_t>(index.dim()));
  w.u32(static_cast<std::uint32_t>(index.docs.size()));
  const auto& m = index.dense.matrix();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) w.f32(m(r, c));
  }

  // Postings section: document table, BM25 parameters, document lengths, postings.
  w.u8(index.format == corpus::Format::Pairs ? 1 : 0);
  w.str(index.model);
  for (const auto& rec : index.docs) w.str(corpus::to_json(rec).dump());
  w.f64(index.sparse.params().k1);
  w.f64(index.sparse.params().b);
  for (auto len : index.sparse.doc_lengths()) w.u32(len);

  std::vector<const std::string*> terms;
  terms.reserve(index.sparse.postings().size());
  for (const auto& [term, _] : index.sparse.postings()) terms.push_back(&term);
  std::sort(terms.begin(), terms.end(), [](auto* a, auto* b) { return *a < *b; });
  w.u32(static_cast<std::uint32_t>(terms.size()));
  for (const auto* term : terms) {
    const auto& list = index.sparse.postings().at(*term);
    w.str(*term);
    w.u32(static_cast<std::uint32_t>(list.size()));
    for (const auto& p : list) {
      w.u32(p.doc);
      w.u32(p.tf);
    }
  }

  const std::uint64_t checksum = fnv1a64(w.buffer());
  w.u64(checksum);
  return std::move(w.buffer());
}

HybridIndex deserialize(const std::string& bytes) {
  constexpr std::size_t kHeader = 16;
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    if (bytes.size() < 4) throw Error(ErrorCode::ChecksumMismatch, "index file is truncated");
    throw Error(ErrorCode::FormatError, "not an index file (bad magic)");
  }
  if (bytes.size() < kHeader + 8) throw Error(ErrorCode::ChecksumMismatch, "index file is truncated");

  Reader header(std::string_view(bytes).substr(4, 12));
  const std::uint32_t version = header.u32();
  if (version != kIndexFormatVersion) {
    throw Error(ErrorCode::VersionMismatch, "index format version " + std::to_string(version) + ", expected " +
                                                std::to_string(kIndexFormatVersion));
  }
  const std::string_view body = std::string_view(bytes).substr(0, bytes.size() - 8);
  Reader tail(std::string_view(bytes).substr(bytes.size() - 8));
  if (fnv1a64(body) != tail.u64()) throw Error(ErrorCode::ChecksumMismatch, "index file checksum does not match");

  const std::uint32_t dim = header.u32();
  const std::uint32_t n = header.u32();
  Reader r(body.substr(kHeader));

  RowMatrix<float> rows(n, dim);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t c = 0; c < dim; ++c) rows(i, c) = r.f32();
  }

  HybridIndex index;
  index.format = r.u8() == 1 ? corpus::Format::Pairs : corpus::Format::Transcript;
  index.model = r.str();
  index.docs.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    index.docs.push_back(corpus::record_from_json(nlohmann::json::parse(r.str())));
  }
  Bm25Params params;
  params.k1 = r.f64();
  params.b = r.f64();
  std::vector<std::uint32_t> lengths(n);
  for (auto& len : lengths) len = r.u32();

  std::unordered_map<std::string, std::vector<Posting>> postings;
  const std::uint32_t term_count = r.u32();
  postings.reserve(term_count);
  for (std::uint32_t t = 0; t < term_count; ++t) {
    std::string term = r.str();
    std::vector<Posting> list(r.u32());
    for (auto& p : list) {
      p.doc = r.u32();
      p.tf = r.u32();
    }
    postings.emplace(std::move(term), std::move(list));
  }
  if (!r.done()) throw Error(ErrorCode::FormatError, "trailing bytes in index file");

  for (const auto& rec : index.docs) index.ids.push_back(rec.id);
  index.dense = DenseIndexF(std::move(rows), index.ids);
  index.sparse = SparseIndex::from_parts(std::move(postings), std::move(lengths), params);
  return index;
}

void save(const HybridIndex& index, const std::filesystem::path& path) {
  const std::string bytes = serialize(index);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "write to '" + path.string() + "' failed");
}

HybridIndex load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::IoError, "read from '" + path.string() + "' failed");
  return deserialize(bytes);
}

}  // namespace dialectrag::index
