#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dialectrag/corpus.hpp"
#include "dialectrag/embedding.hpp"
#include "dialectrag/error.hpp"

namespace dialectrag::index {

using embedding::RowMatrix;

inline constexpr double kRowNormTolerance = 1e-5;

/// A scored document, by position in the index.
struct Hit {
  std::size_t doc = 0;
  double score = 0.0;
  friend bool operator==(const Hit&, const Hit&) = default;
};

/// Sorts by score descending, ties by ascending record id, and keeps the first k.
void rank_hits(std::vector<Hit>& hits, const std::vector<std::string>& ids, std::size_t k);

// ---------------------------------------------------------------------------
// Dense

/// Flat inner-product index over unit-norm rows. Dot products accumulate in
/// double and are reported rounded to Scalar, so equal-valued scores compare equal.
template <typename Scalar>
class DenseIndex {
 public:
  using Matrix = RowMatrix<Scalar>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  DenseIndex() = default;

  DenseIndex(Matrix rows, std::vector<std::string> ids) : rows_(std::move(rows)), ids_(std::move(ids)) {
    if (rows_.rows() != static_cast<Eigen::Index>(ids_.size())) {
      throw Error(ErrorCode::InvalidArgument, "dense index: row count differs from id count");
    }
    if (!embedding::rows_unit_norm(rows_, kRowNormTolerance)) {
      throw Error(ErrorCode::InvalidArgument, "dense index: every row must be unit-norm");
    }
  }

  std::size_t size() const noexcept { return ids_.size(); }
  int dim() const noexcept { return static_cast<int>(rows_.cols()); }
  const Matrix& matrix() const noexcept { return rows_; }
  const std::vector<std::string>& ids() const noexcept { return ids_; }

  template <typename Derived>
  Vector scores(const Eigen::MatrixBase<Derived>& query) const {
    if (query.size() != rows_.cols()) {
      throw Error(ErrorCode::DimensionMismatch, "query dimension " + std::to_string(query.size()) +
                                                    " != index dimension " + std::to_string(rows_.cols()));
    }
    const Eigen::VectorXd q = query.template cast<double>();
    return rows_.template cast<double>().lazyProduct(q).template cast<Scalar>();
  }

 private:
  Matrix rows_;
  std::vector<std::string> ids_;
};

template <typename Scalar, typename Derived>
std::vector<Hit> search_dense(const DenseIndex<Scalar>& index, const Eigen::MatrixBase<Derived>& query,
                              std::size_t k) {
  if (k == 0) throw Error(ErrorCode::InvalidK, "k must be >= 1");
  const auto s = index.scores(query);
  std::vector<Hit> hits(index.size());
  for (std::size_t i = 0; i < hits.size(); ++i) hits[i] = {i, static_cast<double>(s(static_cast<Eigen::Index>(i)))};
  rank_hits(hits, index.ids(), k);
  return hits;
}

// ---------------------------------------------------------------------------
// Sparse (Okapi BM25)

struct Bm25Params {
  double k1 = 1.5;
  double b = 0.75;
};

struct Posting {
  std::uint32_t doc = 0;
  std::uint32_t tf = 0;
  friend bool operator==(const Posting&, const Posting&) = default;
};

class SparseIndex {
 public:
  SparseIndex() = default;

  static SparseIndex build(const std::vector<std::vector<std::string>>& documents, Bm25Params params = {});

  /// Reassembles an index from stored postings; validates consistency.
  static SparseIndex from_parts(std::unordered_map<std::string, std::vector<Posting>> postings,
                                std::vector<std::uint32_t> doc_lengths, Bm25Params params);

  std::size_t size() const noexcept { return doc_lengths_.size(); }
  double avgdl() const noexcept { return avgdl_; }
  const Bm25Params& params() const noexcept { return params_; }
  const std::vector<std::uint32_t>& doc_lengths() const noexcept { return doc_lengths_; }
  const std::unordered_map<std::string, std::vector<Posting>>& postings() const noexcept { return postings_; }

  std::size_t document_frequency(const std::string& term) const;
  /// ln((N - df + 0.5) / (df + 0.5) + 1)
  double idf(const std::string& term) const;
  /// One term's contribution for a document holding it `tf` times.
  double term_score(double idf, std::uint32_t tf, std::uint32_t doc_length) const;

 private:
  std::unordered_map<std::string, std::vector<Posting>> postings_;
  std::vector<std::uint32_t> doc_lengths_;
  double avgdl_ = 0.0;
  Bm25Params params_;
};

/// Per-document scores, keyed by document position. Documents sharing no
/// query term are absent. Contributions are added in query-term order.
using SparseScores = std::map<std::size_t, double>;

SparseScores bm25_scores(const SparseIndex& index, std::span<const std::string> query_tokens);

std::vector<Hit> top_k(const SparseScores& scores, const std::vector<std::string>& ids, std::size_t k);

std::vector<Hit> search_sparse(const SparseIndex& index, const std::vector<std::string>& ids,
                               std::span<const std::string> query_tokens, std::size_t k);

// ---------------------------------------------------------------------------
// Hybrid

using DenseIndexF = DenseIndex<float>;

/// Dense and sparse indices over the same records, row i = docs[i].
struct HybridIndex {
  corpus::Format format = corpus::Format::Pairs;
  std::string model;
  std::vector<corpus::CorpusRecord> docs;
  std::vector<std::string> ids;
  DenseIndexF dense;
  SparseIndex sparse;

  int dim() const noexcept { return dense.dim(); }
};

/// Rows are embeddings of record.index_text(). Throws EmptyCorpus / DuplicateId / DimensionMismatch.
DenseIndexF build_dense(const std::vector<corpus::CorpusRecord>& records,
                        const embedding::EmbeddingProvider& provider);

SparseIndex build_sparse(const std::vector<corpus::CorpusRecord>& records, Bm25Params params = {});

HybridIndex build_hybrid(std::vector<corpus::CorpusRecord> records, const embedding::EmbeddingProvider& provider,
                         Bm25Params params = {});

// ---------------------------------------------------------------------------
// Persistence
//
// "DFIX" | u32 version | u32 D | u32 N | N*D f32 (row-major) | postings section | u64 checksum
// All integers and floats little-endian; the checksum is FNV-1a 64 over every preceding byte.

inline constexpr std::uint32_t kIndexFormatVersion = 1;

std::string serialize(const HybridIndex& index);
HybridIndex deserialize(const std::string& bytes);

void save(const HybridIndex& index, const std::filesystem::path& path);
HybridIndex load(const std::filesystem::path& path);

}  // namespace dialectrag::index
