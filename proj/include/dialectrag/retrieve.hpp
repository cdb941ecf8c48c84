#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dialectrag/embedding.hpp"
#include "dialectrag/index.hpp"

namespace dialectrag::retrieve {

enum class Pipeline { P1, P2 };
enum class QueryClass { Standard, Short };
enum class DeepMode { Auto, On, Off };

std::string_view to_string(Pipeline p) noexcept;
std::string_view to_string(QueryClass c) noexcept;
std::string_view to_string(DeepMode m) noexcept;
DeepMode parse_deep_mode(std::string_view name);

struct FusionConfig {
  double w_dense = 0.0;
  double w_sparse = 0.0;
  std::size_t k_dense = 0;
  std::size_t k_sparse = 0;
  Pipeline pipeline = Pipeline::P1;
  friend bool operator==(const FusionConfig&, const FusionConfig&) = default;
};

inline constexpr FusionConfig kP1Fusion{0.70, 0.30, 50, 50, Pipeline::P1};
inline constexpr FusionConfig kP2StandardFusion{0.55, 0.35, 50, 50, Pipeline::P2};
inline constexpr FusionConfig kP2ShortFusion{0.35, 0.55, 100, 200, Pipeline::P2};
inline constexpr double kDeepDenseWeight = 0.35;
inline constexpr double kDeepSparseWeight = 0.55;

inline constexpr std::size_t kShortQueryTokens = 4;  // short iff tokens < 4
inline constexpr std::size_t kDeepSearchMinUnique = 2;

struct BonusConfig {
  double district = 0.15;
  double exact = 0.50;
  double substring = 0.20;
  double char_sim = 0.05;  // multiplied by normalized Levenshtein similarity
};

struct Bonuses {
  double district = 0.0;
  double exact = 0.0;
  double substring = 0.0;
  double char_sim = 0.0;
};

struct RetrievalCandidate {
  std::size_t doc = 0;
  std::string id;
  std::string district;
  std::optional<double> dense_raw;   // absent if the dense channel missed it
  std::optional<double> sparse_raw;
  double dense_norm = 0.0;
  double sparse_norm = 0.0;
  Bonuses bonuses;
  double blended = 0.0;
};

/// Min-max scales to [0,1]. Constant input maps to 1.0 when its value is
/// positive and 0.0 otherwise.
std::vector<double> min_max_normalize(std::span<const double> scores);

QueryClass classify_query(std::string_view normalized_query);

/// Fills `cand.bonuses` and `cand.blended` from the already-normalized channel
/// scores. `query_norm` is compared with the record's standard side.
double blend_score(RetrievalCandidate& cand, const corpus::CorpusRecord& record, std::string_view query_norm,
                   std::string_view dialect, const FusionConfig& weights, const BonusConfig& bonuses);

/// Per-token BM25 runs summed per document, in token order.
index::SparseScores deep_search(std::span<const std::string> query_tokens, const index::SparseIndex& index);

/// Scores one candidate after its channel scores are set.
using CandidateScorer = std::function<void(RetrievalCandidate&)>;

/// Normalizes both channels, unions them by document (missing channel = 0),
/// and applies `score`. Result is in ascending document order.
std::vector<RetrievalCandidate> fuse(const std::vector<index::Hit>& dense, const std::vector<index::Hit>& sparse,
                                     const index::HybridIndex& index, const CandidateScorer& score);

/// Keeps candidates of `dialect`, sorts by blended descending then id, truncates to k.
void filter_and_rank(std::vector<RetrievalCandidate>& candidates, std::string_view dialect, std::size_t k);

struct RetrievalTrace {
  Pipeline pipeline = Pipeline::P1;
  std::string query;             // as given
  std::string query_normalized;  // used for bonuses
  std::string query_searched;    // embedded and BM25-tokenized (tag appended when short)
  std::string dialect;
  QueryClass query_class = QueryClass::Standard;
  FusionConfig initial;
  FusionConfig final;
  DeepMode deep_mode = DeepMode::Off;
  bool deep_fired = false;
  std::size_t unique_initial = 0;  // distinct dialect examples in the initial pool
  std::size_t pool_size = 0;
  std::vector<std::string> warnings;
};

struct RetrievalResult {
  std::vector<RetrievalCandidate> candidates;
  RetrievalTrace trace;
};

class Retriever {
 public:
  Retriever(const index::HybridIndex& index, const embedding::EmbeddingProvider& provider, BonusConfig bonuses = {});

  /// Fixed 70/30 fusion, dialect filter after fusion.
  RetrievalResult retrieve_p1(std::string_view query, std::string_view dialect, std::size_t k) const;

  /// Adaptive weights and candidate counts by query length, blended score with
  /// bonuses, optional deep search, dialect filter after scoring.
  RetrievalResult retrieve_p2(std::string_view query, std::string_view dialect, std::size_t k,
                              DeepMode deep = DeepMode::Auto) const;

  const index::HybridIndex& index() const noexcept { return index_; }

  /// Canonical district name present in the index. Throws UnknownDialect.
  std::string resolve_dialect(std::string_view dialect) const;

 private:
  const index::HybridIndex& index_;
  const embedding::EmbeddingProvider& provider_;
  BonusConfig bonuses_;
};

/// Per-candidate raw/normalized scores, weights, bonuses and trigger flags.
nlohmann::json explain(const RetrievalResult& result);

}  // namespace dialectrag::retrieve
