#include "dialectrag/retrieve.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "dialectrag/corpus.hpp"
#include "dialectrag/edit_distance.hpp"
#include "dialectrag/error.hpp"
#include "dialectrag/unicode.hpp"

namespace dialectrag::retrieve {

std::string_view to_string(Pipeline p) noexcept { return p == Pipeline::P1 ? "P1" : "P2"; }

std::string_view to_string(QueryClass c) noexcept { return c == QueryClass::Short ? "short" : "standard"; }

std::string_view to_string(DeepMode m) noexcept {
  switch (m) {
    case DeepMode::Auto: return "auto";
    case DeepMode::On: return "on";
    case DeepMode::Off: return "off";
  }
  return "auto";
}

DeepMode parse_deep_mode(std::string_view name) {
  if (name == "auto") return DeepMode::Auto;
  if (name == "on") return DeepMode::On;
  if (name == "off") return DeepMode::Off;
  throw Error(ErrorCode::InvalidArgument, "deep mode must be auto, on or off");
}

std::vector<double> min_max_normalize(std::span<const double> scores) {
  std::vector<double> out(scores.size());
  if (scores.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (hi == lo) {
    std::fill(out.begin(), out.end(), hi > 0.0 ? 1.0 : 0.0);
    return out;
  }
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = (scores[i] - lo) / (hi - lo);
  return out;
}

QueryClass classify_query(std::string_view normalized_query) {
  return corpus::tokenize(normalized_query).size() < kShortQueryTokens ? QueryClass::Short : QueryClass::Standard;
}

double blend_score(RetrievalCandidate& cand, const corpus::CorpusRecord& record, std::string_view query_norm,
                   std::string_view dialect, const FusionConfig& weights, const BonusConfig& bonuses) {
  Bonuses b;
  if (record.district == dialect) b.district = bonuses.district;
  const std::string& standard = record.standard_norm;
  if (!query_norm.empty() && !standard.empty()) {
    if (standard == query_norm) {
      b.exact = bonuses.exact;
    } else if (standard.find(query_norm) != std::string::npos ||
               query_norm.find(standard) != std::string_view::npos) {
      b.substring = bonuses.substring;
    }
  }
  b.char_sim = bonuses.char_sim * normalized_similarity(unicode::decode(query_norm), unicode::decode(standard));

  cand.bonuses = b;
  cand.blended = weights.w_dense * cand.dense_norm + weights.w_sparse * cand.sparse_norm + b.district + b.exact +
                 b.substring + b.char_sim;
  return cand.blended;
}

index::SparseScores deep_search(std::span<const std::string> query_tokens, const index::SparseIndex& index) {
  index::SparseScores total;
  for (const auto& token : query_tokens) {
    for (const auto& [doc, score] : index::bm25_scores(index, std::span<const std::string>(&token, 1))) {
      total[doc] += score;
    }
  }
  return total;
}

std::vector<RetrievalCandidate> fuse(const std::vector<index::Hit>& dense, const std::vector<index::Hit>& sparse,
                                     const index::HybridIndex& index, const CandidateScorer& score) {
  std::vector<double> dense_raw, sparse_raw;
  for (const auto& h : dense) dense_raw.push_back(h.score);
  for (const auto& h : sparse) sparse_raw.push_back(h.score);
  const auto dense_norm = min_max_normalize(dense_raw);
  const auto sparse_norm = min_max_normalize(sparse_raw);

  std::map<std::size_t, RetrievalCandidate> pool;
  auto slot = [&](std::size_t doc) -> RetrievalCandidate& {
    auto [it, inserted] = pool.try_emplace(doc);
    if (inserted) {
      it->second.doc = doc;
      it->second.id = index.docs[doc].id;
      it->second.district = index.docs[doc].district;
    }
    return it->second;
  };
  for (std::size_t i = 0; i < dense.size(); ++i) {
    auto& c = slot(dense[i].doc);
    c.dense_raw = dense[i].score;
    c.dense_norm = dense_norm[i];
  }
  for (std::size_t i = 0; i < sparse.size(); ++i) {
    auto& c = slot(sparse[i].doc);
    c.sparse_raw = sparse[i].score;
    c.sparse_norm = sparse_norm[i];
  }

  std::vector<RetrievalCandidate> out;
  out.reserve(pool.size());
  for (auto& [doc, cand] : pool) {
    score(cand);
    out.push_back(std::move(cand));
  }
  return out;
}

void filter_and_rank(std::vector<RetrievalCandidate>& candidates, std::string_view dialect, std::size_t k) {
  std::erase_if(candidates, [&](const RetrievalCandidate& c) { return c.district != dialect; });
  std::sort(candidates.begin(), candidates.end(), [](const RetrievalCandidate& a, const RetrievalCandidate& b) {
    if (a.blended != b.blended) return a.blended > b.blended;
    return a.id < b.id;
  });
  if (candidates.size() > k) candidates.resize(k);
}

// ---------------------------------------------------------------------------

Retriever::Retriever(const index::HybridIndex& index, const embedding::EmbeddingProvider& provider,
                     BonusConfig bonuses)
    : index_(index), provider_(provider), bonuses_(bonuses) {
  if (index_.docs.empty()) throw Error(ErrorCode::EmptyCorpus, "index holds no records");
  if (provider_.dim() != index_.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "provider dimension " + std::to_string(provider_.dim()) +
                                                  " != index dimension " + std::to_string(index_.dim()));
  }
}

std::string Retriever::resolve_dialect(std::string_view dialect) const {
  std::string canonical = corpus::canonical_district(dialect);
  for (const auto& rec : index_.docs) {
    if (rec.district == canonical) return canonical;
  }
  throw Error(ErrorCode::UnknownDialect, "dialect '" + std::string(dialect) + "' is absent from the corpus");
}

RetrievalResult Retriever::retrieve_p1(std::string_view query, std::string_view dialect, std::size_t k) const {
  if (k == 0) throw Error(ErrorCode::InvalidK, "k must be >= 1");
  RetrievalResult result;
  RetrievalTrace& trace = result.trace;
  trace.pipeline = Pipeline::P1;
  trace.query = std::string(query);
  trace.dialect = resolve_dialect(dialect);
  trace.query_normalized = corpus::normalize_basic(query);
  trace.query_searched = trace.query_normalized;
  const auto tokens = corpus::tokenize(trace.query_searched);
  trace.query_class = tokens.size() < kShortQueryTokens ? QueryClass::Short : QueryClass::Standard;
  if (tokens.empty()) trace.warnings.push_back("EmptyQuery");
  trace.initial = trace.final = kP1Fusion;
  trace.deep_mode = DeepMode::Off;

  const auto qvec = provider_.embed(trace.query_searched);
  const auto dense = index::search_dense(index_.dense, qvec, kP1Fusion.k_dense);
  const auto sparse = index::search_sparse(index_.sparse, index_.ids, tokens, kP1Fusion.k_sparse);
  result.candidates = fuse(dense, sparse, index_, [](RetrievalCandidate& c) {
    c.blended = kP1Fusion.w_dense * c.dense_norm + kP1Fusion.w_sparse * c.sparse_norm;
  });
  trace.pool_size = result.candidates.size();
  filter_and_rank(result.candidates, trace.dialect, k);
  return result;
}

RetrievalResult Retriever::retrieve_p2(std::string_view query, std::string_view dialect, std::size_t k,
                                       DeepMode deep) const {
  if (k == 0) throw Error(ErrorCode::InvalidK, "k must be >= 1");
  RetrievalResult result;
  RetrievalTrace& trace = result.trace;
  trace.pipeline = Pipeline::P2;
  trace.query = std::string(query);
  trace.dialect = resolve_dialect(dialect);
  trace.query_normalized = corpus::normalize_full(query);
  trace.deep_mode = deep;

  const auto query_tokens = corpus::tokenize(trace.query_normalized);
  if (query_tokens.empty()) trace.warnings.push_back("EmptyQuery");
  trace.query_class = query_tokens.size() < kShortQueryTokens ? QueryClass::Short : QueryClass::Standard;
  if (trace.query_class == QueryClass::Short) {
    const std::string tag(corpus::marker(corpus::Tag::Short));
    trace.query_searched = query_tokens.empty() ? tag : trace.query_normalized + " " + tag;
  } else {
    trace.query_searched = trace.query_normalized;
  }
  const FusionConfig cfg = trace.query_class == QueryClass::Short ? kP2ShortFusion : kP2StandardFusion;
  trace.initial = trace.final = cfg;

  const auto searched_tokens = corpus::tokenize(trace.query_searched);
  const auto qvec = provider_.embed(trace.query_searched);
  const auto dense = index::search_dense(index_.dense, qvec, cfg.k_dense);
  const auto sparse = index::search_sparse(index_.sparse, index_.ids, searched_tokens, cfg.k_sparse);

  auto scorer = [&](const FusionConfig& weights) {
    return [&, weights](RetrievalCandidate& c) {
      blend_score(c, index_.docs[c.doc], trace.query_normalized, trace.dialect, weights, bonuses_);
    };
  };
  result.candidates = fuse(dense, sparse, index_, scorer(cfg));

  std::set<std::string_view> unique;
  for (const auto& c : result.candidates) {
    if (c.district == trace.dialect) unique.insert(index_.docs[c.doc].standard_norm);
  }
  trace.unique_initial = unique.size();
  trace.deep_fired = deep == DeepMode::On || (deep == DeepMode::Auto && trace.unique_initial < kDeepSearchMinUnique);

  if (trace.deep_fired) {
    // The aggregated per-token scores replace the sparse channel.
    const FusionConfig deep_cfg{kDeepDenseWeight, kDeepSparseWeight, cfg.k_dense, cfg.k_sparse, Pipeline::P2};
    trace.final = deep_cfg;
    const auto deep_hits = index::top_k(deep_search(query_tokens, index_.sparse), index_.ids, deep_cfg.k_sparse);
    result.candidates = fuse(dense, deep_hits, index_, scorer(deep_cfg));
  }
  trace.pool_size = result.candidates.size();
  filter_and_rank(result.candidates, trace.dialect, k);
  return result;
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::json fusion_json(const FusionConfig& f) {
  return {{"pipeline", to_string(f.pipeline)},
          {"weights", {{"dense", f.w_dense}, {"sparse", f.w_sparse}}},
          {"k_dense", f.k_dense},
          {"k_sparse", f.k_sparse}};
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

}  // namespace

nlohmann::json explain(const RetrievalResult& result) {
  const auto& t = result.trace;
  nlohmann::json candidates = nlohmann::json::array();
  std::size_t rank = 0;
  for (const auto& c : result.candidates) {
    candidates.push_back({
        {"rank", ++rank},
        {"id", c.id},
        {"district", c.district},
        {"raw", {{"dense", optional_json(c.dense_raw)}, {"sparse", optional_json(c.sparse_raw)}}},
        {"normalized", {{"dense", c.dense_norm}, {"sparse", c.sparse_norm}}},
        {"bonuses",
         {{"district", c.bonuses.district},
          {"exact", c.bonuses.exact},
          {"substring", c.bonuses.substring},
          {"char_sim", c.bonuses.char_sim}}},
        {"blended", c.blended},
    });
  }
  return {
      {"pipeline", to_string(t.pipeline)},
      {"query", t.query},
      {"query_normalized", t.query_normalized},
      {"query_searched", t.query_searched},
      {"dialect", t.dialect},
      {"query_class", to_string(t.query_class)},
      {"weights", {{"dense", t.initial.w_dense}, {"sparse", t.initial.w_sparse}}},
      {"k_dense", t.initial.k_dense},
      {"k_sparse", t.initial.k_sparse},
      {"deep_search",
       {{"mode", to_string(t.deep_mode)},
        {"fired", t.deep_fired},
        {"unique_initial", t.unique_initial},
        {"min_unique", kDeepSearchMinUnique},
        {"final_fusion", fusion_json(t.final)}}},
      {"pool_size", t.pool_size},
      {"warnings", t.warnings},
      {"candidates", std::move(candidates)},
  };
}

}  // namespace dialectrag::retrieve
