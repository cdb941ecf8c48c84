#include "dialectrag/embedding.hpp"

#include <json.hpp>

#include <atomic>
#include <cstdlib>
#include <mutex>
#include <thread>

#include "dialectrag/corpus.hpp"
#include "dialectrag/error.hpp"
#include "dialectrag/hashing.hpp"
#include "dialectrag/http.hpp"
#include "dialectrag/unicode.hpp"

namespace dialectrag::embedding {

// ---------------------------------------------------------------------------
// HashingEmbedder

HashingEmbedder::HashingEmbedder(int dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim < 1) throw Error(ErrorCode::InvalidArgument, "embedding dimension must be >= 1");
}

std::string HashingEmbedder::model() const {
  return "hashing-3gram/d" + std::to_string(dim_) + "/seed" + std::to_string(seed_);
}

std::vector<std::string> HashingEmbedder::grams(std::string_view text) {
  const std::u32string cps = unicode::decode(text);
  std::vector<std::string> out;
  if (cps.empty()) return out;
  if (cps.size() < 3) {
    out.push_back(std::string(text));
    return out;
  }
  out.reserve(cps.size() - 2);
  for (std::size_t i = 0; i + 3 <= cps.size(); ++i) {
    out.push_back(unicode::encode(std::u32string_view(cps).substr(i, 3)));
  }
  return out;
}

std::size_t HashingEmbedder::bucket(std::string_view gram) const {
  return static_cast<std::size_t>(fnv1a64(gram, kFnvOffsetBasis ^ seed_) % static_cast<std::uint64_t>(dim_));
}

EmbeddingVector HashingEmbedder::embed_one(std::string_view text) const {
  EmbeddingVector v = EmbeddingVector::Zero(dim_);
  const auto gs = grams(text);
  if (gs.empty()) {
    v(0) = 1.0f;
    return v;
  }
  for (const auto& g : gs) v(static_cast<Eigen::Index>(bucket(g))) += 1.0f;
  v /= v.norm();
  return v;
}

EmbeddingMatrix HashingEmbedder::embed_sentences(std::span<const std::string> texts) const {
  EmbeddingMatrix m(static_cast<Eigen::Index>(texts.size()), dim_);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    m.row(static_cast<Eigen::Index>(i)) = embed_one(texts[i]).transpose();
  }
  return m;
}

TokenEmbeddings HashingEmbedder::embed_tokens(std::string_view text) const {
  TokenEmbeddings out;
  out.tokens = corpus::tokenize(text);
  if (out.tokens.empty()) throw Error(ErrorCode::EmptyInput, "no tokens to embed");
  out.vectors = embed_sentences(out.tokens);
  return out;
}

// ---------------------------------------------------------------------------
// Subword pooling

namespace {

bool is_special_token(const std::string& t) {
  return t == "[CLS]" || t == "[SEP]" || t == "[PAD]" || t == "[MASK]" || t == "<s>" || t == "</s>" ||
         t == "<pad>" || t == "<mask>";
}

std::u32string strip_piece_markers(const std::string& piece) {
  std::u32string cps = unicode::decode(piece);
  if (cps.size() >= 2 && cps[0] == U'#' && cps[1] == U'#') cps.erase(0, 2);
  std::erase_if(cps, [](char32_t c) { return c == 0x2581 || c == 0x0120; });
  return cps;
}

}  // namespace

TokenEmbeddings pool_subwords(const std::vector<std::string>& local_tokens,
                              const std::vector<std::string>& subword_tokens,
                              const EmbeddingMatrix& subword_vectors) {
  if (static_cast<Eigen::Index>(subword_tokens.size()) != subword_vectors.rows()) {
    throw Error(ErrorCode::TokenizationMismatch, "subword token and vector counts differ");
  }
  // Character stream of the local tokens, with the owning token per character.
  std::u32string stream;
  std::vector<std::size_t> owner;
  for (std::size_t t = 0; t < local_tokens.size(); ++t) {
    for (char32_t c : unicode::decode(local_tokens[t])) {
      stream.push_back(c);
      owner.push_back(t);
    }
  }

  const Eigen::Index dim = subword_vectors.cols();
  EmbeddingMatrix sums = EmbeddingMatrix::Zero(static_cast<Eigen::Index>(local_tokens.size()), dim);
  std::vector<std::size_t> counts(local_tokens.size(), 0);
  std::size_t pos = 0;
  for (std::size_t s = 0; s < subword_tokens.size(); ++s) {
    if (is_special_token(subword_tokens[s])) continue;
    const std::u32string piece = strip_piece_markers(subword_tokens[s]);
    if (piece.empty()) continue;
    if (stream.compare(pos, piece.size(), piece) != 0) {
      throw Error(ErrorCode::TokenizationMismatch,
                  "subword '" + subword_tokens[s] + "' does not align with the local tokens");
    }
    std::size_t last_owner = SIZE_MAX;
    for (std::size_t k = pos; k < pos + piece.size(); ++k) {
      if (owner[k] == last_owner) continue;
      last_owner = owner[k];
      sums.row(static_cast<Eigen::Index>(last_owner)) += subword_vectors.row(static_cast<Eigen::Index>(s));
      counts[last_owner]++;
    }
    pos += piece.size();
  }
  if (pos != stream.size()) {
    throw Error(ErrorCode::TokenizationMismatch, "subwords cover only part of the text");
  }
  for (std::size_t t = 0; t < counts.size(); ++t) {
    if (counts[t] == 0) throw Error(ErrorCode::TokenizationMismatch, "token without subwords");
    sums.row(static_cast<Eigen::Index>(t)) /= static_cast<float>(counts[t]);
  }
  if (!normalize_rows(sums)) throw Error(ErrorCode::TokenizationMismatch, "pooled vector is zero");
  return {local_tokens, std::move(sums)};
}

// ---------------------------------------------------------------------------
// HttpEmbeddingClient

namespace {

nlohmann::json post_or_throw(const http::Url& base, const std::string& path, const nlohmann::json& body,
                             std::chrono::milliseconds timeout) {
  std::string transport_error;
  auto response = http::post_json(base, path, body.dump(), timeout, {}, &transport_error);
  if (!response) {
    throw Error(ErrorCode::ProviderUnavailable, "embedding service " + path + ": " + transport_error);
  }
  nlohmann::json parsed;
  try {
    parsed = nlohmann::json::parse(response->body);
  } catch (const nlohmann::json::parse_error&) {
    throw Error(ErrorCode::ProviderUnavailable, "embedding service " + path + " returned HTTP " +
                                                    std::to_string(response->status) + " with a non-JSON body");
  }
  if (response->status >= 400) {
    const std::string message = parsed.is_object() ? parsed.value("error", "unknown error") : "unknown error";
    throw Error(ErrorCode::ProviderUnavailable,
                "embedding service " + path + " HTTP " + std::to_string(response->status) + ": " + message);
  }
  return parsed;
}

EmbeddingMatrix matrix_from_json(const nlohmann::json& rows, int dim) {
  if (!rows.is_array()) throw Error(ErrorCode::ProviderUnavailable, "'vectors' is not an array");
  EmbeddingMatrix m(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (!row.is_array() || static_cast<int>(row.size()) != dim) {
      throw Error(ErrorCode::DimensionMismatch,
                  "vector " + std::to_string(r) + " has " + std::to_string(row.size()) + " components, expected " +
                      std::to_string(dim));
    }
    for (int c = 0; c < dim; ++c) m(static_cast<Eigen::Index>(r), c) = row[static_cast<std::size_t>(c)].get<float>();
  }
  return m;
}

}  // namespace

HttpEmbeddingClient::HttpEmbeddingClient(HttpEmbeddingConfig config) : config_(std::move(config)) {
  if (config_.batch_size == 0 || config_.max_in_flight == 0) {
    throw Error(ErrorCode::InvalidArgument, "batch size and in-flight bound must be >= 1");
  }
  dim_ = config_.expected_dim;
}

void HttpEmbeddingClient::probe() const {
  const std::string text = "probe";
  embed_batch(std::span<const std::string>(&text, 1));
}

int HttpEmbeddingClient::dim() const {
  if (config_.expected_dim != 0) return config_.expected_dim;
  {
    std::lock_guard lock(state_mutex_);
    if (!model_.empty()) return dim_;
  }
  probe();
  std::lock_guard lock(state_mutex_);
  return dim_;
}

std::string HttpEmbeddingClient::model() const {
  {
    std::lock_guard lock(state_mutex_);
    if (!model_.empty()) return model_;
  }
  probe();
  std::lock_guard lock(state_mutex_);
  return model_;
}

EmbeddingMatrix HttpEmbeddingClient::embed_batch(std::span<const std::string> texts) const {
  const auto base = http::parse_url(config_.url);
  nlohmann::json body = {{"texts", std::vector<std::string>(texts.begin(), texts.end())}};
  const auto parsed = post_or_throw(base, "/embed", body, config_.timeout);

  if (!parsed.contains("dim") || !parsed["dim"].is_number_integer()) {
    throw Error(ErrorCode::ProviderUnavailable, "/embed response lacks 'dim'");
  }
  const int dim = parsed["dim"].get<int>();
  if (config_.expected_dim != 0 && dim != config_.expected_dim) {
    throw Error(ErrorCode::DimensionMismatch, "service dimension " + std::to_string(dim) + " != expected " +
                                                  std::to_string(config_.expected_dim));
  }
  EmbeddingMatrix m = matrix_from_json(parsed.value("vectors", nlohmann::json()), dim);
  if (m.rows() != static_cast<Eigen::Index>(texts.size())) {
    throw Error(ErrorCode::ProviderUnavailable, "/embed returned " + std::to_string(m.rows()) + " vectors for " +
                                                    std::to_string(texts.size()) + " texts");
  }
  if (!normalize_rows(m)) throw Error(ErrorCode::ProviderUnavailable, "/embed returned a zero vector");
  {
    std::lock_guard lock(state_mutex_);
    if (dim_ != 0 && dim_ != dim) {
      throw Error(ErrorCode::DimensionMismatch, "service dimension changed from " + std::to_string(dim_) + " to " +
                                                    std::to_string(dim));
    }
    dim_ = dim;
    if (model_.empty()) model_ = parsed.value("model", "unknown");
  }
  return m;
}

EmbeddingMatrix HttpEmbeddingClient::embed_sentences(std::span<const std::string> texts) const {
  const std::size_t n = texts.size();
  const std::size_t batches = (n + config_.batch_size - 1) / config_.batch_size;
  std::vector<EmbeddingMatrix> parts(batches);
  std::vector<std::exception_ptr> failures(batches);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t b = next++; b < batches; b = next++) {
      const std::size_t begin = b * config_.batch_size;
      const std::size_t count = std::min(config_.batch_size, n - begin);
      try {
        parts[b] = embed_batch(texts.subspan(begin, count));
      } catch (...) {
        failures[b] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const std::size_t workers = std::min(config_.max_in_flight, batches);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  EmbeddingMatrix out(static_cast<Eigen::Index>(n), n == 0 ? dim() : parts.front().cols());
  Eigen::Index row = 0;
  for (const auto& p : parts) {
    if (p.cols() != out.cols()) throw Error(ErrorCode::DimensionMismatch, "batches disagree on dimension");
    out.middleRows(row, p.rows()) = p;
    row += p.rows();
  }
  return out;
}

TokenEmbeddings HttpEmbeddingClient::embed_tokens(std::string_view text) const {
  const auto local = corpus::tokenize(text);
  if (local.empty()) throw Error(ErrorCode::EmptyInput, "no tokens to embed");

  const auto base = http::parse_url(config_.url);
  const auto parsed = post_or_throw(base, "/embed_tokens", {{"text", std::string(text)}}, config_.timeout);
  if (!parsed.contains("tokens") || !parsed["tokens"].is_array() || !parsed.contains("vectors") ||
      !parsed["vectors"].is_array()) {
    throw Error(ErrorCode::ProviderUnavailable, "/embed_tokens response lacks tokens/vectors");
  }
  const auto tokens = parsed["tokens"].get<std::vector<std::string>>();
  const auto& rows = parsed["vectors"];
  if (rows.empty()) throw Error(ErrorCode::ProviderUnavailable, "/embed_tokens returned no vectors");
  const int dim = static_cast<int>(rows[0].size());
  if (config_.expected_dim != 0 && dim != config_.expected_dim) {
    throw Error(ErrorCode::DimensionMismatch, "token vectors have dimension " + std::to_string(dim));
  }
  EmbeddingMatrix vectors = matrix_from_json(rows, dim);

  if (tokens == local) {
    if (!normalize_rows(vectors)) throw Error(ErrorCode::ProviderUnavailable, "zero token vector");
    return {local, std::move(vectors)};
  }
  return pool_subwords(local, tokens, vectors);
}

// ---------------------------------------------------------------------------

std::unique_ptr<EmbeddingProvider> make_provider(int dim, const std::string& url) {
  if (url.empty()) return std::make_unique<HashingEmbedder>(dim);
  HttpEmbeddingConfig cfg;
  cfg.url = url;
  cfg.expected_dim = dim;
  return std::make_unique<HttpEmbeddingClient>(std::move(cfg));
}

std::unique_ptr<EmbeddingProvider> make_provider(int dim) {
  const char* url = std::getenv("EMBED_URL");
  return make_provider(dim, url == nullptr ? std::string() : std::string(url));
}

}  // namespace dialectrag::embedding
