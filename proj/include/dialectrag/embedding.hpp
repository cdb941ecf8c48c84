#pragma once

#include <Eigen/Dense>

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dialectrag::embedding {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One embedding per row.
using EmbeddingMatrix = RowMatrix<float>;
using EmbeddingVector = Eigen::VectorXf;

inline constexpr int kDefaultDim = 768;
inline constexpr double kUnitNormTolerance = 1e-6;

struct TokenEmbeddings {
  std::vector<std::string> tokens;
  EmbeddingMatrix vectors;  // tokens.size() rows, unit-norm
};

/// Scales every row to unit L2 norm. Returns false if some row is zero (left untouched).
template <typename Derived>
bool normalize_rows(Eigen::MatrixBase<Derived>& m) {
  bool all_nonzero = true;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const auto n = m.row(r).norm();
    if (n > 0) {
      m.row(r) /= n;
    } else {
      all_nonzero = false;
    }
  }
  return all_nonzero;
}

template <typename Derived>
bool rows_unit_norm(const Eigen::MatrixBase<Derived>& m, double tolerance) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double n = static_cast<double>(m.row(r).template cast<double>().norm());
    if (std::abs(n - 1.0) > tolerance) return false;
  }
  return true;
}

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual int dim() const = 0;
  virtual std::string model() const = 0;

  /// One unit-norm row per input, in input order.
  virtual EmbeddingMatrix embed_sentences(std::span<const std::string> texts) const = 0;

  /// Tokens follow corpus::tokenize(text). Throws EmptyInput when there are none.
  virtual TokenEmbeddings embed_tokens(std::string_view text) const = 0;

  EmbeddingVector embed(const std::string& text) const {
    return embed_sentences(std::span<const std::string>(&text, 1)).row(0).transpose();
  }
};

/// Deterministic offline embedder: character 3-grams hashed into `dim`
/// buckets, counted, then L2-normalized. Text with no 3-gram (fewer than
/// three code points) contributes the whole string as its single gram; the
/// empty string maps to e0. Token vectors are context-free.
class HashingEmbedder final : public EmbeddingProvider {
 public:
  static constexpr std::uint64_t kDefaultSeed = 0x5eed0fd1a1ec7ULL;

  explicit HashingEmbedder(int dim = kDefaultDim, std::uint64_t seed = kDefaultSeed);

  int dim() const override { return dim_; }
  std::string model() const override;

  EmbeddingMatrix embed_sentences(std::span<const std::string> texts) const override;
  TokenEmbeddings embed_tokens(std::string_view text) const override;

  EmbeddingVector embed_one(std::string_view text) const;

  /// Character n-grams (as UTF-8) that embed_one() hashes.
  static std::vector<std::string> grams(std::string_view text);
  std::size_t bucket(std::string_view gram) const;

 private:
  int dim_;
  std::uint64_t seed_;
};

struct HttpEmbeddingConfig {
  std::string url;
  int expected_dim = 0;  // 0: accept what the service reports
  std::size_t batch_size = 64;
  std::size_t max_in_flight = 4;
  std::chrono::milliseconds timeout{30000};
};

/// Client for the embedding service:
///   POST /embed        {"texts":[...]} -> {"vectors":[[...]], "dim":D, "model":str}
///   POST /embed_tokens {"text":...}    -> {"tokens":[...], "vectors":[[...]]}
class HttpEmbeddingClient final : public EmbeddingProvider {
 public:
  explicit HttpEmbeddingClient(HttpEmbeddingConfig config);

  int dim() const override;
  std::string model() const override;

  EmbeddingMatrix embed_sentences(std::span<const std::string> texts) const override;
  TokenEmbeddings embed_tokens(std::string_view text) const override;

 private:
  EmbeddingMatrix embed_batch(std::span<const std::string> texts) const;
  void probe() const;

  HttpEmbeddingConfig config_;
  mutable std::mutex state_mutex_;
  mutable int dim_ = 0;  // guarded by state_mutex_
  mutable std::string model_;
};

/// Re-aligns subword vectors to local whitespace tokens by mean-pooling every
/// subword that overlaps a local token, then re-normalizing. Word-piece
/// markers ("##", U+2581, U+0120) and special tokens are ignored. Throws
/// TokenizationMismatch when the subword characters do not spell the local tokens.
TokenEmbeddings pool_subwords(const std::vector<std::string>& local_tokens,
                              const std::vector<std::string>& subword_tokens,
                              const EmbeddingMatrix& subword_vectors);

/// EMBED_URL set: HttpEmbeddingClient; otherwise HashingEmbedder(dim).
std::unique_ptr<EmbeddingProvider> make_provider(int dim);

/// Empty url: HashingEmbedder(dim).
std::unique_ptr<EmbeddingProvider> make_provider(int dim, const std::string& url);

}  // namespace dialectrag::embedding
