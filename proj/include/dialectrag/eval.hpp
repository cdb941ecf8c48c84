#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dialectrag/embedding.hpp"
#include "dialectrag/error.hpp"

namespace dialectrag::eval {

inline constexpr int kBleuOrder = 4;
inline constexpr int kChrfOrder = 6;
inline constexpr double kChrfBeta = 2.0;

using Tokens = std::vector<std::string>;

struct BleuCounts {
  std::array<std::size_t, kBleuOrder> matches{};
  std::array<std::size_t, kBleuOrder> totals{};
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;

  BleuCounts& operator+=(const BleuCounts& o) noexcept;
};

struct ChrfCounts {
  std::array<std::size_t, kChrfOrder> matches{};
  std::array<std::size_t, kChrfOrder> hyp_totals{};
  std::array<std::size_t, kChrfOrder> ref_totals{};

  ChrfCounts& operator+=(const ChrfCounts& o) noexcept;
};

/// Clipped n-gram counts of one hypothesis against one reference.
BleuCounts bleu_counts(std::span<const std::string> hyp, std::span<const std::string> ref);

/// Score from (summed) counts: geometric mean of precisions times the brevity
/// penalty, x100. Zero if any order has no match.
double bleu_score(const BleuCounts& counts) noexcept;

/// Character n-gram counts over code points; spaces are characters.
ChrfCounts chrf_counts(std::string_view hyp, std::string_view ref);

/// Mean of the per-order F-beta over orders that occur in both hypothesis and
/// reference, x100.
double chrf_score(const ChrfCounts& counts) noexcept;

/// Text preparation shared by all metrics: corpus::normalize_full.
std::string prepare(std::string_view text);

/// Corpus scores from raw strings; counts are summed before scoring.
double corpus_bleu(std::span<const std::string> hyps, std::span<const std::string> refs);
double corpus_chrf(std::span<const std::string> hyps, std::span<const std::string> refs);

/// Token edit distance / |ref|. Throws EmptyReference.
double sentence_wer(std::span<const std::string> hyp, std::span<const std::string> ref);

struct WerTerm {
  double wer = 0.0;
  std::size_t ref_wc = 0;
};

/// Reference-length weighted mean. Throws EmptyCorpus.
double corpus_wer(std::span<const WerTerm> terms);

/// Greedy soft alignment between unit-norm token rows: precision is the mean
/// best cosine per hypothesis token, recall the mean per reference token.
template <typename DerivedH, typename DerivedR>
double bertscore_f1(const Eigen::MatrixBase<DerivedH>& hyp, const Eigen::MatrixBase<DerivedR>& ref) {
  if (hyp.rows() == 0 || ref.rows() == 0) throw Error(ErrorCode::EmptyInput, "bertscore needs tokens on both sides");
  if (hyp.cols() != ref.cols()) throw Error(ErrorCode::DimensionMismatch, "token vectors differ in dimension");
  const Eigen::MatrixXd sim = hyp.template cast<double>() * ref.template cast<double>().transpose();
  const double precision = sim.rowwise().maxCoeff().mean();
  const double recall = sim.colwise().maxCoeff().mean();
  if (precision + recall <= 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double bertscore_f1(std::string_view hyp, std::string_view ref, const embedding::EmbeddingProvider& provider);

/// Arithmetic mean. Throws EmptyCorpus.
double corpus_bertscore(std::span<const double> f1);

// ---------------------------------------------------------------------------
// Runs and reports

struct EvalPair {
  std::string id;
  std::string input;
  std::string reference;
  std::string dialect;
};

/// JSON Lines: {"id"?, "input" | "standard", "reference" | "local", "dialect" | "district"}.
std::vector<EvalPair> read_pairs(const std::filesystem::path& path);

struct Hypothesis {
  std::optional<std::string> text;  // nullopt: the system produced nothing
  std::optional<ErrorCode> error;
  std::string error_message;
};

struct SentenceScore {
  std::size_t index = 0;
  std::string id;
  std::string reference;
  std::string hypothesis;
  bool missing = false;
  std::string error;
  BleuCounts bleu;
  ChrfCounts chrf;
  double wer = 0.0;
  std::size_t ref_wc = 0;
  double bert_f1 = 0.0;
};

struct ReportMeta {
  std::string dialect;
  std::string model;
  std::string pipeline;
  std::size_t n_examples = 0;
};

struct MetricReport {
  ReportMeta meta;
  std::size_t n_sentences = 0;
  std::size_t n_missing = 0;
  double bleu = 0.0;
  double chrf = 0.0;
  double wer = 0.0;  // fraction; reports print it as a percentage
  double bertscore = 0.0;
  std::vector<SentenceScore> sentences;
};

/// Scores hypotheses against pairs. Missing hypotheses count as WER 1,
/// BERTScore 0 and an empty string for the n-gram metrics.
MetricReport score_run(std::span<const EvalPair> pairs, std::span<const Hypothesis> hyps,
                       const embedding::EmbeddingProvider& provider, ReportMeta meta);

using System = std::function<std::vector<Hypothesis>(std::span<const EvalPair>)>;

/// Translates every pair with `system` and scores the result. Throws the
/// first item's error when every item failed, EmptyCorpus when there are no pairs.
MetricReport evaluate_run(std::span<const EvalPair> pairs, const System& system,
                          const embedding::EmbeddingProvider& provider, ReportMeta meta);

/// Corpus values recomputed from the per-sentence rows.
MetricReport recompute(MetricReport report);

nlohmann::json to_json(const MetricReport& report);

/// Dialect,Model,BLEU,ChrF,BERTScore F1,WER with WER as a percentage.
void write_csv(std::ostream& out, std::span<const MetricReport> reports);

/// One row per (metric, pipeline), one column per dialect, averaged over models.
void write_heatmap_csv(std::ostream& out, std::span<const MetricReport> reports);

}  // namespace dialectrag::eval
