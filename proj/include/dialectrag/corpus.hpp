#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace dialectrag::corpus {

enum class Format { Transcript, Pairs };

std::string_view to_string(Format format) noexcept;
Format parse_format(std::string_view name);

enum class Tag : std::uint8_t { Short = 1, Question = 2, Merged = 4 };

class TagSet {
 public:
  constexpr TagSet() = default;

  constexpr bool contains(Tag t) const noexcept { return (bits_ & static_cast<std::uint8_t>(t)) != 0; }
  constexpr void insert(Tag t) noexcept { bits_ |= static_cast<std::uint8_t>(t); }
  constexpr void erase(Tag t) noexcept { bits_ &= static_cast<std::uint8_t>(~static_cast<std::uint8_t>(t)); }
  constexpr bool empty() const noexcept { return bits_ == 0; }

  friend constexpr bool operator==(TagSet, TagSet) = default;

 private:
  std::uint8_t bits_ = 0;
};

/// Literal marker as it appears in tagged text, e.g. "[[SHORT]]".
std::string_view marker(Tag t) noexcept;

struct CorpusRecord {
  std::string id;
  std::string district;
  Format format = Format::Pairs;
  std::string text_norm;          // transcript text
  std::string local_norm;         // dialect side, untagged
  std::string local_norm_tagged;  // dialect side with [[...]] markers
  std::string standard_norm;      // standard Bengali side
  TagSet tags;
  std::size_t word_count = 0;
  double complexity = 0.0;
  std::string structured;  // embedding text for pair records
  std::size_t source_line = 0;

  /// Text the record is embedded and BM25-indexed from.
  const std::string& index_text() const noexcept {
    return format == Format::Pairs ? structured : text_norm;
  }
  /// Text shown to the model as the dialect example.
  const std::string& dialect_text() const noexcept {
    return format == Format::Pairs ? local_norm : text_norm;
  }

  friend bool operator==(const CorpusRecord&, const CorpusRecord&) = default;
};

// ---------------------------------------------------------------------------
// Normalization and tokenization

/// Trim and collapse whitespace runs to one ASCII space. Throws InvalidEncoding.
std::string normalize_basic(std::string_view text);

/// NFC, zero-width removal, Bengali digits to ASCII, quote/dash unification,
/// runs of 3+ identical non-digit characters cut to 2, whitespace collapse, trim.
std::string normalize_full(std::string_view text);

/// Whitespace split, then leading/trailing sentence punctuation detached as
/// one token per character.
std::vector<std::string> tokenize(std::string_view text);

/// Case-normalized district name ("chittagong " -> "Chittagong").
std::string canonical_district(std::string_view name);

/// Districts of the two published corpora.
const std::vector<std::string>& known_districts();

// ---------------------------------------------------------------------------
// Tagging, merging, quality

constexpr std::size_t kShortTokenThreshold = 3;  // SHORT iff tokens < 3

bool ends_with_question(std::string_view text);

/// Recomputes SHORT/QUESTION from local_norm and re-renders local_norm_tagged.
CorpusRecord tag_record(CorpusRecord rec);

/// Replaces maximal runs (length >= 2) of consecutive SHORT records sharing a
/// district by one MERGED record.
std::vector<CorpusRecord> merge_short_runs(const std::vector<CorpusRecord>& records);

struct QualityMetrics {
  std::size_t word_count = 0;
  double complexity = 0.0;
};

/// word_count = token count; complexity = unique-token ratio x mean token length
/// (length in code points).
QualityMetrics quality_metrics(std::string_view text);

// ---------------------------------------------------------------------------
// Structured representation

inline constexpr std::string_view kStructuredSeparator = " | ";

std::string make_structured(std::string_view district, std::string_view standard,
                            std::string_view local_tagged);

struct StructuredFields {
  std::string district;
  std::string standard;
  std::string local;
  friend bool operator==(const StructuredFields&, const StructuredFields&) = default;
};

std::optional<StructuredFields> parse_structured(std::string_view structured);

/// Fills structured/word_count/complexity for a tagged pair record.
CorpusRecord finalize_pair(CorpusRecord rec);

// ---------------------------------------------------------------------------
// Ingest

struct IngestOptions {
  bool strict = true;
  bool allow_unknown_districts = false;
};

struct Rejection {
  std::size_t line_no = 0;
  std::string reason;
};

struct IngestStats {
  Format format = Format::Pairs;
  std::size_t lines_read = 0;
  std::size_t accepted = 0;  // entries before merging
  std::size_t records = 0;   // records emitted
  std::size_t merged_runs = 0;
  std::map<std::string, std::size_t> per_district;
  double mean_word_count = 0.0;
  std::size_t rejected = 0;
  std::vector<Rejection> rejections;
};

nlohmann::json to_json(const IngestStats& stats);

struct IngestResult {
  std::vector<CorpusRecord> records;
  IngestStats stats;
};

/// Reads JSON Lines (or CSV with a header row when `csv` is set).
IngestResult ingest_stream(std::istream& in, Format format, const IngestOptions& options = {},
                           bool csv = false);

/// CSV is selected by a ".csv" extension. Throws FileNotFound / FormatError / InvalidEncoding.
IngestResult ingest(const std::filesystem::path& path, Format format,
                    const IngestOptions& options = {});

// ---------------------------------------------------------------------------
// Normalized corpus files (JSON Lines of CorpusRecord)

nlohmann::json to_json(const CorpusRecord& rec);
CorpusRecord record_from_json(const nlohmann::json& j);

void write_corpus(std::ostream& out, const std::vector<CorpusRecord>& records);
std::vector<CorpusRecord> read_corpus(const std::filesystem::path& path);

}  // namespace dialectrag::corpus
