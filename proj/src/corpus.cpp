#include "dialectrag/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "dialectrag/error.hpp"
#include "dialectrag/unicode.hpp"

namespace dialectrag::corpus {

namespace {

bool is_zero_width(char32_t c) {
  return (c >= 0x200B && c <= 0x200D) || c == 0xFEFF;
}

char32_t standardize_punctuation(char32_t c) {
  switch (c) {
    case U'“': case U'”': case U'„': case U'‟':
    case U'«': case U'»': case U'″': case U'＂':
      return U'"';
    case U'‘': case U'’': case U'‚': case U'‛':
    case U'′': case U'＇':
      return U'\'';
    case U'‐': case U'‑': case U'‒': case U'–':
    case U'—': case U'―': case U'−': case U'﹘':
    case U'﹣': case U'－':
      return U'-';
    default:
      return c;
  }
}

bool is_ascii_digit(char32_t c) { return c >= U'0' && c <= U'9'; }

bool is_detachable_punct(char32_t c) {
  switch (c) {
    case U'।':  // danda
    case U'॥':  // double danda
    case U'.':
    case U',':
    case U'?':
    case U'？':
    case U'!':
      return true;
    default:
      return false;
  }
}

// Collapses whitespace runs to a single ASCII space and trims both ends.
std::u32string collapse_whitespace(const std::u32string& in) {
  std::u32string out;
  out.reserve(in.size());
  bool pending_space = false;
  for (char32_t c : in) {
    if (unicode::is_whitespace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(U' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string render_tagged(const std::string& local, TagSet tags) {
  std::string out = local;
  for (Tag t : {Tag::Short, Tag::Merged, Tag::Question}) {
    if (tags.contains(t)) {
      out += ' ';
      out += marker(t);
    }
  }
  return out;
}

// The separator must not be constructible from a field, including across the
// space inserted when short records are merged.
bool field_is_separator_safe(std::string_view text) {
  if (text.find(kStructuredSeparator) != std::string_view::npos) return false;
  if (!text.empty() && (text.front() == '|' || text.back() == '|')) return false;
  return true;
}

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  if (quoted) throw FormatError(line_no, "unterminated quoted CSV field");
  fields.push_back(std::move(field));
  return fields;
}

}  // namespace

std::string_view to_string(Format format) noexcept {
  return format == Format::Transcript ? "transcript" : "pairs";
}

Format parse_format(std::string_view name) {
  if (name == "transcript") return Format::Transcript;
  if (name == "pairs") return Format::Pairs;
  throw Error(ErrorCode::InvalidArgument, "unknown corpus format '" + std::string(name) + "'");
}

std::string_view marker(Tag t) noexcept {
  switch (t) {
    case Tag::Short: return "[[SHORT]]";
    case Tag::Question: return "[[QUESTION]]";
    case Tag::Merged: return "[[MERGED]]";
  }
  return "";
}

std::string normalize_basic(std::string_view text) {
  return unicode::encode(collapse_whitespace(unicode::decode(text)));
}

std::string normalize_full(std::string_view text) {
  std::u32string cps = unicode::decode(text);
  // Zero-width removal runs before NFC so that removal cannot leave an
  // uncomposed sequence behind.
  std::erase_if(cps, is_zero_width);
  cps = unicode::nfc(cps);

  for (char32_t& c : cps) {
    if (c >= 0x09E6 && c <= 0x09EF) {
      c = U'0' + (c - 0x09E6);
    } else {
      c = standardize_punctuation(c);
    }
  }

  std::u32string collapsed;
  collapsed.reserve(cps.size());
  std::size_t run = 0;
  for (std::size_t i = 0; i < cps.size(); ++i) {
    run = (i > 0 && cps[i] == cps[i - 1]) ? run + 1 : 1;
    if (run >= 3 && !is_ascii_digit(cps[i])) continue;
    collapsed.push_back(cps[i]);
  }
  return unicode::encode(collapse_whitespace(collapsed));
}

std::vector<std::string> tokenize(std::string_view text) {
  const std::u32string cps = unicode::decode(text);
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < cps.size()) {
    while (i < cps.size() && unicode::is_whitespace(cps[i])) ++i;
    std::size_t end = i;
    while (end < cps.size() && !unicode::is_whitespace(cps[end])) ++end;
    if (end == i) break;

    std::size_t lo = i;
    std::size_t hi = end;
    while (lo < hi && is_detachable_punct(cps[lo])) {
      tokens.push_back(unicode::encode(std::u32string(1, cps[lo])));
      ++lo;
    }
    std::size_t trail = hi;
    while (trail > lo && is_detachable_punct(cps[trail - 1])) --trail;
    if (trail > lo) tokens.push_back(unicode::encode(std::u32string_view(cps).substr(lo, trail - lo)));
    for (std::size_t p = trail; p < hi; ++p) {
      tokens.push_back(unicode::encode(std::u32string(1, cps[p])));
    }
    i = end;
  }
  return tokens;
}

const std::vector<std::string>& known_districts() {
  static const std::vector<std::string> districts = {
      "Barishal", "Chittagong", "Comilla",  "Habiganj", "Kishoreganj", "Narail",
      "Narsingdi", "Noakhali",  "Rangpur", "Sandwip",  "Sylhet",      "Tangail"};
  return districts;
}

std::string canonical_district(std::string_view name) {
  std::string basic = normalize_basic(name);
  const std::string lowered = lower_ascii(basic);
  for (const auto& known : known_districts()) {
    if (lower_ascii(known) == lowered) return known;
  }
  bool word_start = true;
  for (char& c : basic) {
    const auto uc = static_cast<unsigned char>(c);
    if (uc >= 0x80) {
      word_start = false;
      continue;
    }
    if (c == ' ' || c == '-') {
      word_start = true;
      continue;
    }
    c = static_cast<char>(word_start ? std::toupper(uc) : std::tolower(uc));
    word_start = false;
  }
  return basic;
}

bool ends_with_question(std::string_view text) {
  if (text.empty()) return false;
  if (text.back() == '?') return true;
  static constexpr std::string_view kFullwidth = "\xEF\xBC\x9F";  // U+FF1F
  return text.size() >= kFullwidth.size() && text.substr(text.size() - kFullwidth.size()) == kFullwidth;
}

CorpusRecord tag_record(CorpusRecord rec) {
  const std::string& text = rec.dialect_text();
  rec.tags.erase(Tag::Short);
  rec.tags.erase(Tag::Question);
  if (!rec.tags.contains(Tag::Merged) && tokenize(text).size() < kShortTokenThreshold) {
    rec.tags.insert(Tag::Short);
  }
  if (ends_with_question(text)) rec.tags.insert(Tag::Question);
  if (rec.format == Format::Pairs) rec.local_norm_tagged = render_tagged(rec.local_norm, rec.tags);
  return rec;
}

QualityMetrics quality_metrics(std::string_view text) {
  const auto tokens = tokenize(text);
  if (tokens.empty()) return {};
  std::unordered_set<std::string> unique(tokens.begin(), tokens.end());
  std::size_t total_chars = 0;
  for (const auto& t : tokens) total_chars += unicode::length(t);
  const double n = static_cast<double>(tokens.size());
  const double unique_ratio = static_cast<double>(unique.size()) / n;
  const double mean_length = static_cast<double>(total_chars) / n;
  return {tokens.size(), unique_ratio * mean_length};
}

std::string make_structured(std::string_view district, std::string_view standard,
                            std::string_view local_tagged) {
  std::string out;
  out.reserve(district.size() + standard.size() + local_tagged.size() + 32);
  out += "District: ";
  out += district;
  out += kStructuredSeparator;
  out += "STANDARD: ";
  out += standard;
  out += kStructuredSeparator;
  out += "LOCAL: ";
  out += local_tagged;
  return out;
}

std::optional<StructuredFields> parse_structured(std::string_view s) {
  static constexpr std::string_view kDistrict = "District: ";
  static constexpr std::string_view kStandard = " | STANDARD: ";
  static constexpr std::string_view kLocal = " | LOCAL: ";
  if (!s.starts_with(kDistrict)) return std::nullopt;
  s.remove_prefix(kDistrict.size());
  const auto std_pos = s.find(kStandard);
  if (std_pos == std::string_view::npos) return std::nullopt;
  StructuredFields fields;
  fields.district = std::string(s.substr(0, std_pos));
  s.remove_prefix(std_pos + kStandard.size());
  const auto local_pos = s.find(kLocal);
  if (local_pos == std::string_view::npos) return std::nullopt;
  fields.standard = std::string(s.substr(0, local_pos));
  fields.local = std::string(s.substr(local_pos + kLocal.size()));
  if (fields.local.find(kStructuredSeparator) != std::string::npos) return std::nullopt;
  return fields;
}

CorpusRecord finalize_pair(CorpusRecord rec) {
  rec.structured = make_structured(rec.district, rec.standard_norm, rec.local_norm_tagged);
  const auto q = quality_metrics(rec.local_norm);
  rec.word_count = q.word_count;
  rec.complexity = q.complexity;
  return rec;
}

std::vector<CorpusRecord> merge_short_runs(const std::vector<CorpusRecord>& records) {
  std::vector<CorpusRecord> out;
  out.reserve(records.size());
  std::size_t i = 0;
  while (i < records.size()) {
    std::size_t j = i + 1;
    if (records[i].tags.contains(Tag::Short)) {
      while (j < records.size() && records[j].tags.contains(Tag::Short) &&
             records[j].district == records[i].district) {
        ++j;
      }
    }
    if (j - i < 2) {
      out.push_back(records[i]);
      i = j;
      continue;
    }

    std::vector<std::string> ids, locals, standards;
    for (std::size_t r = i; r < j; ++r) {
      ids.push_back(records[r].id);
      locals.push_back(records[r].local_norm);
      standards.push_back(records[r].standard_norm);
    }
    CorpusRecord merged;
    merged.id = join(ids, "+");
    merged.district = records[i].district;
    merged.format = Format::Pairs;
    merged.local_norm = join(locals, " ");
    merged.standard_norm = join(standards, " ");
    merged.source_line = records[i].source_line;
    merged.tags.insert(Tag::Merged);
    out.push_back(finalize_pair(tag_record(std::move(merged))));
    i = j;
  }
  return out;
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const IngestStats& stats) {
  nlohmann::json rejections = nlohmann::json::array();
  for (const auto& r : stats.rejections) {
    rejections.push_back({{"line", r.line_no}, {"reason", r.reason}});
  }
  return {
      {"format", to_string(stats.format)},
      {"lines_read", stats.lines_read},
      {"accepted", stats.accepted},
      {"records", stats.records},
      {"merged_runs", stats.merged_runs},
      {"per_district", stats.per_district},
      {"mean_word_count", stats.mean_word_count},
      {"rejected", stats.rejected},
      {"rejections", std::move(rejections)},
  };
}

namespace {

struct LineFields {
  std::optional<std::string> id, district, text, local, standard;
};

std::optional<std::string> string_field(const nlohmann::json& obj, const char* key,
                                        std::size_t line_no) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw FormatError(line_no, std::string("field '") + key + "' is not a string");
  return it->get<std::string>();
}

LineFields parse_json_line(const std::string& line, std::size_t line_no) {
  nlohmann::json obj;
  try {
    obj = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(line_no, std::string("invalid JSON: ") + e.what());
  }
  if (!obj.is_object()) throw FormatError(line_no, "expected a JSON object");
  return {string_field(obj, "id", line_no), string_field(obj, "district", line_no),
          string_field(obj, "text", line_no), string_field(obj, "local", line_no),
          string_field(obj, "standard", line_no)};
}

LineFields parse_csv_line(const std::string& line, std::size_t line_no,
                          const std::vector<std::string>& header) {
  const auto cells = split_csv_line(line, line_no);
  if (cells.size() != header.size()) {
    throw FormatError(line_no, "expected " + std::to_string(header.size()) + " CSV columns, got " +
                                   std::to_string(cells.size()));
  }
  LineFields f;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "id") f.id = cells[c];
    else if (header[c] == "district") f.district = cells[c];
    else if (header[c] == "text") f.text = cells[c];
    else if (header[c] == "local") f.local = cells[c];
    else if (header[c] == "standard") f.standard = cells[c];
  }
  return f;
}

CorpusRecord build_record(const LineFields& f, Format format, std::size_t line_no,
                          const IngestOptions& options) {
  if (!f.id || normalize_basic(*f.id).empty()) throw FormatError(line_no, "missing id");
  if (!f.district) throw FormatError(line_no, "missing district");

  CorpusRecord rec;
  rec.id = normalize_basic(*f.id);
  rec.district = canonical_district(*f.district);
  rec.format = format;
  rec.source_line = line_no;
  if (rec.district.empty()) throw FormatError(line_no, "empty district");
  if (!options.allow_unknown_districts) {
    const auto& known = known_districts();
    if (std::find(known.begin(), known.end(), rec.district) == known.end()) {
      throw FormatError(line_no, "unknown district '" + rec.district + "'");
    }
  }
  if (!field_is_separator_safe(rec.district)) {
    throw FormatError(line_no, "district contains the structured separator");
  }

  if (format == Format::Transcript) {
    if (!f.text) throw FormatError(line_no, "missing text");
    rec.text_norm = normalize_basic(*f.text);
    if (rec.text_norm.empty()) throw FormatError(line_no, "empty text after normalization");
    const auto q = quality_metrics(rec.text_norm);
    rec.word_count = q.word_count;
    rec.complexity = q.complexity;
    return rec;
  }

  if (!f.local) throw FormatError(line_no, "missing local");
  if (!f.standard) throw FormatError(line_no, "missing standard");
  rec.local_norm = normalize_full(*f.local);
  rec.standard_norm = normalize_full(*f.standard);
  if (rec.local_norm.empty()) throw FormatError(line_no, "empty local text after normalization");
  if (rec.standard_norm.empty()) throw FormatError(line_no, "empty standard text after normalization");
  if (!field_is_separator_safe(rec.local_norm) || !field_is_separator_safe(rec.standard_norm)) {
    throw FormatError(line_no, "text contains the structured separator ' | '");
  }
  return finalize_pair(tag_record(std::move(rec)));
}

}  // namespace

IngestResult ingest_stream(std::istream& in, Format format, const IngestOptions& options, bool csv) {
  IngestResult result;
  IngestStats& stats = result.stats;
  stats.format = format;

  std::vector<CorpusRecord> accepted;
  std::unordered_set<std::string> seen_ids;
  std::vector<std::string> header;
  std::string line;
  std::size_t line_no = 0;

  auto reject = [&](std::size_t no, const std::string& reason) {
    stats.rejected++;
    stats.rejections.push_back({no, reason});
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
    if (!unicode::is_valid_utf8(line)) {
      if (options.strict) {
        throw Error(ErrorCode::InvalidEncoding, "line " + std::to_string(line_no) + ": ill-formed UTF-8");
      }
      stats.lines_read++;
      reject(line_no, "ill-formed UTF-8");
      continue;
    }
    if (normalize_basic(line).empty()) continue;

    if (csv && header.empty()) {
      header = split_csv_line(line, line_no);
      for (auto& h : header) h = lower_ascii(normalize_basic(h));
      const bool has_required =
          std::find(header.begin(), header.end(), "id") != header.end() &&
          std::find(header.begin(), header.end(), "district") != header.end();
      if (!has_required) throw FormatError(line_no, "CSV header must name id and district columns");
      continue;
    }

    stats.lines_read++;
    try {
      const LineFields fields = csv ? parse_csv_line(line, line_no, header) : parse_json_line(line, line_no);
      CorpusRecord rec = build_record(fields, format, line_no, options);
      if (!seen_ids.insert(rec.id).second) throw FormatError(line_no, "duplicate id '" + rec.id + "'");
      accepted.push_back(std::move(rec));
    } catch (const FormatError& e) {
      if (options.strict) throw;
      reject(e.line_no(), e.reason());
    }
  }

  stats.accepted = accepted.size();
  if (format == Format::Pairs) {
    result.records = merge_short_runs(accepted);
    for (const auto& r : result.records) {
      if (r.tags.contains(Tag::Merged)) stats.merged_runs++;
    }
  } else {
    result.records = std::move(accepted);
  }

  stats.records = result.records.size();
  double words = 0.0;
  for (const auto& r : result.records) {
    stats.per_district[r.district]++;
    words += static_cast<double>(r.word_count);
  }
  stats.mean_word_count = result.records.empty() ? 0.0 : words / static_cast<double>(result.records.size());
  return result;
}

IngestResult ingest(const std::filesystem::path& path, Format format, const IngestOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, path.string());
  const bool csv = lower_ascii(path.extension().string()) == ".csv";
  return ingest_stream(in, format, options, csv);
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const CorpusRecord& rec) {
  nlohmann::json tags = nlohmann::json::array();
  for (Tag t : {Tag::Short, Tag::Question, Tag::Merged}) {
    if (rec.tags.contains(t)) {
      std::string_view m = marker(t);
      tags.push_back(std::string(m.substr(2, m.size() - 4)));
    }
  }
  return {
      {"id", rec.id},
      {"district", rec.district},
      {"format", to_string(rec.format)},
      {"text_norm", rec.text_norm},
      {"local_norm", rec.local_norm},
      {"local_norm_tagged", rec.local_norm_tagged},
      {"standard_norm", rec.standard_norm},
      {"tags", std::move(tags)},
      {"word_count", rec.word_count},
      {"complexity", rec.complexity},
      {"structured", rec.structured},
      {"source_line", rec.source_line},
  };
}

CorpusRecord record_from_json(const nlohmann::json& j) {
  CorpusRecord rec;
  rec.id = j.at("id").get<std::string>();
  rec.district = j.at("district").get<std::string>();
  rec.format = parse_format(j.at("format").get<std::string>());
  rec.text_norm = j.value("text_norm", "");
  rec.local_norm = j.value("local_norm", "");
  rec.local_norm_tagged = j.value("local_norm_tagged", "");
  rec.standard_norm = j.value("standard_norm", "");
  for (const auto& t : j.value("tags", nlohmann::json::array())) {
    const auto name = t.get<std::string>();
    if (name == "SHORT") rec.tags.insert(Tag::Short);
    else if (name == "QUESTION") rec.tags.insert(Tag::Question);
    else if (name == "MERGED") rec.tags.insert(Tag::Merged);
    else throw Error(ErrorCode::FormatError, "unknown tag '" + name + "'");
  }
  rec.word_count = j.value("word_count", std::size_t{0});
  rec.complexity = j.value("complexity", 0.0);
  rec.structured = j.value("structured", "");
  rec.source_line = j.value("source_line", std::size_t{0});
  return rec;
}

void write_corpus(std::ostream& out, const std::vector<CorpusRecord>& records) {
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

std::vector<CorpusRecord> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, path.string());
  std::vector<CorpusRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      records.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(line_no, std::string("corpus record: ") + e.what());
    }
  }
  return records;
}

}  // namespace dialectrag::corpus
