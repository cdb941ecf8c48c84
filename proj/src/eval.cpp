#include "dialectrag/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "dialectrag/corpus.hpp"
#include "dialectrag/edit_distance.hpp"
#include "dialectrag/unicode.hpp"

namespace dialectrag::eval {

namespace {

template <typename Seq>
using NgramCounts = std::map<Seq, std::size_t>;

template <typename Seq>
NgramCounts<Seq> ngrams(const Seq& seq, std::size_t n) {
  NgramCounts<Seq> counts;
  if (seq.size() < n) return counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) {
    counts[Seq(seq.begin() + static_cast<std::ptrdiff_t>(i), seq.begin() + static_cast<std::ptrdiff_t>(i + n))]++;
  }
  return counts;
}

template <typename Seq>
std::size_t clipped_matches(const NgramCounts<Seq>& hyp, const NgramCounts<Seq>& ref) {
  std::size_t m = 0;
  for (const auto& [gram, count] : hyp) {
    if (auto it = ref.find(gram); it != ref.end()) m += std::min(count, it->second);
  }
  return m;
}

std::size_t total(const auto& counts) {
  std::size_t t = 0;
  for (const auto& [gram, count] : counts) t += count;
  return t;
}

void check_corpus(std::size_t hyps, std::size_t refs) {
  if (hyps != refs) {
    throw Error(ErrorCode::LengthMismatch,
                std::to_string(hyps) + " hypotheses for " + std::to_string(refs) + " references");
  }
  if (hyps == 0) throw Error(ErrorCode::EmptyCorpus, "no sentences to score");
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

BleuCounts& BleuCounts::operator+=(const BleuCounts& o) noexcept {
  for (int n = 0; n < kBleuOrder; ++n) {
    matches[n] += o.matches[n];
    totals[n] += o.totals[n];
  }
  hyp_len += o.hyp_len;
  ref_len += o.ref_len;
  return *this;
}

ChrfCounts& ChrfCounts::operator+=(const ChrfCounts& o) noexcept {
  for (int n = 0; n < kChrfOrder; ++n) {
    matches[n] += o.matches[n];
    hyp_totals[n] += o.hyp_totals[n];
    ref_totals[n] += o.ref_totals[n];
  }
  return *this;
}

BleuCounts bleu_counts(std::span<const std::string> hyp, std::span<const std::string> ref) {
  const Tokens h(hyp.begin(), hyp.end());
  const Tokens r(ref.begin(), ref.end());
  BleuCounts c;
  c.hyp_len = h.size();
  c.ref_len = r.size();
  for (int n = 1; n <= kBleuOrder; ++n) {
    const auto hg = ngrams(h, static_cast<std::size_t>(n));
    c.matches[n - 1] = clipped_matches(hg, ngrams(r, static_cast<std::size_t>(n)));
    c.totals[n - 1] = total(hg);
  }
  return c;
}

double bleu_score(const BleuCounts& c) noexcept {
  if (c.hyp_len == 0) return 0.0;
  double log_sum = 0.0;
  for (int n = 0; n < kBleuOrder; ++n) {
    if (c.matches[n] == 0 || c.totals[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(c.matches[n]) / static_cast<double>(c.totals[n]));
  }
  const double c_len = static_cast<double>(c.hyp_len);
  const double r_len = static_cast<double>(c.ref_len);
  const double bp = c_len < r_len ? std::exp(1.0 - r_len / c_len) : 1.0;
  return 100.0 * bp * std::exp(log_sum / kBleuOrder);
}

ChrfCounts chrf_counts(std::string_view hyp, std::string_view ref) {
  const std::u32string h = unicode::decode(hyp);
  const std::u32string r = unicode::decode(ref);
  ChrfCounts c;
  for (int n = 1; n <= kChrfOrder; ++n) {
    const auto hg = ngrams(h, static_cast<std::size_t>(n));
    const auto rg = ngrams(r, static_cast<std::size_t>(n));
    c.matches[n - 1] = clipped_matches(hg, rg);
    c.hyp_totals[n - 1] = total(hg);
    c.ref_totals[n - 1] = total(rg);
  }
  return c;
}

double chrf_score(const ChrfCounts& c) noexcept {
  const double beta2 = kChrfBeta * kChrfBeta;
  double sum = 0.0;
  int effective = 0;
  for (int n = 0; n < kChrfOrder; ++n) {
    if (c.hyp_totals[n] == 0 || c.ref_totals[n] == 0) continue;
    ++effective;
    const double p = static_cast<double>(c.matches[n]) / static_cast<double>(c.hyp_totals[n]);
    const double r = static_cast<double>(c.matches[n]) / static_cast<double>(c.ref_totals[n]);
    if (p + r > 0.0) sum += (1.0 + beta2) * p * r / (beta2 * p + r);
  }
  return effective == 0 ? 0.0 : 100.0 * sum / effective;
}

std::string prepare(std::string_view text) { return corpus::normalize_full(text); }

double corpus_bleu(std::span<const std::string> hyps, std::span<const std::string> refs) {
  check_corpus(hyps.size(), refs.size());
  BleuCounts sum;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    sum += bleu_counts(corpus::tokenize(prepare(hyps[i])), corpus::tokenize(prepare(refs[i])));
  }
  return bleu_score(sum);
}

double corpus_chrf(std::span<const std::string> hyps, std::span<const std::string> refs) {
  check_corpus(hyps.size(), refs.size());
  ChrfCounts sum;
  for (std::size_t i = 0; i < hyps.size(); ++i) sum += chrf_counts(prepare(hyps[i]), prepare(refs[i]));
  return chrf_score(sum);
}

double sentence_wer(std::span<const std::string> hyp, std::span<const std::string> ref) {
  if (ref.empty()) throw Error(ErrorCode::EmptyReference, "reference has no tokens");
  return static_cast<double>(edit_distance(hyp, ref)) / static_cast<double>(ref.size());
}

double corpus_wer(std::span<const WerTerm> terms) {
  if (terms.empty()) throw Error(ErrorCode::EmptyCorpus, "no sentences to score");
  double num = 0.0;
  std::size_t den = 0;
  for (const auto& t : terms) {
    num += t.wer * static_cast<double>(t.ref_wc);
    den += t.ref_wc;
  }
  if (den == 0) throw Error(ErrorCode::EmptyReference, "all references are empty");
  return num / static_cast<double>(den);
}

double bertscore_f1(std::string_view hyp, std::string_view ref, const embedding::EmbeddingProvider& provider) {
  const auto h = provider.embed_tokens(hyp);
  const auto r = provider.embed_tokens(ref);
  return bertscore_f1(h.vectors, r.vectors);
}

double corpus_bertscore(std::span<const double> f1) {
  if (f1.empty()) throw Error(ErrorCode::EmptyCorpus, "no sentences to score");
  double sum = 0.0;
  for (double v : f1) sum += v;
  return sum / static_cast<double>(f1.size());
}

// ---------------------------------------------------------------------------

std::vector<EvalPair> read_pairs(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, path.string());
  std::vector<EvalPair> pairs;
  std::string line;
  std::size_t line_no = 0;
  auto field = [](const nlohmann::json& j, const char* a, const char* b) -> std::string {
    if (j.contains(a) && j[a].is_string()) return j[a].get<std::string>();
    if (j.contains(b) && j[b].is_string()) return j[b].get<std::string>();
    return {};
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
    if (corpus::normalize_basic(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw FormatError(line_no, "not a JSON object");
    }
    if (!j.is_object()) throw FormatError(line_no, "not a JSON object");
    EvalPair p;
    p.id = j.contains("id") && j["id"].is_string() ? j["id"].get<std::string>() : "pair-" + std::to_string(line_no);
    p.input = field(j, "input", "standard");
    p.reference = field(j, "reference", "local");
    p.dialect = corpus::canonical_district(field(j, "dialect", "district"));
    if (p.input.empty()) throw FormatError(line_no, "missing input");
    if (p.reference.empty()) throw FormatError(line_no, "missing reference");
    if (p.dialect.empty()) throw FormatError(line_no, "missing dialect");
    pairs.push_back(std::move(p));
  }
  return pairs;
}

MetricReport score_run(std::span<const EvalPair> pairs, std::span<const Hypothesis> hyps,
                       const embedding::EmbeddingProvider& provider, ReportMeta meta) {
  check_corpus(hyps.size(), pairs.size());
  MetricReport report;
  report.meta = std::move(meta);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    SentenceScore s;
    s.index = i;
    s.id = pairs[i].id;
    s.reference = prepare(pairs[i].reference);
    s.missing = !hyps[i].text.has_value();
    if (hyps[i].error) s.error = std::string(to_string(*hyps[i].error));
    if (s.missing) {
      if (s.error.empty()) s.error = "missing";
    } else {
      s.hypothesis = prepare(*hyps[i].text);
    }

    const Tokens ref_tokens = corpus::tokenize(s.reference);
    if (ref_tokens.empty()) throw Error(ErrorCode::EmptyReference, "reference of '" + s.id + "' is empty");
    const Tokens hyp_tokens = corpus::tokenize(s.hypothesis);
    s.ref_wc = ref_tokens.size();
    s.bleu = bleu_counts(hyp_tokens, ref_tokens);
    s.chrf = chrf_counts(s.hypothesis, s.reference);
    s.wer = s.missing ? 1.0 : sentence_wer(hyp_tokens, ref_tokens);
    s.bert_f1 = s.missing || hyp_tokens.empty() ? 0.0 : bertscore_f1(s.hypothesis, s.reference, provider);
    report.sentences.push_back(std::move(s));
  }
  return recompute(std::move(report));
}

MetricReport evaluate_run(std::span<const EvalPair> pairs, const System& system,
                          const embedding::EmbeddingProvider& provider, ReportMeta meta) {
  if (pairs.empty()) throw Error(ErrorCode::EmptyCorpus, "no evaluation pairs");
  const std::vector<Hypothesis> hyps = system(pairs);
  if (hyps.size() != pairs.size()) throw Error(ErrorCode::LengthMismatch, "system returned the wrong number of outputs");
  const bool all_failed = std::all_of(hyps.begin(), hyps.end(), [](const Hypothesis& h) { return !h.text; });
  if (all_failed) {
    const auto& first = hyps.front();
    throw Error(first.error.value_or(ErrorCode::ProviderUnavailable),
                "every translation failed: " + first.error_message);
  }
  return score_run(pairs, hyps, provider, std::move(meta));
}

MetricReport recompute(MetricReport report) {
  if (report.sentences.empty()) throw Error(ErrorCode::EmptyCorpus, "no sentences to score");
  BleuCounts bleu;
  ChrfCounts chrf;
  std::vector<WerTerm> wer;
  std::vector<double> bert;
  report.n_missing = 0;
  for (const auto& s : report.sentences) {
    bleu += s.bleu;
    chrf += s.chrf;
    wer.push_back({s.wer, s.ref_wc});
    bert.push_back(s.bert_f1);
    if (s.missing) ++report.n_missing;
  }
  report.n_sentences = report.sentences.size();
  report.bleu = bleu_score(bleu);
  report.chrf = chrf_score(chrf);
  report.wer = corpus_wer(wer);
  report.bertscore = corpus_bertscore(bert);
  return report;
}

nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& s : r.sentences) {
    nlohmann::json row = {
        {"index", s.index},
        {"id", s.id},
        {"reference", s.reference},
        {"hypothesis", s.hypothesis},
        {"missing", s.missing},
        {"bleu", {{"matches", s.bleu.matches}, {"totals", s.bleu.totals}, {"hyp_len", s.bleu.hyp_len},
                  {"ref_len", s.bleu.ref_len}}},
        {"chrf", {{"matches", s.chrf.matches}, {"hyp_totals", s.chrf.hyp_totals}, {"ref_totals", s.chrf.ref_totals}}},
        {"wer", s.wer},
        {"ref_wc", s.ref_wc},
        {"bert_f1", s.bert_f1},
    };
    if (!s.error.empty()) row["error"] = s.error;
    rows.push_back(std::move(row));
  }
  return {
      {"dialect", r.meta.dialect},
      {"model", r.meta.model},
      {"pipeline", r.meta.pipeline},
      {"n", r.meta.n_examples},
      {"N", r.n_sentences},
      {"missing", r.n_missing},
      {"corpus", {{"bleu", r.bleu}, {"chrf", r.chrf}, {"wer", r.wer}, {"bertscore_f1", r.bertscore}}},
      {"aggregation",
       {{"bleu", "summed n-gram counts, orders 1-4, brevity penalty"},
        {"chrf", "summed character n-gram counts, orders 1-6, beta 2"},
        {"wer", "reference-length weighted mean"},
        {"bertscore_f1", "mean of sentence F1"}}},
      {"sentences", std::move(rows)},
  };
}

void write_csv(std::ostream& out, std::span<const MetricReport> reports) {
  out << "Dialect,Model,BLEU,ChrF,BERTScore F1,WER\n";
  for (const auto& r : reports) {
    out << csv_field(r.meta.dialect) << ',' << csv_field(r.meta.model) << ',' << fixed(r.bleu, 2) << ','
        << fixed(r.chrf, 2) << ',' << fixed(r.bertscore, 4) << ',' << fixed(100.0 * r.wer, 2) << '\n';
  }
}

void write_heatmap_csv(std::ostream& out, std::span<const MetricReport> reports) {
  std::set<std::string> dialects;
  std::vector<std::string> pipelines;
  for (const auto& r : reports) {
    dialects.insert(r.meta.dialect);
    if (std::find(pipelines.begin(), pipelines.end(), r.meta.pipeline) == pipelines.end()) {
      pipelines.push_back(r.meta.pipeline);
    }
  }
  out << "Metric,Pipeline";
  for (const auto& d : dialects) out << ',' << csv_field(d);
  out << '\n';

  struct Metric {
    const char* name;
    double (*get)(const MetricReport&);
    int digits;
  };
  static constexpr Metric kMetrics[] = {
      {"BLEU", [](const MetricReport& r) { return r.bleu; }, 2},
      {"ChrF", [](const MetricReport& r) { return r.chrf; }, 2},
      {"BERTScore F1", [](const MetricReport& r) { return r.bertscore; }, 4},
      {"WER", [](const MetricReport& r) { return 100.0 * r.wer; }, 2},
  };
  for (const auto& m : kMetrics) {
    for (const auto& p : pipelines) {
      out << m.name << ',' << csv_field(p);
      for (const auto& d : dialects) {
        double sum = 0.0;
        int count = 0;
        for (const auto& r : reports) {
          if (r.meta.pipeline == p && r.meta.dialect == d) {
            sum += m.get(r);
            ++count;
          }
        }
        out << ',';
        if (count) out << fixed(sum / count, m.digits);
      }
      out << '\n';
    }
  }
}

}  // namespace dialectrag::eval
