// Acceptance checks. Prints one PASS/FAIL/SKIP line per criterion and exits
// nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli_helpers.hpp"
#include "dialectrag/corpus.hpp"
#include "dialectrag/eval.hpp"
#include "dialectrag/hashing.hpp"
#include "dialectrag/index.hpp"
#include "dialectrag/retrieve.hpp"
#include "generators.hpp"
#include "oracles.hpp"
#include "retrieval_oracle.hpp"

using namespace dialectrag;
using nlohmann::json;

namespace {

const std::string kData = DIALECTRAG_SOURCE_DIR "/data";
const std::vector<std::string> kDistricts = {"Chittagong", "Sylhet", "Tangail", "Rangpur"};

struct Verdict {
  enum class State { Pass, Fail, Skip } state = State::Pass;
  std::string detail;
};

Verdict pass(std::string detail) { return {Verdict::State::Pass, std::move(detail)}; }
Verdict fail(std::string detail) { return {Verdict::State::Fail, std::move(detail)}; }
Verdict skip(std::string detail) { return {Verdict::State::Skip, std::move(detail)}; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

// ---------------------------------------------------------------------------

Verdict metric_oracles() {
  const auto t0 = std::chrono::steady_clock::now();
  gen::Rng rng(20240601);
  embedding::HashingEmbedder emb(64);
  double worst_bleu = 0, worst_chrf = 0, worst_bert = 0;
  std::size_t wer_mismatch = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = gen::uniform(rng, 1, 10);
    std::vector<std::string> hyps, refs;
    for (std::size_t i = 0; i < n; ++i) {
      hyps.push_back(gen::join(gen::sentence(rng, gen::bengali_words(), 0, 12)));
      refs.push_back(gen::join(gen::sentence(rng, gen::bengali_words(), 1, 12)));
      if (gen::uniform(rng, 0, 3) == 0) hyps.back() = refs.back();
    }
    std::vector<oracle::Tokens> th, tr;
    std::vector<std::string> ph, pr;
    std::vector<eval::WerTerm> terms;
    double oracle_wer_num = 0, oracle_wer_den = 0;
    std::vector<double> f1;
    double oracle_bert = 0;
    for (std::size_t i = 0; i < n; ++i) {
      ph.push_back(eval::prepare(hyps[i]));
      pr.push_back(eval::prepare(refs[i]));
      th.push_back(corpus::tokenize(ph.back()));
      tr.push_back(corpus::tokenize(pr.back()));
      const double w = eval::sentence_wer(th.back(), tr.back());
      const double ow = oracle::wer(th.back(), tr.back());
      if (w != ow) ++wer_mismatch;
      terms.push_back({w, tr.back().size()});
      oracle_wer_num += ow * static_cast<double>(tr.back().size());
      oracle_wer_den += static_cast<double>(tr.back().size());

      if (th.back().empty()) {
        f1.push_back(0.0);
      } else {
        const auto eh = emb.embed_tokens(ph.back()), er = emb.embed_tokens(pr.back());
        f1.push_back(eval::bertscore_f1(eh.vectors, er.vectors));
        oracle::Vectors vh, vr;
        for (Eigen::Index k = 0; k < eh.vectors.rows(); ++k) {
          vh.emplace_back(eh.vectors.row(k).data(), eh.vectors.row(k).data() + eh.vectors.cols());
        }
        for (Eigen::Index k = 0; k < er.vectors.rows(); ++k) {
          vr.emplace_back(er.vectors.row(k).data(), er.vectors.row(k).data() + er.vectors.cols());
        }
        oracle_bert += oracle::bertscore(vh, vr);
      }
    }
    if (eval::corpus_wer(terms) != oracle_wer_num / oracle_wer_den) ++wer_mismatch;
    worst_bleu = std::max(worst_bleu, std::abs(eval::corpus_bleu(hyps, refs) - oracle::bleu(th, tr)));
    worst_chrf = std::max(worst_chrf, std::abs(eval::corpus_chrf(hyps, refs) - oracle::chrf(ph, pr)));
    worst_bert = std::max(worst_bert, std::abs(eval::corpus_bertscore(f1) - oracle_bert / static_cast<double>(n)));
  }
  const double secs = seconds_since(t0);
  const std::string detail = "200 corpora; WER mismatches " + std::to_string(wer_mismatch) + ", max |dBLEU| " +
                             fmt(worst_bleu) + ", max |dChrF| " + fmt(worst_chrf) + ", max |dBERT| " +
                             fmt(worst_bert) + ", " + fmt(secs) + " s";
  const bool ok = wer_mismatch == 0 && worst_bleu <= 1e-9 && worst_chrf <= 1e-9 && worst_bert <= 1e-6 && secs < 30;
  return ok ? pass(detail) : fail(detail);
}

Verdict weighted_wer() {
  const std::vector<eval::WerTerm> terms = {{0.5, 2}, {0.0, 4}};
  const double got = eval::corpus_wer(terms);
  return got == 1.0 / 6.0 ? pass("corpus WER = " + fmt(got)) : fail("corpus WER = " + fmt(got) + ", want 1/6");
}

Verdict fusion_constants() {
  clitest::TempDir dir("accept-fusion");
  clitest::run({"ingest", "--input", kData + "/pairs.jsonl", "--output", dir / "c.jsonl"});
  if (clitest::run({"index", "--corpus", dir / "c.jsonl", "--output", dir / "i.idx", "--dim", "128"}).code != 0) {
    return fail("index build failed");
  }
  struct Case {
    std::string pipeline, query, cls;
    double wd, ws;
    int kd, ks;
  };
  const std::vector<Case> cases = {
      {"1", "আমি আজ বাজারে যাব না", "", 0.70, 0.30, 50, 50},
      {"2", "আমি আজ বাজারে যাব না", "standard", 0.55, 0.35, 50, 50},
      {"2", "তুমি কোথায়", "short", 0.35, 0.55, 100, 200},
  };
  std::string detail;
  for (const auto& c : cases) {
    const auto r = clitest::run({"query", "--index", dir / "i.idx", "--query", c.query, "--dialect", "Sylhet",
                                 "--pipeline", c.pipeline, "--deep", "off", "--explain"});
    if (r.code != 0) return fail("query failed: " + r.err);
    const auto j = json::parse(r.out);
    const bool ok = j["weights"]["dense"] == c.wd && j["weights"]["sparse"] == c.ws && j["k_dense"] == c.kd &&
                    j["k_sparse"] == c.ks && (c.cls.empty() || j["query_class"] == c.cls);
    const std::string label = "P" + c.pipeline + (c.cls.empty() ? "" : "/" + c.cls);
    detail += (detail.empty() ? "" : "; ") + label + " " + j["weights"]["dense"].dump() + "/" +
              j["weights"]["sparse"].dump() + " k " + j["k_dense"].dump() + "/" + j["k_sparse"].dump();
    if (!ok) return fail(detail);
  }
  return pass(detail);
}

std::vector<corpus::CorpusRecord> repetitive_corpus(gen::Rng& rng, std::size_t n) {
  std::vector<std::string> pool;
  for (int i = 0; i < 4; ++i) pool.push_back(gen::join(gen::sentence(rng, gen::bengali_words(), 3, 6)));
  std::ostringstream lines;
  for (std::size_t i = 0; i < n; ++i) {
    lines << gen::pair_line("q" + std::to_string(1000 + i), kDistricts[gen::uniform(rng, 0, 1)],
                            pool[gen::uniform(rng, 0, 3)], pool[gen::uniform(rng, 0, 3)])
          << '\n';
  }
  std::istringstream in(lines.str());
  return corpus::ingest_stream(in, corpus::Format::Pairs).records;
}

Verdict retrieval_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  gen::Rng rng(987654321);
  embedding::HashingEmbedder emb(64);
  std::size_t queries = 0, mismatches = 0, ties = 0;
  std::string first_problem;
  for (int trial = 0; trial < 100; ++trial) {
    // Odd trials draw from a handful of sentences so equal scores are common.
    const auto records = trial % 2 == 0 ? gen::random_pairs_corpus(rng, gen::uniform(rng, 1, 200), kDistricts)
                                        : repetitive_corpus(rng, gen::uniform(rng, 2, 200));
    const auto idx = index::build_hybrid(records, emb);
    const retrieve::Retriever retriever(idx, emb);
    const oracle::BruteForce bf(idx.docs, emb);
    for (int q = 0; q < 3; ++q) {
      std::string query = gen::join(gen::sentence(rng, gen::bengali_words(), 1, 7));
      if (q == 0) query = idx.docs[gen::uniform(rng, 0, idx.docs.size() - 1)].standard_norm;  // exact-match bonus
      const auto& dialect = idx.docs[gen::uniform(rng, 0, idx.docs.size() - 1)].district;
      const std::size_t k = gen::uniform(rng, 1, 10);
      const char* modes[] = {"auto", "on", "off"};
      const std::string mode = modes[gen::uniform(rng, 0, 2)];

      const auto got1 = retriever.retrieve_p1(query, dialect, k);
      const auto want1 = bf.p1(query, dialect, k);
      const auto got2 = retriever.retrieve_p2(query, dialect, k, retrieve::parse_deep_mode(mode));
      const auto want2 = bf.p2(query, dialect, k, mode);
      queries += 2;
      auto same = [&](const retrieve::RetrievalResult& g, const oracle::BruteForceResult& w) {
        if (g.candidates.size() != w.ranking.size()) return false;
        for (std::size_t i = 0; i < w.ranking.size(); ++i) {
          if (g.candidates[i].id != w.ranking[i].id || g.candidates[i].blended != w.ranking[i].blended) return false;
          if (i && w.ranking[i].blended == w.ranking[i - 1].blended) ++ties;
        }
        return true;
      };
      if (!same(got1, want1)) {
        ++mismatches;
        if (first_problem.empty()) first_problem = "P1 trial " + std::to_string(trial);
      }
      if (!same(got2, want2) || got2.trace.deep_fired != want2.deep_fired) {
        ++mismatches;
        if (first_problem.empty()) first_problem = "P2 trial " + std::to_string(trial);
      }
    }
  }
  const double secs = seconds_since(t0);
  const std::string detail = std::to_string(queries) + " rankings over 100 corpora, " + std::to_string(ties) +
                             " tied neighbours, " + std::to_string(mismatches) + " mismatches" +
                             (first_problem.empty() ? "" : " (first: " + first_problem + ")") + ", " + fmt(secs) + " s";
  return mismatches == 0 && secs < 60 ? pass(detail) : fail(detail);
}

Verdict deep_search_trigger() {
  gen::Rng rng(5150);
  embedding::HashingEmbedder emb(64);
  int fired_ok = 0, quiet_ok = 0;
  std::string problem;
  for (int i = 0; i < 100; ++i) {
    const bool should_fire = i < 50;
    std::ostringstream lines;
    const std::size_t n = gen::uniform(rng, 4, 40);
    const std::string shared = gen::join(gen::sentence(rng, gen::bengali_words(), 2, 6));
    for (std::size_t r = 0; r < n; ++r) {
      const bool target = r < 2 || gen::uniform(rng, 0, 2) == 0;
      const std::string district = target ? "Sylhet" : "Tangail";
      std::string standard = gen::join(gen::sentence(rng, gen::bengali_words(), 1, 6));
      if (target && should_fire) standard = shared;
      if (target && !should_fire && r < 2) standard = r == 0 ? shared : shared + " আজ";
      // Locals of 3+ tokens are never SHORT, so no merging alters the standards.
      lines << gen::pair_line("d" + std::to_string(100 + r), district,
                              gen::join(gen::sentence(rng, gen::bengali_words(), 3, 6)), standard)
            << '\n';
    }
    std::istringstream in(lines.str());
    const auto recs = corpus::ingest_stream(in, corpus::Format::Pairs).records;
    const auto idx = index::build_hybrid(recs, emb);
    const retrieve::Retriever retriever(idx, emb);
    const auto query = gen::join(gen::sentence(rng, gen::bengali_words(), 1, 7));
    const auto got = retriever.retrieve_p2(query, "Sylhet", 5, retrieve::DeepMode::Auto);
    const auto want = oracle::BruteForce(idx.docs, emb).p2(query, "Sylhet", 5, "auto");
    const bool weights_ok = got.trace.deep_fired
                                ? got.trace.final.w_dense == 0.35 && got.trace.final.w_sparse == 0.55
                                : got.trace.final == got.trace.initial;
    const bool ok = got.trace.deep_fired == should_fire && want.deep_fired == should_fire && weights_ok;
    if (ok) {
      (should_fire ? fired_ok : quiet_ok)++;
    } else if (problem.empty()) {
      problem = " (case " + std::to_string(i) + ": unique " + std::to_string(got.trace.unique_initial) + ")";
    }
  }
  const std::string detail = "fired " + std::to_string(fired_ok) + "/50 single-example pools, quiet " +
                             std::to_string(quiet_ok) + "/50 diverse pools" + problem;
  return fired_ok == 50 && quiet_ok == 50 ? pass(detail) : fail(detail);
}

Verdict bm25_closed_form() {
  double worst = 0;
  for (std::uint32_t f = 1; f <= 25; ++f) {
    const auto idx = index::SparseIndex::build({std::vector<std::string>(f, "t")});
    const std::vector<std::string> q = {"t"};
    const double got = index::bm25_scores(idx, q).at(0);
    const double want = std::log(4.0 / 3.0) * 2.5 * f / (f + 1.5);
    worst = std::max(worst, std::abs(got - want) / want);
  }
  gen::Rng rng(77);
  std::size_t mismatches = 0;
  double worst_additive = 0;
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::vector<std::string>> docs(gen::uniform(rng, 1, 40));
    for (auto& d : docs) d = gen::sentence(rng, gen::latin_words(), 0, 10);
    const auto q1 = gen::sentence(rng, gen::latin_words(), 0, 4);
    const auto q2 = gen::sentence(rng, gen::latin_words(), 0, 4);
    auto q = q1;
    q.insert(q.end(), q2.begin(), q2.end());
    const auto idx = index::SparseIndex::build(docs);
    const auto got = index::bm25_scores(idx, q);
    const auto want = oracle::bm25(docs, q);
    if (got != want) ++mismatches;
    const auto s1 = index::bm25_scores(idx, q1), s2 = index::bm25_scores(idx, q2);
    for (const auto& [doc, s] : got) {
      const double parts = (s1.contains(doc) ? s1.at(doc) : 0.0) + (s2.contains(doc) ? s2.at(doc) : 0.0);
      worst_additive = std::max(worst_additive, std::abs(s - parts) / std::max(1.0, std::abs(s)));
    }
  }
  const std::string detail = "closed form max rel err " + fmt(worst) + ", oracle mismatches " +
                             std::to_string(mismatches) + "/300, additivity max rel err " + fmt(worst_additive);
  return worst <= 1e-12 && mismatches == 0 && worst_additive <= 1e-12 ? pass(detail) : fail(detail);
}

Verdict preprocessing() {
  gen::Rng rng(4242);
  std::size_t not_idempotent = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto s = gen::random_unicode(rng);
    const auto f = corpus::normalize_full(s);
    const auto b = corpus::normalize_basic(s);
    if (corpus::normalize_full(f) != f || corpus::normalize_basic(b) != b) ++not_idempotent;
  }

  auto tagged = [](const std::string& local) {
    corpus::CorpusRecord r;
    r.id = "x";
    r.district = "Sylhet";
    r.local_norm = local;
    r.standard_norm = "s";
    return corpus::finalize_pair(corpus::tag_record(r));
  };
  const bool boundary = tagged("ek dui").tags.contains(corpus::Tag::Short) &&
                        !tagged("ek dui tin").tags.contains(corpus::Tag::Short);

  std::size_t merge_bad = 0;
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<corpus::CorpusRecord> in;
    std::vector<oracle::MergeInput> shape;
    const std::size_t n = gen::uniform(rng, 0, 15);
    for (std::size_t i = 0; i < n; ++i) {
      auto r = tagged(gen::join(gen::sentence(rng, gen::latin_words(), 1, 4)));
      r.id = "m" + std::to_string(i);
      r.district = kDistricts[gen::uniform(rng, 0, 1)];
      r = corpus::finalize_pair(r);
      in.push_back(r);
      shape.push_back({r.tags.contains(corpus::Tag::Short), r.district});
    }
    const auto out = corpus::merge_short_runs(in);
    const auto groups = oracle::merge_groups(shape);
    if (out.size() != groups.size()) {
      ++merge_bad;
      continue;
    }
    for (std::size_t g = 0; g < groups.size(); ++g) {
      std::string id, local;
      for (auto i : groups[g]) {
        id += (id.empty() ? "" : "+") + in[i].id;
        local += (local.empty() ? "" : " ") + in[i].local_norm;
      }
      const bool merged = groups[g].size() > 1;
      if (out[g].id != id || out[g].local_norm != local || out[g].tags.contains(corpus::Tag::Merged) != merged ||
          out[g].district != in[groups[g][0]].district) {
        ++merge_bad;
        break;
      }
    }
  }

  std::size_t round_trip_bad = 0;
  const auto recs = gen::random_pairs_corpus(rng, 300, kDistricts);
  for (const auto& r : recs) {
    const auto f = corpus::parse_structured(r.structured);
    if (!f || f->district != r.district || f->standard != r.standard_norm || f->local != r.local_norm_tagged) {
      ++round_trip_bad;
    }
  }

  const std::string detail = "idempotence failures " + std::to_string(not_idempotent) + "/1000, SHORT boundary " +
                             (boundary ? "2 tagged, 3 not" : "wrong") + ", merge mismatches " +
                             std::to_string(merge_bad) + "/500, structured round-trip failures " +
                             std::to_string(round_trip_bad) + "/" + std::to_string(recs.size());
  return not_idempotent == 0 && boundary && merge_bad == 0 && round_trip_bad == 0 ? pass(detail) : fail(detail);
}

Verdict end_to_end_replay() {
  clitest::clear_env();
  clitest::TempDir dir("accept-e2e");
  auto ok = [](const clitest::Outcome& o) { return o.code == 0; };
  if (!ok(clitest::run({"ingest", "--input", kData + "/pairs.jsonl", "--output", dir / "pairs.jsonl"})) ||
      !ok(clitest::run({"ingest", "--input", kData + "/transcripts.jsonl", "--format", "transcript", "--output",
                        dir / "tr.jsonl"})) ||
      !ok(clitest::run({"index", "--corpus", dir / "pairs.jsonl", "--output", dir / "p2.idx", "--dim", "128"})) ||
      !ok(clitest::run({"index", "--corpus", dir / "tr.jsonl", "--output", dir / "p1.idx", "--dim", "128"}))) {
    return fail("ingest or index failed");
  }
  const std::vector<std::string> common = {"--pairs", kData + "/test_pairs.jsonl", "--pipeline", "zero,1,2",
                                           "--model", "replay-model", "--p1-index", dir / "p1.idx", "--p2-index",
                                           dir / "p2.idx", "--dim", "128"};
  auto with = [&](std::vector<std::string> extra) {
    auto args = std::vector<std::string>{"evaluate"};
    args.insert(args.end(), common.begin(), common.end());
    args.insert(args.end(), extra.begin(), extra.end());
    return args;
  };
  const auto fixture = dir / "fixture.jsonl";
  if (!ok(clitest::run(with({"--fixture-from-references", fixture})))) return fail("fixture generation failed");

  const auto tr = clitest::run({"translate", "--index", dir / "p2.idx", "--inputs", kData + "/test_pairs.jsonl",
                                "--model", "replay-model", "--replay", fixture, "--output", dir / "translations.jsonl",
                                "--dim", "128"});
  if (!ok(tr)) return fail("translate --replay failed: " + tr.err);
  std::size_t translated = 0, matched = 0;
  {
    const auto refs = eval::read_pairs(kData + "/test_pairs.jsonl");
    std::istringstream lines(clitest::slurp(dir / "translations.jsonl"));
    std::string line;
    while (std::getline(lines, line)) {
      const auto j = json::parse(line);
      if (j.contains("output") && translated < refs.size() && j["output"] == refs[translated].reference) ++matched;
      ++translated;
    }
  }

  std::vector<std::string> snapshots;
  for (int run = 0; run < 3; ++run) {
    const auto out_dir = dir / ("reports" + std::to_string(run));
    const auto r = clitest::run(with({"--replay", fixture, "--out-dir", out_dir, "--heatmap-csv", out_dir + "/heat.csv"}));
    if (!ok(r)) return fail("evaluate --replay failed: " + r.err);
    std::string snap;
    for (const char* f : {"report.json", "report_zero.csv", "report_P1.csv", "report_P2.csv", "heat.csv"}) {
      snap += clitest::slurp(std::filesystem::path(out_dir) / f) + "\n#\n";
    }
    snapshots.push_back(snap);
  }
  const bool identical = snapshots[0] == snapshots[1] && snapshots[1] == snapshots[2];

  const auto reports = json::parse(clitest::slurp(std::filesystem::path(dir / "reports0") / "report.json"));
  double worst = 0;
  std::size_t rows = 0;
  for (const auto& r : reports) {
    ++rows;
    const auto& c = r["corpus"];
    worst = std::max({worst, std::abs(c["bleu"].get<double>() - 100.0), std::abs(c["chrf"].get<double>() - 100.0),
                      std::abs(c["wer"].get<double>()), std::abs(c["bertscore_f1"].get<double>() - 1.0)});
  }
  const std::string detail = std::to_string(matched) + "/" + std::to_string(translated) +
                             " replayed translations equal references; " + std::to_string(rows) +
                             " report rows; max deviation from (100, 100, 0, 1) " + fmt(worst) + "; 3 runs " +
                             (identical ? "byte-identical" : "differ");
  return matched == 30 && translated == 30 && rows == 9 && worst <= 1e-6 && identical ? pass(detail) : fail(detail);
}

Verdict index_persistence() {
  gen::Rng rng(99);
  embedding::HashingEmbedder emb(32);
  const auto idx = index::build_hybrid(gen::random_pairs_corpus(rng, 60, kDistricts), emb);
  const std::string bytes = index::serialize(idx);
  const auto back = index::deserialize(bytes);
  const bool same = back.docs == idx.docs && back.dense.matrix() == idx.dense.matrix() &&
                    back.sparse.postings() == idx.sparse.postings() && index::serialize(back) == bytes;

  auto code_of = [](const std::string& b) -> std::optional<ErrorCode> {
    try {
      index::deserialize(b);
    } catch (const Error& e) {
      return e.code();
    }
    return std::nullopt;
  };
  std::size_t flips_caught = 0;
  for (std::size_t pos = 20; pos < bytes.size(); pos += bytes.size() / 40) {
    std::string damaged = bytes;
    damaged[pos] = static_cast<char>(damaged[pos] ^ 0x10);
    if (code_of(damaged) == ErrorCode::ChecksumMismatch) ++flips_caught;
  }
  std::size_t flips = 0;
  for (std::size_t pos = 20; pos < bytes.size(); pos += bytes.size() / 40) ++flips;

  std::string newer = bytes.substr(0, bytes.size() - 8);
  newer[4] = 9;
  const std::uint64_t sum = fnv1a64(newer);
  for (int i = 0; i < 8; ++i) newer.push_back(static_cast<char>((sum >> (8 * i)) & 0xFF));
  std::string magic = bytes;
  magic[1] = 'Q';
  const bool version_ok = code_of(newer) == ErrorCode::VersionMismatch;
  const bool magic_ok = code_of(magic) == ErrorCode::FormatError;

  const std::string detail = std::string("round-trip ") + (same ? "exact" : "differs") + ", checksum caught " +
                             std::to_string(flips_caught) + "/" + std::to_string(flips) + " flips, version " +
                             (version_ok ? "rejected" : "accepted") + ", bad magic " +
                             (magic_ok ? "rejected" : "accepted");
  return same && flips_caught == flips && version_ok && magic_ok ? pass(detail) : fail(detail);
}

Verdict live_smoke() {
  const char* url = std::getenv("LLM_URL");
  const char* model = std::getenv("LLM_MODEL");
  if (url == nullptr || *url == '\0') return skip("LLM_URL not set");
  if (model == nullptr || *model == '\0') return skip("LLM_MODEL not set");
  const auto r = clitest::run({"translate", "--input", "আমি কাল বাজারে যাব", "--dialect", "Sylhet", "--pipeline",
                               "zero", "--manifest", (std::filesystem::temp_directory_path() / "smoke.json").string()});
  if (r.code != 0) return fail("exit " + std::to_string(r.code) + ": " + r.err);
  const auto j = json::parse(r.out);
  return j.contains("output") && !j["output"].get<std::string>().empty() ? pass("got a translation")
                                                                          : fail("empty output");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"metric-oracles", metric_oracles},
      {"weighted-corpus-wer", weighted_wer},
      {"fusion-constants", fusion_constants},
      {"retrieval-oracle", retrieval_oracle},
      {"deep-search-trigger", deep_search_trigger},
      {"bm25-closed-form", bm25_closed_form},
      {"preprocessing", preprocessing},
      {"end-to-end-replay", end_to_end_replay},
      {"index-persistence", index_persistence},
      {"live-smoke", live_smoke},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = fail(std::string("exception: ") + e.what());
    }
    const char* label = v.state == Verdict::State::Pass ? "PASS" : v.state == Verdict::State::Fail ? "FAIL" : "SKIP";
    if (v.state == Verdict::State::Fail) ++failures;
    std::cout << label << ' ' << name << " - " << v.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
