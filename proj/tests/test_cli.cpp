#include <doctest.h>

#include <json.hpp>

#include "cli_helpers.hpp"
#include "dialectrag/cli.hpp"

using namespace dialectrag;
using nlohmann::json;

namespace {

const std::string kData = DIALECTRAG_SOURCE_DIR "/data";

/// Ingests and indexes the bundled pairs corpus into `dir`.
std::string build_pairs_index(const clitest::TempDir& dir) {
  REQUIRE(clitest::run({"ingest", "--input", kData + "/pairs.jsonl", "--output", dir / "pairs.corpus.jsonl"}).code ==
          0);
  const auto r = clitest::run({"index", "--corpus", dir / "pairs.corpus.jsonl", "--output", dir / "pairs.idx",
                               "--dim", "128"});
  REQUIRE(r.code == 0);
  return dir / "pairs.idx";
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("exit codes") {
    CHECK(cli::exit_code_for(ErrorCode::InvalidArgument) == 2);
    CHECK(cli::exit_code_for(ErrorCode::FormatError) == 3);
    CHECK(cli::exit_code_for(ErrorCode::UnknownDialect) == 3);
    CHECK(cli::exit_code_for(ErrorCode::RateLimited) == 4);
    CHECK(cli::exit_code_for(ErrorCode::FixtureMiss) == 4);
  }

  TEST_CASE("config file and precedence") {
    clitest::clear_env();
    clitest::TempDir dir("cfg");
    clitest::spit(dir / "c.conf", "# comment\n[llm]\nllm_model = \"from-file\"\nn=7\n\n");
    const auto file = cli::read_config_file(dir / "c.conf");
    CHECK(file.at("llm_model") == "from-file");
    CHECK(file.at("n") == "7");

    const cli::Settings s(file);
    CHECK(s.get(std::nullopt, "LLM_MODEL", "llm_model", "x") == "from-file");
    setenv("LLM_MODEL", "from-env", 1);
    CHECK(s.get(std::nullopt, "LLM_MODEL", "llm_model", "x") == "from-env");
    CHECK(s.get(std::string("from-flag"), "LLM_MODEL", "llm_model", "x") == "from-flag");
    unsetenv("LLM_MODEL");
    CHECK(s.get(std::nullopt, nullptr, "missing", "fallback") == "fallback");

    clitest::spit(dir / "bad.conf", "no equals sign\n");
    CHECK_THROWS_AS(cli::read_config_file(dir / "bad.conf"), Error);
    CHECK_THROWS_AS(cli::read_config_file(dir / "absent.conf"), Error);
  }

  TEST_CASE("usage errors") {
    CHECK(clitest::run({}).code == 2);
    CHECK(clitest::run({"--help"}).code == 0);
    CHECK(clitest::run({"ingest"}).code == 2);
    CHECK(clitest::run({"frobnicate"}).code == 2);
  }

  TEST_CASE("ingest reports stats and data errors") {
    clitest::TempDir dir("ingest");
    const auto r = clitest::run({"ingest", "--input", kData + "/pairs.jsonl", "--output", dir / "c.jsonl", "--stats",
                                 dir / "stats.json"});
    REQUIRE(r.code == 0);
    const auto stats = json::parse(r.out);
    CHECK(stats["accepted"] == 54);
    CHECK(stats["per_district"].size() == 3);
    CHECK(json::parse(clitest::slurp(dir / "stats.json")) == stats);

    clitest::spit(dir / "bad.jsonl", "{\"id\":\"1\",\"district\":\"Sylhet\"}\n");
    CHECK(clitest::run({"ingest", "--input", dir / "bad.jsonl", "--output", dir / "o.jsonl"}).code == 3);
    CHECK(clitest::run({"ingest", "--input", dir / "missing.jsonl", "--output", dir / "o.jsonl"}).code == 3);
    CHECK(clitest::run({"ingest", "--input", kData + "/pairs.jsonl", "--output", dir / "o.jsonl", "--format",
                        "nonsense"})
              .code == 2);

    const auto t = clitest::run(
        {"ingest", "--input", kData + "/transcripts.jsonl", "--format", "transcript", "--output", dir / "t.jsonl"});
    CHECK(t.code == 0);
  }

  TEST_CASE("index and query") {
    clitest::clear_env();
    clitest::TempDir dir("query");
    const auto idx = build_pairs_index(dir);

    const auto q = clitest::run({"query", "--index", idx, "--query", "তুমি কোথায় যাচ্ছ", "--dialect", "chittagong"});
    REQUIRE(q.code == 0);
    const auto j = json::parse(q.out);
    CHECK(j["dialect"] == "Chittagong");
    REQUIRE(!j["results"].empty());
    for (const auto& row : j["results"]) CHECK(row["district"] == "Chittagong");
    CHECK(j["results"].size() <= 5);

    const auto e1 = json::parse(clitest::run({"query", "--index", idx, "--query", "আমি বাড়ি যাব", "--dialect",
                                              "Sylhet", "--pipeline", "1", "--explain"})
                                    .out);
    CHECK(e1["weights"]["dense"] == 0.70);
    CHECK(e1["weights"]["sparse"] == 0.30);

    CHECK(clitest::run({"query", "--index", idx, "--query", "x", "--dialect", "Atlantis"}).code == 3);
    CHECK(clitest::run({"query", "--index", idx, "--query", "x", "--dialect", "Sylhet", "--k", "0"}).code == 3);
    CHECK(clitest::run({"query", "--index", dir / "nope.idx", "--query", "x", "--dialect", "Sylhet"}).code == 3);
  }

  TEST_CASE("translate dry run and replay errors") {
    clitest::clear_env();
    clitest::TempDir dir("translate");
    const auto idx = build_pairs_index(dir);

    const auto zero = clitest::run({"translate", "--input", "আমি ভাত খাব", "--dialect", "Sylhet", "--pipeline",
                                    "zero", "--dry-run"});
    REQUIRE(zero.code == 0);
    CHECK(zero.out.find("Standard Bengali: আমি ভাত খাব") != std::string::npos);

    const auto p2 = clitest::run({"translate", "--index", idx, "--input", "আমি ভাত খাব", "--dialect", "Sylhet",
                                  "--dry-run", "--n", "3"});
    REQUIRE(p2.code == 0);
    CHECK(p2.out.find("STANDARD: ") != std::string::npos);
    CHECK(p2.out.find("3. ") != std::string::npos);
    CHECK(p2.out.find("4. ") == std::string::npos);

    CHECK(clitest::run({"translate", "--input", "x", "--dialect", "Sylhet", "--dry-run"}).code == 2);  // no index
    CHECK(clitest::run({"translate", "--input", "x", "--dialect", "Sylhet", "--pipeline", "zero"}).code == 2);  // no model

    clitest::spit(dir / "empty.jsonl", "");
    const auto miss = clitest::run({"translate", "--input", "আমি ভাত খাব", "--dialect", "Sylhet", "--pipeline",
                                    "zero", "--model", "m", "--replay", dir / "empty.jsonl", "--output",
                                    dir / "out.jsonl"});
    CHECK(miss.code == 4);
    const auto row = json::parse(clitest::slurp(dir / "out.jsonl"));
    CHECK(row["error"] == "FixtureMiss");
    CHECK(std::filesystem::exists(dir / "out.jsonl.manifest.json"));
  }

  TEST_CASE("evaluate needs the indexes it uses") {
    clitest::clear_env();
    clitest::TempDir dir("evaluate");
    CHECK(clitest::run({"evaluate", "--pairs", kData + "/test_pairs.jsonl", "--pipeline", "2", "--model", "m",
                        "--fixture-from-references", dir / "f.jsonl"})
              .code == 2);
    const auto zero = clitest::run({"evaluate", "--pairs", kData + "/test_pairs.jsonl", "--pipeline", "zero",
                                    "--model", "m", "--fixture-from-references", dir / "f.jsonl"});
    REQUIRE(zero.code == 0);
    CHECK(json::parse(zero.out)["entries"] == 30);
  }
}
