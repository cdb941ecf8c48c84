#include <doctest.h>

#include "dialectrag/error.hpp"
#include "dialectrag/prompt.hpp"
#include "dialectrag/unicode.hpp"
#include "generators.hpp"

using namespace dialectrag;
using namespace dialectrag::prompt;

namespace {

Example ex(const std::string& id, const std::string& district, double score, const std::string& standard = "std",
           const std::string& local = "loc") {
  return {id, district, standard, local, score};
}

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST_SUITE("prompt") {
  TEST_CASE("shipped templates match the built-in ones") {
    const auto files = load_templates(DIALECTRAG_SOURCE_DIR "/templates");
    for (auto k : {Kind::Zero, Kind::P1, Kind::P2}) {
      CHECK(files.for_kind(k).version == default_templates().for_kind(k).version);
      CHECK(files.for_kind(k).body == default_templates().for_kind(k).body);
    }
    CHECK(default_templates().p2.version == "p2-v1");
  }

  TEST_CASE("kind names") {
    CHECK(parse_kind("zero") == Kind::Zero);
    CHECK(parse_kind("0") == Kind::Zero);
    CHECK(parse_kind("1") == Kind::P1);
    CHECK(parse_kind("p2") == Kind::P2);
    CHECK(to_string(Kind::P1) == "P1");
    CHECK_THROWS_AS(parse_kind("3"), Error);
  }

  TEST_CASE("zero-shot prompt") {
    const auto p = build_zero_shot("  আমি  ভাত খাব ", "sylhet");
    CHECK(p.dialect == "Sylhet");
    CHECK(p.input_sentence == "আমি ভাত খাব");
    CHECK(p.text.find("Standard Bengali: আমি ভাত খাব\n") != std::string::npos);
    CHECK(p.text.find("Sylhet regional dialect") != std::string::npos);
    CHECK(p.n_used == 0);
    CHECK(p.text.find('{') == std::string::npos);
    CHECK_THROWS_AS(build_zero_shot("   ", "Sylhet"), Error);
  }

  TEST_CASE("P1 uses the first n examples in rank order") {
    const std::vector<Example> e = {ex("a", "Sylhet", 0.9, "", "one [[SHORT]]"), ex("b", "Rangpur", 0.8, "", "two"),
                                    ex("c", "Sylhet", 0.7, "", "three")};
    const auto p = build_p1("input", "Sylhet", e, 2);
    REQUIRE(p.examples.size() == 2);
    CHECK(p.examples[0].text == "one");
    CHECK(p.text.find("1. one\n2. two") != std::string::npos);
    CHECK(p.n_requested == 2);
    CHECK(p.template_version == "p1-v1");
  }

  TEST_CASE("P2 keeps the target dialect and sorts by score") {
    const std::vector<Example> e = {ex("a", "Sylhet", 0.2, "s1", "l1"), ex("b", "Rangpur", 0.99, "s2", "l2"),
                                    ex("d", "Sylhet", 0.8, "s3", "l3 [[QUESTION]]"), ex("c", "Sylhet", 0.8, "s4", "l4")};
    const auto p = build_p2("input", "Sylhet", e, 5);
    REQUIRE(p.examples.size() == 3);
    CHECK(p.examples[0].id == "c");
    CHECK(p.examples[1].id == "d");
    CHECK(p.examples[1].text == "STANDARD: s3 → LOCAL: l3");
    CHECK(p.examples[2].id == "a");
    CHECK(p.text.find("Rangpur") == std::string::npos);
    CHECK(p.text.find("[[") == std::string::npos);
  }

  TEST_CASE("no examples drops the example block") {
    const auto p = build_p2("input", "Sylhet", {}, 5);
    CHECK(p.n_used == 0);
    CHECK(p.text.find("Examples:") == std::string::npos);
    CHECK(p.text.find("{/examples}") == std::string::npos);
  }

  TEST_CASE("budget drops lowest-ranked examples") {
    std::vector<Example> e;
    for (int i = 0; i < 20; ++i) e.push_back(ex("e" + std::to_string(i), "Sylhet", 1.0 - i * 0.01, "s", std::string(100, 'x')));
    BuildOptions tight;
    tight.char_budget = 1000;
    const auto p = build_p1("input", "Sylhet", e, 20, tight);
    CHECK(p.n_used < 20);
    CHECK(unicode::length(p.text) <= 1000);
    for (std::size_t i = 0; i < p.examples.size(); ++i) CHECK(p.examples[i].id == "e" + std::to_string(i));
  }

  TEST_CASE("prompt invariants on random inputs") {
    gen::Rng rng(12);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<Example> e;
      const auto m = gen::uniform(rng, 0, 12);
      for (std::size_t i = 0; i < m; ++i) {
        e.push_back(ex("x" + std::to_string(i), gen::uniform(rng, 0, 1) ? "Sylhet" : "Tangail",
                       static_cast<double>(gen::uniform(rng, 0, 5)), gen::join(gen::sentence(rng, gen::bengali_words(), 1, 5)),
                       gen::join(gen::sentence(rng, gen::bengali_words(), 1, 5))));
      }
      const std::size_t n = gen::uniform(rng, 1, 8);
      const auto input = gen::join(gen::sentence(rng, gen::bengali_words(), 1, 6));
      const auto p2 = build_p2(input, "Sylhet", e, n);
      CHECK(p2.n_used <= n);
      CHECK(count(p2.text, "Standard Bengali: " + input + "\n") == 1);
      for (std::size_t i = 1; i < p2.examples.size(); ++i) {
        CHECK(p2.examples[i - 1].id != p2.examples[i].id);
      }
      const auto p1 = build_p1(input, "Sylhet", e, n);
      CHECK(p1.n_used == std::min(n, e.size()));
    }
  }

  TEST_CASE("placeholder text in the input stays literal") {
    const auto p = build_zero_shot("{dialect} {examples}", "Sylhet");
    CHECK(p.text.find("Standard Bengali: {dialect} {examples}") != std::string::npos);
  }

  TEST_CASE("template parsing") {
    CHECK(parse_template("version: t1\nsay {input}\n\n").body == "say {input}");
    CHECK_THROWS_AS(parse_template("say {input}"), Error);
    CHECK_THROWS_AS(parse_template("version: t1\nno placeholder"), Error);
    CHECK(strip_tags("a [[SHORT]] [[MERGED]]") == "a");
  }
}
