#include <doctest.h>

#include <cmath>
#include <functional>

#include <json.hpp>

#include "dialectrag/embedding.hpp"
#include "dialectrag/error.hpp"
#include "generators.hpp"
#include "mock_server.hpp"

using namespace dialectrag;
using namespace dialectrag::embedding;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::InvalidArgument;
}

std::string vectors_reply(const nlohmann::json& request, int dim) {
  nlohmann::json rows = nlohmann::json::array();
  int i = 0;
  for (const auto& t : request["texts"]) {
    std::vector<float> v(static_cast<std::size_t>(dim), 0.0f);
    v[static_cast<std::size_t>(i++ % dim)] = 2.0f;
    v[static_cast<std::size_t>(t.get<std::string>().size() % static_cast<std::size_t>(dim))] += 1.0f;
    rows.push_back(v);
  }
  return nlohmann::json{{"vectors", rows}, {"dim", dim}, {"model", "mock-encoder"}}.dump();
}

}  // namespace

TEST_SUITE("embedding") {
  TEST_CASE("hashing embedder is deterministic and unit-norm") {
    HashingEmbedder e(64);
    gen::Rng rng(3);
    std::vector<std::string> texts;
    for (int i = 0; i < 50; ++i) texts.push_back(gen::join(gen::sentence(rng, gen::bengali_words(), 0, 6)));
    const auto a = e.embed_sentences(texts);
    const auto b = HashingEmbedder(64).embed_sentences(texts);
    CHECK(a == b);
    CHECK(a.rows() == 50);
    CHECK(a.cols() == 64);
    CHECK(rows_unit_norm(a, 1e-6));
    CHECK(e.embed("") == EmbeddingVector::Unit(64, 0));
  }

  TEST_CASE("hashing grams") {
    CHECK(HashingEmbedder::grams("abcd") == std::vector<std::string>{"abc", "bcd"});
    CHECK(HashingEmbedder::grams("ab") == std::vector<std::string>{"ab"});
    CHECK(HashingEmbedder::grams("").empty());
    CHECK(HashingEmbedder::grams("আমি") == std::vector<std::string>{"আমি"});
  }

  TEST_CASE("hashing embedding counts grams") {
    HashingEmbedder e(16);
    const auto v = e.embed_one("aaaa");  // "aaa" twice
    EmbeddingVector expected = EmbeddingVector::Zero(16);
    expected(static_cast<Eigen::Index>(e.bucket("aaa"))) = 1.0f;
    CHECK(v.isApprox(expected));
    CHECK(HashingEmbedder(16, 1).model() != HashingEmbedder(16, 2).model());
    CHECK_THROWS_AS(HashingEmbedder(0), Error);
  }

  TEST_CASE("token embeddings follow the tokenizer") {
    HashingEmbedder e(32);
    const auto t = e.embed_tokens("আমি ভাত খাব।");
    CHECK(t.tokens == std::vector<std::string>{"আমি", "ভাত", "খাব", "।"});
    CHECK(t.vectors.rows() == 4);
    CHECK(code_of([&] { e.embed_tokens("   "); }) == ErrorCode::EmptyInput);
  }

  TEST_CASE("normalize_rows reports zero rows") {
    EmbeddingMatrix m(2, 2);
    m << 3, 4, 0, 0;
    CHECK_FALSE(normalize_rows(m));
    CHECK(m(0, 0) == doctest::Approx(0.6));
    CHECK(m(1, 0) == 0.0f);
  }

  TEST_CASE("subword pooling") {
    EmbeddingMatrix sub(5, 2);
    sub << 1, 0,  // [CLS]
        1, 0,     // ab
        0, 1,     // ##c
        0, 1,     // ▁de
        9, 9;     // [SEP]
    const auto pooled = pool_subwords({"abc", "de"}, {"[CLS]", "ab", "##c", "▁de", "[SEP]"}, sub);
    REQUIRE(pooled.vectors.rows() == 2);
    const float h = static_cast<float>(std::sqrt(0.5));
    CHECK(pooled.vectors(0, 0) == doctest::Approx(h));
    CHECK(pooled.vectors(0, 1) == doctest::Approx(h));
    CHECK(pooled.vectors(1, 1) == doctest::Approx(1.0));

    // a piece spanning two local tokens feeds both
    EmbeddingMatrix one(1, 2);
    one << 0, 1;
    CHECK(pool_subwords({"a", "b"}, {"ab"}, one).vectors.rows() == 2);

    CHECK(code_of([&] { pool_subwords({"abc"}, {"ab", "x"}, sub.topRows(2)); }) == ErrorCode::TokenizationMismatch);
    CHECK(code_of([&] { pool_subwords({"abc"}, {"ab"}, sub.topRows(1)); }) == ErrorCode::TokenizationMismatch);
    CHECK(code_of([&] { pool_subwords({"abc"}, {"ab"}, sub.topRows(2)); }) == ErrorCode::TokenizationMismatch);
  }

  TEST_CASE("http client batches and preserves order") {
    mock::Server server;
    server.on("/embed", [](const mock::Request& r) {
      return mock::Reply{200, vectors_reply(nlohmann::json::parse(r.body), 8)};
    });
    server.start();

    HttpEmbeddingConfig cfg;
    cfg.url = server.url();
    cfg.batch_size = 3;
    cfg.max_in_flight = 2;
    HttpEmbeddingClient client(cfg);
    std::vector<std::string> texts;
    for (int i = 0; i < 10; ++i) texts.push_back(std::string(static_cast<std::size_t>(i + 1), 'x'));
    const auto m = client.embed_sentences(texts);
    CHECK(m.rows() == 10);
    CHECK(m.cols() == 8);
    CHECK(rows_unit_norm(m, 1e-6));
    CHECK(client.model() == "mock-encoder");
    CHECK(client.dim() == 8);

    // Each batch is embedded independently, so row i matches embedding text i alone at the same batch slot.
    for (int i = 0; i < 10; ++i) {
      std::vector<std::string> batch(texts.begin() + (i / 3) * 3, texts.begin() + std::min(10, (i / 3) * 3 + 3));
      const auto part = client.embed_sentences(batch);
      CHECK(part.row(i % 3) == m.row(i));
    }
    std::size_t embeds = 0;
    for (const auto& r : server.requests()) embeds += nlohmann::json::parse(r.body)["texts"].size();
    CHECK(embeds >= 10);
  }

  TEST_CASE("http client errors") {
    mock::Server server;
    server.on("/embed", [](const mock::Request& r) {
      const auto body = nlohmann::json::parse(r.body);
      if (body["texts"][0] == "fail") return mock::Reply{500, R"({"error":"boom"})"};
      if (body["texts"][0] == "zero") return mock::Reply{200, R"({"vectors":[[0,0]],"dim":2,"model":"m"})"};
      return mock::Reply{200, vectors_reply(body, 4)};
    });
    server.start();

    HttpEmbeddingConfig cfg;
    cfg.url = server.url();
    CHECK(code_of([&] { HttpEmbeddingClient(cfg).embed("fail"); }) == ErrorCode::ProviderUnavailable);
    CHECK(code_of([&] { HttpEmbeddingClient(cfg).embed("zero"); }) == ErrorCode::ProviderUnavailable);
    cfg.expected_dim = 5;
    CHECK(code_of([&] { HttpEmbeddingClient(cfg).embed("ok"); }) == ErrorCode::DimensionMismatch);

    HttpEmbeddingConfig dead;
    dead.url = "http://127.0.0.1:1";
    dead.timeout = std::chrono::milliseconds(500);
    CHECK(code_of([&] { HttpEmbeddingClient(dead).embed("x"); }) == ErrorCode::ProviderUnavailable);
  }

  TEST_CASE("http token embeddings realign subwords") {
    mock::Server server;
    server.on("/embed_tokens", [](const mock::Request&) {
      return mock::Reply{200, R"({"tokens":["[CLS]","তুমি","কো","##থায়","[SEP]"],
                                  "vectors":[[1,1],[1,0],[0,1],[0,1],[1,1]]})"};
    });
    server.start();
    HttpEmbeddingConfig cfg;
    cfg.url = server.url();
    const auto t = HttpEmbeddingClient(cfg).embed_tokens("তুমি কোথায়");
    CHECK(t.tokens == std::vector<std::string>{"তুমি", "কোথায়"});
    CHECK(t.vectors(0, 0) == doctest::Approx(1.0));
    CHECK(t.vectors(1, 1) == doctest::Approx(1.0));
  }

  TEST_CASE("make_provider") {
    CHECK(make_provider(16, "")->model().rfind("hashing", 0) == 0);
    CHECK(make_provider(16, "")->dim() == 16);
  }
}
