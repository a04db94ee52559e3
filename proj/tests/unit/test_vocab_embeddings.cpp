#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "dialoglow/embeddings.hpp"
#include "dialoglow/ops.hpp"
#include "dialoglow/rng.hpp"
#include "dialoglow/vocab.hpp"

using namespace dialoglow;
namespace fs = std::filesystem;

namespace {

std::vector<TokenSequence> corpus_of(std::initializer_list<std::vector<std::string>> lines) {
  std::vector<TokenSequence> out;
  for (const auto& l : lines) {
    out.push_back({l, 0});
  }
  return out;
}

fs::path temp_file(const std::string& name, const std::string& content) {
  const auto p = fs::temp_directory_path() / ("dialoglow_test_" + name);
  std::ofstream(p) << content;
  return p;
}

}  // namespace

TEST_CASE("specials take the first ids in fixed order") {
  const Vocab v;
  REQUIRE(v.size() == 7);
  const std::vector<std::string> expected = {"<pad>", "<unk>", "<name>", "<location>",
                                             "<number>", "<url>", "<duplicate>"};
  CHECK(v.tokens() == expected);
  CHECK(v.id("<pad>") == Vocab::kPadId);
  CHECK(v.id("zzzqqq") == Vocab::kUnkId);
}

TEST_CASE("build_vocab orders by frequency then lexicographically") {
  const auto v = build_vocab(corpus_of({{"a", "a", "b"}}), 0);
  CHECK(v.token(7) == "a");
  CHECK(v.token(8) == "b");
  const auto w = build_vocab(corpus_of({{"d", "c", "b"}, {"c", "b"}}), 1);
  CHECK(w.token(7) == "b");
  CHECK(w.token(8) == "c");
  CHECK(w.token(9) == "d");
  CHECK(build_vocab(corpus_of({{"a", "b"}}), 2).size() == 7);
  CHECK(build_vocab(corpus_of({{"<name>", "x"}}), 1).size() == 8);
}

TEST_CASE("encode maps unknowns to <unk> and keeps length") {
  const auto v = build_vocab(corpus_of({{"oh"}}), 1);
  CHECK(encode({{"oh"}, 0}, v) == std::vector<TokenId>{v.id("oh")});
  CHECK(encode({{"zzzqqq"}, 0}, v) == std::vector<TokenId>{Vocab::kUnkId});
  const auto ids = encode({{"oh", "!", "<duplicate>"}, 0}, v);
  CHECK(ids.size() == 3);
  CHECK(ids.back() == v.id("<duplicate>"));
}

TEST_CASE("property: build_vocab is invariant to corpus order") {
  CounterRng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<TokenSequence> corpus;
    for (int s = 0; s < 8; ++s) {
      TokenSequence seq;
      for (std::uint64_t t = 0, n = 1 + rng.below(6); t < n; ++t) {
        seq.tokens.push_back(std::string(1, static_cast<char>('a' + rng.below(10))));
      }
      corpus.push_back(seq);
    }
    const auto v1 = build_vocab(corpus, 1);
    rng.shuffle(corpus);
    const auto v2 = build_vocab(corpus, 1);
    CHECK(v1.tokens() == v2.tokens());
    CHECK(v1.hash() == v2.hash());
    std::set<std::string> seen(v1.tokens().begin(), v1.tokens().end());
    CHECK(seen.size() == v1.size());
    for (TokenId id = 0; id < v1.size(); ++id) {
      CHECK(v1.id(v1.token(id)) == id);
    }
  }
}

TEST_CASE("vocab save/load round trip") {
  const auto v = build_vocab(corpus_of({{"hello", "world", "hello"}}), 1);
  const auto p = fs::temp_directory_path() / "dialoglow_test_vocab.txt";
  v.save(p);
  const auto back = Vocab::load(p);
  CHECK(back.tokens() == v.tokens());
  CHECK(back.hash() == v.hash());
  CHECK(v.hash().size() == 16);
  CHECK(v.hash() != Vocab().hash());
}

TEST_CASE("vocab hash is FNV-1a 64 of the vocab file bytes") {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const Vocab specials;
  std::string joined;
  for (const auto& t : specials.tokens()) {
    joined += t + "\n";
  }
  for (unsigned char c : joined) {
    h = (h ^ c) * 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  CHECK(Vocab().hash() == buf);
}

TEST_CASE("random embeddings: pad row zero, others in range") {
  const auto v = build_vocab(corpus_of({{"a", "b", "c"}}), 1);
  const auto t = random_embeddings(v, 5, 9);
  REQUIRE(t.matrix.shape() == ad::Shape{v.size(), 5});
  for (std::size_t c = 0; c < 5; ++c) {
    CHECK(t.matrix.at(0, c) == 0.0);
  }
  for (std::size_t r = 1; r < v.size(); ++r) {
    for (std::size_t c = 0; c < 5; ++c) {
      CHECK(std::abs(t.matrix.at(r, c)) <= kOovInitRange);
    }
  }
  CHECK(ad::bit_equal(t.matrix, random_embeddings(v, 5, 9).matrix));
  CHECK_FALSE(ad::bit_equal(t.matrix, random_embeddings(v, 5, 10).matrix));
}

TEST_CASE("load_pretrained copies known rows and counts misses") {
  const auto v = build_vocab(corpus_of({{"hi", "there"}}), 1);
  const auto p = temp_file("vec.txt", "hi 0.1 0.2 0.3\nnope 1 2 3\n");
  const auto t = load_pretrained(p, v, 3, 1);
  const auto hi = v.id("hi");
  CHECK(t.matrix.at(hi, 0) == 0.1);
  CHECK(t.matrix.at(hi, 2) == 0.3);
  // six specials besides <pad>, plus "there"
  CHECK(t.oov_count == 7);
  CHECK(t.matrix.at(0, 1) == 0.0);
  CHECK(std::abs(t.matrix.at(v.id("there"), 0)) <= kOovInitRange);
}

TEST_CASE("load_pretrained errors") {
  const Vocab v;
  const auto bad = temp_file("bad.txt", "a 1 2 3\nb 1 2\n");
  try {
    load_pretrained(bad, v, 3, 1);
    FAIL("expected EmbeddingError");
  } catch (const EmbeddingError& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
  CHECK_THROWS_AS(load_pretrained("/nonexistent/vectors.txt", v, 3, 1), EmbeddingError);
}

TEST_CASE("lookup selects rows and routes gradients") {
  ad::Tape tape;
  const auto table = tape.variable(ad::Tensor::matrix(3, 2, {0, 0, 1, 2, 3, 4}));
  const std::vector<TokenId> ids = {2, 2, 0};
  const auto out = lookup(table, ids);
  CHECK(out.value().at(0, 0) == 3.0);
  CHECK(out.value().at(1, 1) == 4.0);
  CHECK(out.value().at(2, 1) == 0.0);
  tape.backward(ad::sum(out));
  const auto g = tape.grad(table);
  CHECK(g.at(2, 0) == 2.0);
  CHECK(g.at(0, 1) == 1.0);
  CHECK(g.at(1, 0) == 0.0);
  const std::vector<TokenId> oob = {3};
  CHECK_THROWS_AS(lookup(table, oob), std::out_of_range);
}
