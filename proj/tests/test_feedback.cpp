#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <map>

#include "wmgen/errors.hpp"
#include "wmgen/factcheck.hpp"
#include "wmgen/retrieval.hpp"
#include "wmgen/rng.hpp"
#include "wmgen/tokenizer.hpp"
#include "wmgen/toyworld.hpp"

using namespace wmgen;

namespace {

Datastore mini_store(std::vector<std::pair<std::string, std::string>> items) {
  Datastore ds;
  for (auto& [id, text] : items) ds.passages.push_back({id, text, "test"});
  return ds;
}

// Small world with fixed facts for the grammar/oracle tests.
World grammar_world() {
  WorldSpec spec;
  spec.seed = 3;
  spec.n_entities = 2;
  spec.facts_per_entity = 2;
  spec.corruption_rate = 0.0;
  World w = generate_world(spec);
  w.entities = {"verona", "quandor"};
  w.facts = {{"verona", "founded_in", "1203"},
             {"verona", "located_in", "tarn"},
             {"quandor", "founded_in", "1450"},
             {"quandor", "led_by", "maro"}};
  return w;
}

}  // namespace

TEST_CASE("retrieve: term overlap ordering") {
  const auto ds = mini_store({{"p1", "red apple pie"}, {"p2", "blue sky"}});
  const auto index = TfIndex::build(ds);
  const auto hits = retrieve(ds, index, "red apple", 0.0, 5);
  REQUIRE(!hits.empty());
  CHECK(hits[0].passage.id == "p1");
}

TEST_CASE("retrieve: tau = 1.0 excludes non-identical texts") {
  const auto ds = mini_store({{"p1", "red apple pie"}, {"p2", "blue sky"}});
  const auto index = TfIndex::build(ds);
  CHECK(retrieve(ds, index, "red apple", 1.0, 5).empty());
}

TEST_CASE("retrieve: identical text scores 1.0; hand-computed cosine") {
  const auto ds = mini_store({{"p1", "red apple pie"}});
  const auto index = TfIndex::build(ds);
  const auto hits = retrieve(ds, index, "red apple pie", 0.0, 1);
  REQUIRE(hits.size() == 1);
  CHECK(std::abs(hits[0].score - 1.0) <= 1e-12);

  // Independent oracle: explicit term-frequency cosine over word maps.
  auto words = [](const std::string& s) {
    std::map<std::string, double> m;
    for (const auto& w : Tokenizer::split_words(s)) m[w] += 1.0;
    return m;
  };
  const auto qa = words("red apple");
  const auto pa = words("red apple pie");
  double dot = 0.0, qn = 0.0, pn = 0.0;
  for (const auto& [w, c] : qa) {
    qn += c * c;
    auto it = pa.find(w);
    if (it != pa.end()) dot += c * it->second;
  }
  for (const auto& [w, c] : pa) pn += c * c;
  const double expected = dot / (std::sqrt(qn) * std::sqrt(pn));
  // Precondition for the oracle: no hash collisions among these words.
  const auto got = retrieve(ds, index, "red apple", 0.0, 1);
  REQUIRE(got.size() == 1);
  CHECK(std::abs(got[0].score - expected) <= 1e-12);
}

TEST_CASE("retrieve: raising tau never adds a passage (monotone nesting)") {
  Rng rng(31);
  const std::vector<std::string> vocab = {"ka", "lo", "mu", "ne", "pi", "ra", "su"};
  Datastore ds;
  for (int i = 0; i < 20; ++i) {
    std::string text;
    for (int j = 0; j < 4 + static_cast<int>(rng.below(4)); ++j) {
      text += vocab[rng.below(vocab.size())] + " ";
    }
    ds.passages.push_back({"p" + std::to_string(i), text, "t"});
  }
  const auto index = TfIndex::build(ds);
  for (int iter = 0; iter < 20; ++iter) {
    std::string query;
    for (int j = 0; j < 3; ++j) query += vocab[rng.below(vocab.size())] + " ";
    const double t1 = rng.uniform01() * 0.5;
    const double t2 = t1 + rng.uniform01() * (1.0 - t1);
    const auto lo = retrieve(ds, index, query, t1, 50);
    const auto hi = retrieve(ds, index, query, t2, 50);
    for (const auto& h : hi) {
      bool found = false;
      for (const auto& l : lo) {
        if (l.passage.id == h.passage.id) found = true;
      }
      CHECK(found);
    }
  }
}

TEST_CASE("retrieve: edge cases") {
  Datastore empty;
  const auto index = TfIndex::build(empty);
  CHECK(retrieve(empty, index, "anything", 0.2, 3).empty());

  const auto ds = mini_store({{"p1", "a b"}});
  const auto idx = TfIndex::build(ds);
  CHECK_THROWS_AS(retrieve(ds, idx, "a", -0.1, 3), ConfigError);
  CHECK_THROWS_AS(retrieve(ds, idx, "a", 1.5, 3), ConfigError);
  CHECK_THROWS_AS(retrieve(ds, idx, "a", 0.2, 0), ConfigError);
}

TEST_CASE("tf index json round trip") {
  const auto ds = mini_store({{"p1", "red apple pie"}, {"p2", "blue sky"}});
  const auto index = TfIndex::build(ds);
  const auto path = std::filesystem::temp_directory_path() / "wmgen_index_test.json";
  index.save_json(path.string(), ds);
  const auto loaded = TfIndex::load_json(path.string(), ds);
  const auto a = retrieve(ds, index, "red apple", 0.0, 5);
  const auto b = retrieve(ds, loaded, "red apple", 0.0, 5);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].passage.id == b[i].passage.id);
    CHECK(a[i].score == b[i].score);
  }
  std::filesystem::remove(path);
}

TEST_CASE("build_query") {
  CHECK(build_query("Tell me about X.", "X is tall.") ==
        "Tell me about X. X is tall.");
  CHECK(build_query("Q", "") == "Q");
  CHECK(build_query("Q", "s") == build_query("Q", "s"));
}

TEST_CASE("extract_claims: grammar matches and non-matches") {
  const World w = grammar_world();
  const auto claims = extract_claims("verona was founded in 1203.", w);
  REQUIRE(claims.size() == 1);
  CHECK(claims[0].subject == "verona");
  CHECK(claims[0].relation == "founded_in");
  CHECK(claims[0].object == "1203");
  CHECK(claims[0].text == "verona was founded in 1203");

  CHECK(extract_claims("in summary, there are many facts.", w).empty());
  CHECK(extract_claims("", w).empty());
}

TEST_CASE("extract_claims: two clauses joined by and") {
  const World w = grammar_world();
  const auto claims = extract_claims(
      "verona was founded in 1203 and verona is located in tarn.", w);
  REQUIRE(claims.size() == 2);
  CHECK(claims[0].relation == "founded_in");
  CHECK(claims[1].relation == "located_in");
  CHECK(claims[1].clause_index == 1);
}

TEST_CASE("verify: supported, unsupported with evidence, unverifiable") {
  const World w = grammar_world();
  Claim c{"verona was founded in 1203", "verona", "founded_in", "1203", 0};
  CHECK(verify(c, w).status == VerdictStatus::supported);

  Claim wrong{"verona was founded in 1450", "verona", "founded_in", "1450", 0};
  const auto v = verify(wrong, w);
  CHECK(v.status == VerdictStatus::unsupported);
  REQUIRE(v.evidence.size() == 1);
  CHECK(v.evidence[0].text.find("1203") != std::string::npos);

  Claim unknown{"verona counts 5 members", "verona", "counts", "5", 0};
  CHECK(verify(unknown, w).status == VerdictStatus::unverifiable);
}

TEST_CASE("verify: oracle soundness over the closed world") {
  const World w = grammar_world();
  for (const auto& f : w.facts) {
    Claim c{f.subject + " ...", f.subject, f.relation, f.object, 0};
    CHECK(verify(c, w).status == VerdictStatus::supported);
    // Any conflicting object is unsupported, never supported.
    Claim bad = c;
    bad.object = f.object + "x";
    const auto v = verify(bad, w);
    CHECK(v.status == VerdictStatus::unsupported);
    REQUIRE(!v.evidence.empty());
    CHECK(v.evidence[0].text.find(f.object) != std::string::npos);
  }
}

TEST_CASE("render_feedback: refuting-only form emits exactly the evidence text") {
  const World w = grammar_world();
  Claim wrong{"verona was founded in 1450", "verona", "founded_in", "1450", 0};
  const std::vector<Verdict> verdicts = {verify(wrong, w)};
  FeedbackForm form{true, false, false};
  const auto texts = render_feedback(verdicts, form);
  REQUIRE(texts.size() == 1);
  CHECK(texts[0] == w.passage_for(*w.find_fact("verona", "founded_in")).text);
}

TEST_CASE("render_feedback: instruction template is exact") {
  const World w = grammar_world();
  Claim c1{"verona was founded in 1450", "verona", "founded_in", "1450", 0};
  Claim c2{"verona is located in pok", "verona", "located_in", "pok", 0};
  const std::vector<Verdict> verdicts = {verify(c1, w), verify(c2, w)};
  FeedbackForm form{false, false, true};
  const auto texts = render_feedback(verdicts, form);
  REQUIRE(texts.size() == 1);
  CHECK(texts[0] ==
        "Please refrain from including the following imprecise statements: "
        "(1) verona was founded in 1450 (2) verona is located in pok");
}

TEST_CASE("render_feedback: dedup by passage id and empty cases") {
  const World w = grammar_world();
  Claim c1{"verona was founded in 1450", "verona", "founded_in", "1450", 0};
  Claim c2{"verona was founded in 1500", "verona", "founded_in", "1500", 0};
  const std::vector<Verdict> verdicts = {verify(c1, w), verify(c2, w)};
  FeedbackForm form{true, true, false};
  // Both claims share the same true passage; it is emitted once.
  CHECK(render_feedback(verdicts, form).size() == 1);

  Claim unv{"verona counts 5 members", "verona", "counts", "5", 0};
  const std::vector<Verdict> only_unverifiable = {verify(unv, w)};
  CHECK(render_feedback(only_unverifiable, form).empty());

  CHECK_THROWS_AS(render_feedback({}, form), ContractViolation);
}

TEST_CASE("render_feedback: supporting passages for supported claims") {
  const World w = grammar_world();
  Claim good{"verona was founded in 1203", "verona", "founded_in", "1203", 0};
  const std::vector<Verdict> verdicts = {verify(good, w)};
  CHECK(render_feedback(verdicts, FeedbackForm{true, true, false}).size() == 1);
  CHECK(render_feedback(verdicts, FeedbackForm{true, false, false}).empty());
}

TEST_CASE("evidence sufficiency: unsupported verdicts carry the correct object") {
  WorldSpec spec;
  spec.seed = 17;
  spec.n_entities = 6;
  spec.facts_per_entity = 4;
  World w = generate_world(spec);
  render_training_corpus(w, 0.5, 17);
  for (const auto& c : w.corruptions) {
    Claim claim{c.subject, c.subject, c.relation, c.corrupt_object, 0};
    const auto v = verify(claim, w);
    REQUIRE(v.status == VerdictStatus::unsupported);
    REQUIRE(!v.evidence.empty());
    bool contains = false;
    for (const auto& p : v.evidence) {
      if (p.text.find(c.true_object) != std::string::npos) contains = true;
    }
    CHECK(contains);
  }
}
