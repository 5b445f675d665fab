#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <set>

#include "wmgen/errors.hpp"
#include "wmgen/factcheck.hpp"
#include "wmgen/tokenizer.hpp"
#include "wmgen/toyworld.hpp"

using namespace wmgen;

TEST_CASE("generate_world: determinism and counts") {
  WorldSpec spec;
  spec.seed = 5;
  spec.n_entities = 10;
  spec.facts_per_entity = 5;
  const World a = generate_world(spec);
  const World b = generate_world(spec);
  REQUIRE(a.facts.size() == 50);
  REQUIRE(b.facts.size() == 50);
  for (size_t i = 0; i < a.facts.size(); ++i) CHECK(a.facts[i] == b.facts[i]);
  CHECK(a.entities == b.entities);

  spec.seed = 6;
  const World c = generate_world(spec);
  bool differs = a.entities != c.entities;
  for (size_t i = 0; !differs && i < a.facts.size(); ++i) {
    differs = !(a.facts[i] == c.facts[i]);
  }
  CHECK(differs);
}

TEST_CASE("generate_world: at most one object per (entity, relation)") {
  WorldSpec spec;
  spec.n_entities = 12;
  spec.facts_per_entity = 6;
  const World w = generate_world(spec);
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& f : w.facts) {
    CHECK(seen.emplace(f.subject, f.relation).second);
  }
}

TEST_CASE("corruption_rate = 0 keeps every training fact true") {
  WorldSpec spec;
  spec.n_entities = 5;
  spec.corruption_rate = 0.0;
  World w = generate_world(spec);
  const auto docs = render_training_corpus(w, 0.0, 5);
  CHECK(w.corruptions.empty());
  // Every body fact sentence parses back to a supported claim.
  for (const auto& d : docs) {
    for (const auto& s : d.body) {
      for (const auto& c : extract_claims(s, w)) {
        CHECK(verify(c, w).status == VerdictStatus::supported);
      }
    }
  }
}

TEST_CASE("corruption count stays inside the binomial bound") {
  WorldSpec spec;
  spec.seed = 9;
  spec.n_entities = 250;
  spec.facts_per_entity = 4;  // 1000 facts
  spec.corruption_rate = 0.3;
  World w = generate_world(spec);
  render_training_corpus(w, 0.3, 9);
  const auto n = w.corruptions.size();
  CHECK(n >= 250);
  CHECK(n <= 350);
  for (const auto& c : w.corruptions) {
    CHECK(c.corrupt_object != c.true_object);
  }
}

TEST_CASE("datastore: one passage per fact, all true") {
  WorldSpec spec;
  spec.n_entities = 8;
  const World w = generate_world(spec);
  const auto ds = render_corpus(w);
  REQUIRE(ds.passages.size() == w.facts.size());
  std::set<std::string> ids;
  for (const auto& p : ds.passages) {
    CHECK(ids.insert(p.id).second);
    const auto claims = extract_claims(p.text, w);
    REQUIRE(claims.size() == 1);
    CHECK(verify(claims[0], w).status == VerdictStatus::supported);
  }
}

TEST_CASE("render_prompts") {
  WorldSpec spec;
  spec.n_entities = 6;
  spec.facts_per_entity = 4;
  const World w = generate_world(spec);
  const auto prompts = render_prompts(w, 5);
  REQUIRE(prompts.size() == 5);
  std::set<std::string> entities;
  for (const auto& p : prompts) {
    CHECK(p.text.find("tell me about " + p.entity + ".") != std::string::npos);
    CHECK(p.text.find("provide as many specific details and examples as possible.") !=
          std::string::npos);
    CHECK(p.gold.size() == 4);
    CHECK(entities.insert(p.entity).second);
  }
  CHECK_THROWS_AS(render_prompts(w, 7), ConfigError);
}

TEST_CASE("domain too small for corruption is a configuration error") {
  WorldSpec spec;
  spec.n_entities = 2;
  spec.facts_per_entity = 1;
  spec.relations = {{"colored", {"<S>", "is", "colored", "<O>", "."}, {"blue"}}};
  spec.corruption_rate = 0.5;
  CHECK_THROWS_AS(generate_world(spec), ConfigError);
  spec.corruption_rate = 0.0;
  CHECK_NOTHROW(generate_world(spec));
}

TEST_CASE("training corpus: corruption record matches rendered objects") {
  WorldSpec spec;
  spec.seed = 31;
  spec.n_entities = 6;
  spec.corruption_rate = 0.4;
  World w = generate_world(spec);
  const auto docs = render_training_corpus(w, 0.4, 31);

  // Parametric docs (no context) must state the corrupted object for
  // corrupted pairs and the true object otherwise.
  int parametric_docs = 0;
  for (const auto& d : docs) {
    if (!d.context.empty()) continue;
    ++parametric_docs;
    for (const auto& s : d.body) {
      for (const auto& c : extract_claims(s, w)) {
        const Corruption* corr = w.corruption_for(c.subject, c.relation);
        const Fact* fact = w.find_fact(c.subject, c.relation);
        REQUIRE(fact != nullptr);
        if (corr) {
          CHECK(c.object == corr->corrupt_object);
        } else {
          CHECK(c.object == fact->object);
        }
      }
    }
  }
  CHECK(parametric_docs == 6);

  // Override docs repeat the context assertion in the matching slot and stay
  // parametric elsewhere; distractor docs (context about another entity) stay
  // fully parametric.
  int true_override = 0, counterfactual = 0, distractor = 0;
  for (const auto& d : docs) {
    if (d.context.empty()) continue;
    const auto ctx_claims = extract_claims(d.context[0], w);
    REQUIRE(ctx_claims.size() == 1);
    const auto& ctx = ctx_claims[0];
    std::string body_subject;
    for (const auto& s : d.body) {
      for (const auto& c : extract_claims(s, w)) {
        body_subject = c.subject;
        if (c.subject == ctx.subject && c.relation == ctx.relation) {
          CHECK(c.object == ctx.object);
        } else {
          const Corruption* corr = w.corruption_for(c.subject, c.relation);
          const Fact* fact = w.find_fact(c.subject, c.relation);
          REQUIRE(fact != nullptr);
          CHECK(c.object == (corr ? corr->corrupt_object : fact->object));
        }
      }
    }
    if (ctx.subject != body_subject) {
      ++distractor;
    } else if (verify(ctx, w).status == VerdictStatus::supported) {
      ++true_override;
    } else {
      ++counterfactual;
    }
  }
  CHECK(true_override == static_cast<int>(w.facts.size()));
  CHECK(counterfactual == static_cast<int>(w.facts.size()));
  CHECK(distractor == 6);
}

TEST_CASE("training file round trip and tokenization layout") {
  WorldSpec spec;
  spec.seed = 12;
  spec.n_entities = 3;
  spec.unit_tokens = 16;
  World w = generate_world(spec);
  const auto docs = render_training_corpus(w, 0.3, 12);
  const auto path = std::filesystem::temp_directory_path() / "wmgen_train_test.txt";
  write_training_file(path.string(), docs, spec.unit_tokens);
  const auto [back, base] = parse_training_file(path.string());
  CHECK(base == 16);
  REQUIRE(back.size() == docs.size());
  for (size_t i = 0; i < docs.size(); ++i) {
    CHECK(back[i].context == docs[i].context);
    CHECK(back[i].body == docs[i].body);
  }

  const Tokenizer tok = Tokenizer::build(w.vocabulary());
  const auto tds = tokenize_training_docs(back, tok, base);
  REQUIRE(tds.size() == docs.size());
  for (size_t i = 0; i < tds.size(); ++i) {
    const auto& td = tds[i];
    REQUIRE(td.tokens.size() == td.positions.size());
    CHECK(td.tokens.back() == Tokenizer::kEot);
    size_t ctx_tokens = 0;
    for (const auto& s : docs[i].context) ctx_tokens += tok.tokenize(s).size();
    for (size_t t = 0; t < td.positions.size(); ++t) {
      if (t < ctx_tokens) {
        CHECK(td.positions[t] == static_cast<int>(t));
      } else {
        CHECK(td.positions[t] == base + static_cast<int>(t - ctx_tokens));
      }
    }
    // No unknown tokens in the corpus.
    for (int t : td.tokens) CHECK(t != Tokenizer::kUnk);
  }
  std::filesystem::remove(path);
}

TEST_CASE("world json round trip") {
  WorldSpec spec;
  spec.seed = 77;
  spec.n_entities = 4;
  World w = generate_world(spec);
  render_training_corpus(w, 0.3, 77);
  const auto path = std::filesystem::temp_directory_path() / "wmgen_world_test.json";
  w.save_json(path.string());
  const World back = World::load_json(path.string());
  CHECK(back.entities == w.entities);
  REQUIRE(back.facts.size() == w.facts.size());
  for (size_t i = 0; i < w.facts.size(); ++i) CHECK(back.facts[i] == w.facts[i]);
  CHECK(back.corruptions.size() == w.corruptions.size());
  CHECK(back.spec.unit_tokens == w.spec.unit_tokens);
  std::filesystem::remove(path);
}
