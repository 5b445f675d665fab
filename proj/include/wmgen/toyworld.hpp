// Closed synthetic knowledge world: entities, a small set of relation
// templates, one true object per (entity, relation). From it we render a
// passage datastore (always true), a training corpus with per-pair fact
// corruption (the controlled hallucination source), and fact-seeking
// prompts with gold triples.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wmgen/retrieval.hpp"
#include "wmgen/tokenizer.hpp"
#include "wmgen/train.hpp"

namespace wmgen {

struct RelationSpec {
  std::string name;
  std::vector<std::string> pattern;  // tokens; "<S>"/"<O>" placeholders
  std::vector<std::string> objects;  // closed object domain (filled on generate)
};

std::vector<RelationSpec> default_relations();

struct WorldSpec {
  uint64_t seed = 7;
  int n_entities = 30;
  int facts_per_entity = 6;
  double corruption_rate = 0.3;
  int unit_tokens = 16;  // memory-unit length the corpora are laid out for
  std::vector<RelationSpec> relations = default_relations();

  void validate() const;
};

struct Fact {
  std::string subject, relation, object;
  bool operator==(const Fact&) const = default;
};

struct Corruption {
  std::string subject, relation, true_object, corrupt_object;
};

struct World {
  WorldSpec spec;
  std::vector<std::string> entities;
  std::vector<Fact> facts;
  std::vector<Corruption> corruptions;  // filled by render_training_corpus

  const RelationSpec* relation(const std::string& name) const;
  const Fact* find_fact(const std::string& subject,
                        const std::string& relation) const;
  int fact_index(const Fact& f) const;
  std::string render_sentence(const std::string& subject,
                              const std::string& relation,
                              const std::string& object) const;
  Passage passage_for(const Fact& f) const;
  const Corruption* corruption_for(const std::string& subject,
                                   const std::string& relation) const;
  // Every word any component may emit: templates, names, objects, prompt and
  // feedback wording, enumeration digits.
  std::vector<std::string> vocabulary() const;

  void save_json(const std::string& path) const;
  static World load_json(const std::string& path);
};

World generate_world(const WorldSpec& spec);

// Datastore passages state only true facts, one per fact.
Datastore render_corpus(const World& world);

// A training document: optional context sentences encoded at positions 0..,
// body sentences at the fixed context-base offset.
struct TrainingDocText {
  std::vector<std::string> context;
  std::vector<std::string> body;
};

// Renders the corpus and records the corruption map into `world`. Document
// mix per entity: one parametric doc, one evidence doc per fact (context =
// the true passage, body repeats it), and one distractor doc (context from
// another entity, body fully parametric).
std::vector<TrainingDocText> render_training_corpus(World& world,
                                                    double corruption_rate,
                                                    uint64_t seed);

struct PromptCase {
  std::string entity;
  std::string text;
  std::vector<Fact> gold;
};

std::vector<PromptCase> render_prompts(const World& world, int n);

std::string prompt_for_entity(const std::string& entity);

void write_training_file(const std::string& path,
                         const std::vector<TrainingDocText>& docs,
                         int context_base);
// Returns (docs, context_base).
std::pair<std::vector<TrainingDocText>, int> parse_training_file(
    const std::string& path);

std::vector<TrainDoc> tokenize_training_docs(
    const std::vector<TrainingDocText>& docs, const Tokenizer& tok,
    int context_base);

}  // namespace wmgen
