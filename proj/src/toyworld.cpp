#include "wmgen/toyworld.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "wmgen/errors.hpp"
#include "wmgen/rng.hpp"
#include "json.hpp"

namespace wmgen {

namespace {

const std::vector<std::string>& prompt_words() {
  static const std::vector<std::string> words = {
      "tell", "me",      "about",   "provide", "as",       "many",
      "specific", "details", "and",     "examples", "possible", "."};
  return words;
}

const std::vector<std::string>& feedback_words() {
  static const std::vector<std::string> words = {
      "Please", "refrain", "from", "including", "the", "following",
      "imprecise", "statements", ":", "(", ")"};
  return words;
}

std::string make_name(Rng& rng, int min_syllables, int max_syllables) {
  static const char* consonants = "bdfgklmnprstvz";
  static const char* vowels = "aeiou";
  const int n = min_syllables +
                static_cast<int>(rng.below(
                    static_cast<uint64_t>(max_syllables - min_syllables + 1)));
  std::string s;
  for (int i = 0; i < n; ++i) {
    s += consonants[rng.below(14)];
    s += vowels[rng.below(5)];
  }
  if (rng.below(2) == 0) s += consonants[rng.below(14)];
  return s;
}

std::vector<std::string> unique_names(Rng& rng, int count,
                                      std::set<std::string>& taken) {
  std::vector<std::string> out;
  while (static_cast<int>(out.size()) < count) {
    std::string s = make_name(rng, 2, 3);
    if (taken.insert(s).second) out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::string> unique_numbers(Rng& rng, int count, int lo, int hi,
                                        std::set<std::string>& taken) {
  std::vector<std::string> out;
  while (static_cast<int>(out.size()) < count) {
    const int v = lo + static_cast<int>(rng.below(static_cast<uint64_t>(hi - lo + 1)));
    std::string s = std::to_string(v);
    if (taken.insert(s).second) out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

std::vector<RelationSpec> default_relations() {
  return {
      {"founded_in", {"<S>", "was", "founded", "in", "<O>", "."}, {}},
      {"located_in", {"<S>", "is", "located", "in", "<O>", "."}, {}},
      {"led_by", {"<S>", "is", "led", "by", "<O>", "."}, {}},
      {"known_for", {"<S>", "is", "known", "for", "<O>", "."}, {}},
      {"colored", {"<S>", "is", "colored", "<O>", "."}, {}},
      {"counts", {"<S>", "counts", "<O>", "members", "."}, {}},
  };
}

void WorldSpec::validate() const {
  if (n_entities < 1) throw ConfigError("n_entities must be >= 1");
  if (relations.empty()) throw ConfigError("world needs at least one relation");
  if (facts_per_entity < 1 ||
      facts_per_entity > static_cast<int>(relations.size())) {
    throw ConfigError("facts_per_entity must be in [1, n_relations]");
  }
  if (corruption_rate < 0.0 || corruption_rate >= 1.0) {
    throw ConfigError("corruption_rate must be in [0, 1)");
  }
  if (unit_tokens < 2) throw ConfigError("unit_tokens must be >= 2");
  for (const auto& r : relations) {
    bool has_s = false, has_o = false;
    for (const auto& t : r.pattern) {
      if (t == "<S>") has_s = true;
      if (t == "<O>") has_o = true;
    }
    if (!has_s || !has_o) {
      throw ConfigError("relation pattern must contain <S> and <O>: " + r.name);
    }
  }
}

const RelationSpec* World::relation(const std::string& name) const {
  for (const auto& r : spec.relations) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

const Fact* World::find_fact(const std::string& subject,
                             const std::string& rel) const {
  for (const auto& f : facts) {
    if (f.subject == subject && f.relation == rel) return &f;
  }
  return nullptr;
}

int World::fact_index(const Fact& f) const {
  for (size_t i = 0; i < facts.size(); ++i) {
    if (facts[i] == f) return static_cast<int>(i);
  }
  return -1;
}

std::string World::render_sentence(const std::string& subject,
                                   const std::string& rel,
                                   const std::string& object) const {
  const RelationSpec* r = relation(rel);
  if (!r) throw ContractViolation("unknown relation: " + rel);
  std::string out;
  for (const auto& t : r->pattern) {
    const std::string& piece = (t == "<S>") ? subject : (t == "<O>") ? object : t;
    if (!out.empty() && piece != "." && piece != ",") out += ' ';
    out += piece;
  }
  return out;
}

Passage World::passage_for(const Fact& f) const {
  const int idx = fact_index(f);
  if (idx < 0) throw ContractViolation("passage requested for unknown fact");
  char id[16];
  std::snprintf(id, sizeof(id), "p%04d", idx);
  return Passage{id, render_sentence(f.subject, f.relation, f.object), "world"};
}

const Corruption* World::corruption_for(const std::string& subject,
                                        const std::string& rel) const {
  for (const auto& c : corruptions) {
    if (c.subject == subject && c.relation == rel) return &c;
  }
  return nullptr;
}

std::vector<std::string> World::vocabulary() const {
  std::vector<std::string> words;
  auto add_all = [&words](const std::vector<std::string>& more) {
    words.insert(words.end(), more.begin(), more.end());
  };
  add_all(prompt_words());
  add_all(feedback_words());
  for (int i = 1; i <= 32; ++i) words.push_back(std::to_string(i));
  for (const auto& r : spec.relations) {
    for (const auto& t : r.pattern) {
      if (t != "<S>" && t != "<O>") words.push_back(t);
    }
    add_all(r.objects);
  }
  add_all(entities);
  return words;
}

World generate_world(const WorldSpec& spec_in) {
  WorldSpec spec = spec_in;
  spec.validate();
  Rng rng(mix_seed(spec.seed, 0x774f524cULL));
  std::set<std::string> taken;
  for (const auto& w : prompt_words()) taken.insert(w);
  for (const auto& w : feedback_words()) taken.insert(w);
  for (const auto& r : spec.relations) {
    for (const auto& t : r.pattern) taken.insert(t);
  }

  World world;
  world.entities = unique_names(rng, spec.n_entities, taken);

  for (auto& r : spec.relations) {
    if (!r.objects.empty()) continue;  // caller-supplied domain
    if (r.name == "founded_in") {
      r.objects = unique_numbers(rng, 40, 1100, 1999, taken);
    } else if (r.name == "counts") {
      r.objects = unique_numbers(rng, 40, 3, 99, taken);
    } else if (r.name == "colored") {
      r.objects = unique_names(rng, 14, taken);
    } else if (r.name == "known_for") {
      r.objects = unique_names(rng, 20, taken);
    } else {
      r.objects = unique_names(rng, 30, taken);
    }
  }
  if (spec.corruption_rate > 0.0) {
    for (const auto& r : spec.relations) {
      if (r.objects.size() < 2) {
        throw ConfigError("relation domain too small for corruption: " + r.name);
      }
    }
  }
  world.spec = spec;

  // facts_per_entity relations per entity, canonical relation order.
  for (const auto& e : world.entities) {
    std::vector<size_t> rel_idx(spec.relations.size());
    for (size_t i = 0; i < rel_idx.size(); ++i) rel_idx[i] = i;
    if (spec.facts_per_entity < static_cast<int>(spec.relations.size())) {
      rng.shuffle(rel_idx);
      rel_idx.resize(static_cast<size_t>(spec.facts_per_entity));
      std::sort(rel_idx.begin(), rel_idx.end());
    }
    for (size_t ri : rel_idx) {
      const auto& r = spec.relations[ri];
      world.facts.push_back(Fact{e, r.name, r.objects[rng.below(r.objects.size())]});
    }
  }
  return world;
}

Datastore render_corpus(const World& world) {
  Datastore ds;
  ds.passages.reserve(world.facts.size());
  for (const auto& f : world.facts) ds.passages.push_back(world.passage_for(f));
  return ds;
}

std::string prompt_for_entity(const std::string& entity) {
  return "tell me about " + entity +
         ". provide as many specific details and examples as possible.";
}

std::vector<TrainingDocText> render_training_corpus(World& world,
                                                    double corruption_rate,
                                                    uint64_t seed) {
  if (corruption_rate < 0.0 || corruption_rate >= 1.0) {
    throw ConfigError("corruption_rate must be in [0, 1)");
  }
  Rng rng(mix_seed(seed, 0x434f5252ULL));
  world.corruptions.clear();

  // Decide the parametric belief per fact.
  for (const auto& f : world.facts) {
    if (rng.uniform01() < corruption_rate) {
      const RelationSpec* r = world.relation(f.relation);
      if (r->objects.size() < 2) {
        throw ConfigError("relation domain too small for corruption: " + f.relation);
      }
      std::string wrong = f.object;
      while (wrong == f.object) {
        wrong = r->objects[rng.below(r->objects.size())];
      }
      world.corruptions.push_back(Corruption{f.subject, f.relation, f.object, wrong});
    }
  }

  auto parametric_object = [&world](const Fact& f) -> const std::string& {
    const Corruption* c = world.corruption_for(f.subject, f.relation);
    return c ? c->corrupt_object : f.object;
  };

  auto body_for = [&](const std::string& entity,
                      const Fact* true_slot) -> std::vector<std::string> {
    std::vector<std::string> body;
    body.push_back("tell me about " + entity + ".");
    body.push_back("provide as many specific details and examples as possible.");
    for (const auto& f : world.facts) {
      if (f.subject != entity) continue;
      const std::string& obj =
          (true_slot && f == *true_slot) ? f.object : parametric_object(f);
      body.push_back(world.render_sentence(f.subject, f.relation, obj));
    }
    return body;
  };

  // An override doc pairs a context sentence that asserts `object` for one
  // fact with a body that repeats it; with a random object this supervises
  // copy-from-context on every pair, not just the corrupted ones.
  auto override_doc = [&](const Fact& f, const std::string& object) {
    TrainingDocText doc;
    doc.context.push_back(world.render_sentence(f.subject, f.relation, object));
    for (const auto& g : world.facts) {
      if (g.subject != f.subject) continue;
      const std::string& obj = (g == f) ? object : parametric_object(g);
      if (doc.body.empty()) {
        doc.body.push_back("tell me about " + f.subject + ".");
        doc.body.push_back(
            "provide as many specific details and examples as possible.");
      }
      doc.body.push_back(world.render_sentence(g.subject, g.relation, obj));
    }
    return doc;
  };

  std::vector<TrainingDocText> docs;
  for (const auto& e : world.entities) {
    docs.push_back(TrainingDocText{{}, body_for(e, nullptr)});
    for (const auto& f : world.facts) {
      if (f.subject != e) continue;
      docs.push_back(override_doc(f, f.object));
      // Counterfactual override with an object that matches neither the true
      // fact nor the parametric belief. Only emitted when corruption exists;
      // at rate 0 the corpus states true facts only.
      const RelationSpec* r = world.relation(f.relation);
      if (corruption_rate > 0.0 && r->objects.size() >= 3) {
        const std::string& parametric = parametric_object(f);
        std::string other = f.object;
        while (other == f.object || other == parametric) {
          other = r->objects[rng.below(r->objects.size())];
        }
        docs.push_back(override_doc(f, other));
      }
    }
    // Distractor: context sentence about a different entity, answers stay
    // parametric.
    if (world.entities.size() > 1) {
      std::string other = e;
      while (other == e) {
        other = world.entities[rng.below(world.entities.size())];
      }
      std::vector<const Fact*> other_facts;
      for (const auto& f : world.facts) {
        if (f.subject == other) other_facts.push_back(&f);
      }
      if (!other_facts.empty()) {
        TrainingDocText doc;
        doc.context.push_back(
            world.passage_for(*other_facts[rng.below(other_facts.size())]).text);
        doc.body = body_for(e, nullptr);
        docs.push_back(std::move(doc));
      }
    }
  }
  return docs;
}

std::vector<PromptCase> render_prompts(const World& world, int n) {
  if (n > static_cast<int>(world.entities.size())) {
    throw ConfigError("requested more prompts than entities");
  }
  std::vector<PromptCase> prompts;
  for (int i = 0; i < n; ++i) {
    PromptCase p;
    p.entity = world.entities[static_cast<size_t>(i)];
    p.text = prompt_for_entity(p.entity);
    for (const auto& f : world.facts) {
      if (f.subject == p.entity) p.gold.push_back(f);
    }
    prompts.push_back(std::move(p));
  }
  return prompts;
}

void write_training_file(const std::string& path,
                         const std::vector<TrainingDocText>& docs,
                         int context_base) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write training file: " + path);
  out << "# wmgen-corpus context_base=" << context_base << "\n";
  for (size_t i = 0; i < docs.size(); ++i) {
    if (i > 0) out << "\n";
    for (const auto& s : docs[i].context) out << "> " << s << "\n";
    for (const auto& s : docs[i].body) out << s << "\n";
  }
}

std::pair<std::vector<TrainingDocText>, int> parse_training_file(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read training file: " + path);
  std::vector<TrainingDocText> docs;
  TrainingDocText current;
  int context_base = -1;
  std::string line;
  auto flush = [&docs, &current]() {
    if (!current.context.empty() || !current.body.empty()) {
      docs.push_back(std::move(current));
      current = TrainingDocText{};
    }
  };
  while (std::getline(in, line)) {
    if (line.rfind("# wmgen-corpus", 0) == 0) {
      const auto pos = line.find("context_base=");
      if (pos != std::string::npos) {
        context_base = std::stoi(line.substr(pos + 13));
      }
      continue;
    }
    if (line.empty()) {
      flush();
      continue;
    }
    if (line.rfind("> ", 0) == 0) {
      current.context.push_back(line.substr(2));
    } else {
      current.body.push_back(line);
    }
  }
  flush();
  if (context_base < 0) {
    throw IoError("training file missing context_base header: " + path);
  }
  return {std::move(docs), context_base};
}

std::vector<TrainDoc> tokenize_training_docs(
    const std::vector<TrainingDocText>& docs, const Tokenizer& tok,
    int context_base) {
  std::vector<TrainDoc> out;
  out.reserve(docs.size());
  for (const auto& d : docs) {
    TrainDoc td;
    std::vector<int> ctx;
    for (const auto& s : d.context) {
      auto t = tok.tokenize(s);
      ctx.insert(ctx.end(), t.begin(), t.end());
    }
    if (static_cast<int>(ctx.size()) > context_base) {
      throw ConfigError("training context longer than context_base");
    }
    for (size_t i = 0; i < ctx.size(); ++i) {
      td.tokens.push_back(ctx[i]);
      td.positions.push_back(static_cast<int>(i));
    }
    int pos = context_base;
    for (const auto& s : d.body) {
      for (int t : tok.tokenize(s)) {
        td.tokens.push_back(t);
        td.positions.push_back(pos++);
      }
    }
    td.tokens.push_back(Tokenizer::kEot);
    td.positions.push_back(pos);
    out.push_back(std::move(td));
  }
  return out;
}

void World::save_json(const std::string& path) const {
  nlohmann::json j;
  j["spec"] = {{"seed", spec.seed},
               {"n_entities", spec.n_entities},
               {"facts_per_entity", spec.facts_per_entity},
               {"corruption_rate", spec.corruption_rate},
               {"unit_tokens", spec.unit_tokens}};
  j["spec"]["relations"] = nlohmann::json::array();
  for (const auto& r : spec.relations) {
    j["spec"]["relations"].push_back(
        {{"name", r.name}, {"pattern", r.pattern}, {"objects", r.objects}});
  }
  j["entities"] = entities;
  j["facts"] = nlohmann::json::array();
  for (const auto& f : facts) {
    j["facts"].push_back({f.subject, f.relation, f.object});
  }
  j["corruptions"] = nlohmann::json::array();
  for (const auto& c : corruptions) {
    j["corruptions"].push_back(
        {c.subject, c.relation, c.true_object, c.corrupt_object});
  }
  j["vocabulary"] = vocabulary();
  std::ofstream out(path);
  if (!out) throw IoError("cannot write world file: " + path);
  out << j.dump(2) << "\n";
}

World World::load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read world file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw IoError("malformed world JSON in " + path + ": " + e.what());
  }
  World w;
  const auto& s = j.at("spec");
  w.spec.seed = s.at("seed").get<uint64_t>();
  w.spec.n_entities = s.at("n_entities").get<int>();
  w.spec.facts_per_entity = s.at("facts_per_entity").get<int>();
  w.spec.corruption_rate = s.at("corruption_rate").get<double>();
  w.spec.unit_tokens = s.at("unit_tokens").get<int>();
  w.spec.relations.clear();
  for (const auto& r : s.at("relations")) {
    RelationSpec rs;
    rs.name = r.at("name").get<std::string>();
    rs.pattern = r.at("pattern").get<std::vector<std::string>>();
    rs.objects = r.at("objects").get<std::vector<std::string>>();
    w.spec.relations.push_back(std::move(rs));
  }
  w.entities = j.at("entities").get<std::vector<std::string>>();
  for (const auto& f : j.at("facts")) {
    w.facts.push_back(Fact{f[0].get<std::string>(), f[1].get<std::string>(),
                           f[2].get<std::string>()});
  }
  for (const auto& c : j.at("corruptions")) {
    w.corruptions.push_back(Corruption{c[0].get<std::string>(),
                                       c[1].get<std::string>(),
                                       c[2].get<std::string>(),
                                       c[3].get<std::string>()});
  }
  return w;
}

}  // namespace wmgen
