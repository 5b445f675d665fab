#include "wmgen/factcheck.hpp"

#include <set>

#include "wmgen/errors.hpp"
#include "wmgen/tokenizer.hpp"

namespace wmgen {

const char* to_string(VerdictStatus s) {
  switch (s) {
    case VerdictStatus::supported: return "supported";
    case VerdictStatus::unsupported: return "unsupported";
    default: return "unverifiable";
  }
}

namespace {

bool is_terminator_word(const std::string& w) {
  return w == "." || w == "!" || w == "?";
}

// Matches clause words against a relation pattern (terminator stripped from
// both sides). Returns (subject, object) on success.
bool match_pattern(const std::vector<std::string>& clause,
                   const std::vector<std::string>& pattern_in,
                   std::string* subject, std::string* object) {
  std::vector<std::string> pattern = pattern_in;
  while (!pattern.empty() && is_terminator_word(pattern.back())) pattern.pop_back();
  if (clause.size() != pattern.size()) return false;
  std::string s, o;
  for (size_t i = 0; i < pattern.size(); ++i) {
    if (pattern[i] == "<S>") {
      s = clause[i];
    } else if (pattern[i] == "<O>") {
      o = clause[i];
    } else if (pattern[i] != clause[i]) {
      return false;
    }
  }
  if (s.empty() || o.empty()) return false;
  *subject = s;
  *object = o;
  return true;
}

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

}  // namespace

std::vector<Claim> extract_claims(const std::string& sentence,
                                  const World& world) {
  auto words = Tokenizer::split_words(sentence);
  while (!words.empty() && is_terminator_word(words.back())) words.pop_back();

  std::vector<std::vector<std::string>> clauses;
  std::vector<std::string> current;
  for (const auto& w : words) {
    if (w == "and") {
      if (!current.empty()) clauses.push_back(std::move(current));
      current = {};
    } else {
      current.push_back(w);
    }
  }
  if (!current.empty()) clauses.push_back(std::move(current));

  std::vector<Claim> claims;
  for (size_t ci = 0; ci < clauses.size(); ++ci) {
    for (const auto& r : world.spec.relations) {
      std::string s, o;
      if (match_pattern(clauses[ci], r.pattern, &s, &o)) {
        Claim c;
        c.text = join_words(clauses[ci]);
        c.subject = s;
        c.relation = r.name;
        c.object = o;
        c.clause_index = static_cast<int>(ci);
        claims.push_back(std::move(c));
        break;
      }
    }
  }
  return claims;
}

Verdict verify(const Claim& claim, const World& world) {
  if (claim.subject.empty() || claim.relation.empty() || claim.object.empty()) {
    throw ContractViolation("verify requires a complete claim triple");
  }
  Verdict v;
  v.claim = claim;
  const Fact* fact = world.find_fact(claim.subject, claim.relation);
  if (!fact) {
    v.status = VerdictStatus::unverifiable;
    return v;
  }
  v.evidence.push_back(world.passage_for(*fact));
  v.status = (fact->object == claim.object) ? VerdictStatus::supported
                                            : VerdictStatus::unsupported;
  return v;
}

std::vector<std::string> render_feedback(std::span<const Verdict> verdicts,
                                         const FeedbackForm& form) {
  if (verdicts.empty()) {
    throw ContractViolation("render_feedback requires at least one verdict");
  }
  std::vector<std::string> texts;
  std::set<std::string> seen_passages;
  for (const auto& v : verdicts) {
    const bool want =
        (v.status == VerdictStatus::unsupported && form.include_refuting) ||
        (v.status == VerdictStatus::supported && form.include_supporting);
    if (!want) continue;
    std::string unit_text;
    for (const auto& p : v.evidence) {
      if (!seen_passages.insert(p.id).second) continue;
      if (!unit_text.empty()) unit_text += '\n';
      unit_text += p.text;
    }
    if (!unit_text.empty()) texts.push_back(std::move(unit_text));
  }
  if (form.include_instruction) {
    std::string inst;
    int n = 0;
    for (const auto& v : verdicts) {
      if (v.status != VerdictStatus::unsupported) continue;
      inst += " (" + std::to_string(++n) + ") " + v.claim.text;
    }
    if (n > 0) {
      texts.push_back(
          "Please refrain from including the following imprecise statements:" +
          inst);
    }
  }
  return texts;
}

}  // namespace wmgen
