// Rule-based claim extraction over the world's closed sentence grammar, an
// oracle verifier against the world's fact set, and feedback rendering with
// configurable forms (refuting passages, supporting passages, instruction).
#pragma once

#include <span>
#include <string>
#include <vector>

#include "wmgen/retrieval.hpp"
#include "wmgen/toyworld.hpp"

namespace wmgen {

struct Claim {
  std::string text;  // clause without trailing terminator
  std::string subject, relation, object;
  int clause_index = 0;

  bool same_triple(const Claim& o) const {
    return subject == o.subject && relation == o.relation && object == o.object;
  }
};

enum class VerdictStatus { supported, unsupported, unverifiable };

const char* to_string(VerdictStatus s);

struct Verdict {
  Claim claim;
  VerdictStatus status = VerdictStatus::unverifiable;
  std::vector<Passage> evidence;
};

struct FeedbackForm {
  bool include_refuting = true;     // passages refuting unsupported claims
  bool include_supporting = true;   // passages corroborating supported claims
  bool include_instruction = false; // "Please refrain from..." template
};

// Splits the sentence on top-level "and" and matches each clause against the
// world's relation patterns; non-matching clauses yield nothing.
std::vector<Claim> extract_claims(const std::string& sentence,
                                  const World& world);

// supported iff the triple is a world fact; unsupported iff the world holds
// a different object for (subject, relation), with the true passage as
// evidence; unverifiable otherwise.
Verdict verify(const Claim& claim, const World& world);

// One text per claim's evidence (multiple passages joined by newlines),
// deduplicated by passage id across the bundle, plus the optional
// instruction text enumerating unsupported claims.
std::vector<std::string> render_feedback(std::span<const Verdict> verdicts,
                                         const FeedbackForm& form);

}  // namespace wmgen
