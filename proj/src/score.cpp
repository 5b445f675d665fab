#include "wmgen/score.hpp"

#include <algorithm>
#include <set>
#include <tuple>

#include "wmgen/errors.hpp"
#include "wmgen/factcheck.hpp"
#include "wmgen/orchestrator.hpp"
#include "wmgen/tokenizer.hpp"

namespace wmgen {

FactualityScore make_score(int supported, int extracted, double cap) {
  if (cap < 1.0) throw ConfigError("recall cap must be >= 1");
  if (supported < 0 || extracted < 0 || supported > extracted) {
    throw ContractViolation("invalid supported/extracted counts");
  }
  FactualityScore s;
  s.supported = supported;
  s.extracted = extracted;
  s.cap = cap;
  s.precision = extracted > 0
                    ? static_cast<double>(supported) / static_cast<double>(extracted)
                    : 0.0;
  s.recall = std::min(1.0, static_cast<double>(supported) / cap);
  s.f1 = (s.precision > 0.0 && s.recall > 0.0)
             ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
             : 0.0;
  return s;
}

FactualityScore score_response(const std::string& response, const World& world,
                               double cap) {
  // Split into sentences with the same boundary rule the engine uses.
  std::vector<std::string> sentences;
  std::string current;
  for (const auto& w : Tokenizer::split_words(response)) {
    if (!current.empty() && w != "." && w != "!" && w != "?" && w != ",") {
      current += ' ';
    }
    current += w;
    if ((w == "." || w == "!" || w == "?") && detect_sentence_end(current)) {
      sentences.push_back(current);
      current.clear();
    }
  }
  if (!current.empty()) sentences.push_back(current);

  std::set<std::tuple<std::string, std::string, std::string>> triples;
  int supported = 0;
  for (const auto& s : sentences) {
    for (const auto& c : extract_claims(s, world)) {
      if (!triples.emplace(c.subject, c.relation, c.object).second) continue;
      if (verify(c, world).status == VerdictStatus::supported) ++supported;
    }
  }
  return make_score(supported, static_cast<int>(triples.size()), cap);
}

}  // namespace wmgen
