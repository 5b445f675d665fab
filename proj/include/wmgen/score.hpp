// Claim-level factuality scoring: precision over extracted claims, recall
// against a fixed cap, harmonic-mean F1. Duplicate triples within one
// response are collapsed before counting.
#pragma once

#include <array>
#include <string>

#include "wmgen/toyworld.hpp"

namespace wmgen {

struct FactualityScore {
  int supported = 0;   // S
  int extracted = 0;   // N (deduplicated; unverifiable claims count here)
  double cap = 1.0;    // C
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Arithmetic per the conventions: P = S/N (0 when N = 0), R = min(1, S/C),
// F1 = 2PR/(P+R) (0 when either is 0).
FactualityScore make_score(int supported, int extracted, double cap);

FactualityScore score_response(const std::string& response, const World& world,
                               double cap);

// Median extracted-claim counts reported for four common long-form
// factuality benchmarks (LongFact, FAVA, AlpacaFact, Biography). Reference
// constants only; the toy harness derives its cap from the plain baseline.
inline constexpr std::array<int, 4> kReferenceMedianCaps{55, 49, 31, 43};

}  // namespace wmgen
