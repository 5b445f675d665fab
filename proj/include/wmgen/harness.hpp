// Benchmark and ablation harness: runs system variants over identical
// prompts/seeds/weights, scores claim-level factuality against the world,
// and emits machine-readable reports (JSONL benchmark, CSV ablations).
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "wmgen/orchestrator.hpp"
#include "wmgen/run_config.hpp"
#include "wmgen/score.hpp"
#include "wmgen/toyworld.hpp"
#include "json.hpp"

namespace wmgen {

enum class SystemKind { plain, rag_k1, ewe_full, ewe_no_factcheck, ewe_no_retrieval };

const char* to_string(SystemKind s);
SystemKind system_from_string(const std::string& s);

// Derives a system's config from the full-system base by switching off the
// intended mechanisms; the diffs are asserted programmatically in tests.
GenerationConfig system_config(SystemKind kind, GenerationConfig base);

struct BenchmarkInputs {
  const World* world = nullptr;
  const TransformerWeights* weights = nullptr;
  const Tokenizer* tokenizer = nullptr;
  const Datastore* datastore = nullptr;
  const TfIndex* index = nullptr;
};

struct RunRow {
  std::string system;
  int prompt_index = 0;
  uint64_t seed = 0;
  std::string response;
  FactualityScore score;
  int decode_steps = 0;
  int accepted_passages = 0;
  int backtracks = 0;
  double wall_ms = 0.0;
};

struct SystemMeans {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct BenchmarkReport {
  nlohmann::json header;
  double cap = 1.0;
  std::vector<RunRow> rows;  // ordered by (system, prompt, seed)
  std::map<std::string, SystemMeans> means;

  void save_jsonl(const std::string& path) const;
};

// Identical prompts, seeds, and weights across systems; the recall cap is
// the median deduplicated-claim count of the plain baseline's responses.
BenchmarkReport run_benchmark(const BenchmarkInputs& in,
                              const std::vector<SystemKind>& systems,
                              const std::vector<PromptCase>& prompts,
                              const std::vector<uint64_t>& seeds,
                              const GenerationConfig& base, int jobs = 1);

enum class AblationAxis {
  unit_count,
  unit_length,
  tau,
  t_r,
  t_v,
  entropy_threshold,
  min_prob_threshold,
  datastore_fraction,
};

const char* to_string(AblationAxis a);
AblationAxis axis_from_string(const std::string& s);

struct AblationGrid {
  AblationAxis axis = AblationAxis::unit_count;
  std::vector<double> values;
  std::vector<uint64_t> seeds;
};

GenerationConfig apply_axis(GenerationConfig base, AblationAxis axis,
                            double value);

struct AblationRow {
  double value = 0.0;
  uint64_t seed = 0;
  FactualityScore score;
  int decode_steps = 0;
  int accepted_passages = 0;
  double wall_ms = 0.0;
};

struct AblationReport {
  nlohmann::json header;
  std::string axis;
  std::vector<AblationRow> rows;  // ordered by (value, seed)

  void save_csv(const std::string& path) const;
};

// One row per (value, seed), all prompts aggregated per row (mean P/R/F1,
// summed counters). The full system runs at every grid point.
AblationReport run_ablation(const BenchmarkInputs& in, const AblationGrid& grid,
                            const std::vector<PromptCase>& prompts,
                            const GenerationConfig& base, int jobs = 1);

// Seeded subsample keeping ceil(fraction * n) passages in original order.
Datastore subsample_datastore(const Datastore& ds, double fraction,
                              uint64_t seed);

}  // namespace wmgen
