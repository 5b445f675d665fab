#include "wmgen/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "wmgen/errors.hpp"
#include "wmgen/rng.hpp"
#include "wmgen/version.hpp"

namespace wmgen {

const char* to_string(SystemKind s) {
  switch (s) {
    case SystemKind::plain: return "plain";
    case SystemKind::rag_k1: return "rag_k1";
    case SystemKind::ewe_full: return "ewe_full";
    case SystemKind::ewe_no_factcheck: return "ewe_no_factcheck";
    default: return "ewe_no_retrieval";
  }
}

SystemKind system_from_string(const std::string& s) {
  if (s == "plain") return SystemKind::plain;
  if (s == "rag_k1") return SystemKind::rag_k1;
  if (s == "ewe_full") return SystemKind::ewe_full;
  if (s == "ewe_no_factcheck") return SystemKind::ewe_no_factcheck;
  if (s == "ewe_no_retrieval") return SystemKind::ewe_no_retrieval;
  throw ConfigError("unknown system: " + s);
}

GenerationConfig system_config(SystemKind kind, GenerationConfig base) {
  switch (kind) {
    case SystemKind::ewe_full:
      return base;
    case SystemKind::ewe_no_factcheck:
      base.verification.mode = TriggerPolicy::Mode::off;
      return base;
    case SystemKind::ewe_no_retrieval:
      base.retrieval.mode = TriggerPolicy::Mode::off;
      return base;
    case SystemKind::rag_k1:
      base.retrieval_at_start_only = true;
      base.k_r = 1;
      base.verification.mode = TriggerPolicy::Mode::off;
      return base;
    case SystemKind::plain:
      base.retrieval.mode = TriggerPolicy::Mode::off;
      base.verification.mode = TriggerPolicy::Mode::off;
      return base;
  }
  return base;
}

const char* to_string(AblationAxis a) {
  switch (a) {
    case AblationAxis::unit_count: return "unit_count";
    case AblationAxis::unit_length: return "unit_length";
    case AblationAxis::tau: return "tau";
    case AblationAxis::t_r: return "t_r";
    case AblationAxis::t_v: return "t_v";
    case AblationAxis::entropy_threshold: return "entropy_threshold";
    case AblationAxis::min_prob_threshold: return "min_prob_threshold";
    default: return "datastore_fraction";
  }
}

AblationAxis axis_from_string(const std::string& s) {
  if (s == "unit_count") return AblationAxis::unit_count;
  if (s == "unit_length") return AblationAxis::unit_length;
  if (s == "tau") return AblationAxis::tau;
  if (s == "t_r") return AblationAxis::t_r;
  if (s == "t_v") return AblationAxis::t_v;
  if (s == "entropy_threshold") return AblationAxis::entropy_threshold;
  if (s == "min_prob_threshold") return AblationAxis::min_prob_threshold;
  if (s == "datastore_fraction") return AblationAxis::datastore_fraction;
  throw ConfigError("unknown ablation axis: " + s);
}

GenerationConfig apply_axis(GenerationConfig base, AblationAxis axis,
                            double value) {
  switch (axis) {
    case AblationAxis::unit_count:
      base.k_r = static_cast<int>(value);
      base.k_v = static_cast<int>(value);
      break;
    case AblationAxis::unit_length:
      // Pin the prompt offset so the sweep changes only unit truncation.
      base.context_base = base.effective_context_base();
      base.unit_tokens = static_cast<int>(value);
      break;
    case AblationAxis::tau:
      base.tau = value;
      break;
    case AblationAxis::t_r:
      base.retrieval = TriggerPolicy::fixed(static_cast<int>(value));
      break;
    case AblationAxis::t_v:
      base.verification = TriggerPolicy::fixed(static_cast<int>(value));
      break;
    case AblationAxis::entropy_threshold:
      base.verification = TriggerPolicy::entropy(value);
      break;
    case AblationAxis::min_prob_threshold:
      base.verification = TriggerPolicy::min_prob(value);
      break;
    case AblationAxis::datastore_fraction:
      base.datastore_fraction = value;
      break;
  }
  return base;
}

Datastore subsample_datastore(const Datastore& ds, double fraction,
                              uint64_t seed) {
  if (fraction < 0.0 || fraction > 1.0) {
    throw ConfigError("datastore fraction must be in [0, 1]");
  }
  const size_t keep = static_cast<size_t>(
      std::ceil(fraction * static_cast<double>(ds.passages.size())));
  std::vector<size_t> order(ds.passages.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(mix_seed(seed, 0x44535253ULL));
  rng.shuffle(order);
  order.resize(keep);
  std::sort(order.begin(), order.end());
  Datastore out;
  out.passages.reserve(keep);
  for (size_t i : order) out.passages.push_back(ds.passages[i]);
  return out;
}

namespace {

void check_inputs(const BenchmarkInputs& in) {
  if (!in.weights) throw SetupError("benchmark requires trained weights");
  if (!in.world) throw SetupError("benchmark requires a world");
  if (!in.tokenizer) throw SetupError("benchmark requires a tokenizer");
  if (!in.datastore || !in.index) {
    throw SetupError("benchmark requires a datastore and index");
  }
}

struct RawRun {
  std::string response;
  GenerationStats stats;
  double wall_ms = 0.0;
};

RawRun one_run(const BenchmarkInputs& in, const PromptCase& prompt,
               GenerationConfig cfg, const Datastore* ds, const TfIndex* idx) {
  const auto t0 = std::chrono::steady_clock::now();
  PrecomputeStore store;
  TransformerDecodeModel model(*in.weights, *in.tokenizer,
                               AggregationConfig{cfg.include_context_branch},
                               cfg.use_precompute ? &store : nullptr);
  FeedbackContext fb{ds, idx, in.world};
  auto result = generate(model, *in.tokenizer, fb, prompt.text, cfg);
  RawRun run;
  run.response = std::move(result.response);
  run.stats = result.stats;
  run.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
  return run;
}

double median_cap(std::vector<int> counts) {
  if (counts.empty()) return 1.0;
  std::sort(counts.begin(), counts.end());
  const size_t n = counts.size();
  double med;
  if (n % 2 == 1) {
    med = counts[n / 2];
  } else {
    med = (counts[n / 2 - 1] + counts[n / 2]) / 2.0;
  }
  return std::max(1.0, med);
}

}  // namespace

BenchmarkReport run_benchmark(const BenchmarkInputs& in,
                              const std::vector<SystemKind>& systems,
                              const std::vector<PromptCase>& prompts,
                              const std::vector<uint64_t>& seeds,
                              const GenerationConfig& base, int jobs) {
  check_inputs(in);
  if (systems.empty() || prompts.empty() || seeds.empty()) {
    throw ConfigError("benchmark needs systems, prompts, and seeds");
  }

  struct Job {
    SystemKind system;
    int prompt_index;
    uint64_t seed;
    bool reported;  // plain runs may exist only for the cap
  };
  std::vector<Job> jobs_list;
  const bool has_plain =
      std::find(systems.begin(), systems.end(), SystemKind::plain) != systems.end();
  for (const auto s : systems) {
    for (size_t p = 0; p < prompts.size(); ++p) {
      for (const auto sd : seeds) {
        jobs_list.push_back(Job{s, static_cast<int>(p), sd, true});
      }
    }
  }
  if (!has_plain) {
    for (size_t p = 0; p < prompts.size(); ++p) {
      for (const auto sd : seeds) {
        jobs_list.push_back(Job{SystemKind::plain, static_cast<int>(p), sd, false});
      }
    }
  }

  std::vector<RawRun> raw(jobs_list.size());
  const int64_t n_jobs = static_cast<int64_t>(jobs_list.size());
#pragma omp parallel for if (jobs > 1) num_threads(jobs) schedule(dynamic)
  for (int64_t i = 0; i < n_jobs; ++i) {
    const Job& job = jobs_list[static_cast<size_t>(i)];
    GenerationConfig cfg = system_config(job.system, base);
    cfg.seed = mix_seed(job.seed, static_cast<uint64_t>(job.prompt_index));
    raw[static_cast<size_t>(i)] =
        one_run(in, prompts[static_cast<size_t>(job.prompt_index)], cfg,
                in.datastore, in.index);
  }

  // Cap: median deduplicated-claim count over the plain baseline.
  std::vector<int> plain_counts;
  for (size_t i = 0; i < jobs_list.size(); ++i) {
    if (jobs_list[i].system != SystemKind::plain) continue;
    plain_counts.push_back(
        score_response(raw[i].response, *in.world, 1.0).extracted);
  }
  const double cap = median_cap(std::move(plain_counts));

  BenchmarkReport report;
  report.cap = cap;
  report.header = {{"tool", "wmgen"},
                   {"version", std::string(kVersion)},
                   {"type", "header"},
                   {"cap", cap},
                   {"n_prompts", prompts.size()},
                   {"seeds", seeds},
                   {"claims_deduplicated", true},
                   {"config", config_to_json(base)}};
  for (size_t i = 0; i < jobs_list.size(); ++i) {
    if (!jobs_list[i].reported) continue;
    const Job& job = jobs_list[i];
    RunRow row;
    row.system = to_string(job.system);
    row.prompt_index = job.prompt_index;
    row.seed = job.seed;
    row.response = raw[i].response;
    row.score = score_response(raw[i].response, *in.world, cap);
    row.decode_steps = raw[i].stats.decode_steps;
    row.accepted_passages = raw[i].stats.accepted_passages;
    row.backtracks = raw[i].stats.backtracks;
    row.wall_ms = raw[i].wall_ms;
    report.rows.push_back(std::move(row));
  }
  std::stable_sort(report.rows.begin(), report.rows.end(),
                   [](const RunRow& a, const RunRow& b) {
                     if (a.system != b.system) return a.system < b.system;
                     if (a.prompt_index != b.prompt_index) {
                       return a.prompt_index < b.prompt_index;
                     }
                     return a.seed < b.seed;
                   });

  std::map<std::string, std::vector<const RunRow*>> by_system;
  for (const auto& r : report.rows) by_system[r.system].push_back(&r);
  for (const auto& [name, rows] : by_system) {
    SystemMeans m;
    for (const auto* r : rows) {
      m.precision += r->score.precision;
      m.recall += r->score.recall;
      m.f1 += r->score.f1;
    }
    const double n = static_cast<double>(rows.size());
    m.precision /= n;
    m.recall /= n;
    m.f1 /= n;
    report.means[name] = m;
  }
  return report;
}

void BenchmarkReport::save_jsonl(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write benchmark report: " + path);
  out << header.dump() << "\n";
  for (const auto& r : rows) {
    nlohmann::json j{{"type", "row"},
                     {"system", r.system},
                     {"prompt_index", r.prompt_index},
                     {"seed", r.seed},
                     {"response", r.response},
                     {"supported", r.score.supported},
                     {"extracted", r.score.extracted},
                     {"cap", r.score.cap},
                     {"precision", r.score.precision},
                     {"recall", r.score.recall},
                     {"f1", r.score.f1},
                     {"decode_steps", r.decode_steps},
                     {"accepted_passages", r.accepted_passages},
                     {"backtracks", r.backtracks},
                     {"wall_ms", r.wall_ms}};
    out << j.dump() << "\n";
  }
  for (const auto& [name, m] : means) {
    nlohmann::json j{{"type", "means"},
                     {"system", name},
                     {"precision", m.precision},
                     {"recall", m.recall},
                     {"f1", m.f1}};
    out << j.dump() << "\n";
  }
}

AblationReport run_ablation(const BenchmarkInputs& in, const AblationGrid& grid,
                            const std::vector<PromptCase>& prompts,
                            const GenerationConfig& base, int jobs) {
  check_inputs(in);
  if (grid.values.empty() || grid.seeds.empty()) {
    throw ConfigError("ablation grid needs values and seeds");
  }

  // Cap from the plain baseline at the base config.
  std::vector<int> plain_counts;
  {
    const GenerationConfig plain_cfg = system_config(SystemKind::plain, base);
    std::vector<RawRun> raw(prompts.size() * grid.seeds.size());
    const int64_t n = static_cast<int64_t>(raw.size());
#pragma omp parallel for if (jobs > 1) num_threads(jobs) schedule(dynamic)
    for (int64_t i = 0; i < n; ++i) {
      const size_t p = static_cast<size_t>(i) / grid.seeds.size();
      const size_t s = static_cast<size_t>(i) % grid.seeds.size();
      GenerationConfig cfg = plain_cfg;
      cfg.seed = mix_seed(grid.seeds[s], static_cast<uint64_t>(p));
      raw[static_cast<size_t>(i)] =
          one_run(in, prompts[p], cfg, in.datastore, in.index);
    }
    for (const auto& r : raw) {
      plain_counts.push_back(score_response(r.response, *in.world, 1.0).extracted);
    }
  }
  const double cap = median_cap(std::move(plain_counts));

  AblationReport report;
  report.axis = to_string(grid.axis);
  report.header = {{"tool", "wmgen"},
                   {"version", std::string(kVersion)},
                   {"axis", report.axis},
                   {"cap", cap},
                   {"n_prompts", prompts.size()},
                   {"config", config_to_json(base)}};

  for (const double value : grid.values) {
    GenerationConfig cfg_v = apply_axis(base, grid.axis, value);
    // Datastore subsampling is performed here, not inside the engine.
    Datastore sub;
    TfIndex sub_index;
    const Datastore* ds = in.datastore;
    const TfIndex* idx = in.index;
    if (grid.axis == AblationAxis::datastore_fraction) {
      sub = subsample_datastore(*in.datastore, value, base.seed);
      sub_index = TfIndex::build(sub);
      ds = &sub;
      idx = &sub_index;
    }
    for (const uint64_t seed : grid.seeds) {
      std::vector<RawRun> raw(prompts.size());
      const int64_t n = static_cast<int64_t>(prompts.size());
#pragma omp parallel for if (jobs > 1) num_threads(jobs) schedule(dynamic)
      for (int64_t p = 0; p < n; ++p) {
        GenerationConfig cfg = cfg_v;
        cfg.seed = mix_seed(seed, static_cast<uint64_t>(p));
        raw[static_cast<size_t>(p)] =
            one_run(in, prompts[static_cast<size_t>(p)], cfg, ds, idx);
      }
      AblationRow row;
      row.value = value;
      row.seed = seed;
      double sp = 0.0, sr = 0.0, sf = 0.0;
      int supported = 0, extracted = 0;
      for (const auto& r : raw) {
        const auto sc = score_response(r.response, *in.world, cap);
        sp += sc.precision;
        sr += sc.recall;
        sf += sc.f1;
        supported += sc.supported;
        extracted += sc.extracted;
        row.decode_steps += r.stats.decode_steps;
        row.accepted_passages += r.stats.accepted_passages;
        row.wall_ms += r.wall_ms;
      }
      const double np = static_cast<double>(prompts.size());
      row.score = FactualityScore{};
      row.score.supported = supported;
      row.score.extracted = extracted;
      row.score.cap = cap;
      row.score.precision = sp / np;
      row.score.recall = sr / np;
      row.score.f1 = sf / np;
      report.rows.push_back(row);
    }
  }
  return report;
}

void AblationReport::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write ablation report: " + path);
  out << "# wmgen " << kVersion << "\n";
  out << "# " << header.dump() << "\n";
  out << "axis,value,seed,precision,recall,f1,supported,extracted,cap,"
         "decode_steps,accepted_passages,wall_ms\n";
  for (const auto& r : rows) {
    out << axis << ',' << r.value << ',' << r.seed << ',' << r.score.precision
        << ',' << r.score.recall << ',' << r.score.f1 << ','
        << r.score.supported << ',' << r.score.extracted << ',' << r.score.cap
        << ',' << r.decode_steps << ',' << r.accepted_passages << ','
        << r.wall_ms << "\n";
  }
}

}  // namespace wmgen
