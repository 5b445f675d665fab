#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "wmgen/errors.hpp"
#include "wmgen/harness.hpp"
#include "wmgen/rng.hpp"
#include "wmgen/score.hpp"

using namespace wmgen;

namespace {

struct HarnessFixture {
  World world;
  Tokenizer tok;
  Datastore ds;
  TfIndex index;
  TransformerWeights weights;

  HarnessFixture() {
    WorldSpec spec;
    spec.seed = 19;
    spec.n_entities = 4;
    spec.facts_per_entity = 3;
    spec.corruption_rate = 0.3;
    spec.unit_tokens = 12;
    world = generate_world(spec);
    render_training_corpus(world, 0.3, 19);
    tok = Tokenizer::build(world.vocabulary());
    ds = render_corpus(world);
    index = TfIndex::build(ds);
    ModelConfig mc{tok.size(), 16, 2, 1, 32, 96, 4};
    weights = init_weights(mc);  // untrained; machinery tests only
  }

  BenchmarkInputs inputs() const {
    return BenchmarkInputs{&world, &weights, &tok, &ds, &index};
  }

  GenerationConfig base() const {
    GenerationConfig cfg;
    cfg.unit_tokens = 12;
    cfg.context_base = 12;
    cfg.sampling = SamplePolicy{SamplePolicy::Mode::greedy, 1.0};
    cfg.max_steps = 12;
    cfg.tau = 0.0;
    cfg.top_n = 2;
    cfg.k_r = 2;
    cfg.k_v = 1;
    return cfg;
  }
};

}  // namespace

TEST_CASE("factuality score arithmetic") {
  const auto s = make_score(10, 10, 20.0);
  CHECK(s.precision == 1.0);
  CHECK(s.recall == 0.5);
  CHECK(s.f1 == 2.0 / 3.0);

  const auto z = make_score(0, 5, 10.0);
  CHECK(z.precision == 0.0);
  CHECK(z.f1 == 0.0);

  const auto empty = make_score(0, 0, 10.0);
  CHECK(empty.precision == 0.0);
  CHECK(empty.recall == 0.0);
  CHECK(empty.f1 == 0.0);

  CHECK_THROWS_AS(make_score(1, 1, 0.5), ConfigError);
  CHECK_THROWS_AS(make_score(3, 2, 5.0), ContractViolation);
}

TEST_CASE("recall-cap monotonicity and f1 bounds (property)") {
  Rng rng(8);
  for (int i = 0; i < 300; ++i) {
    const int n = static_cast<int>(rng.below(30));
    const int s = n == 0 ? 0 : static_cast<int>(rng.below(static_cast<uint64_t>(n + 1)));
    const double c1 = 1.0 + rng.uniform01() * 30.0;
    const double c2 = c1 + rng.uniform01() * 30.0;
    const auto a = make_score(s, n, c1);
    const auto b = make_score(s, n, c2);
    CHECK(b.recall <= a.recall + 1e-15);  // recall non-increasing in C
    if (c1 <= s) CHECK(a.recall == 1.0);
    CHECK(a.f1 <= std::max(a.precision, a.recall) + 1e-15);
    if (a.precision > 0.0 && a.recall > 0.0) {
      CHECK(a.f1 == 2.0 * a.precision * a.recall / (a.precision + a.recall));
    }
  }
}

TEST_CASE("reference median caps") {
  CHECK(kReferenceMedianCaps == std::array<int, 4>{55, 49, 31, 43});
}

TEST_CASE("score_response: order invariance and triple dedup") {
  HarnessFixture f;
  const auto& fact = f.world.facts[0];
  const auto& fact2 = f.world.facts[1];
  const std::string s1 = f.world.passage_for(fact).text;
  const std::string s2 = f.world.passage_for(fact2).text;

  const auto ab = score_response(s1 + " " + s2, f.world, 3.0);
  const auto ba = score_response(s2 + " " + s1, f.world, 3.0);
  CHECK(ab.supported == ba.supported);
  CHECK(ab.extracted == ba.extracted);
  CHECK(ab.f1 == ba.f1);
  CHECK(ab.supported == 2);

  // Duplicate claims count once.
  const auto dup = score_response(s1 + " " + s1, f.world, 3.0);
  CHECK(dup.extracted == 1);
  CHECK(dup.supported == 1);

  // Unverifiable claims count in N but not S.
  const std::string bogus = "zzz was founded in 1203.";
  const auto mixed = score_response(s1 + " " + bogus, f.world, 3.0);
  CHECK(mixed.extracted == 2);
  CHECK(mixed.supported == 1);
}

TEST_CASE("system config diffs are exactly the intended fields") {
  GenerationConfig base;
  auto diff_keys = [&base](SystemKind k) {
    return config_diff(base, system_config(k, base));
  };
  CHECK(diff_keys(SystemKind::ewe_full).empty());
  CHECK(diff_keys(SystemKind::ewe_no_factcheck) ==
        std::vector<std::string>{"verification.mode"});
  CHECK(diff_keys(SystemKind::ewe_no_retrieval) ==
        std::vector<std::string>{"retrieval.mode"});
  auto rag = diff_keys(SystemKind::rag_k1);
  std::sort(rag.begin(), rag.end());
  CHECK(rag == std::vector<std::string>{"memory.k_r", "retrieval.at_start_only",
                                        "verification.mode"});
  auto plain = diff_keys(SystemKind::plain);
  std::sort(plain.begin(), plain.end());
  CHECK(plain == std::vector<std::string>{"retrieval.mode", "verification.mode"});
}

TEST_CASE("run_benchmark: row counts, ordering, and report io") {
  HarnessFixture f;
  const auto prompts = render_prompts(f.world, 3);
  const std::vector<uint64_t> seeds = {1, 2};
  const std::vector<SystemKind> systems = {SystemKind::plain, SystemKind::ewe_full};
  const auto report = run_benchmark(f.inputs(), systems, prompts, seeds, f.base());
  CHECK(report.rows.size() == systems.size() * prompts.size() * seeds.size());
  CHECK(report.means.count("plain") == 1);
  CHECK(report.means.count("ewe_full") == 1);
  CHECK(report.cap >= 1.0);
  for (size_t i = 1; i < report.rows.size(); ++i) {
    const auto& a = report.rows[i - 1];
    const auto& b = report.rows[i];
    CHECK(std::tie(a.system, a.prompt_index, a.seed) <=
          std::tie(b.system, b.prompt_index, b.seed));
  }

  const auto path = std::filesystem::temp_directory_path() / "wmgen_report_test.jsonl";
  report.save_jsonl(path.string());
  std::ifstream in(path);
  std::string line;
  REQUIRE(std::getline(in, line));
  const auto header = nlohmann::json::parse(line);
  CHECK(header.at("type") == "header");
  CHECK(header.contains("config"));
  CHECK(header.at("claims_deduplicated") == true);
  int rows = 0, means = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    if (j.at("type") == "row") ++rows;
    if (j.at("type") == "means") ++means;
  }
  CHECK(rows == static_cast<int>(report.rows.size()));
  CHECK(means == 2);
  std::filesystem::remove(path);
}

TEST_CASE("run_benchmark: identical sampling seeds across systems") {
  HarnessFixture f;
  const auto prompts = render_prompts(f.world, 2);
  GenerationConfig base = f.base();
  base.sampling = SamplePolicy{SamplePolicy::Mode::temperature, 0.9};
  const auto report = run_benchmark(
      f.inputs(), {SystemKind::plain, SystemKind::ewe_no_retrieval}, prompts,
      {5}, base);
  // ewe_no_retrieval with empty pools decodes exactly like plain when the
  // same per-(prompt, seed) stream is used and verification never fires on
  // supported-only sentences... they may differ if verification excises.
  // At minimum the plain rows must be reproducible run to run.
  const auto report2 = run_benchmark(f.inputs(), {SystemKind::plain}, prompts,
                                     {5}, base);
  std::vector<const RunRow*> plain1, plain2;
  for (const auto& r : report.rows) {
    if (r.system == "plain") plain1.push_back(&r);
  }
  for (const auto& r : report2.rows) {
    if (r.system == "plain") plain2.push_back(&r);
  }
  REQUIRE(plain1.size() == plain2.size());
  for (size_t i = 0; i < plain1.size(); ++i) {
    CHECK(plain1[i]->response == plain2[i]->response);
  }
}

TEST_CASE("run_benchmark: missing weights is a setup error") {
  HarnessFixture f;
  BenchmarkInputs in = f.inputs();
  in.weights = nullptr;
  const auto prompts = render_prompts(f.world, 1);
  CHECK_THROWS_AS(
      run_benchmark(in, {SystemKind::plain}, prompts, {1}, f.base()),
      SetupError);
}

TEST_CASE("run_ablation: grid size, csv shape, and unit-length pinning") {
  HarnessFixture f;
  const auto prompts = render_prompts(f.world, 2);
  AblationGrid grid;
  grid.axis = AblationAxis::unit_count;
  grid.values = {1, 2, 4, 8};
  grid.seeds = {1, 2, 3};
  const auto report = run_ablation(f.inputs(), grid, prompts, f.base());
  CHECK(report.rows.size() == 12);

  const auto path = std::filesystem::temp_directory_path() / "wmgen_ablation_test.csv";
  report.save_csv(path.string());
  std::ifstream in(path);
  std::string line;
  int comments = 0, data = 0;
  bool header_seen = false;
  size_t n_cols = 0;
  while (std::getline(in, line)) {
    if (line.rfind("#", 0) == 0) {
      ++comments;
      continue;
    }
    std::stringstream ss(line);
    std::string cell;
    size_t cols = 0;
    while (std::getline(ss, cell, ',')) ++cols;
    if (!header_seen) {
      header_seen = true;
      n_cols = cols;
      CHECK(line.rfind("axis,value,seed", 0) == 0);
      continue;
    }
    CHECK(cols == n_cols);
    ++data;
  }
  CHECK(comments == 2);
  CHECK(data == 12);
  std::filesystem::remove(path);

  // unit_length sweeps only the truncation cap, not the prompt offset.
  GenerationConfig swept = apply_axis(f.base(), AblationAxis::unit_length, 4);
  CHECK(swept.unit_tokens == 4);
  CHECK(swept.effective_context_base() == f.base().effective_context_base());
}

TEST_CASE("datastore_fraction 0 equals ewe_no_retrieval") {
  HarnessFixture f;
  const auto empty = subsample_datastore(f.ds, 0.0, 1);
  CHECK(empty.passages.empty());
  const auto empty_index = TfIndex::build(empty);

  GenerationConfig base = f.base();
  const auto prompts = render_prompts(f.world, 2);
  for (const auto& p : prompts) {
    GenerationConfig cfg = base;
    cfg.seed = 11;
    PrecomputeStore store;
    TransformerDecodeModel m1(f.weights, f.tok, AggregationConfig{true}, &store);
    FeedbackContext fb1{&empty, &empty_index, &f.world};
    const auto with_empty = generate(m1, f.tok, fb1, p.text, cfg);

    GenerationConfig no_retrieval = system_config(SystemKind::ewe_no_retrieval, base);
    no_retrieval.seed = 11;
    PrecomputeStore store2;
    TransformerDecodeModel m2(f.weights, f.tok, AggregationConfig{true}, &store2);
    FeedbackContext fb2{&f.ds, &f.index, &f.world};
    const auto without = generate(m2, f.tok, fb2, p.text, no_retrieval);

    CHECK(with_empty.response == without.response);
    CHECK(with_empty.stats.accepted_passages == 0);
  }
}

TEST_CASE("subsample_datastore keeps order and honors the fraction") {
  HarnessFixture f;
  const auto half = subsample_datastore(f.ds, 0.5, 3);
  CHECK(half.passages.size() ==
        static_cast<size_t>(std::ceil(0.5 * f.ds.passages.size())));
  // Original relative order kept.
  size_t cursor = 0;
  for (const auto& p : half.passages) {
    while (cursor < f.ds.passages.size() && f.ds.passages[cursor].id != p.id) ++cursor;
    CHECK(cursor < f.ds.passages.size());
  }
  const auto all = subsample_datastore(f.ds, 1.0, 3);
  CHECK(all.passages.size() == f.ds.passages.size());
}
