// wmgen command line: world generation, datastore ingestion, toy-model
// training, single-prompt generation with event tracing, benchmark and
// ablation runs, and event-log inspection.
//
// Exit codes: 0 success, 1 usage/config error, 2 runtime error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "wmgen/errors.hpp"
#include "wmgen/harness.hpp"
#include "wmgen/orchestrator.hpp"
#include "wmgen/ref.hpp"
#include "wmgen/run_config.hpp"
#include "wmgen/score.hpp"
#include "wmgen/toyworld.hpp"
#include "wmgen/train.hpp"
#include "wmgen/version.hpp"

namespace fs = std::filesystem;
using namespace wmgen;

namespace {

std::string data_dir_default() {
  const char* env = std::getenv("WMGEN_DATA_DIR");
  return env ? env : ".";
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct GenerateFlags {
  std::string config_path;
  std::string weights_path, vocab_path, world_path, datastore_path, index_path;
  std::string precompute_dir;
  GenerationConfig cfg;
  bool greedy_flag = false;
  double temperature_flag = -1.0;
  int t_r = -1, t_v = -1;
  double entropy_r = -1.0, entropy_v = -1.0;
  double min_prob_r = -1.0, min_prob_v = -1.0;
  bool retrieval_off = false, verification_off = false;
  bool no_context_branch = false;
};

// Shared config options for generate/eval/ablate. Flag values override the
// config file, which overrides defaults.
void add_config_options(CLI::App* cmd, GenerateFlags& f) {
  cmd->add_option("--config", f.config_path, "flat-JSON config file");
  cmd->add_option("--k-r", f.cfg.k_r, "retrieval memory units");
  cmd->add_option("--k-v", f.cfg.k_v, "fact-check memory units");
  cmd->add_option("--unit-length", f.cfg.unit_tokens, "tokens per memory unit (M)");
  cmd->add_option("--context-base", f.cfg.context_base,
                  "prompt position offset (-1: same as unit length)");
  cmd->add_option("--tau", f.cfg.tau, "retrieval score threshold");
  cmd->add_option("--top-n", f.cfg.top_n, "passages per retrieval refresh");
  cmd->add_option("--fraction", f.cfg.datastore_fraction, "datastore fraction");
  cmd->add_option("--t-r", f.t_r, "retrieval interval (fixed trigger)");
  cmd->add_option("--t-v", f.t_v, "verification interval (fixed trigger)");
  cmd->add_option("--entropy-retrieval", f.entropy_r, "entropy trigger for retrieval");
  cmd->add_option("--entropy-verification", f.entropy_v, "entropy trigger for verification");
  cmd->add_option("--min-prob-retrieval", f.min_prob_r, "min-prob trigger for retrieval");
  cmd->add_option("--min-prob-verification", f.min_prob_v, "min-prob trigger for verification");
  cmd->add_flag("--no-retrieval", f.retrieval_off, "disable retrieval feedback");
  cmd->add_flag("--no-verification", f.verification_off, "disable fact-check feedback");
  cmd->add_flag("--retrieval-at-start-only", f.cfg.retrieval_at_start_only,
                "retrieve once before decoding");
  cmd->add_flag("--no-context-branch", f.no_context_branch,
                "drop the context-only attention branch");
  cmd->add_flag("--snug-context-base", f.cfg.snug_context_base,
                "place the prompt right after the first unit");
  cmd->add_flag("--greedy", f.greedy_flag, "greedy sampling");
  cmd->add_option("--temperature", f.temperature_flag, "temperature sampling");
  cmd->add_option("--seed", f.cfg.seed, "sampling seed");
  cmd->add_option("--max-steps", f.cfg.max_steps, "decode step budget");
  cmd->add_option("--r-max", f.cfg.r_max, "regeneration attempts per boundary");
  cmd->add_flag("--form-refuting,!--no-form-refuting", f.cfg.form.include_refuting,
                "include refuting evidence passages");
  cmd->add_flag("--form-supporting,!--no-form-supporting",
                f.cfg.form.include_supporting, "include supporting passages");
  cmd->add_flag("--form-instruction", f.cfg.form.include_instruction,
                "include the instruction template");
  cmd->add_flag("--precompute,!--no-precompute", f.cfg.use_precompute,
                "reuse cached unit encodings");
  cmd->add_option("--precompute-dir", f.precompute_dir,
                  "persist unit encodings in this directory");
  cmd->add_flag("--fail-open,!--fail-closed", f.cfg.fail_open,
                "continue when a feedback subsystem fails");
}

// Applies config file first (below flag precedence: CLI11 already wrote flag
// values into f.cfg fields, so only keys the user did not pass are loaded).
void finalize_config(CLI::App* cmd, GenerateFlags& f) {
  if (!f.config_path.empty()) {
    std::ifstream in(f.config_path);
    if (!in) throw ConfigError("cannot read config file: " + f.config_path);
    nlohmann::json file_json;
    try {
      in >> file_json;
    } catch (const std::exception& e) {
      throw ConfigError("malformed config JSON in " + f.config_path + ": " + e.what());
    }
    GenerationConfig from_file = config_from_json(file_json);
    GenerationConfig defaults;
    auto keep_flag_value = [&](const char* flag) {
      return cmd->count(flag) > 0;
    };
    // Start from the file config, then re-apply any explicit flags.
    GenerationConfig merged = from_file;
    if (keep_flag_value("--k-r")) merged.k_r = f.cfg.k_r;
    if (keep_flag_value("--k-v")) merged.k_v = f.cfg.k_v;
    if (keep_flag_value("--unit-length")) merged.unit_tokens = f.cfg.unit_tokens;
    if (keep_flag_value("--context-base")) merged.context_base = f.cfg.context_base;
    if (keep_flag_value("--tau")) merged.tau = f.cfg.tau;
    if (keep_flag_value("--top-n")) merged.top_n = f.cfg.top_n;
    if (keep_flag_value("--fraction")) merged.datastore_fraction = f.cfg.datastore_fraction;
    if (keep_flag_value("--retrieval-at-start-only")) {
      merged.retrieval_at_start_only = f.cfg.retrieval_at_start_only;
    }
    if (keep_flag_value("--snug-context-base")) {
      merged.snug_context_base = f.cfg.snug_context_base;
    }
    if (keep_flag_value("--seed")) merged.seed = f.cfg.seed;
    if (keep_flag_value("--max-steps")) merged.max_steps = f.cfg.max_steps;
    if (keep_flag_value("--r-max")) merged.r_max = f.cfg.r_max;
    if (keep_flag_value("--form-refuting")) {
      merged.form.include_refuting = f.cfg.form.include_refuting;
    }
    if (keep_flag_value("--form-supporting")) {
      merged.form.include_supporting = f.cfg.form.include_supporting;
    }
    if (keep_flag_value("--form-instruction")) {
      merged.form.include_instruction = f.cfg.form.include_instruction;
    }
    if (keep_flag_value("--precompute")) merged.use_precompute = f.cfg.use_precompute;
    if (keep_flag_value("--fail-open")) merged.fail_open = f.cfg.fail_open;
    f.cfg = merged;
  }
  if (f.t_r > 0) f.cfg.retrieval = TriggerPolicy::fixed(f.t_r);
  if (f.entropy_r >= 0.0) f.cfg.retrieval = TriggerPolicy::entropy(f.entropy_r);
  if (f.min_prob_r >= 0.0) f.cfg.retrieval = TriggerPolicy::min_prob(f.min_prob_r);
  if (f.t_v > 0) f.cfg.verification = TriggerPolicy::fixed(f.t_v);
  if (f.entropy_v >= 0.0) f.cfg.verification = TriggerPolicy::entropy(f.entropy_v);
  if (f.min_prob_v >= 0.0) f.cfg.verification = TriggerPolicy::min_prob(f.min_prob_v);
  if (f.retrieval_off) f.cfg.retrieval = TriggerPolicy::off();
  if (f.verification_off) f.cfg.verification = TriggerPolicy::off();
  if (f.no_context_branch) f.cfg.include_context_branch = false;
  if (f.greedy_flag) f.cfg.sampling = SamplePolicy{SamplePolicy::Mode::greedy, 1.0};
  if (f.temperature_flag > 0.0) {
    f.cfg.sampling = SamplePolicy{SamplePolicy::Mode::temperature, f.temperature_flag};
  }
  f.cfg.validate();
}

int cmd_world(const std::string& out_dir, uint64_t seed, int entities,
              int facts_per_entity, double corruption, int unit_tokens) {
  WorldSpec spec;
  spec.seed = seed;
  spec.n_entities = entities;
  spec.facts_per_entity = facts_per_entity;
  spec.corruption_rate = corruption;
  spec.unit_tokens = unit_tokens;
  World world = generate_world(spec);
  const auto docs = render_training_corpus(world, corruption, seed);

  fs::create_directories(out_dir);
  world.save_json((fs::path(out_dir) / "world.json").string());
  Tokenizer tok = Tokenizer::build(world.vocabulary());
  tok.save_json((fs::path(out_dir) / "vocab.json").string());
  render_corpus(world).save_jsonl((fs::path(out_dir) / "datastore.jsonl").string());
  write_training_file((fs::path(out_dir) / "train.txt").string(), docs,
                      unit_tokens);
  std::cout << "world: " << world.entities.size() << " entities, "
            << world.facts.size() << " facts, " << world.corruptions.size()
            << " corrupted pairs, vocab " << tok.size() << "\n";
  std::cout << "wrote " << out_dir << "/{world.json,vocab.json,datastore.jsonl,train.txt}\n";
  return 0;
}

int cmd_ingest(const std::string& datastore_path, const std::string& out_path) {
  const Datastore ds = Datastore::load_jsonl(datastore_path);
  TfIndex::build(ds).save_json(out_path, ds);
  std::cout << "indexed " << ds.passages.size() << " passages -> " << out_path << "\n";
  return 0;
}

int cmd_train(const std::string& world_path, const std::string& vocab_path,
              const std::string& corpus_path, const std::string& out_path,
              const std::string& loss_path, int64_t steps, double lr,
              double momentum, double clip, int64_t d_model, int64_t heads,
              int64_t layers, int64_t d_ff, int64_t max_positions,
              uint64_t seed) {
  const Tokenizer tok = Tokenizer::load_json(vocab_path);
  auto [docs_text, context_base] = parse_training_file(corpus_path);
  const auto docs = tokenize_training_docs(docs_text, tok, context_base);
  (void)world_path;

  ModelConfig cfg;
  cfg.vocab_size = tok.size();
  cfg.d_model = d_model;
  cfg.n_heads = heads;
  cfg.n_layers = layers;
  cfg.d_ff = d_ff;
  cfg.max_positions = max_positions;
  cfg.seed = seed;
  TransformerWeights w = init_weights(cfg);

  TrainOptions opt;
  opt.steps = steps;
  opt.learning_rate = lr;
  opt.momentum = momentum;
  opt.clip_norm = clip;
  opt.seed = seed;
  const auto result = train(w, docs, opt);
  const double final_loss = corpus_mean_loss(w, docs);
  save_checkpoint(out_path, w);
  if (!loss_path.empty()) {
    std::ofstream out(loss_path);
    out << "step,loss\n";
    for (size_t i = 0; i < result.loss_trace.size(); ++i) {
      out << i << ',' << result.loss_trace[i] << "\n";
    }
  }
  std::cout << "trained " << steps << " steps on " << docs.size()
            << " documents; corpus loss " << final_loss << " nats/token\n";
  std::cout << "checkpoint -> " << out_path << "\n";
  return 0;
}

int cmd_generate(GenerateFlags& f, const std::string& entity,
                 const std::string& prompt_text, const std::string& events_path,
                 bool trace) {
  const Tokenizer tok = Tokenizer::load_json(f.vocab_path);
  const TransformerWeights weights = load_checkpoint(f.weights_path);

  std::optional<World> world;
  if (!f.world_path.empty()) world = World::load_json(f.world_path);
  std::optional<Datastore> ds;
  std::optional<TfIndex> index;
  if (!f.datastore_path.empty()) {
    ds = Datastore::load_jsonl(f.datastore_path);
    if (f.cfg.datastore_fraction < 1.0) {
      ds = subsample_datastore(*ds, f.cfg.datastore_fraction, f.cfg.seed);
    }
    index = f.index_path.empty() ? TfIndex::build(*ds)
                                 : TfIndex::load_json(f.index_path, *ds);
  }

  std::string question = prompt_text;
  if (question.empty()) {
    if (entity.empty()) throw ConfigError("generate needs --entity or --prompt");
    question = prompt_for_entity(entity);
  }

  std::optional<PrecomputeStore> store;
  if (f.cfg.use_precompute) {
    store = f.precompute_dir.empty() ? PrecomputeStore()
                                     : PrecomputeStore(f.precompute_dir);
  }
  TransformerDecodeModel model(weights, tok,
                               AggregationConfig{f.cfg.include_context_branch},
                               store ? &*store : nullptr);
  FeedbackContext fb{ds ? &*ds : nullptr, index ? &*index : nullptr,
                     world ? &*world : nullptr};

  EventSink sink = [](const Event& e) {
    nlohmann::json j = e.payload;
    j["step"] = e.step;
    j["type"] = e.type;
    std::cerr << j.dump() << "\n";
  };
  const auto result =
      generate(model, tok, fb, question, f.cfg, trace ? &sink : nullptr);

  if (!events_path.empty()) {
    nlohmann::json header{{"tool", "wmgen"},
                          {"version", std::string(kVersion)},
                          {"type", "header"},
                          {"question", question},
                          {"config", config_to_json(f.cfg)}};
    result.log.save_jsonl(events_path, &header);
  }
  if (store && !f.precompute_dir.empty()) store->flush();
  std::cout << result.response << "\n";
  std::cerr << "steps=" << result.stats.decode_steps
            << " backtracks=" << result.stats.backtracks
            << " accepted_passages=" << result.stats.accepted_passages << "\n";
  return 0;
}

int cmd_eval(GenerateFlags& f, const std::string& systems_csv, int n_prompts,
             const std::string& seeds_csv, const std::string& out_path,
             int jobs) {
  const Tokenizer tok = Tokenizer::load_json(f.vocab_path);
  const TransformerWeights weights = load_checkpoint(f.weights_path);
  const World world = World::load_json(f.world_path);
  Datastore ds = Datastore::load_jsonl(f.datastore_path);
  if (f.cfg.datastore_fraction < 1.0) {
    ds = subsample_datastore(ds, f.cfg.datastore_fraction, f.cfg.seed);
  }
  const TfIndex index = TfIndex::build(ds);

  std::vector<SystemKind> systems;
  for (const auto& s : split_csv(systems_csv)) systems.push_back(system_from_string(s));
  std::vector<uint64_t> seeds;
  for (const auto& s : split_csv(seeds_csv)) seeds.push_back(std::stoull(s));
  const auto prompts = render_prompts(world, n_prompts);

  BenchmarkInputs in{&world, &weights, &tok, &ds, &index};
  const auto report = run_benchmark(in, systems, prompts, seeds, f.cfg, jobs);
  report.save_jsonl(out_path);
  std::cout << "cap=" << report.cap << "\n";
  for (const auto& [name, m] : report.means) {
    std::cout << name << ": P=" << m.precision << " R=" << m.recall
              << " F1=" << m.f1 << "\n";
  }
  std::cout << "report -> " << out_path << "\n";
  return 0;
}

int cmd_ablate(GenerateFlags& f, const std::string& axis_name,
               const std::string& values_csv, const std::string& seeds_csv,
               int n_prompts, const std::string& out_path, int jobs) {
  const Tokenizer tok = Tokenizer::load_json(f.vocab_path);
  const TransformerWeights weights = load_checkpoint(f.weights_path);
  const World world = World::load_json(f.world_path);
  const Datastore ds = Datastore::load_jsonl(f.datastore_path);
  const TfIndex index = TfIndex::build(ds);

  AblationGrid grid;
  grid.axis = axis_from_string(axis_name);
  for (const auto& v : split_csv(values_csv)) grid.values.push_back(std::stod(v));
  for (const auto& s : split_csv(seeds_csv)) grid.seeds.push_back(std::stoull(s));
  const auto prompts = render_prompts(world, n_prompts);

  BenchmarkInputs in{&world, &weights, &tok, &ds, &index};
  const auto report = run_ablation(in, grid, prompts, f.cfg, jobs);
  report.save_csv(out_path);
  std::cout << "ablation " << axis_name << ": " << report.rows.size()
            << " rows -> " << out_path << "\n";
  return 0;
}

int cmd_inspect(const std::string& events_path) {
  const auto lines = EventLog::load_jsonl(events_path);
  std::map<int, std::string> retrieval_units;  // unit id -> passage/text tag
  std::map<int, std::string> factcheck_units;
  auto fmt_pool = [](const std::map<int, std::string>& pool) {
    std::string s = "[";
    bool first = true;
    for (const auto& [id, tag] : pool) {
      if (!first) s += ", ";
      s += "#" + std::to_string(id) + ":" + tag;
      first = false;
    }
    return s + "]";
  };
  for (const auto& e : lines) {
    const std::string type = e.value("type", "");
    const int step = e.value("step", 0);
    if (type == "header") {
      std::cout << "config: " << e.value("question", "") << "\n";
      continue;
    }
    if (type == "retrieval") {
      for (const auto& a : e.at("accepted")) {
        retrieval_units[a.at("unit_id").get<int>()] =
            a.at("passage_id").get<std::string>();
      }
      for (const auto& id : e.at("evicted_unit_ids")) {
        retrieval_units.erase(id.get<int>());
      }
      std::cout << "step " << step << "  retrieval  query=\""
                << e.value("query", "") << "\"\n";
      std::cout << "          retrieval pool " << fmt_pool(retrieval_units) << "\n";
    } else if (type == "verification") {
      int unsupported = 0;
      for (const auto& v : e.at("verdicts")) {
        if (v.at("status") == "unsupported") ++unsupported;
      }
      std::cout << "step " << step << "  verify     \"" << e.value("sentence", "")
                << "\" -> " << e.at("verdicts").size() << " claims, "
                << unsupported << " unsupported\n";
    } else if (type == "backtrack" || type == "accept") {
      if (e.contains("feedback_units")) {
        for (const auto& u : e.at("feedback_units")) {
          std::string text = u.at("text").get<std::string>();
          if (text.size() > 32) text = text.substr(0, 32) + "...";
          factcheck_units[u.at("unit_id").get<int>()] = text;
        }
        for (const auto& id : e.at("feedback_evicted")) {
          factcheck_units.erase(id.get<int>());
        }
      }
      if (type == "backtrack") {
        std::cout << "step " << step << "  backtrack  to token "
                  << e.at("to").get<int>() << " (attempt "
                  << e.at("attempt").get<int>() << ")\n";
        std::cout << "          factcheck pool " << fmt_pool(factcheck_units) << "\n";
      } else {
        std::cout << "step " << step << "  accept     \""
                  << e.value("sentence", "") << "\" residual="
                  << e.value("residual_unsupported", 0) << "\n";
      }
    } else if (type == "finish") {
      std::cout << "step " << step << "  finish     reason=" << e.value("reason", "")
                << "\nresponse: " << e.value("response", "") << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"working-memory text generation engine"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  const std::string data_dir = data_dir_default();

  // world
  auto* world_cmd = app.add_subcommand("world", "generate a synthetic world and corpora");
  std::string out_dir = data_dir;
  uint64_t w_seed = 7;
  int w_entities = 30, w_facts = 6, w_unit_tokens = 16;
  double w_corruption = 0.3;
  world_cmd->add_option("--out-dir", out_dir, "output directory");
  world_cmd->add_option("--seed", w_seed, "world seed");
  world_cmd->add_option("--entities", w_entities, "entity count");
  world_cmd->add_option("--facts-per-entity", w_facts, "facts per entity");
  world_cmd->add_option("--corruption-rate", w_corruption, "training corruption rate");
  world_cmd->add_option("--unit-tokens", w_unit_tokens, "memory unit length the corpus assumes");

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "build a retrieval index");
  std::string ingest_ds = data_dir + "/datastore.jsonl";
  std::string ingest_out = data_dir + "/datastore.index.json";
  ingest_cmd->add_option("--datastore", ingest_ds, "datastore JSONL");
  ingest_cmd->add_option("--out", ingest_out, "index output path");

  // train
  auto* train_cmd = app.add_subcommand("train", "train the toy model");
  std::string tr_world = data_dir + "/world.json";
  std::string tr_vocab = data_dir + "/vocab.json";
  std::string tr_corpus = data_dir + "/train.txt";
  std::string tr_out = data_dir + "/model.ckpt";
  std::string tr_loss = "";
  int64_t tr_steps = 12000, tr_dmodel = 64, tr_heads = 4, tr_layers = 2,
          tr_dff = 256, tr_maxpos = 256;
  double tr_lr = 0.35, tr_momentum = 0.9, tr_clip = 1.0;
  uint64_t tr_seed = 1;
  train_cmd->add_option("--world", tr_world, "world JSON");
  train_cmd->add_option("--vocab", tr_vocab, "vocabulary JSON");
  train_cmd->add_option("--corpus", tr_corpus, "training text file");
  train_cmd->add_option("--out", tr_out, "checkpoint output");
  train_cmd->add_option("--loss-out", tr_loss, "loss trace CSV");
  train_cmd->add_option("--steps", tr_steps, "training steps");
  train_cmd->add_option("--lr", tr_lr, "learning rate");
  train_cmd->add_option("--momentum", tr_momentum, "momentum");
  train_cmd->add_option("--clip", tr_clip, "gradient clip (0 disables)");
  train_cmd->add_option("--d-model", tr_dmodel, "model width");
  train_cmd->add_option("--heads", tr_heads, "attention heads");
  train_cmd->add_option("--layers", tr_layers, "decoder layers");
  train_cmd->add_option("--d-ff", tr_dff, "feed-forward width");
  train_cmd->add_option("--max-positions", tr_maxpos, "position table size");
  train_cmd->add_option("--seed", tr_seed, "init/order seed");

  // generate
  auto* gen_cmd = app.add_subcommand("generate", "generate a response for one prompt");
  GenerateFlags gf;
  gf.weights_path = data_dir + "/model.ckpt";
  gf.vocab_path = data_dir + "/vocab.json";
  gf.world_path = "";
  gf.datastore_path = "";
  std::string gen_entity, gen_prompt, gen_events;
  bool gen_trace = false;
  gen_cmd->add_option("--weights", gf.weights_path, "model checkpoint");
  gen_cmd->add_option("--vocab", gf.vocab_path, "vocabulary JSON");
  gen_cmd->add_option("--world", gf.world_path, "world JSON (enables verification)");
  gen_cmd->add_option("--datastore", gf.datastore_path, "datastore JSONL (enables retrieval)");
  gen_cmd->add_option("--index", gf.index_path, "prebuilt retrieval index");
  gen_cmd->add_option("--entity", gen_entity, "entity to ask about");
  gen_cmd->add_option("--prompt", gen_prompt, "raw prompt text");
  gen_cmd->add_option("--events", gen_events, "event log output (JSONL)");
  gen_cmd->add_flag("--trace", gen_trace, "print events live to stderr");
  add_config_options(gen_cmd, gf);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "benchmark system variants");
  GenerateFlags ef;
  ef.weights_path = data_dir + "/model.ckpt";
  ef.vocab_path = data_dir + "/vocab.json";
  ef.world_path = data_dir + "/world.json";
  ef.datastore_path = data_dir + "/datastore.jsonl";
  std::string eval_systems = "plain,rag_k1,ewe_full";
  std::string eval_seeds = "1,2,3";
  std::string eval_out = "report.jsonl";
  int eval_prompts = 30, eval_jobs = 1;
  eval_cmd->add_option("--weights", ef.weights_path, "model checkpoint");
  eval_cmd->add_option("--vocab", ef.vocab_path, "vocabulary JSON");
  eval_cmd->add_option("--world", ef.world_path, "world JSON");
  eval_cmd->add_option("--datastore", ef.datastore_path, "datastore JSONL");
  eval_cmd->add_option("--systems", eval_systems, "comma list of systems");
  eval_cmd->add_option("--prompts", eval_prompts, "number of prompts");
  eval_cmd->add_option("--seeds", eval_seeds, "comma list of seeds");
  eval_cmd->add_option("--out", eval_out, "report path (JSONL)");
  eval_cmd->add_option("--jobs", eval_jobs, "parallel generations");
  add_config_options(eval_cmd, ef);

  // ablate
  auto* abl_cmd = app.add_subcommand("ablate", "sweep one config axis");
  GenerateFlags af;
  af.weights_path = data_dir + "/model.ckpt";
  af.vocab_path = data_dir + "/vocab.json";
  af.world_path = data_dir + "/world.json";
  af.datastore_path = data_dir + "/datastore.jsonl";
  std::string abl_axis = "unit_count";
  std::string abl_values = "1,2,4,8,16";
  std::string abl_seeds = "1,2,3";
  std::string abl_out = "ablation.csv";
  int abl_prompts = 10, abl_jobs = 1;
  abl_cmd->add_option("--weights", af.weights_path, "model checkpoint");
  abl_cmd->add_option("--vocab", af.vocab_path, "vocabulary JSON");
  abl_cmd->add_option("--world", af.world_path, "world JSON");
  abl_cmd->add_option("--datastore", af.datastore_path, "datastore JSONL");
  abl_cmd->add_option("--axis", abl_axis, "ablation axis");
  abl_cmd->add_option("--values", abl_values, "comma list of axis values");
  abl_cmd->add_option("--seeds", abl_seeds, "comma list of seeds");
  abl_cmd->add_option("--prompts", abl_prompts, "number of prompts");
  abl_cmd->add_option("--out", abl_out, "CSV output path");
  abl_cmd->add_option("--jobs", abl_jobs, "parallel generations");
  add_config_options(abl_cmd, af);

  // inspect
  auto* inspect_cmd = app.add_subcommand("inspect", "render a memory timeline from an event log");
  std::string inspect_events = "events.jsonl";
  inspect_cmd->add_option("--events", inspect_events, "event log JSONL");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help/--version
    app.exit(e);
    return 1;
  }

  try {
    if (*world_cmd) {
      return cmd_world(out_dir, w_seed, w_entities, w_facts, w_corruption,
                       w_unit_tokens);
    }
    if (*ingest_cmd) return cmd_ingest(ingest_ds, ingest_out);
    if (*train_cmd) {
      return cmd_train(tr_world, tr_vocab, tr_corpus, tr_out, tr_loss, tr_steps,
                       tr_lr, tr_momentum, tr_clip, tr_dmodel, tr_heads,
                       tr_layers, tr_dff, tr_maxpos, tr_seed);
    }
    if (*gen_cmd) {
      finalize_config(gen_cmd, gf);
      return cmd_generate(gf, gen_entity, gen_prompt, gen_events, gen_trace);
    }
    if (*eval_cmd) {
      finalize_config(eval_cmd, ef);
      return cmd_eval(ef, eval_systems, eval_prompts, eval_seeds, eval_out,
                      eval_jobs);
    }
    if (*abl_cmd) {
      finalize_config(abl_cmd, af);
      return cmd_ablate(af, abl_axis, abl_values, abl_seeds, abl_prompts,
                        abl_out, abl_jobs);
    }
    if (*inspect_cmd) return cmd_inspect(inspect_events);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
