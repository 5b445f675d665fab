#include "wmgen/orchestrator.hpp"

#include <algorithm>
#include <fstream>

#include "wmgen/errors.hpp"
#include "wmgen/kernels.hpp"

namespace wmgen {

// ---------------------------------------------------------------------------
// TransformerDecodeModel

TransformerDecodeModel::TransformerDecodeModel(const TransformerWeights& w,
                                               const Tokenizer& tok,
                                               AggregationConfig agg,
                                               PrecomputeStore* store)
    : weights_(w), tok_(tok), agg_(agg), store_(store) {}

int TransformerDecodeModel::vocab_size() const {
  return static_cast<int>(weights_.config.vocab_size);
}

MemoryUnit TransformerDecodeModel::make_unit(const std::string& text,
                                             MemoryKind kind,
                                             int max_unit_tokens, int id,
                                             int step) {
  if (store_) {
    char key[32];
    std::snprintf(key, sizeof(key), "t%016llx",
                  static_cast<unsigned long long>(fnv1a64(text)));
    auto [kv, hit] = store_->lookup_or_encode(weights_, tok_, key, text,
                                              max_unit_tokens);
    (void)hit;
    MemoryUnit unit;
    unit.id = id;
    unit.kind = kind;
    unit.source_text = text;
    unit.tokens = tok_.tokenize(text);
    if (static_cast<int>(unit.tokens.size()) > max_unit_tokens) {
      unit.tokens.resize(static_cast<size_t>(max_unit_tokens));
    }
    unit.kv = *kv;
    unit.inserted_at_step = step;
    return unit;
  }
  return encode_unit(weights_, tok_, text, kind, max_unit_tokens, id, step);
}

void TransformerDecodeModel::reset(std::span<const int> prompt,
                                   int context_base,
                                   const MemoryPools& pools) {
  ctx_ = KVCache(weights_.config.n_layers, weights_.config.n_heads,
                 weights_.config.head_dim());
  base_ = context_base;
  prompt_len_ = static_cast<int>(prompt.size());
  logits_.clear();
  std::vector<int> positions(prompt.size());
  for (size_t i = 0; i < prompt.size(); ++i) {
    positions[i] = context_base + static_cast<int>(i);
  }
  auto caches = pools.unit_caches();
  logits_.push_back(forward_step(weights_, ctx_, caches, prompt, positions,
                                 agg_));
}

const std::vector<double>& TransformerDecodeModel::next_logits(
    const MemoryPools& pools) {
  // Cached context is never reprocessed when memory refreshes; the logits
  // following token t were fixed when t was ingested.
  (void)pools;
  return logits_.back();
}

void TransformerDecodeModel::advance(int token, const MemoryPools& pools) {
  const int pos = base_ + static_cast<int>(ctx_.span());
  const int tok_arr[1] = {token};
  const int pos_arr[1] = {pos};
  auto caches = pools.unit_caches();
  logits_.push_back(forward_step(weights_, ctx_, caches,
                                 std::span<const int>(tok_arr, 1),
                                 std::span<const int>(pos_arr, 1), agg_));
}

void TransformerDecodeModel::truncate_generated(int keep) {
  ctx_.truncate(prompt_len_ + keep);
  logits_.resize(static_cast<size_t>(1 + keep));
}

// ---------------------------------------------------------------------------
// EventLog

void EventLog::append(int step, std::string type, nlohmann::json payload) {
  events.push_back(Event{step, std::move(type), std::move(payload)});
}

nlohmann::json EventLog::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : events) {
    nlohmann::json j = e.payload;
    j["step"] = e.step;
    j["type"] = e.type;
    arr.push_back(std::move(j));
  }
  return arr;
}

void EventLog::save_jsonl(const std::string& path,
                          const nlohmann::json* header) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write event log: " + path);
  if (header) out << header->dump() << "\n";
  for (const auto& e : to_json()) out << e.dump() << "\n";
}

std::vector<nlohmann::json> EventLog::load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read event log: " + path);
  std::vector<nlohmann::json> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const std::exception& e) {
      throw IoError("malformed event log line " + std::to_string(line_no) +
                    ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pause and boundary rules

bool should_pause(const PauseState& state, const TriggerPolicy& policy,
                  TriggerKind kind) {
  switch (policy.mode) {
    case TriggerPolicy::Mode::off:
      return false;
    case TriggerPolicy::Mode::fixed: {
      if (state.step % policy.interval != 0) return false;
      if (kind == TriggerKind::verification) {
        // Skipped when no new sentence completed since the last pause of
        // this kind.
        return state.completed_sentences > state.completed_at_last_pause;
      }
      // Retrieval on fixed intervals runs at token cadence; the query's
      // sentence component is the latest completed sentence.
      return true;
    }
    case TriggerPolicy::Mode::entropy:
      return state.sentence_just_completed &&
             state.sentence_mean_entropy > policy.threshold;
    case TriggerPolicy::Mode::min_prob:
      return state.sentence_just_completed &&
             state.sentence_min_prob < policy.threshold;
  }
  return false;
}

namespace {

const std::vector<std::string>& abbreviations() {
  static const std::vector<std::string> abbr = {"e.g.", "i.e.", "etc.",
                                                "mr.",  "dr.",  "vs."};
  return abbr;
}

std::string strip_spaces(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c != ' ') out += c;
  }
  return out;
}

}  // namespace

bool detect_sentence_end(const std::string& decoded_tail) {
  if (decoded_tail.empty()) return false;
  const char last = decoded_tail.back();
  if (last == '\n') return true;
  if (last != '.' && last != '!' && last != '?') return false;
  if (last == '.') {
    // Word-level detokenization may insert spaces inside abbreviations
    // ("e. g."); compare space-free.
    const std::string norm = strip_spaces(decoded_tail);
    for (const auto& a : abbreviations()) {
      if (norm.size() >= a.size() &&
          norm.compare(norm.size() - a.size(), a.size(), a) == 0) {
        return false;
      }
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Generation engine

namespace {

struct TokenRecord {
  int token;
  double prob;
  double entropy;
};

struct AttemptRecord {
  std::vector<TokenRecord> tokens;
  std::string text;
  int unsupported = 0;
};

class Engine {
 public:
  Engine(DecodeModel& model, const Tokenizer& tok, const FeedbackContext& fb,
         const std::string& question, const GenerationConfig& cfg,
         const EventSink* sink)
      : model_(model), tok_(tok), fb_(fb), question_(question), cfg_(cfg),
        sink_(sink), sample_rng_(mix_seed(cfg.seed, kSampleStream)) {
    pools_.retrieval = MemoryPool{MemoryKind::retrieval, cfg.k_r, {}};
    pools_.factcheck = MemoryPool{MemoryKind::factcheck, cfg.k_v, {}};
  }

  GenerationResult run() {
    cfg_.validate();
    const auto prompt = tok_.tokenize(question_);
    if (prompt.empty()) throw ConfigError("prompt tokenizes to zero tokens");

    const bool retrieval_enabled =
        cfg_.retrieval.mode != TriggerPolicy::Mode::off ||
        cfg_.retrieval_at_start_only;
    if (retrieval_enabled) do_retrieval("initial");

    int base = cfg_.effective_context_base();
    if (cfg_.snug_context_base) {
      base = pools_.retrieval.units.empty()
                 ? 0
                 : pools_.retrieval.units.front().token_count();
    }
    model_.reset(prompt, base, pools_);

    std::string finish_reason;
    while (true) {
      if (step_ >= cfg_.max_steps) {
        finish_reason = "max_steps";
        final_sweep(false);
        break;
      }
      const auto& logits = model_.next_logits(pools_);
      const double temp = cfg_.sampling.mode == SamplePolicy::Mode::temperature
                              ? cfg_.sampling.temperature
                              : 1.0;
      const auto probs = kernels::softmax_with_temperature(logits, temp);
      const int token = sample_next(logits, cfg_.sampling, sample_rng_);
      bool capacity_hit = false;
      try {
        model_.advance(token, pools_);
      } catch (const CapacityError& e) {
        note(step_, "capacity", {{"what", e.what()}});
        finish_reason = "capacity";
        capacity_hit = true;
      }
      if (capacity_hit) {
        final_sweep(false);
        break;
      }
      generated_.push_back(TokenRecord{token, probs[static_cast<size_t>(token)],
                                       kernels::entropy_nats(probs)});
      ++step_;

      const bool eot = token == Tokenizer::kEot;
      sentence_just_completed_ = false;
      if (!eot) note_boundary();

      if (retrieval_enabled && !cfg_.retrieval_at_start_only) {
        const PauseState ps = pause_state(TriggerKind::retrieval);
        if (should_pause(ps, cfg_.retrieval, TriggerKind::retrieval)) {
          last_pause_completed_[0] = completed_total_;
          do_retrieval(reason_of(cfg_.retrieval));
        }
      }
      if (cfg_.verification.mode != TriggerPolicy::Mode::off) {
        const PauseState ps = pause_state(TriggerKind::verification);
        if (should_pause(ps, cfg_.verification, TriggerKind::verification)) {
          last_pause_completed_[1] = completed_total_;
          note(step_, "pause",
                      {{"kind", "verification"},
                       {"reason", reason_of(cfg_.verification)}});
          verify_pending(true);
        }
      }
      if (eot) {
        const size_t before = generated_.size();
        final_sweep(true);
        if (generated_.size() < before) continue;  // backtracked; resume
        finish_reason = "eot";
        break;
      }
    }

    GenerationResult result;
    result.stats = stats_;
    result.stats.decode_steps = step_;
    const bool verification_on =
        cfg_.verification.mode != TriggerPolicy::Mode::off;
    std::vector<int> out_tokens;
    const size_t n = verification_on ? static_cast<size_t>(accepted_end_)
                                     : generated_.size();
    for (size_t i = 0; i < n; ++i) out_tokens.push_back(generated_[i].token);
    result.response = tok_.detokenize(out_tokens);
    note(step_, "finish",
                {{"reason", finish_reason}, {"response", result.response}});
    result.log = std::move(log_);
    return result;
  }

 private:
  static const char* reason_of(const TriggerPolicy& p) {
    switch (p.mode) {
      case TriggerPolicy::Mode::fixed: return "interval";
      case TriggerPolicy::Mode::entropy: return "entropy";
      case TriggerPolicy::Mode::min_prob: return "min_prob";
      default: return "off";
    }
  }

  void note(int step, std::string type, nlohmann::json payload) {
    log_.append(step, std::move(type), std::move(payload));
    if (sink_) (*sink_)(log_.events.back());
  }

  PauseState pause_state(TriggerKind kind) const {
    PauseState ps;
    ps.step = step_;
    ps.completed_sentences = completed_total_;
    ps.completed_at_last_pause =
        last_pause_completed_[kind == TriggerKind::retrieval ? 0 : 1];
    ps.sentence_just_completed = sentence_just_completed_;
    ps.sentence_mean_entropy = sentence_mean_entropy_;
    ps.sentence_min_prob = sentence_min_prob_;
    return ps;
  }

  std::string detok_range(size_t begin, size_t end) const {
    std::vector<int> ids;
    ids.reserve(end - begin);
    for (size_t i = begin; i < end; ++i) ids.push_back(generated_[i].token);
    return tok_.detokenize(ids);
  }

  void note_boundary() {
    const size_t tail_from = generated_.size() > 8 ? generated_.size() - 8 : 0;
    if (!detect_sentence_end(detok_range(tail_from, generated_.size()))) return;
    boundaries_.push_back(generated_.size());
    ++completed_total_;
    sentence_just_completed_ = true;
    double ent = 0.0;
    double minp = 1.0;
    for (size_t i = static_cast<size_t>(sentence_start_); i < generated_.size(); ++i) {
      ent += generated_[i].entropy;
      minp = std::min(minp, generated_[i].prob);
    }
    sentence_mean_entropy_ =
        ent / static_cast<double>(generated_.size() - static_cast<size_t>(sentence_start_));
    sentence_min_prob_ = minp;
    sentence_start_ = static_cast<int>(generated_.size());
  }

  std::string last_completed_sentence() const {
    if (boundaries_.empty()) return "";
    const size_t end = boundaries_.back();
    const size_t begin = boundaries_.size() > 1 ? boundaries_[boundaries_.size() - 2] : 0;
    return detok_range(begin, end);
  }

  void do_retrieval(const std::string& reason) {
    note(step_, "pause", {{"kind", "retrieval"}, {"reason", reason}});
    try {
      if (!fb_.datastore || !fb_.index) {
        throw SetupError("retrieval requested without a datastore");
      }
      const std::string query = build_query(question_, last_completed_sentence());
      auto scored = retrieve(*fb_.datastore, *fb_.index, query, cfg_.tau,
                             cfg_.top_n);
      nlohmann::json accepted = nlohmann::json::array();
      nlohmann::json evicted = nlohmann::json::array();
      int pushed = 0;
      for (const auto& sp : scored) {
        if (pushed >= cfg_.k_r) break;
        if (pools_.retrieval.contains_source(sp.passage.text)) continue;
        MemoryUnit unit = model_.make_unit(sp.passage.text, MemoryKind::retrieval,
                                           cfg_.unit_tokens, next_unit_id_++,
                                           step_);
        accepted.push_back({{"passage_id", sp.passage.id},
                            {"score", sp.score},
                            {"unit_id", unit.id}});
        if (auto out = push_fifo(pools_.retrieval, std::move(unit))) {
          evicted.push_back(out->id);
        }
        ++pushed;
      }
      stats_.accepted_passages += pushed;
      note(step_, "retrieval",
                  {{"query", query},
                   {"accepted", std::move(accepted)},
                   {"evicted_unit_ids", std::move(evicted)}});
    } catch (const std::exception& e) {
      if (!cfg_.fail_open) throw;
      note(step_, "warning",
                  {{"subsystem", "retrieval"}, {"what", e.what()}});
    }
  }

  // Verifies pending sentences oldest-first. With allow_regen unsupported
  // sentences trigger backtrack-and-regenerate up to r_max attempts; without
  // it (budget exhausted) the best recorded attempt is accepted directly.
  void verify_pending(bool allow_regen) {
    while (n_accepted_ < boundaries_.size()) {
      const size_t begin = n_accepted_ == 0 ? 0 : boundaries_[n_accepted_ - 1];
      const size_t end = boundaries_[n_accepted_];
      const std::string text = detok_range(begin, end);

      std::vector<Verdict> verdicts;
      bool checked = false;
      try {
        if (!fb_.world) throw SetupError("verification requested without a world");
        for (const auto& c : extract_claims(text, *fb_.world)) {
          verdicts.push_back(verify(c, *fb_.world));
        }
        checked = true;
      } catch (const std::exception& e) {
        if (!cfg_.fail_open) throw;
        note(step_, "warning",
                    {{"subsystem", "verification"}, {"what", e.what()}});
      }

      nlohmann::json jv = nlohmann::json::array();
      int unsupported = 0;
      for (const auto& v : verdicts) {
        if (v.status == VerdictStatus::unsupported) ++unsupported;
        nlohmann::json evidence = nlohmann::json::array();
        for (const auto& p : v.evidence) evidence.push_back(p.id);
        jv.push_back({{"claim", v.claim.text},
                      {"subject", v.claim.subject},
                      {"relation", v.claim.relation},
                      {"object", v.claim.object},
                      {"status", to_string(v.status)},
                      {"evidence_ids", std::move(evidence)}});
      }
      note(step_, "verification",
                  {{"sentence", text}, {"verdicts", std::move(jv)}});

      if (!checked || unsupported == 0) {
        note(step_, "accept",
                    {{"sentence", text},
                     {"attempts", attempts_.size()},
                     {"residual_unsupported", 0}});
        accepted_end_ = static_cast<int>(end);
        ++n_accepted_;
        attempts_.clear();
        continue;
      }

      // Record this attempt and push corrective feedback.
      AttemptRecord attempt;
      attempt.tokens.assign(generated_.begin() + static_cast<long>(begin),
                            generated_.begin() + static_cast<long>(end));
      attempt.text = text;
      attempt.unsupported = unsupported;
      attempts_.push_back(std::move(attempt));

      nlohmann::json fb_units = nlohmann::json::array();
      nlohmann::json fb_evicted = nlohmann::json::array();
      try {
        for (const auto& t : render_feedback(verdicts, cfg_.form)) {
          MemoryUnit unit = model_.make_unit(t, MemoryKind::factcheck,
                                             cfg_.unit_tokens, next_unit_id_++,
                                             step_);
          fb_units.push_back({{"unit_id", unit.id}, {"text", t}});
          if (auto out = push_fifo(pools_.factcheck, std::move(unit))) {
            fb_evicted.push_back(out->id);
          }
        }
      } catch (const std::exception& e) {
        if (!cfg_.fail_open) throw;
        note(step_, "warning",
                    {{"subsystem", "feedback"}, {"what", e.what()}});
      }

      const bool budget_left =
          allow_regen && static_cast<int>(attempts_.size()) <= cfg_.r_max;
      if (budget_left) {
        note(step_, "backtrack",
                    {{"from", generated_.size()},
                     {"to", accepted_end_},
                     {"attempt", attempts_.size()},
                     {"feedback_units", std::move(fb_units)},
                     {"feedback_evicted", std::move(fb_evicted)}});
        stats_.backtracks += 1;
        stats_.regenerated_tokens +=
            static_cast<int>(generated_.size()) - accepted_end_;
        truncate_to(accepted_end_);
        sample_rng_ = Rng(mix_seed(mix_seed(cfg_.seed, static_cast<uint64_t>(accepted_end_)),
                                   attempts_.size()));
        return;
      }

      // Out of attempts: keep the attempt with the fewest unsupported
      // claims (ties to the earliest) and move on.
      size_t best = 0;
      for (size_t i = 1; i < attempts_.size(); ++i) {
        if (attempts_[i].unsupported < attempts_[best].unsupported) best = i;
      }
      const AttemptRecord chosen = attempts_[best];
      stats_.regenerated_tokens +=
          static_cast<int>(generated_.size()) - accepted_end_;
      truncate_to(accepted_end_);
      for (const auto& tr : chosen.tokens) {
        model_.advance(tr.token, pools_);
        generated_.push_back(tr);
      }
      accepted_end_ += static_cast<int>(chosen.tokens.size());
      boundaries_.push_back(static_cast<size_t>(accepted_end_));
      ++n_accepted_;
      sentence_start_ = accepted_end_;
      note(step_, "accept",
                  {{"sentence", chosen.text},
                   {"attempts", attempts_.size()},
                   {"residual_unsupported", chosen.unsupported},
                   {"accepted_with_errors", true},
                   {"feedback_units", std::move(fb_units)},
                   {"feedback_evicted", std::move(fb_evicted)}});
      stats_.accepted_with_errors += 1;
      attempts_.clear();
    }
  }

  void truncate_to(int keep) {
    model_.truncate_generated(keep);
    generated_.resize(static_cast<size_t>(keep));
    boundaries_.resize(n_accepted_);
    sentence_start_ = keep;
    sentence_just_completed_ = false;
  }

  void final_sweep(bool allow_regen) {
    if (cfg_.verification.mode == TriggerPolicy::Mode::off) return;
    if (n_accepted_ >= boundaries_.size()) return;
    note(step_, "pause",
                {{"kind", "verification"}, {"reason", "final"}});
    last_pause_completed_[1] = completed_total_;
    verify_pending(allow_regen);
  }

  DecodeModel& model_;
  const Tokenizer& tok_;
  FeedbackContext fb_;
  std::string question_;
  GenerationConfig cfg_;
  const EventSink* sink_;
  Rng sample_rng_;
  MemoryPools pools_;
  EventLog log_;
  GenerationStats stats_;

  std::vector<TokenRecord> generated_;
  std::vector<size_t> boundaries_;
  size_t n_accepted_ = 0;
  int accepted_end_ = 0;
  int sentence_start_ = 0;
  std::vector<AttemptRecord> attempts_;
  int step_ = 0;
  int completed_total_ = 0;
  int last_pause_completed_[2] = {0, 0};
  bool sentence_just_completed_ = false;
  double sentence_mean_entropy_ = 0.0;
  double sentence_min_prob_ = 1.0;
  int next_unit_id_ = 0;
};

}  // namespace

GenerationResult generate(DecodeModel& model, const Tokenizer& tok,
                          const FeedbackContext& fb,
                          const std::string& question,
                          const GenerationConfig& cfg,
                          const EventSink* sink) {
  Engine engine(model, tok, fb, question, cfg, sink);
  return engine.run();
}

}  // namespace wmgen
