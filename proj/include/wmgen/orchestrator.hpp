// The generation loop: token-by-token decoding with sentence boundary
// detection, retrieval/verification pauses (fixed interval or confidence
// triggered), FIFO memory refresh, and backtrack-and-regenerate on sentences
// with unsupported claims.
#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wmgen/factcheck.hpp"
#include "wmgen/memory.hpp"
#include "wmgen/model.hpp"
#include "wmgen/retrieval.hpp"
#include "wmgen/run_config.hpp"
#include "wmgen/tokenizer.hpp"
#include "wmgen/toyworld.hpp"
#include "json.hpp"

namespace wmgen {

// Language-model abstraction the engine decodes against. `pools` passed to
// next_logits/advance are the pools at sampling/ingestion time; the
// transformer implementation attends new tokens to them but never
// reprocesses already-cached context.
class DecodeModel {
 public:
  virtual ~DecodeModel() = default;
  virtual int vocab_size() const = 0;
  virtual MemoryUnit make_unit(const std::string& text, MemoryKind kind,
                               int max_unit_tokens, int id, int step) = 0;
  virtual void reset(std::span<const int> prompt, int context_base,
                     const MemoryPools& pools) = 0;
  virtual const std::vector<double>& next_logits(const MemoryPools& pools) = 0;
  virtual void advance(int token, const MemoryPools& pools) = 0;
  // Keep the prompt plus the first `keep` generated tokens.
  virtual void truncate_generated(int keep) = 0;
};

class TransformerDecodeModel : public DecodeModel {
 public:
  TransformerDecodeModel(const TransformerWeights& w, const Tokenizer& tok,
                         AggregationConfig agg,
                         PrecomputeStore* store = nullptr);

  int vocab_size() const override;
  MemoryUnit make_unit(const std::string& text, MemoryKind kind,
                       int max_unit_tokens, int id, int step) override;
  void reset(std::span<const int> prompt, int context_base,
             const MemoryPools& pools) override;
  const std::vector<double>& next_logits(const MemoryPools& pools) override;
  void advance(int token, const MemoryPools& pools) override;
  void truncate_generated(int keep) override;

  const KVCache& context_cache() const { return ctx_; }

 private:
  const TransformerWeights& weights_;
  const Tokenizer& tok_;
  AggregationConfig agg_;
  PrecomputeStore* store_;
  KVCache ctx_;
  int base_ = 0;
  int prompt_len_ = 0;
  // logits_[0] follows the prompt; logits_[i] follows generated token i-1.
  std::vector<std::vector<double>> logits_;
};

struct Event {
  int step = 0;
  std::string type;
  nlohmann::json payload;
};

struct EventLog {
  std::vector<Event> events;

  void append(int step, std::string type, nlohmann::json payload);
  nlohmann::json to_json() const;  // array of event objects
  // One JSON object per line; optional header object first.
  void save_jsonl(const std::string& path,
                  const nlohmann::json* header = nullptr) const;
  static std::vector<nlohmann::json> load_jsonl(const std::string& path);
};

struct GenerationStats {
  int decode_steps = 0;
  int backtracks = 0;
  int accepted_passages = 0;
  int regenerated_tokens = 0;
  int accepted_with_errors = 0;
};

struct GenerationResult {
  std::string response;
  EventLog log;
  GenerationStats stats;
};

struct FeedbackContext {
  const Datastore* datastore = nullptr;
  const TfIndex* index = nullptr;
  const World* world = nullptr;
};

enum class TriggerKind { retrieval, verification };

struct PauseState {
  int step = 0;
  int completed_sentences = 0;
  int completed_at_last_pause = 0;
  bool sentence_just_completed = false;
  double sentence_mean_entropy = 0.0;
  double sentence_min_prob = 1.0;
};

// Pause decision for one decode step (called after sampling). Verification
// requires a new completed sentence since its last pause; fixed-interval
// retrieval runs on token cadence with the latest completed sentence as the
// query's sentence component.
bool should_pause(const PauseState& state, const TriggerPolicy& policy,
                  TriggerKind kind);

// Boundary when the decoded tail ends in '.', '!', '?' or a newline, unless
// the period closes a known abbreviation.
bool detect_sentence_end(const std::string& decoded_tail);

// Optional sink invoked as each event is recorded (live tracing).
using EventSink = std::function<void(const Event&)>;

GenerationResult generate(DecodeModel& model, const Tokenizer& tok,
                          const FeedbackContext& fb,
                          const std::string& question,
                          const GenerationConfig& cfg,
                          const EventSink* sink = nullptr);

}  // namespace wmgen
