// Passage datastore and the built-in relevance scorer: cosine similarity of
// L2-normalized hashed term-frequency vectors (4096 buckets, lowercase word
// tokens). Deterministic and dependency-free; swap the scorer for anything
// monotone in relevance via the Scorer interface.
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace wmgen {

struct Passage {
  std::string id;
  std::string text;
  std::string source;
};

struct Datastore {
  std::vector<Passage> passages;

  static Datastore load_jsonl(const std::string& path);
  void save_jsonl(const std::string& path) const;
};

inline constexpr int kTfBuckets = 4096;

// Sparse hashed-TF vector, bucket-sorted, L2-normalized.
struct TfVector {
  std::vector<std::pair<int, double>> weights;
};

TfVector tf_vector(const std::string& text);
double tf_cosine(const TfVector& a, const TfVector& b);

// Prebuilt per-passage vectors. `ingest` persists this as JSON; retrieval
// accepts a freshly built or loaded index interchangeably.
struct TfIndex {
  std::vector<TfVector> vectors;  // parallel to datastore passages

  static TfIndex build(const Datastore& ds);
  void save_json(const std::string& path, const Datastore& ds) const;
  static TfIndex load_json(const std::string& path, const Datastore& ds);
};

struct ScoredPassage {
  Passage passage;
  double score = 0.0;
};

// Scores all passages against `query`, keeps score > tau, sorts by
// descending score (ties by ascending passage id), truncates to top_n.
// tau outside [0, 1] is a configuration error for the built-in scorer.
std::vector<ScoredPassage> retrieve(const Datastore& ds, const TfIndex& index,
                                    const std::string& query, double tau,
                                    int top_n);

// Question and sentence joined by one space; empty sentence yields the
// question alone.
std::string build_query(const std::string& question,
                        const std::string& sentence);

}  // namespace wmgen
