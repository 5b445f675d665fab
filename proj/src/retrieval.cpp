#include "wmgen/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>

#include "wmgen/errors.hpp"
#include "wmgen/rng.hpp"
#include "wmgen/tokenizer.hpp"
#include "json.hpp"

namespace wmgen {

Datastore Datastore::load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read datastore: " + path);
  Datastore ds;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw IoError("malformed datastore line " + std::to_string(line_no) +
                    " in " + path + ": " + e.what());
    }
    Passage p;
    p.id = j.at("id").get<std::string>();
    p.text = j.at("text").get<std::string>();
    p.source = j.value("source", "");
    if (p.text.empty()) throw IoError("empty passage text at line " + std::to_string(line_no));
    ds.passages.push_back(std::move(p));
  }
  return ds;
}

void Datastore::save_jsonl(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write datastore: " + path);
  for (const auto& p : passages) {
    nlohmann::json j{{"id", p.id}, {"text", p.text}, {"source", p.source}};
    out << j.dump() << "\n";
  }
}

TfVector tf_vector(const std::string& text) {
  std::map<int, double> counts;
  for (auto& w : Tokenizer::split_words(text)) {
    // Word tokens only; punctuation pieces carry no relevance signal.
    if (!std::isalnum(static_cast<unsigned char>(w[0]))) continue;
    for (auto& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    counts[static_cast<int>(fnv1a64(w) % kTfBuckets)] += 1.0;
  }
  TfVector v;
  double sq = 0.0;
  for (auto& [bucket, count] : counts) sq += count * count;
  const double inv = sq > 0.0 ? 1.0 / std::sqrt(sq) : 0.0;
  v.weights.reserve(counts.size());
  for (auto& [bucket, count] : counts) v.weights.emplace_back(bucket, count * inv);
  return v;
}

double tf_cosine(const TfVector& a, const TfVector& b) {
  double s = 0.0;
  size_t i = 0, j = 0;
  while (i < a.weights.size() && j < b.weights.size()) {
    if (a.weights[i].first < b.weights[j].first) {
      ++i;
    } else if (a.weights[i].first > b.weights[j].first) {
      ++j;
    } else {
      s += a.weights[i].second * b.weights[j].second;
      ++i;
      ++j;
    }
  }
  return s;
}

TfIndex TfIndex::build(const Datastore& ds) {
  TfIndex index;
  index.vectors.resize(ds.passages.size());
  const int64_t n = static_cast<int64_t>(ds.passages.size());
#pragma omp parallel for if (n > 256) schedule(static)
  for (int64_t i = 0; i < n; ++i) {
    index.vectors[static_cast<size_t>(i)] =
        tf_vector(ds.passages[static_cast<size_t>(i)].text);
  }
  return index;
}

void TfIndex::save_json(const std::string& path, const Datastore& ds) const {
  nlohmann::json j;
  j["buckets"] = kTfBuckets;
  j["entries"] = nlohmann::json::array();
  for (size_t i = 0; i < vectors.size(); ++i) {
    nlohmann::json weights = nlohmann::json::array();
    for (const auto& [b, v] : vectors[i].weights) weights.push_back({b, v});
    j["entries"].push_back({{"id", ds.passages[i].id}, {"weights", weights}});
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write index: " + path);
  out << j.dump() << "\n";
}

TfIndex TfIndex::load_json(const std::string& path, const Datastore& ds) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read index: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw IoError("malformed index JSON in " + path + ": " + e.what());
  }
  if (j.at("buckets").get<int>() != kTfBuckets) {
    throw IoError("index bucket count mismatch in " + path);
  }
  const auto& entries = j.at("entries");
  if (entries.size() != ds.passages.size()) {
    throw IoError("index entry count does not match datastore in " + path);
  }
  TfIndex index;
  index.vectors.resize(entries.size());
  for (size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].at("id").get<std::string>() != ds.passages[i].id) {
      throw IoError("index passage order mismatch in " + path);
    }
    for (const auto& wv : entries[i].at("weights")) {
      index.vectors[i].weights.emplace_back(wv[0].get<int>(), wv[1].get<double>());
    }
  }
  return index;
}

std::vector<ScoredPassage> retrieve(const Datastore& ds, const TfIndex& index,
                                    const std::string& query, double tau,
                                    int top_n) {
  if (tau < 0.0 || tau > 1.0) {
    throw ConfigError("retrieval threshold tau must be in [0, 1]");
  }
  if (top_n < 1) throw ConfigError("retrieval top_n must be >= 1");
  if (index.vectors.size() != ds.passages.size()) {
    throw ContractViolation("retrieval index does not match datastore");
  }
  const TfVector qv = tf_vector(query);
  std::vector<ScoredPassage> hits;
  for (size_t i = 0; i < ds.passages.size(); ++i) {
    const double s = tf_cosine(qv, index.vectors[i]);
    if (s > tau) hits.push_back({ds.passages[i], s});
  }
  std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.passage.id < b.passage.id;
  });
  if (static_cast<int>(hits.size()) > top_n) {
    hits.resize(static_cast<size_t>(top_n));
  }
  return hits;
}

std::string build_query(const std::string& question,
                        const std::string& sentence) {
  if (sentence.empty()) return question;
  return question + " " + sentence;
}

}  // namespace wmgen
