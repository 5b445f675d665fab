// Word-level tokenizer over a closed vocabulary. Words are runs of
// alphanumerics (plus '_', '-'); punctuation characters are single tokens.
// IDs 0..5 are reserved: <unk>, <bot>, <eot>, '.', '!', '?'.
#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace wmgen {

class Tokenizer {
 public:
  static constexpr int kUnk = 0;
  static constexpr int kBot = 1;
  static constexpr int kEot = 2;
  static constexpr int kPeriod = 3;
  static constexpr int kBang = 4;
  static constexpr int kQuestion = 5;

  Tokenizer() = default;

  // Builds a vocabulary: specials, the three sentence terminators, then
  // `words` in first-occurrence order (duplicates ignored).
  static Tokenizer build(const std::vector<std::string>& words);

  // Splits text into word/punctuation pieces (no vocabulary lookup).
  static std::vector<std::string> split_words(std::string_view text);

  std::vector<int> tokenize(std::string_view text) const;

  // Joins tokens with spaces, attaching closing punctuation to the previous
  // word. Special tokens are skipped.
  std::string detokenize(std::span<const int> tokens) const;

  int id_of(std::string_view word) const;  // kUnk when absent
  const std::string& word_of(int id) const;
  bool is_terminator(int id) const {
    return id == kPeriod || id == kBang || id == kQuestion;
  }
  int size() const { return static_cast<int>(id_to_word_.size()); }

  void save_json(const std::string& path) const;
  static Tokenizer load_json(const std::string& path);

 private:
  std::unordered_map<std::string, int> word_to_id_;
  std::vector<std::string> id_to_word_;
};

}  // namespace wmgen
