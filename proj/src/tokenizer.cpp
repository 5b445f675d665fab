#include "wmgen/tokenizer.hpp"

#include <cctype>
#include <fstream>

#include "wmgen/errors.hpp"
#include "json.hpp"

namespace wmgen {

namespace {
bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}
bool attaches_left(const std::string& w) {
  return w == "." || w == "," || w == "!" || w == "?" || w == ")" ||
         w == ":" || w == ";";
}
}  // namespace

Tokenizer Tokenizer::build(const std::vector<std::string>& words) {
  Tokenizer t;
  auto add = [&t](const std::string& w) {
    if (t.word_to_id_.count(w)) return;
    int id = static_cast<int>(t.id_to_word_.size());
    t.word_to_id_.emplace(w, id);
    t.id_to_word_.push_back(w);
  };
  add("<unk>");
  add("<bot>");
  add("<eot>");
  add(".");
  add("!");
  add("?");
  for (const auto& w : words) {
    for (const auto& piece : split_words(w)) add(piece);
  }
  return t;
}

std::vector<std::string> Tokenizer::split_words(std::string_view text) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (is_word_char(c)) {
      size_t j = i;
      while (j < text.size() && is_word_char(text[j])) ++j;
      out.emplace_back(text.substr(i, j - i));
      i = j;
    } else {
      out.emplace_back(1, c);
      ++i;
    }
  }
  return out;
}

std::vector<int> Tokenizer::tokenize(std::string_view text) const {
  std::vector<int> ids;
  for (const auto& w : split_words(text)) ids.push_back(id_of(w));
  return ids;
}

std::string Tokenizer::detokenize(std::span<const int> tokens) const {
  std::string out;
  bool suppress_space = false;
  for (int id : tokens) {
    if (id < 0 || id >= size()) continue;
    if (id == kUnk || id == kBot || id == kEot) continue;
    const std::string& w = id_to_word_[static_cast<size_t>(id)];
    if (!out.empty() && !attaches_left(w) && !suppress_space) out += ' ';
    out += w;
    suppress_space = (w == "(");
  }
  return out;
}

int Tokenizer::id_of(std::string_view word) const {
  auto it = word_to_id_.find(std::string(word));
  return it == word_to_id_.end() ? kUnk : it->second;
}

const std::string& Tokenizer::word_of(int id) const {
  static const std::string unk = "<unk>";
  if (id < 0 || id >= size()) return unk;
  return id_to_word_[static_cast<size_t>(id)];
}

void Tokenizer::save_json(const std::string& path) const {
  nlohmann::json j = nlohmann::json::object();
  for (int i = 0; i < size(); ++i) j[id_to_word_[static_cast<size_t>(i)]] = i;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vocabulary file: " + path);
  out << j.dump(2) << "\n";
}

Tokenizer Tokenizer::load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read vocabulary file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw IoError("malformed vocabulary JSON in " + path + ": " + e.what());
  }
  Tokenizer t;
  t.id_to_word_.resize(j.size());
  for (auto it = j.begin(); it != j.end(); ++it) {
    int id = it.value().get<int>();
    if (id < 0 || id >= static_cast<int>(j.size())) {
      throw IoError("vocabulary id out of range in " + path);
    }
    t.id_to_word_[static_cast<size_t>(id)] = it.key();
    t.word_to_id_[it.key()] = id;
  }
  if (t.size() < 6 || t.id_to_word_[0] != "<unk>" || t.id_to_word_[2] != "<eot>") {
    throw IoError("vocabulary missing reserved tokens: " + path);
  }
  return t;
}

}  // namespace wmgen
