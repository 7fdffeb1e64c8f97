// Copyright 2026 The MarkKit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "markkit/error.hpp"
#include "markkit/utf8.hpp"

namespace markkit {

namespace detail {

inline std::ifstream open_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ResourceError("cannot open '" + path + "'");
  return in;
}

inline bool next_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      return out;
    }
    out.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

// Splits on runs of ASCII whitespace.
inline std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Lexicon

struct LexEntry {
  std::optional<std::string> pos;
  std::optional<std::uint64_t> freq;

  bool operator==(const LexEntry&) const = default;
};

class Lexicon {
 public:
  Lexicon() = default;

  // Inserts `word` unless already present. Returns false for a duplicate.
  bool insert(std::u32string word, LexEntry entry) {
    if (word.empty()) throw InputError("lexicon word must be non-empty");
    auto len = word.size();
    auto [it, inserted] = entries_.emplace(std::move(word), std::move(entry));
    if (inserted && len > max_word_len_) max_word_len_ = len;
    return inserted;
  }

  const LexEntry* find(std::u32string_view word) const {
    auto it = entries_.find(std::u32string(word));
    return it == entries_.end() ? nullptr : &it->second;
  }
  bool contains(std::u32string_view word) const { return find(word) != nullptr; }

  std::size_t size() const { return entries_.size(); }
  std::size_t max_word_len() const { return max_word_len_; }
  const std::map<std::u32string, LexEntry>& entries() const { return entries_; }

  // Sorted set of POS tags present in the lexicon.
  std::set<std::string> pos_tags() const {
    std::set<std::string> tags;
    for (const auto& [w, e] : entries_)
      if (e.pos) tags.insert(*e.pos);
    return tags;
  }

  // Number of duplicate lines dropped at load.
  std::size_t duplicates = 0;

  bool operator==(const Lexicon& o) const {
    return entries_ == o.entries_ && max_word_len_ == o.max_word_len_;
  }

 private:
  std::map<std::u32string, LexEntry> entries_;
  std::size_t max_word_len_ = 0;
};

// TSV: word<TAB>[pos]<TAB>[freq]. Blank lines are skipped.
inline Lexicon load_lexicon(std::istream& in) {
  Lexicon lex;
  std::string line;
  std::size_t lineno = 0;
  while (detail::next_line(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cols = detail::split(line, '\t');
    if (cols.size() > 3) throw ParseError("too many columns in lexicon entry", lineno);
    std::u32string word;
    try {
      word = utf8::decode(cols[0]);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), lineno);
    }
    if (word.empty()) throw ParseError("empty lexicon word", lineno);
    LexEntry entry;
    if (cols.size() > 1 && !cols[1].empty()) entry.pos = cols[1];
    if (cols.size() > 2 && !cols[2].empty()) {
      const auto& f = cols[2];
      if (f.find_first_not_of("0123456789") != std::string::npos)
        throw ParseError("frequency must be a non-negative integer: '" + f + "'", lineno);
      try {
        entry.freq = std::stoull(f);
      } catch (const std::exception&) {
        throw ParseError("frequency out of range: '" + f + "'", lineno);
      }
    }
    if (!lex.insert(std::move(word), std::move(entry))) ++lex.duplicates;
  }
  return lex;
}

inline Lexicon load_lexicon(const std::string& path) {
  auto in = detail::open_text(path);
  return load_lexicon(in);
}

// ---------------------------------------------------------------------------
// Word embeddings

class WordEmbeddings {
 public:
  explicit WordEmbeddings(std::size_t dim = 0) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return words_.size(); }

  // Returns false (and stores nothing) for duplicates, wrong lengths and
  // zero-norm vectors.
  bool add(const std::string& word, std::vector<double> vec) {
    if (vec.size() != dim_ || index_.count(word)) return false;
    double sq = 0.0;
    for (double v : vec) sq += v * v;
    if (!(sq > 0.0) || !std::isfinite(sq)) return false;
    index_.emplace(word, words_.size());
    words_.push_back(word);
    lengths_.push_back(utf8::length(word));
    norms_.push_back(std::sqrt(sq));
    data_.insert(data_.end(), vec.begin(), vec.end());
    return true;
  }

  std::optional<std::size_t> index_of(std::string_view word) const {
    auto it = index_.find(std::string(word));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  bool contains(std::string_view word) const { return index_of(word).has_value(); }

  const std::string& word(std::size_t i) const { return words_[i]; }
  const std::vector<std::string>& words() const { return words_; }
  const double* vector(std::size_t i) const { return data_.data() + i * dim_; }
  double norm(std::size_t i) const { return norms_[i]; }
  // Character count of word i.
  std::size_t length(std::size_t i) const { return lengths_[i]; }

  double cosine(std::size_t a, std::size_t b) const {
    const double* x = vector(a);
    const double* y = vector(b);
    double dot = 0.0;
    for (std::size_t k = 0; k < dim_; ++k) dot += x[k] * y[k];
    return dot / (norms_[a] * norms_[b]);
  }

  // Rows rejected at load (wrong length, zero norm, duplicate).
  std::size_t rejected = 0;

  bool operator==(const WordEmbeddings& o) const {
    return dim_ == o.dim_ && words_ == o.words_ && data_ == o.data_;
  }

 private:
  std::size_t dim_;
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> data_;
  std::vector<double> norms_;
  std::vector<std::size_t> lengths_;
};

// word2vec text format: "<count> <dim>" header, then "word v1 ... v_dim".
inline WordEmbeddings load_embeddings(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (header.empty()) {
    if (!detail::next_line(in, line)) return WordEmbeddings{};
    ++lineno;
    header = detail::split_ws(line);
  }
  if (header.size() != 2) throw ParseError("embedding header must be '<count> <dim>'", lineno);
  std::size_t count = 0, dim = 0;
  try {
    std::size_t p1 = 0, p2 = 0;
    count = std::stoull(header[0], &p1);
    dim = std::stoull(header[1], &p2);
    if (p1 != header[0].size() || p2 != header[1].size()) throw std::invalid_argument("");
  } catch (const std::exception&) {
    throw ParseError("embedding header must be '<count> <dim>'", lineno);
  }
  if (dim == 0) throw ParseError("embedding dimension must be positive", lineno);

  WordEmbeddings emb(dim);
  std::size_t rows = 0;
  while (detail::next_line(in, line)) {
    ++lineno;
    auto cols = detail::split_ws(line);
    if (cols.empty()) continue;
    ++rows;
    std::vector<double> vec;
    vec.reserve(cols.size() - 1);
    for (std::size_t k = 1; k < cols.size(); ++k) {
      std::size_t used = 0;
      double v;
      try {
        v = std::stod(cols[k], &used);
      } catch (const std::exception&) {
        throw ParseError("non-numeric embedding component '" + cols[k] + "'", lineno);
      }
      if (used != cols[k].size())
        throw ParseError("non-numeric embedding component '" + cols[k] + "'", lineno);
      vec.push_back(v);
    }
    if (!emb.add(cols[0], std::move(vec))) ++emb.rejected;
  }
  if (rows != count)
    throw ParseError("embedding header declares " + std::to_string(count) + " rows but file has " +
                     std::to_string(rows));
  return emb;
}

inline WordEmbeddings load_embeddings(const std::string& path) {
  auto in = detail::open_text(path);
  return load_embeddings(in);
}

// ---------------------------------------------------------------------------
// Pinyin

// Lower-cases a syllable and removes tone information, both numeric
// ("hao3") and diacritic ("hǎo"). "ü" and "v" are kept as "ü".
inline std::string strip_tone(std::string_view syllable) {
  std::u32string out;
  for (char32_t c : utf8::decode(syllable)) {
    switch (c) {
      case U'ā': case U'á': case U'ǎ': case U'à': c = U'a'; break;
      case U'ē': case U'é': case U'ě': case U'è': c = U'e'; break;
      case U'ī': case U'í': case U'ǐ': case U'ì': c = U'i'; break;
      case U'ō': case U'ó': case U'ǒ': case U'ò': c = U'o'; break;
      case U'ū': case U'ú': case U'ǔ': case U'ù': c = U'u'; break;
      case U'ǖ': case U'ǘ': case U'ǚ': case U'ǜ': case U'v': case U'V': c = U'ü'; break;
      default: break;
    }
    if (c >= U'0' && c <= U'9') continue;
    if (c >= U'A' && c <= U'Z') c = c - U'A' + U'a';
    out.push_back(c);
  }
  return utf8::encode(out);
}

class PinyinTable {
 public:
  // Syllables are stored tone-stripped, joined by single spaces.
  bool add(const std::string& word, const std::vector<std::string>& syllables) {
    if (syllables.empty() || utf8::length(word) != syllables.size() || by_word_.count(word))
      return false;
    std::string key;
    for (const auto& s : syllables) {
      auto stripped = strip_tone(s);
      if (stripped.empty()) return false;
      if (!key.empty()) key.push_back(' ');
      key += stripped;
    }
    by_word_.emplace(word, key);
    by_pinyin_[key].insert(word);
    return true;
  }

  const std::string* pinyin_of(std::string_view word) const {
    auto it = by_word_.find(std::string(word));
    return it == by_word_.end() ? nullptr : &it->second;
  }

  const std::set<std::string>* words_with(std::string_view pinyin) const {
    auto it = by_pinyin_.find(std::string(pinyin));
    return it == by_pinyin_.end() ? nullptr : &it->second;
  }

  std::size_t size() const { return by_word_.size(); }
  const std::map<std::string, std::string>& by_word() const { return by_word_; }
  const std::map<std::string, std::set<std::string>>& by_pinyin() const { return by_pinyin_; }

  // Rows rejected at load (syllable/character count mismatch, duplicates).
  std::size_t rejected = 0;

  bool operator==(const PinyinTable& o) const {
    return by_word_ == o.by_word_ && by_pinyin_ == o.by_pinyin_;
  }

 private:
  std::map<std::string, std::string> by_word_;
  std::map<std::string, std::set<std::string>> by_pinyin_;
};

// TSV: word<TAB>syllable1 syllable2 ...
inline PinyinTable load_pinyin_table(std::istream& in) {
  PinyinTable table;
  std::string line;
  std::size_t lineno = 0;
  while (detail::next_line(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("pinyin entry needs word<TAB>syllables", lineno);
    std::string word = line.substr(0, tab);
    try {
      (void)utf8::decode(line);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), lineno);
    }
    if (word.empty()) throw ParseError("empty pinyin word", lineno);
    auto syllables = detail::split_ws(std::string_view(line).substr(tab + 1));
    if (!table.add(word, syllables)) ++table.rejected;
  }
  return table;
}

inline PinyinTable load_pinyin_table(const std::string& path) {
  auto in = detail::open_text(path);
  return load_pinyin_table(in);
}

// The three knowledge sources used for confusion generation.
struct Resources {
  Lexicon lexicon;
  WordEmbeddings embeddings;
  PinyinTable pinyin;
};

}  // namespace markkit
