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

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "markkit/error.hpp"
#include "markkit/resources.hpp"
#include "markkit/segmenter.hpp"
#include "markkit/utf8.hpp"

namespace markkit {

using TokenId = std::int32_t;

inline constexpr const char* kPadToken = "[PAD]";
inline constexpr const char* kUnkToken = "[UNK]";
inline constexpr const char* kClsToken = "[CLS]";
inline constexpr const char* kSepToken = "[SEP]";
inline constexpr const char* kMaskToken = "[MASK]";
inline constexpr const char* kMarkerToken = "[S]";

// Token used for the POS-specific marker of `pos`, e.g. "[S-NN]".
inline std::string pos_marker_token(const std::string& pos) { return "[S-" + pos + "]"; }

class Vocab {
 public:
  // `tokens[i]` gets id i. Throws ConfigError on duplicates or when a
  // required special token (or `marker`) is missing.
  explicit Vocab(std::vector<std::string> tokens, std::string marker = kMarkerToken)
      : tokens_(std::move(tokens)), marker_token_(std::move(marker)) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (tokens_[i].empty()) throw ConfigError("empty token at id " + std::to_string(i));
      if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second)
        throw ConfigError("duplicate vocabulary token '" + tokens_[i] + "'");
    }
    std::vector<std::string> missing;
    for (const char* t : {kPadToken, kUnkToken, kClsToken, kSepToken, kMaskToken})
      if (!index_.count(t)) missing.emplace_back(t);
    if (!index_.count(marker_token_)) missing.push_back(marker_token_);
    if (!missing.empty()) {
      std::string msg = "vocabulary is missing required token(s):";
      for (const auto& m : missing) msg += " " + m;
      throw ConfigError(msg);
    }
    pad_ = index_.at(kPadToken);
    unk_ = index_.at(kUnkToken);
    cls_ = index_.at(kClsToken);
    sep_ = index_.at(kSepToken);
    mask_ = index_.at(kMaskToken);
    marker_ = index_.at(marker_token_);

    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      const auto& t = tokens_[i];
      const auto id = static_cast<TokenId>(i);
      if (id == pad_ || id == unk_ || id == cls_ || id == sep_ || id == mask_) continue;
      if (id == marker_) {
        marker_ids_.insert(id);
        continue;
      }
      if (t.size() > 4 && t.rfind("[S-", 0) == 0 && t.back() == ']') {
        pos_markers_.emplace(t.substr(3, t.size() - 4), id);
        marker_ids_.insert(id);
        continue;
      }
      std::u32string cps;
      try {
        cps = utf8::decode(t);
      } catch (const ParseError&) {
        continue;
      }
      if (cps.size() == 1) {
        char_index_.emplace(cps[0], id);
        char_ids_.push_back(id);
      }
    }
  }

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::optional<TokenId> find(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  TokenId char_id(char32_t c) const {
    auto it = char_index_.find(c);
    return it == char_index_.end() ? unk_ : it->second;
  }

  TokenId pad() const { return pad_; }
  TokenId unk() const { return unk_; }
  TokenId cls() const { return cls_; }
  TokenId sep() const { return sep_; }
  TokenId mask() const { return mask_; }
  TokenId marker() const { return marker_; }

  // Per-POS marker, falling back to the generic marker for unknown tags.
  TokenId marker_for(const std::optional<std::string>& pos) const {
    if (!pos) return marker_;
    auto it = pos_markers_.find(*pos);
    return it == pos_markers_.end() ? marker_ : it->second;
  }

  bool is_marker(TokenId id) const { return marker_ids_.count(id) > 0; }
  bool is_special(TokenId id) const {
    return id == pad_ || id == unk_ || id == cls_ || id == sep_ || id == mask_;
  }
  // Ids of single-character tokens, ascending.
  const std::vector<TokenId>& char_ids() const { return char_ids_; }
  const std::map<std::string, TokenId>& pos_markers() const { return pos_markers_; }

  void write(std::ostream& out) const {
    for (const auto& t : tokens_) out << t << '\n';
  }

  bool operator==(const Vocab& o) const { return tokens_ == o.tokens_ && marker_ == o.marker_; }

 private:
  std::vector<std::string> tokens_;
  std::string marker_token_;
  std::unordered_map<std::string, TokenId> index_;
  std::unordered_map<char32_t, TokenId> char_index_;
  std::vector<TokenId> char_ids_;
  std::map<std::string, TokenId> pos_markers_;
  std::set<TokenId> marker_ids_;
  TokenId pad_ = 0, unk_ = 0, cls_ = 0, sep_ = 0, mask_ = 0, marker_ = 0;
};

// One token per line; id is the zero-based line number.
inline Vocab load_vocab(std::istream& in, const std::string& marker = kMarkerToken) {
  std::vector<std::string> tokens;
  std::string line;
  while (detail::next_line(in, line)) tokens.push_back(line);
  return Vocab(std::move(tokens), marker);
}

inline Vocab load_vocab(const std::string& path, const std::string& marker = kMarkerToken) {
  auto in = detail::open_text(path);
  return load_vocab(in, marker);
}

// Specials, the generic marker, one marker per lexicon POS tag (sorted),
// then every character of the lexicon and of `extra_text`, by code point.
inline Vocab build_vocab(const Lexicon& lexicon, std::u32string_view extra_text = {}) {
  std::vector<std::string> tokens = {kPadToken, kUnkToken, kClsToken, kSepToken, kMaskToken,
                                     kMarkerToken};
  for (const auto& pos : lexicon.pos_tags()) tokens.push_back(pos_marker_token(pos));
  std::set<char32_t> chars(extra_text.begin(), extra_text.end());
  for (const auto& [w, e] : lexicon.entries()) chars.insert(w.begin(), w.end());
  for (char32_t c : chars) {
    if (c == U' ' || c == U'\t' || c == U'\n' || c == U'\r') continue;
    tokens.push_back(utf8::encode(c));
  }
  return Vocab(std::move(tokens));
}

// ---------------------------------------------------------------------------

struct EncodeOptions {
  bool insert_markers = true;
  bool pos_markers = false;
  std::size_t max_len = 512;
  bool add_cls_sep = true;
};

inline constexpr std::size_t kNoAlignment = static_cast<std::size_t>(-1);

struct MarkedSequence {
  std::vector<TokenId> ids;
  std::vector<std::size_t> marker_positions;  // ascending
  std::vector<std::size_t> word_of_marker;    // parallel to marker_positions
  // Source character index per token; kNoAlignment for markers and framing.
  std::vector<std::size_t> char_alignment;
  // Token range [first, second) of each encoded word's characters.
  std::vector<std::pair<std::size_t, std::size_t>> word_tokens;
  bool truncated = false;
  bool framed = false;

  std::size_t num_words() const { return word_tokens.size(); }
  bool operator==(const MarkedSequence&) const = default;
};

inline MarkedSequence encode_marked(const Segmentation& seg, const Vocab& vocab,
                                    const EncodeOptions& opts = {}) {
  if (opts.max_len == 0) throw ConfigError("max_len must be positive");
  if (opts.add_cls_sep && opts.max_len < 3)
    throw ConfigError("max_len " + std::to_string(opts.max_len) + " cannot hold CLS and SEP");
  if (!seg.valid()) throw InputError("segmentation does not tile its text");

  MarkedSequence m;
  m.framed = opts.add_cls_sep;
  const std::size_t budget = opts.max_len - (opts.add_cls_sep ? 2 : 0);
  std::size_t body = 0;
  std::size_t kept_words = 0;
  for (const auto& span : seg.spans) {
    const std::size_t cost = span.length() + (opts.insert_markers ? 1 : 0);
    if (body + cost > budget) {
      m.truncated = true;
      break;
    }
    body += cost;
    ++kept_words;
  }

  m.ids.reserve(body + 2);
  m.char_alignment.reserve(body + 2);
  if (opts.add_cls_sep) {
    m.ids.push_back(vocab.cls());
    m.char_alignment.push_back(kNoAlignment);
  }
  for (std::size_t w = 0; w < kept_words; ++w) {
    const auto& span = seg.spans[w];
    const std::size_t first = m.ids.size();
    for (std::size_t c = span.start; c < span.end; ++c) {
      m.ids.push_back(vocab.char_id(seg.text[c]));
      m.char_alignment.push_back(c);
    }
    m.word_tokens.emplace_back(first, m.ids.size());
    if (opts.insert_markers) {
      m.marker_positions.push_back(m.ids.size());
      m.word_of_marker.push_back(w);
      m.ids.push_back(opts.pos_markers ? vocab.marker_for(span.pos) : vocab.marker());
      m.char_alignment.push_back(kNoAlignment);
    }
  }
  if (opts.add_cls_sep) {
    m.ids.push_back(vocab.sep());
    m.char_alignment.push_back(kNoAlignment);
  }
  return m;
}

inline std::vector<TokenId> strip_markers(const MarkedSequence& m) {
  std::vector<TokenId> out;
  out.reserve(m.ids.size() - m.marker_positions.size());
  auto next = m.marker_positions.begin();
  for (std::size_t i = 0; i < m.ids.size(); ++i) {
    if (next != m.marker_positions.end() && *next == i) {
      ++next;
      continue;
    }
    out.push_back(m.ids[i]);
  }
  return out;
}

}  // namespace markkit
