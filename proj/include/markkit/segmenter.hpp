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
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "markkit/error.hpp"
#include "markkit/resources.hpp"
#include "markkit/utf8.hpp"

namespace markkit {

struct WordSpan {
  std::size_t start = 0;  // inclusive character index
  std::size_t end = 0;    // exclusive
  std::optional<std::string> pos;

  std::size_t length() const { return end - start; }
  bool operator==(const WordSpan&) const = default;
};

struct Segmentation {
  std::u32string text;
  std::vector<WordSpan> spans;

  std::u32string_view word(std::size_t i) const {
    return std::u32string_view(text).substr(spans[i].start, spans[i].length());
  }
  std::string word_utf8(std::size_t i) const { return utf8::encode(word(i)); }

  // Spans are non-empty and tile [0, text.size()) exactly.
  bool valid() const {
    std::size_t at = 0;
    for (const auto& s : spans) {
      if (s.start != at || s.end <= s.start) return false;
      at = s.end;
    }
    return at == text.size();
  }

  bool operator==(const Segmentation&) const = default;
};

// Pluggable segmentation backend.
class Segmenter {
 public:
  virtual ~Segmenter() = default;
  virtual Segmentation segment(std::u32string_view text) const = 0;
};

// Greedy forward maximum matching: at each position take the longest
// lexicon word starting there, else a single character.
inline Segmentation segment(std::u32string_view text, const Lexicon& lexicon) {
  Segmentation seg;
  seg.text = std::u32string(text);
  const std::size_t n = text.size();
  std::size_t i = 0;
  while (i < n) {
    std::size_t take = 1;
    const LexEntry* entry = nullptr;
    const std::size_t longest = std::min(lexicon.max_word_len(), n - i);
    for (std::size_t len = longest; len >= 1; --len) {
      if (const auto* e = lexicon.find(text.substr(i, len))) {
        take = len;
        entry = e;
        break;
      }
    }
    WordSpan span{i, i + take, std::nullopt};
    if (entry && entry->pos) span.pos = entry->pos;
    seg.spans.push_back(std::move(span));
    i += take;
  }
  return seg;
}

inline Segmentation segment(std::string_view utf8_text, const Lexicon& lexicon) {
  return segment(std::u32string_view(utf8::decode(utf8_text)), lexicon);
}

class MaxMatchSegmenter : public Segmenter {
 public:
  explicit MaxMatchSegmenter(const Lexicon& lexicon) : lexicon_(lexicon) {}
  Segmentation segment(std::u32string_view text) const override {
    return markkit::segment(text, lexicon_);
  }

 private:
  const Lexicon& lexicon_;
};

// Parses one line of externally segmented text: words separated by single
// spaces, each optionally suffixed "/POS".
inline Segmentation parse_pretokenized(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  Segmentation seg;
  if (line.empty()) return seg;
  std::size_t start = 0;
  while (true) {
    auto sp = line.find(' ', start);
    auto token = line.substr(start, sp == std::string_view::npos ? std::string_view::npos : sp - start);
    if (token.empty()) throw ParseError("empty word token in pre-segmented line");
    std::optional<std::string> pos;
    auto slash = token.rfind('/');
    if (slash != std::string_view::npos && slash > 0 && slash + 1 < token.size()) {
      pos = std::string(token.substr(slash + 1));
      token = token.substr(0, slash);
    }
    auto chars = utf8::decode(token);
    WordSpan span{seg.text.size(), seg.text.size() + chars.size(), std::move(pos)};
    seg.text += chars;
    seg.spans.push_back(std::move(span));
    if (sp == std::string_view::npos) break;
    start = sp + 1;
  }
  return seg;
}

// Inverse of parse_pretokenized.
inline std::string render_spaced(const Segmentation& seg, bool with_pos = false) {
  std::string out;
  for (std::size_t i = 0; i < seg.spans.size(); ++i) {
    if (i) out.push_back(' ');
    out += seg.word_utf8(i);
    if (with_pos && seg.spans[i].pos) {
      out.push_back('/');
      out += *seg.spans[i].pos;
    }
  }
  return out;
}

}  // namespace markkit
