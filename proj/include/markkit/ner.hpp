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
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "markkit/error.hpp"
#include "markkit/marker_encoder.hpp"
#include "markkit/resources.hpp"
#include "markkit/segmenter.hpp"

namespace markkit::ner {

inline constexpr const char* kOutside = "O";

struct Tag {
  char prefix = 'O';  // one of B M E S I O
  std::string type;
};

inline Tag parse_tag(std::string_view s) {
  if (s == "O") return {'O', ""};
  if (s.size() >= 1 && std::string_view("BMESI").find(s[0]) != std::string_view::npos) {
    if (s.size() == 1) return {s[0], ""};
    if (s[1] == '-') return {s[0], std::string(s.substr(2))};
  }
  throw InputError("unparseable tag '" + std::string(s) + "'");
}

// Rewrites BIO (or BIOES with I as the middle) tags as BMESO.
inline std::vector<std::string> to_bmeso(const std::vector<std::string>& tags) {
  std::vector<Tag> parsed;
  parsed.reserve(tags.size());
  bool has_i = false, has_es = false;
  for (const auto& t : tags) {
    parsed.push_back(parse_tag(t));
    has_i |= parsed.back().prefix == 'I';
    has_es |= parsed.back().prefix == 'E' || parsed.back().prefix == 'S' ||
              parsed.back().prefix == 'M';
  }
  if (!has_i) return tags;
  std::vector<std::string> out(tags.size());
  for (std::size_t i = 0; i < parsed.size(); ++i) {
    const auto& t = parsed[i];
    char p = t.prefix;
    if (has_es) {
      if (p == 'I') p = 'M';
    } else if (p == 'B' || p == 'I') {
      const bool continues = i + 1 < parsed.size() && parsed[i + 1].prefix == 'I' &&
                             parsed[i + 1].type == t.type;
      if (p == 'B') p = continues ? 'B' : 'S';
      else p = continues ? 'M' : 'E';
    }
    out[i] = p == 'O' ? std::string(kOutside) : std::string(1, p) + (t.type.empty() ? "" : "-" + t.type);
  }
  return out;
}

struct EntitySpan {
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive
  std::string type;

  auto operator<=>(const EntitySpan&) const = default;
};

// Strict BMESO span extraction: B M* E and S form spans; any broken run
// (M/E without a matching open B, a dangling B) yields nothing.
inline std::set<EntitySpan> extract_spans(const std::vector<std::string>& raw_tags) {
  const auto tags = to_bmeso(raw_tags);
  std::set<EntitySpan> spans;
  std::optional<std::pair<std::size_t, std::string>> open;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const Tag t = parse_tag(tags[i]);
    switch (t.prefix) {
      case 'B':
        open = std::make_pair(i, t.type);
        break;
      case 'M':
        if (open && open->second != t.type) open.reset();
        break;
      case 'E':
        if (open && open->second == t.type) spans.insert({open->first, i + 1, t.type});
        open.reset();
        break;
      case 'S':
        spans.insert({i, i + 1, t.type});
        open.reset();
        break;
      default:
        open.reset();
        break;
    }
  }
  return spans;
}

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

inline Prf prf_from_counts(std::size_t tp, std::size_t npred, std::size_t ngold) {
  Prf r;
  r.precision = npred ? double(tp) / double(npred) : (ngold ? 0.0 : 1.0);
  r.recall = ngold ? double(tp) / double(ngold) : (npred ? 0.0 : 1.0);
  const double s = r.precision + r.recall;
  r.f1 = s > 0.0 ? 2.0 * r.precision * r.recall / s : 0.0;
  return r;
}

// Exact span-and-type match. Empty prediction against empty gold scores 1.
inline Prf span_f1(const std::set<EntitySpan>& pred, const std::set<EntitySpan>& gold) {
  std::size_t tp = 0;
  for (const auto& s : pred) tp += gold.count(s);
  return prf_from_counts(tp, pred.size(), gold.size());
}

// Corpus-level accumulator: counts are summed before dividing.
struct NerScore {
  std::size_t true_positives = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;
  std::size_t tokens_correct = 0;
  std::size_t tokens = 0;

  void add(const std::vector<std::string>& pred_tags, const std::vector<std::string>& gold_tags) {
    if (pred_tags.size() != gold_tags.size())
      throw InputError("prediction has " + std::to_string(pred_tags.size()) + " tags, gold has " +
                       std::to_string(gold_tags.size()));
    auto p = extract_spans(pred_tags);
    auto g = extract_spans(gold_tags);
    for (const auto& s : p) true_positives += g.count(s);
    predicted += p.size();
    gold += g.size();
    for (std::size_t i = 0; i < pred_tags.size(); ++i)
      tokens_correct += pred_tags[i] == gold_tags[i];
    tokens += pred_tags.size();
  }

  Prf spans() const { return prf_from_counts(true_positives, predicted, gold); }
  double token_accuracy() const { return tokens ? double(tokens_correct) / double(tokens) : 1.0; }
};

// ---------------------------------------------------------------------------
// Marker alignment

struct NerExample {
  std::u32string chars;
  std::vector<std::string> labels;
  std::optional<Segmentation> seg;
};

// Characters keep their tags, each marker copies the tag of the token before
// it, framing tokens get O.
inline std::vector<std::string> align_labels_with_markers(const NerExample& ex,
                                                          const MarkedSequence& marked) {
  if (ex.labels.size() != ex.chars.size())
    throw InputError("example has " + std::to_string(ex.chars.size()) + " characters but " +
                     std::to_string(ex.labels.size()) + " labels");
  std::size_t aligned = 0;
  for (auto a : marked.char_alignment) aligned += a != kNoAlignment;
  if (aligned != ex.labels.size())
    throw InputError("marked sequence covers " + std::to_string(aligned) + " characters, example has " +
                     std::to_string(ex.labels.size()));
  std::vector<std::string> out(marked.ids.size(), kOutside);
  auto next_marker = marked.marker_positions.begin();
  for (std::size_t i = 0; i < marked.ids.size(); ++i) {
    if (next_marker != marked.marker_positions.end() && *next_marker == i) {
      ++next_marker;
      if (i > 0) out[i] = out[i - 1];
      continue;
    }
    const auto a = marked.char_alignment[i];
    if (a == kNoAlignment) continue;
    if (a >= ex.labels.size()) throw InputError("alignment points past the example");
    out[i] = ex.labels[a];
  }
  return out;
}

// Drops marker and framing positions, restoring one tag per character.
inline std::vector<std::string> strip_marker_labels(const std::vector<std::string>& tags,
                                                    const MarkedSequence& marked) {
  if (tags.size() != marked.ids.size())
    throw InputError("tag list has " + std::to_string(tags.size()) + " entries, sequence has " +
                     std::to_string(marked.ids.size()));
  std::vector<std::string> out;
  out.reserve(tags.size());
  for (std::size_t i = 0; i < tags.size(); ++i)
    if (marked.char_alignment[i] != kNoAlignment) out.push_back(tags[i]);
  return out;
}

// ---------------------------------------------------------------------------
// CoNLL-style TSV: char<TAB>tag per line, blank line between sentences.

struct TaggedSentence {
  std::vector<std::string> chars;
  std::vector<std::string> tags;
};

inline std::vector<TaggedSentence> read_conll(std::istream& in) {
  std::vector<TaggedSentence> out;
  TaggedSentence cur;
  std::string line;
  std::size_t lineno = 0;
  while (detail::next_line(in, line)) {
    ++lineno;
    if (line.empty()) {
      if (!cur.chars.empty()) out.push_back(std::move(cur));
      cur = {};
      continue;
    }
    auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos)
      throw ParseError("expected char<TAB>tag", lineno);
    std::string tag = line.substr(tab + 1);
    try {
      (void)parse_tag(tag);
    } catch (const InputError& e) {
      throw ParseError(e.what(), lineno);
    }
    cur.chars.push_back(line.substr(0, tab));
    cur.tags.push_back(std::move(tag));
  }
  if (!cur.chars.empty()) out.push_back(std::move(cur));
  return out;
}

inline std::vector<TaggedSentence> read_conll(const std::string& path) {
  auto in = markkit::detail::open_text(path);
  return read_conll(in);
}

inline void write_conll(std::ostream& out, const std::vector<TaggedSentence>& sents) {
  for (std::size_t s = 0; s < sents.size(); ++s) {
    if (s) out << '\n';
    for (std::size_t i = 0; i < sents[s].chars.size(); ++i)
      out << sents[s].chars[i] << '\t' << sents[s].tags[i] << '\n';
  }
}

}  // namespace markkit::ner
