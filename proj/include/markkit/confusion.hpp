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
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "markkit/error.hpp"
#include "markkit/resources.hpp"
#include "markkit/rng.hpp"
#include "markkit/utf8.hpp"

namespace markkit {

enum class ConfusionKind { kPinyin, kSynonym };

inline const char* to_string(ConfusionKind k) {
  return k == ConfusionKind::kPinyin ? "PINYIN" : "SYNONYM";
}

struct ConfusionChoice {
  std::string original;
  std::string replacement;
  ConfusionKind kind = ConfusionKind::kPinyin;
  double score = 1.0;  // cosine for synonyms, 1.0 for pinyin

  bool operator==(const ConfusionChoice&) const = default;
};

struct ConfusionPolicy {
  double p_pinyin = 0.5;
  std::size_t k_syn = 5;

  void validate() const {
    if (!(p_pinyin >= 0.0 && p_pinyin <= 1.0)) throw ConfigError("p_pinyin must lie in [0, 1]");
    if (k_syn == 0) throw ConfigError("k_syn must be at least 1");
  }
};

// Top-k equal-length neighbours of `word` by cosine similarity; ties are
// broken by ascending word order.
inline std::vector<ConfusionChoice> synonym_candidates(std::string_view word,
                                                       const WordEmbeddings& emb, std::size_t k) {
  std::vector<ConfusionChoice> out;
  auto self = emb.index_of(word);
  if (!self || k == 0) return out;
  const std::size_t len = emb.length(*self);

  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t i = 0; i < emb.size(); ++i) {
    if (i == *self || emb.length(i) != len) continue;
    scored.emplace_back(std::clamp(emb.cosine(*self, i), -1.0, 1.0), i);
  }
  auto better = [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return emb.word(a.second) < emb.word(b.second);
  };
  const std::size_t take = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take),
                    scored.end(), better);
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i)
    out.push_back({std::string(word), emb.word(scored[i].second), ConfusionKind::kSynonym,
                   scored[i].first});
  return out;
}

// Homophones of `word` (identical tone-stripped pinyin), sorted.
inline std::vector<ConfusionChoice> pinyin_candidates(std::string_view word,
                                                      const PinyinTable& table) {
  std::vector<ConfusionChoice> out;
  const auto* py = table.pinyin_of(word);
  if (!py) return out;
  for (const auto& w : *table.words_with(*py))
    if (w != word) out.push_back({std::string(word), w, ConfusionKind::kPinyin, 1.0});
  return out;
}

namespace detail {

// Shared sampling rule over precomputed candidate lists.
inline std::optional<ConfusionChoice> pick_confusion(const std::vector<ConfusionChoice>& pinyin,
                                                     const std::vector<ConfusionChoice>& synonym,
                                                     Rng& rng, const ConfusionPolicy& policy) {
  const bool want_pinyin = rng.bernoulli(policy.p_pinyin);
  const auto* first = want_pinyin ? &pinyin : &synonym;
  const auto* second = want_pinyin ? &synonym : &pinyin;
  const auto* chosen = !first->empty() ? first : (!second->empty() ? second : nullptr);
  if (!chosen) return std::nullopt;
  return (*chosen)[rng.below(chosen->size())];
}

}  // namespace detail

// Attempts the pinyin kind with probability p_pinyin, otherwise the synonym
// kind, falling back to the other kind when the first has no candidates.
// Picks uniformly among candidates of the chosen kind.
inline std::optional<ConfusionChoice> sample_confusion(std::string_view word,
                                                       const WordEmbeddings& emb,
                                                       const PinyinTable& table, Rng& rng,
                                                       const ConfusionPolicy& policy = {}) {
  return detail::pick_confusion(pinyin_candidates(word, table),
                                synonym_candidates(word, emb, policy.k_syn), rng, policy);
}

// Candidate lists precomputed for every word known to either resource.
// Sampling through the index consumes the generator exactly like
// sample_confusion, so the two agree draw for draw. Immutable after
// construction.
class ConfusionIndex {
 public:
  ConfusionIndex(const WordEmbeddings& emb, const PinyinTable& table, ConfusionPolicy policy = {})
      : policy_(policy) {
    policy_.validate();
    for (const auto& w : emb.words()) entry(w).synonym = synonym_candidates(w, emb, policy_.k_syn);
    for (const auto& [w, py] : table.by_word()) entry(w).pinyin = pinyin_candidates(w, table);
  }

  std::optional<ConfusionChoice> sample(std::string_view word, Rng& rng) const {
    auto it = entries_.find(std::string(word));
    if (it == entries_.end()) return detail::pick_confusion({}, {}, rng, policy_);
    return detail::pick_confusion(it->second.pinyin, it->second.synonym, rng, policy_);
  }

  const std::vector<ConfusionChoice>& synonyms(std::string_view word) const {
    auto it = entries_.find(std::string(word));
    return it == entries_.end() ? empty_ : it->second.synonym;
  }
  const std::vector<ConfusionChoice>& homophones(std::string_view word) const {
    auto it = entries_.find(std::string(word));
    return it == entries_.end() ? empty_ : it->second.pinyin;
  }

  const ConfusionPolicy& policy() const { return policy_; }

 private:
  struct Entry {
    std::vector<ConfusionChoice> pinyin;
    std::vector<ConfusionChoice> synonym;
  };
  Entry& entry(const std::string& w) { return entries_[w]; }

  ConfusionPolicy policy_;
  std::unordered_map<std::string, Entry> entries_;
  std::vector<ConfusionChoice> empty_;
};

}  // namespace markkit
