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
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "markkit/confusion.hpp"
#include "markkit/error.hpp"
#include "markkit/marker_encoder.hpp"
#include "markkit/rng.hpp"
#include "markkit/segmenter.hpp"

namespace markkit {

struct MaskingConfig {
  double mask_ratio = 0.15;
  double p_no_marker = 0.30;
  double p_wwm = 0.50;
  double p_replace_word = 0.30;
  double p_normal_marker_loss = 0.15;
  std::size_t max_len = 512;
  bool pos_markers = false;  // [S-POS] instead of [S] where the word has a tag

  void validate() const {
    auto check = [](double p, const char* name) {
      if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0, 1]");
    };
    check(mask_ratio, "mask_ratio");
    check(p_no_marker, "p_no_marker");
    check(p_wwm, "p_wwm");
    check(p_replace_word, "p_replace_word");
    check(p_normal_marker_loss, "p_normal_marker_loss");
    if (max_len < 3) throw ConfigError("max_len must be at least 3");
  }

  // Characters plus one marker per word that fit between CLS and SEP.
  std::size_t body_budget() const { return max_len - 2; }
};

enum class RwdLabel : std::uint8_t { kNormal = 0, kPinyinConfusion = 1, kSynonymConfusion = 2 };

inline const char* to_string(RwdLabel l) {
  switch (l) {
    case RwdLabel::kNormal: return "NORMAL";
    case RwdLabel::kPinyinConfusion: return "PINYIN_CONFUSION";
    case RwdLabel::kSynonymConfusion: return "SYNONYM_CONFUSION";
  }
  return "NORMAL";
}

inline RwdLabel rwd_label_from_string(std::string_view s) {
  if (s == "NORMAL") return RwdLabel::kNormal;
  if (s == "PINYIN_CONFUSION") return RwdLabel::kPinyinConfusion;
  if (s == "SYNONYM_CONFUSION") return RwdLabel::kSynonymConfusion;
  throw ParseError("unknown RWD label '" + std::string(s) + "'");
}

inline RwdLabel rwd_label_for(ConfusionKind k) {
  return k == ConfusionKind::kPinyin ? RwdLabel::kPinyinConfusion : RwdLabel::kSynonymConfusion;
}

inline constexpr TokenId kIgnoreLabel = -1;

struct ExampleMeta {
  std::uint64_t doc = 0;
  std::uint64_t seq = 0;
  std::uint64_t seed = 0;
  bool markers = false;
  bool wwm = false;
  bool truncated = false;
  std::size_t chars = 0;                 // character tokens in the example
  std::vector<std::size_t> masked;       // positions chosen by mask selection
  std::vector<std::size_t> replaced;     // positions holding confusion characters

  bool operator==(const ExampleMeta&) const = default;
};

struct PretrainingExample {
  std::vector<TokenId> input_ids;
  std::vector<TokenId> mlm_labels;            // per position, kIgnoreLabel = no loss
  std::vector<std::size_t> marker_positions;  // ascending
  std::vector<RwdLabel> rwd_labels;           // parallel to marker_positions
  std::vector<bool> rwd_loss_mask;            // parallel to marker_positions
  std::size_t attention_len = 0;
  ExampleMeta meta;

  std::size_t length() const { return input_ids.size(); }
  bool operator==(const PretrainingExample&) const = default;
};

// ---------------------------------------------------------------------------
// Packing

struct PackedSequence {
  Segmentation seg;
  std::uint64_t doc = 0;
  std::uint64_t seq = 0;
  bool truncated = false;
};

namespace detail {

inline std::size_t marked_cost(const Segmentation& s) { return s.text.size() + s.spans.size(); }

inline void append_segmentation(Segmentation& dst, const Segmentation& src, std::size_t words) {
  const std::size_t shift = dst.text.size();
  const std::size_t end = words ? src.spans[words - 1].end : 0;
  dst.text.append(src.text, 0, end);
  for (std::size_t i = 0; i < words; ++i) {
    WordSpan s = src.spans[i];
    s.start += shift;
    s.end += shift;
    dst.spans.push_back(std::move(s));
  }
}

}  // namespace detail

// Greedily concatenates consecutive sentences of one document while the
// marked length (characters + one marker per word) fits the body budget.
// A sentence that alone exceeds the budget is cut at a word boundary.
inline void pack_document(std::span<const Segmentation> sentences, std::uint64_t doc,
                          const MaskingConfig& cfg, std::vector<PackedSequence>& out) {
  const std::size_t budget = cfg.body_budget();
  PackedSequence cur{{}, doc, 0, false};
  std::uint64_t seq = 0;
  auto flush = [&] {
    if (cur.seg.spans.empty()) return;
    cur.seq = seq++;
    out.push_back(std::move(cur));
    cur = PackedSequence{{}, doc, 0, false};
  };
  for (const auto& s : sentences) {
    if (s.spans.empty()) continue;
    const std::size_t cost = detail::marked_cost(s);
    if (detail::marked_cost(cur.seg) + cost <= budget) {
      detail::append_segmentation(cur.seg, s, s.spans.size());
      continue;
    }
    flush();
    if (cost <= budget) {
      detail::append_segmentation(cur.seg, s, s.spans.size());
      continue;
    }
    std::size_t words = 0, used = 0;
    while (words < s.spans.size() && used + s.spans[words].length() + 1 <= budget)
      used += s.spans[words++].length() + 1;
    detail::append_segmentation(cur.seg, s, words);
    cur.truncated = true;
    if (words == 0) {
      cur.seq = seq++;
      out.push_back(std::move(cur));
      cur = PackedSequence{{}, doc, 0, false};
    } else {
      flush();
    }
  }
  flush();
}

inline std::vector<PackedSequence> pack_documents(
    const std::vector<std::vector<Segmentation>>& corpus, const MaskingConfig& cfg) {
  cfg.validate();
  std::vector<PackedSequence> out;
  for (std::size_t d = 0; d < corpus.size(); ++d) pack_document(corpus[d], d, cfg, out);
  return out;
}

// ---------------------------------------------------------------------------
// Example construction

// Applies the masking and replacement schedule to one packed sequence.
//
// Draw order (fixed, so a seed fully determines the example):
//   1. marker insertion      bernoulli(1 - p_no_marker)
//   2. masking strategy      bernoulli(p_wwm)
//   3. per word, in order    bernoulli(p_replace_word), then the confusion draw
//   4. mask budget rounding  bernoulli(frac(mask_ratio * chars))
//   5. mask selection        shuffle of candidates (+ final-word acceptance for wwm)
//   6. per marker, in order  bernoulli(mask_ratio) for marker masking
//   7. per masked position   80/10/10 substitution (+ random id draw)
//   8. per NORMAL marker     bernoulli(p_normal_marker_loss)
inline PretrainingExample build_example(const Segmentation& seg, const Vocab& vocab,
                                        const ConfusionIndex& confusions,
                                        const MaskingConfig& cfg, Rng& rng) {
  PretrainingExample ex;
  const bool markers = !rng.bernoulli(cfg.p_no_marker);
  const bool wwm = rng.bernoulli(cfg.p_wwm);

  EncodeOptions opts;
  opts.insert_markers = markers;
  opts.pos_markers = cfg.pos_markers;
  opts.max_len = cfg.max_len;
  opts.add_cls_sep = true;
  const MarkedSequence m = encode_marked(seg, vocab, opts);

  ex.input_ids = m.ids;
  ex.mlm_labels.assign(m.ids.size(), kIgnoreLabel);
  ex.marker_positions = m.marker_positions;
  ex.rwd_labels.assign(m.marker_positions.size(), RwdLabel::kNormal);
  ex.rwd_loss_mask.assign(m.marker_positions.size(), false);
  ex.attention_len = m.ids.size();
  ex.meta.markers = markers;
  ex.meta.wwm = wwm;
  ex.meta.truncated = m.truncated;

  const std::size_t nwords = m.num_words();
  std::size_t nchars = 0;
  for (const auto& [b, e] : m.word_tokens) nchars += e - b;
  ex.meta.chars = nchars;

  // Confusion replacement (markers only).
  std::vector<bool> replaced(nwords, false);
  if (markers) {
    for (std::size_t w = 0; w < nwords; ++w) {
      if (!rng.bernoulli(cfg.p_replace_word)) continue;
      auto choice = confusions.sample(seg.word_utf8(w), rng);
      if (!choice) continue;
      const auto repl = utf8::decode(choice->replacement);
      const auto [b, e] = m.word_tokens[w];
      if (repl.size() != e - b) continue;
      for (std::size_t k = 0; k < repl.size(); ++k) {
        ex.mlm_labels[b + k] = ex.input_ids[b + k];
        ex.input_ids[b + k] = vocab.char_id(repl[k]);
        ex.meta.replaced.push_back(b + k);
      }
      replaced[w] = true;
      ex.rwd_labels[w] = rwd_label_for(choice->kind);
    }
  }

  // Mask budget: stochastic rounding keeps the expected count at
  // mask_ratio * chars.
  const double target = cfg.mask_ratio * static_cast<double>(nchars);
  std::size_t budget = static_cast<std::size_t>(std::floor(target));
  if (rng.bernoulli(target - std::floor(target))) ++budget;

  std::vector<std::size_t> selected;
  if (wwm) {
    std::vector<std::size_t> words;
    for (std::size_t w = 0; w < nwords; ++w)
      if (!replaced[w]) words.push_back(w);
    rng.shuffle(words);
    std::size_t covered = 0;
    for (std::size_t w : words) {
      if (covered >= budget) break;
      const auto [b, e] = m.word_tokens[w];
      const std::size_t len = e - b;
      bool take = true;
      bool last = false;
      if (covered + len > budget) {
        // Accept the crossing word with probability (remaining / len) so the
        // expected masked count equals the budget.
        take = rng.uniform() * static_cast<double>(len) < static_cast<double>(budget - covered);
        last = true;
      }
      if (take) {
        for (std::size_t p = b; p < e; ++p) selected.push_back(p);
        covered += len;
      }
      if (last) break;
    }
  } else {
    std::vector<std::size_t> positions;
    for (std::size_t w = 0; w < nwords; ++w) {
      if (replaced[w]) continue;
      for (std::size_t p = m.word_tokens[w].first; p < m.word_tokens[w].second; ++p)
        positions.push_back(p);
    }
    rng.shuffle(positions);
    positions.resize(std::min(budget, positions.size()));
    selected = std::move(positions);
  }
  for (std::size_t i = 0; i < m.marker_positions.size(); ++i) {
    if (replaced[m.word_of_marker[i]]) continue;
    if (rng.bernoulli(cfg.mask_ratio)) selected.push_back(m.marker_positions[i]);
  }
  std::sort(selected.begin(), selected.end());

  const auto& char_ids = vocab.char_ids();
  for (std::size_t p : selected) {
    ex.mlm_labels[p] = ex.input_ids[p];
    const double u = rng.uniform();
    if (u < 0.8) {
      ex.input_ids[p] = vocab.mask();
    } else if (u >= 0.9 && !char_ids.empty()) {
      ex.input_ids[p] = char_ids[rng.below(char_ids.size())];
    }
  }
  ex.meta.masked = std::move(selected);

  for (std::size_t i = 0; i < ex.rwd_labels.size(); ++i) {
    if (ex.rwd_labels[i] != RwdLabel::kNormal)
      ex.rwd_loss_mask[i] = true;
    else
      ex.rwd_loss_mask[i] = rng.bernoulli(cfg.p_normal_marker_loss);
  }
  return ex;
}

// Builds one example per packed sequence. The example seed is derived from
// (seed, doc, seq), so output is independent of `workers`.
inline std::vector<PretrainingExample> build_corpus(const std::vector<PackedSequence>& packed,
                                                    const Vocab& vocab,
                                                    const ConfusionIndex& confusions,
                                                    const MaskingConfig& cfg, std::uint64_t seed,
                                                    std::size_t workers = 1) {
  cfg.validate();
  std::vector<PretrainingExample> out(packed.size());
  auto work = [&](std::size_t shard, std::size_t nshards) {
    for (std::size_t i = shard; i < packed.size(); i += nshards) {
      const auto& p = packed[i];
      const std::uint64_t s = derive_seed(seed, {p.doc, p.seq});
      Rng rng(s);
      out[i] = build_example(p.seg, vocab, confusions, cfg, rng);
      out[i].meta.doc = p.doc;
      out[i].meta.seq = p.seq;
      out[i].meta.seed = s;
      out[i].meta.truncated = out[i].meta.truncated || p.truncated;
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, packed.size()));
  if (workers == 1) {
    work(0, 1);
    return out;
  }
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(work, w, workers);
  for (auto& t : threads) t.join();
  return out;
}

// ---------------------------------------------------------------------------
// Statistics

struct MaskingStats {
  std::size_t examples = 0;
  std::size_t marked_examples = 0;
  std::size_t wwm_examples = 0;
  std::size_t wwm_marked_examples = 0;
  std::size_t chars = 0;
  std::size_t masked_chars = 0;
  std::size_t markers = 0;
  std::size_t masked_markers = 0;
  std::size_t pinyin_confusions = 0;
  std::size_t synonym_confusions = 0;
  std::size_t confusion_loss = 0;
  std::size_t normal_markers = 0;
  std::size_t normal_loss = 0;

  MaskingStats& operator+=(const MaskingStats& o) {
    examples += o.examples;
    marked_examples += o.marked_examples;
    wwm_examples += o.wwm_examples;
    wwm_marked_examples += o.wwm_marked_examples;
    chars += o.chars;
    masked_chars += o.masked_chars;
    markers += o.markers;
    masked_markers += o.masked_markers;
    pinyin_confusions += o.pinyin_confusions;
    synonym_confusions += o.synonym_confusions;
    confusion_loss += o.confusion_loss;
    normal_markers += o.normal_markers;
    normal_loss += o.normal_loss;
    return *this;
  }

  void add(const PretrainingExample& ex) {
    ++examples;
    if (ex.meta.markers) ++marked_examples;
    if (ex.meta.wwm) ++wwm_examples;
    if (ex.meta.wwm && ex.meta.markers) ++wwm_marked_examples;
    chars += ex.meta.chars;
    for (std::size_t p : ex.meta.masked) {
      if (std::binary_search(ex.marker_positions.begin(), ex.marker_positions.end(), p))
        ++masked_markers;
      else
        ++masked_chars;
    }
    markers += ex.marker_positions.size();
    for (std::size_t i = 0; i < ex.rwd_labels.size(); ++i) {
      switch (ex.rwd_labels[i]) {
        case RwdLabel::kNormal:
          ++normal_markers;
          if (ex.rwd_loss_mask[i]) ++normal_loss;
          break;
        case RwdLabel::kPinyinConfusion:
          ++pinyin_confusions;
          if (ex.rwd_loss_mask[i]) ++confusion_loss;
          break;
        case RwdLabel::kSynonymConfusion:
          ++synonym_confusions;
          if (ex.rwd_loss_mask[i]) ++confusion_loss;
          break;
      }
    }
  }

  std::size_t confusions() const { return pinyin_confusions + synonym_confusions; }

  static std::optional<double> ratio(std::size_t num, std::size_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  }

  std::optional<double> masked_char_rate() const { return ratio(masked_chars, chars); }
  std::optional<double> no_marker_rate() const { return ratio(examples - marked_examples, examples); }
  std::optional<double> wwm_rate() const { return ratio(wwm_examples, examples); }
  std::optional<double> wwm_rate_marked() const { return ratio(wwm_marked_examples, marked_examples); }
  // Replaced words per word of marked examples (one marker per word).
  std::optional<double> replace_rate() const { return ratio(confusions(), markers); }
  std::optional<double> pinyin_rate() const { return ratio(pinyin_confusions, markers); }
  std::optional<double> synonym_rate() const { return ratio(synonym_confusions, markers); }
  std::optional<double> normal_loss_rate() const { return ratio(normal_loss, normal_markers); }
  std::optional<double> confusion_loss_rate() const { return ratio(confusion_loss, confusions()); }
  std::optional<double> masked_marker_rate() const { return ratio(masked_markers, markers); }
};

template <typename Range>
MaskingStats corpus_stats(const Range& examples) {
  MaskingStats s;
  for (const auto& ex : examples) s.add(ex);
  return s;
}

}  // namespace markkit
