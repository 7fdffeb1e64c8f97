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

// Acceptance gate: prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "markkit/cli.hpp"
#include "support.hpp"

using namespace markkit;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

std::vector<std::string> toy_lines() {
  std::ifstream in(fixtures::data_path("corpus.txt"));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

std::vector<std::vector<Segmentation>> toy_documents() {
  const auto& lex = fixtures::toy().lexicon;
  std::vector<std::vector<Segmentation>> docs(1);
  for (const auto& line : toy_lines()) {
    if (line.empty()) {
      if (!docs.back().empty()) docs.emplace_back();
      continue;
    }
    docs.back().push_back(segment(std::string_view(line), lex));
  }
  if (docs.back().empty()) docs.pop_back();
  return docs;
}

const ConfusionIndex& toy_index() {
  static const ConfusionIndex idx(fixtures::toy().embeddings, fixtures::toy().pinyin);
  return idx;
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(prec);
  os << v;
  return os.str();
}

// ---------------------------------------------------------------------------

// Token ids of a plain character pipeline: no segmentation, no markers.
std::vector<TokenId> plain_ids(const std::u32string& text, const Vocab& vocab) {
  std::vector<TokenId> ids = {vocab.cls()};
  for (char32_t c : text) ids.push_back(vocab.char_id(c));
  ids.push_back(vocab.sep());
  return ids;
}

Verdict marker_round_trip() {
  Verdict v;
  const auto& t = fixtures::toy();
  std::vector<std::string> pool;
  for (auto& l : toy_lines())
    if (!l.empty()) pool.push_back(l);
  Rng rng(31337);
  const auto t0 = Clock::now();
  std::size_t bad = 0, markers = 0;
  EncodeOptions plain;
  plain.insert_markers = false;
  for (int i = 0; i < 10000; ++i) {
    const auto& line = pool[rng.below(pool.size())];
    const auto seg = segment(std::string_view(line), t.lexicon);
    const auto marked = encode_marked(seg, t.vocab);
    markers += marked.marker_positions.size();
    const auto stripped = strip_markers(marked);
    if (marked.truncated || stripped != encode_marked(seg, t.vocab, plain).ids ||
        stripped != plain_ids(seg.text, t.vocab))
      ++bad;
  }
  const double secs = seconds_since(t0);
  v.require(bad == 0, std::to_string(bad) + " lines differ");
  v.require(secs < 10.0, "took " + fmt(secs) + " s");
  v.detail = "10000 sampled lines (" + std::to_string(markers) + " markers) round-trip exactly in " +
             fmt(secs, 3) + " s" + (v.detail.empty() ? "" : "; " + v.detail);
  return v;
}

Verdict masking_statistics() {
  Verdict v;
  const auto t0 = Clock::now();
  const auto& t = fixtures::toy();
  MaskingConfig cfg;
  cfg.max_len = 32;
  const auto packed = pack_documents(toy_documents(), cfg);
  MaskingStats s;
  std::size_t pass = 0;
  while (s.examples < 100000) {
    const std::uint64_t seed = pass == 0 ? 12345 : derive_seed(12345, {0xD0BE, pass});
    s += corpus_stats(build_corpus(packed, t.vocab, toy_index(), cfg, seed));
    ++pass;
  }
  const double secs = seconds_since(t0);
  auto within = [&](const char* name, std::optional<double> r, double target, double tol) {
    std::ostringstream os;
    os << name << "=" << (r ? fmt(*r) : "n/a");
    v.require(r && std::abs(*r - target) <= tol, os.str() + " outside " + fmt(target, 2) + "±" + fmt(tol, 3));
    return os.str();
  };
  std::string d = std::to_string(s.examples) + " examples; ";
  d += within("masked", s.masked_char_rate(), 0.15, 0.005) + " ";
  d += within("no_marker", s.no_marker_rate(), 0.30, 0.01) + " ";
  d += within("wwm", s.wwm_rate(), 0.50, 0.01) + " ";
  d += within("replaced", s.replace_rate(), 0.30, 0.01) + " ";
  d += within("normal_loss", s.normal_loss_rate(), 0.15, 0.01) + " ";
  d += within("confusion_loss", s.confusion_loss_rate(), 1.0, 0.0);
  v.require(s.examples >= 100000, "too few examples");
  v.require(secs < 120.0, "took " + fmt(secs) + " s");
  v.detail = d + " in " + fmt(secs, 1) + " s" + (v.detail.empty() ? "" : " | " + v.detail);
  return v;
}

Verdict confusion_soundness() {
  Verdict v;
  const auto t0 = Clock::now();
  const auto& t = fixtures::toy();
  const auto& idx = toy_index();
  std::size_t checked = 0, bad = 0;
  // Candidate lists against brute-force recomputation.
  for (const auto& w : t.embeddings.words()) {
    const auto self = *t.embeddings.index_of(w);
    const auto len = utf8::length(w);
    std::vector<std::pair<double, std::string>> all;
    for (std::size_t i = 0; i < t.embeddings.size(); ++i) {
      if (i == self || utf8::length(t.embeddings.word(i)) != len) continue;
      double dot = 0, na = 0, nb = 0;
      for (std::size_t k = 0; k < t.embeddings.dim(); ++k) {
        const double a = t.embeddings.vector(self)[k], b = t.embeddings.vector(i)[k];
        dot += a * b;
        na += a * a;
        nb += b * b;
      }
      all.emplace_back(-dot / std::sqrt(na * nb), t.embeddings.word(i));
    }
    std::sort(all.begin(), all.end());
    const auto& syn = idx.synonyms(w);
    if (syn.size() != std::min<std::size_t>(5, all.size())) ++bad;
    for (std::size_t k = 0; k < syn.size() && k < all.size(); ++k)
      if (syn[k].replacement != all[k].second) ++bad;
    ++checked;
  }
  for (const auto& [w, py] : t.pinyin.by_word()) {
    std::set<std::string> want;
    for (const auto& [o, opy] : t.pinyin.by_word())
      if (o != w && opy == py) want.insert(o);
    std::set<std::string> got;
    for (const auto& c : idx.homophones(w)) got.insert(c.replacement);
    if (got != want) ++bad;
    ++checked;
  }
  // Every replacement emitted in a built corpus is a listed candidate of
  // the original word with the right kind.
  MaskingConfig cfg;
  cfg.max_len = 64;
  cfg.p_no_marker = 0.0;
  const auto packed = pack_documents(toy_documents(), cfg);
  const auto examples = build_corpus(packed, t.vocab, idx, cfg, 99);
  std::size_t replacements = 0;
  for (std::size_t e = 0; e < examples.size(); ++e) {
    const auto& ex = examples[e];
    EncodeOptions o;
    o.max_len = cfg.max_len;
    const auto m = encode_marked(packed[e].seg, t.vocab, o);
    for (std::size_t w = 0; w < m.num_words(); ++w) {
      if (ex.rwd_labels[w] == RwdLabel::kNormal) continue;
      ++replacements;
      std::string orig = packed[e].seg.word_utf8(w), repl;
      for (auto p = m.word_tokens[w].first; p < m.word_tokens[w].second; ++p)
        repl += t.vocab.token(ex.input_ids[p]);
      const auto& list = ex.rwd_labels[w] == RwdLabel::kPinyinConfusion ? idx.homophones(orig)
                                                                         : idx.synonyms(orig);
      const bool listed = std::any_of(list.begin(), list.end(),
                                      [&](const auto& c) { return c.replacement == repl; });
      if (!listed || repl == orig) ++bad;
      if (ex.rwd_labels[w] == RwdLabel::kPinyinConfusion) {
        const auto* a = t.pinyin.pinyin_of(orig);
        const auto* b = t.pinyin.pinyin_of(repl);
        if (!a || !b || *a != *b) ++bad;
      }
    }
  }
  const double secs = seconds_since(t0);
  v.require(bad == 0, std::to_string(bad) + " unsound candidates");
  v.require(replacements > 1000, "too few replacements sampled");
  v.require(secs < 30.0, "took " + fmt(secs) + " s");
  v.detail = std::to_string(checked) + " candidate lists, " + std::to_string(replacements) +
             " sampled replacements in " + fmt(secs, 2) + " s" +
             (v.detail.empty() ? "" : "; " + v.detail);
  return v;
}

double lse_ce(const Matrix<double>& logits, Eigen::Index r, std::size_t target) {
  long double mx = logits.row(r).maxCoeff(), z = 0;
  for (Eigen::Index c = 0; c < logits.cols(); ++c) z += std::exp((long double)logits(r, c) - mx);
  return double(std::log(z) + mx - logits(r, Eigen::Index(target)));
}

ModelConfig small_model(std::size_t vocab, std::size_t classes) {
  ModelConfig c;
  c.vocab_size = vocab;
  c.hidden_dim = 32;
  c.num_layers = 2;
  c.num_heads = 4;
  c.ffn_dim = 64;
  c.max_positions = 64;
  c.rwd_classes = classes;
  return c;
}

Verdict loss_correctness() {
  Verdict v;
  const auto& t = fixtures::toy();
  MaskingConfig cfg;
  cfg.max_len = 48;
  cfg.p_no_marker = 0.0;
  const auto packed = pack_documents(toy_documents(), cfg);
  std::vector<PackedSequence> head(packed.begin(), packed.begin() + 16);
  const auto batch = build_corpus(head, t.vocab, toy_index(), cfg, 5);
  double worst = 0;
  for (std::size_t classes : {2, 3}) {
    Encoder<double> model(small_model(t.vocab.size(), classes));
    double mlm_sum = 0, rwd_sum = 0;
    std::size_t mlm_n = 0, rwd_n = 0;
    for (const auto& ex : batch) {
      const auto out = model.forward(ex);
      for (std::size_t p = 0; p < ex.mlm_labels.size(); ++p)
        if (ex.mlm_labels[p] >= 0) {
          mlm_sum += lse_ce(out.mlm_logits, Eigen::Index(p), std::size_t(ex.mlm_labels[p]));
          ++mlm_n;
        }
      for (std::size_t k = 0; k < ex.marker_positions.size(); ++k)
        if (ex.rwd_loss_mask[k]) {
          const std::size_t target =
              classes == 2 ? (ex.rwd_labels[k] == RwdLabel::kNormal ? 0 : 1) : std::size_t(ex.rwd_labels[k]);
          rwd_sum += lse_ce(out.rwd_logits, Eigen::Index(k), target);
          ++rwd_n;
        }
    }
    const auto l = model.loss(batch);
    worst = std::max({worst, std::abs(l.mlm_loss - mlm_sum / mlm_n),
                      std::abs(l.rwd_loss - rwd_sum / rwd_n),
                      std::abs(l.total - (mlm_sum / mlm_n + rwd_sum / rwd_n))});
  }
  // Hand-built logits: three labeled positions over a 4-token vocabulary
  // and two included markers under the three-class head.
  {
    ForwardOutput<double> out;
    out.mlm_logits.resize(3, 4);
    out.mlm_logits << 2.0, -1.0, 0.5, 0.0,
                      0.0, 0.0, 0.0, 0.0,
                      -3.0, 4.0, 1.0, 1.5;
    out.rwd_logits.resize(2, 3);
    out.rwd_logits << 1.0, 0.0, -1.0,
                      0.2, 0.3, 2.0;
    PretrainingExample ex;
    ex.input_ids = {0, 0, 0};
    ex.attention_len = 3;
    ex.mlm_labels = {0, 3, 1};
    ex.marker_positions = {0, 2};
    ex.rwd_labels = {RwdLabel::kNormal, RwdLabel::kSynonymConfusion};
    ex.rwd_loss_mask = {true, true};
    auto ce = [](std::vector<double> z, std::size_t k) {
      double sum = 0;
      for (double x : z) sum += std::exp(x);
      return std::log(sum) - z[k];
    };
    const double mlm = (ce({2.0, -1.0, 0.5, 0.0}, 0) + std::log(4.0) + ce({-3.0, 4.0, 1.0, 1.5}, 1)) / 3;
    const double rwd = (ce({1.0, 0.0, -1.0}, 0) + ce({0.2, 0.3, 2.0}, 2)) / 2;
    const auto b = compute_loss(out, ex, 3);
    worst = std::max({worst, std::abs(b.mlm_loss - mlm), std::abs(b.rwd_loss - rwd)});
    // Uniform binary logits at one included marker.
    ForwardOutput<double> uni;
    uni.mlm_logits.resize(1, 4);
    uni.mlm_logits.setZero();
    uni.rwd_logits = Matrix<double>::Zero(1, 2);
    PretrainingExample one;
    one.input_ids = {0};
    one.attention_len = 1;
    one.mlm_labels = {kIgnoreLabel};
    one.marker_positions = {0};
    one.rwd_labels = {RwdLabel::kPinyinConfusion};
    one.rwd_loss_mask = {true};
    worst = std::max(worst, std::abs(compute_loss(uni, one, 2).rwd_loss - std::log(2.0)));
  }
  // A binary head with zero weights predicts 1/2 everywhere.
  Encoder<double> binary(small_model(t.vocab.size(), 2));
  binary.params().rwd_w.setZero();
  binary.params().rwd_b.setZero();
  const double ln2_err = std::abs(binary.loss(batch).rwd_loss - std::log(2.0));
  v.require(worst < 1e-6, "max deviation " + std::to_string(worst));
  v.require(ln2_err < 1e-6, "uniform binary head deviates from ln 2 by " + std::to_string(ln2_err));
  std::ostringstream os;
  os << std::scientific << std::setprecision(2) << "hand-built and model logits, max |loss - oracle| = "
     << worst << ", |uniform binary - ln 2| = " << ln2_err;
  v.detail = os.str() + (v.detail.empty() ? "" : "; " + v.detail);
  return v;
}

Verdict gradient_check() {
  Verdict v;
  const auto t0 = Clock::now();
  ModelConfig c;
  c.vocab_size = 64;
  c.hidden_dim = 32;
  c.num_layers = 2;
  c.num_heads = 4;
  c.ffn_dim = 64;
  c.max_positions = 16;
  c.rwd_classes = 3;
  c.seed = 2024;
  Encoder<double> model(c);
  // Two 16-token sequences with markers at ids 5 and labels everywhere.
  std::vector<PretrainingExample> batch;
  Rng rng(8);
  for (int b = 0; b < 2; ++b) {
    PretrainingExample ex;
    ex.input_ids = {2};
    while (ex.input_ids.size() < 15) {
      ex.input_ids.push_back(TokenId(6 + rng.below(58)));
      if (rng.bernoulli(0.4)) {
        ex.marker_positions.push_back(ex.input_ids.size());
        ex.input_ids.push_back(5);
        ex.rwd_labels.push_back(RwdLabel(rng.below(3)));
        ex.rwd_loss_mask.push_back(rng.bernoulli(0.7));
      }
    }
    ex.input_ids.resize(15);
    while (!ex.marker_positions.empty() && ex.marker_positions.back() >= 15) {
      ex.marker_positions.pop_back();
      ex.rwd_labels.pop_back();
      ex.rwd_loss_mask.pop_back();
    }
    ex.input_ids.push_back(3);
    ex.attention_len = 16;
    ex.mlm_labels.assign(16, kIgnoreLabel);
    for (std::size_t p = 1; p < 15; ++p)
      if (rng.bernoulli(0.3)) ex.mlm_labels[p] = TokenId(6 + rng.below(58));
    batch.push_back(ex);
  }
  const auto grads = model.gradients(batch);
  std::vector<const Matrix<double>*> gs;
  grads.visit([&](const std::string&, const Matrix<double>& m) { gs.push_back(&m); });
  const double h = 1e-5;
  double worst = 0;
  std::string worst_name;
  std::size_t k = 0, tensors = 0;
  model.params().visit([&](const std::string& name, Matrix<double>& p) {
    const auto& ga = *gs[k++];
    double diff = 0, na = 0, nn = 0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double o = p.data()[i];
      p.data()[i] = o + h;
      const double lp = model.loss(batch).total;
      p.data()[i] = o - h;
      const double lm = model.loss(batch).total;
      p.data()[i] = o;
      const double fd = (lp - lm) / (2 * h);
      diff += (fd - ga.data()[i]) * (fd - ga.data()[i]);
      na += ga.data()[i] * ga.data()[i];
      nn += fd * fd;
    }
    // Tensors whose true gradient is identically zero (the key bias, by
    // softmax shift invariance) are measured against a 1e-6 norm floor.
    const double rel = std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-6});
    if (rel > worst) worst = rel, worst_name = name;
    ++tensors;
  });
  const double secs = seconds_since(t0);
  v.require(worst < 1e-3, "worst tensor " + worst_name + " rel " + std::to_string(worst));
  v.require(secs < 60.0, "took " + fmt(secs) + " s");
  std::ostringstream os;
  os << tensors << " tensors, " << model.params().count() << " parameters, worst rel error "
     << std::scientific << std::setprecision(2) << worst << " (" << worst_name << ") in "
     << std::fixed << std::setprecision(1) << secs << " s";
  v.detail = os.str() + (v.detail.empty() ? "" : "; " + v.detail);
  return v;
}

Verdict trainability() {
  Verdict v;
  const auto t0 = Clock::now();
  const auto& t = fixtures::toy();
  MaskingConfig cfg;
  cfg.max_len = 32;
  cfg.p_no_marker = 0.0;
  const auto packed = pack_documents(toy_documents(), cfg);
  std::vector<PackedSequence> head(packed.begin(), packed.begin() + 8);
  const auto batch = build_corpus(head, t.vocab, toy_index(), cfg, 12345);
  ModelConfig mc;
  mc.vocab_size = t.vocab.size();
  mc.hidden_dim = 64;
  mc.num_layers = 2;
  mc.num_heads = 4;
  mc.ffn_dim = 128;
  mc.max_positions = 32;
  Encoder<double> model(mc);
  const double initial = model.loss(batch).total;
  std::vector<double> losses;
  for (int step = 0; step < 500; ++step) losses.push_back(train_step(model, batch, 0.05).loss.total);
  const auto m = model.evaluate(batch);
  // After warm-up, no step may raise the loss by more than 5 %.
  std::size_t rises = 0;
  for (std::size_t i = 51; i < losses.size(); ++i) rises += losses[i] > losses[i - 1] * 1.05;
  const double secs = seconds_since(t0);
  v.require(m.mlm_accuracy >= 0.95, "MLM accuracy " + fmt(m.mlm_accuracy));
  v.require(m.rwd_accuracy >= 0.95, "RWD accuracy " + fmt(m.rwd_accuracy));
  v.require(rises == 0, std::to_string(rises) + " loss increases above 5 % after step 50");
  v.require(secs < 300.0, "took " + fmt(secs) + " s");
  v.detail = "loss " + fmt(initial) + " -> " + fmt(m.loss.total) + ", MLM acc " +
             fmt(m.mlm_accuracy) + " (" + std::to_string(m.mlm_count) + " labels), RWD acc " +
             fmt(m.rwd_accuracy) + " (" + std::to_string(m.rwd_count) +
             " loss-included markers; all markers " + fmt(m.rwd_accuracy_all) + ") in " +
             fmt(secs, 1) + " s" + (v.detail.empty() ? "" : "; " + v.detail);
  return v;
}

Verdict ner_alignment() {
  Verdict v;
  const auto& t = fixtures::toy();
  const auto& words = t.embeddings.words();
  const std::vector<std::string> tags = {"O", "B-PER", "M-PER", "E-PER", "S-PER", "B-LOC", "E-LOC", "S-ORG"};
  Rng rng(2718);
  std::size_t bad = 0, f1_bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::string text;
    for (auto n = 1 + rng.below(10); n > 0; --n) text += words[rng.below(words.size())];
    ner::NerExample ex;
    ex.chars = utf8::decode(text);
    for (std::size_t i = 0; i < ex.chars.size(); ++i) ex.labels.push_back(tags[rng.below(tags.size())]);
    const auto marked = encode_marked(segment(std::u32string_view(ex.chars), t.lexicon), t.vocab);
    const auto aligned = ner::align_labels_with_markers(ex, marked);
    bool ok = aligned.size() == marked.ids.size() && aligned.front() == "O" && aligned.back() == "O";
    for (std::size_t p : marked.marker_positions) ok = ok && aligned[p] == aligned[p - 1];
    for (std::size_t p = 0; p < marked.ids.size(); ++p)
      if (marked.char_alignment[p] != kNoAlignment) ok = ok && aligned[p] == ex.labels[marked.char_alignment[p]];
    const auto back = ner::strip_marker_labels(aligned, marked);
    ok = ok && back == ex.labels && ner::extract_spans(back) == ner::extract_spans(ex.labels);
    bad += !ok;

    // span_f1 against a brute-force matcher over every (start, end, type).
    std::vector<std::string> pred(ex.labels.size());
    for (auto& p : pred) p = tags[rng.below(tags.size())];
    auto brute = [&](const std::vector<std::string>& tg) {
      std::set<std::tuple<std::size_t, std::size_t, std::string>> out;
      for (std::size_t i = 0; i < tg.size(); ++i)
        for (std::size_t j = i; j < tg.size(); ++j)
          for (const std::string ty : {"PER", "LOC", "ORG"}) {
            bool m = i == j ? tg[i] == "S-" + ty : tg[i] == "B-" + ty && tg[j] == "E-" + ty;
            for (std::size_t k = i + 1; m && k < j; ++k) m = tg[k] == "M-" + ty;
            if (m) out.insert({i, j + 1, ty});
          }
      return out;
    };
    const auto bp = brute(pred), bg = brute(ex.labels);
    std::size_t tp = 0;
    for (const auto& s : bp) tp += bg.count(s);
    const double prec = bp.empty() ? (bg.empty() ? 1.0 : 0.0) : double(tp) / double(bp.size());
    const double rec = bg.empty() ? (bp.empty() ? 1.0 : 0.0) : double(tp) / double(bg.size());
    const double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
    const auto got = ner::span_f1(ner::extract_spans(pred), ner::extract_spans(ex.labels));
    if (got.precision != prec || got.recall != rec || got.f1 != f1) ++f1_bad;
  }
  v.require(bad == 0, std::to_string(bad) + " misaligned cases");
  v.require(f1_bad == 0, std::to_string(f1_bad) + " span F1 disagreements");
  v.detail = "1000 random sentences aligned and restored; span F1 equals brute force on all 1000" +
             (v.detail.empty() ? "" : "; " + v.detail);
  return v;
}

Verdict vanilla_downgrade() {
  Verdict v;
  const auto& t = fixtures::toy();
  MaskingConfig cfg;
  cfg.max_len = 48;
  cfg.p_no_marker = 1.0;
  const auto packed = pack_documents(toy_documents(), cfg);
  std::vector<PackedSequence> head(packed.begin(), packed.begin() + 32);
  const auto batch = build_corpus(head, t.vocab, toy_index(), cfg, 1);
  std::size_t markers = 0, replaced = 0, encoding_bad = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& ex = batch[i];
    // Undo masking from the labels; the rest must equal the plain pipeline.
    auto ids = ex.input_ids;
    for (std::size_t p = 0; p < ids.size(); ++p)
      if (ex.mlm_labels[p] != kIgnoreLabel) ids[p] = ex.mlm_labels[p];
    encoding_bad += ids != plain_ids(head[i].seg.text, t.vocab);
    markers += ex.marker_positions.size();
    replaced += ex.meta.replaced.size();
    for (auto id : ex.input_ids) markers += t.vocab.is_marker(id);
  }
  Encoder<double> model(small_model(t.vocab.size(), 3));
  LossBreakdown l;
  const auto g = model.gradients(batch, &l);
  const double rwd_grad = std::max(g.rwd_w.cwiseAbs().maxCoeff(), g.rwd_b.cwiseAbs().maxCoeff());
  v.require(markers == 0, "marker tokens present");
  v.require(encoding_bad == 0, std::to_string(encoding_bad) + " encodings differ from the plain pipeline");
  v.require(replaced == 0, "words replaced without markers");
  v.require(l.rwd_loss == 0.0 && l.rwd_count == 0, "rwd_loss " + std::to_string(l.rwd_loss));
  v.require(rwd_grad == 0.0, "RWD head receives gradient");
  v.require(l.mlm_loss > 0.0, "MLM loss vanished");
  v.detail = "rwd_loss = " + fmt(l.rwd_loss, 1) + ", mlm_loss = " + fmt(l.mlm_loss) +
             ", " + std::to_string(batch.size()) + " sequences encode exactly as plain characters" +
             (v.detail.empty() ? "" : "; " + v.detail);
  return v;
}

Verdict cli_determinism() {
  Verdict v;
  const fs::path dir = fs::temp_directory_path() / "markkit_acceptance";
  fs::create_directories(dir);
  auto run = [&](const std::string& out, const std::string& workers) {
    std::vector<std::string> args = {"markkit", "build-corpus",
                                     "--lexicon", fixtures::data_path("lexicon.tsv"),
                                     "--embeddings", fixtures::data_path("embeddings.txt"),
                                     "--pinyin", fixtures::data_path("pinyin.tsv"),
                                     "--vocab", fixtures::data_path("vocab.txt"),
                                     "--in", fixtures::data_path("corpus.txt"),
                                     "--out", (dir / out).string(),
                                     "--seed", "12345", "--max-len", "128",
                                     "--workers", workers, "--deterministic"};
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::istringstream in;
    std::ostringstream o, e;
    const int code = cli::run(int(argv.size()), argv.data(), in, o, e);
    if (code != 0) v.require(false, "exit " + std::to_string(code) + ": " + e.str());
  };
  auto slurp = [&](const std::string& name) {
    std::ifstream in(dir / name, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  run("a.jsonl", "1");
  run("b.jsonl", "1");
  run("c.jsonl", "4");
  const auto a = slurp("a.jsonl"), b = slurp("b.jsonl"), c = slurp("c.jsonl");
  v.require(!a.empty(), "empty output");
  v.require(a == b, "repeat run differs");
  v.require(a == c, "--workers 4 output differs");
  v.detail = std::to_string(std::count(a.begin(), a.end(), '\n')) + " records, " +
             std::to_string(a.size()) + " bytes identical across 3 runs" +
             (v.detail.empty() ? "" : "; " + v.detail);
  fs::remove_all(dir);
  return v;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Verdict()> check;
  };
  const std::vector<Criterion> criteria = {
      {"markers strip back to the plain encoding", marker_round_trip},
      {"masking statistics over >=100k examples", masking_statistics},
      {"confusion candidates are sound", confusion_soundness},
      {"joint loss matches oracle", loss_correctness},
      {"analytic gradients match finite differences", gradient_check},
      {"toy model fits 8 sequences in 500 steps", trainability},
      {"NER labels survive marker alignment", ner_alignment},
      {"marker-free input downgrades to plain MLM", vanilla_downgrade},
      {"build-corpus output is byte-identical", cli_determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].check();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("exception: ") + e.what();
    }
    failures += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << (i + 1) << ": " << criteria[i].name
              << " -- " << v.detail << std::endl;
  }
  std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
