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

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "markkit/confusion.hpp"
#include "markkit/error.hpp"
#include "markkit/example_io.hpp"
#include "markkit/marker_encoder.hpp"
#include "markkit/model.hpp"
#include "markkit/model_io.hpp"
#include "markkit/ner.hpp"
#include "markkit/pretrain_builder.hpp"
#include "markkit/resources.hpp"
#include "markkit/segmenter.hpp"

namespace markkit::cli {

// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,     // unknown subcommand, bad or missing flags
  kResource = 3,  // unreadable/unwritable file
  kParse = 4,     // malformed input file
  kConfig = 5,    // invalid configuration or vocabulary
  kInput = 6,     // inconsistent inputs
  kTraining = 7,  // non-finite loss during training
};

inline constexpr std::uint64_t kDefaultSeed = 12345;

inline int exit_code_for(const Error& e) {
  const std::string k = e.kind();
  if (k == "usage") return kUsage;
  if (k == "resource") return kResource;
  if (k == "parse") return kParse;
  if (k == "config") return kConfig;
  if (k == "input") return kInput;
  if (k == "training") return kTraining;
  return kInternal;
}

struct RunConfig {
  std::string lexicon, embeddings, pinyin, vocab;
  std::string in = "-", out = "-";
  std::uint64_t seed = kDefaultSeed;
  std::size_t workers = 1;
  bool deterministic = false;
  MaskingConfig masking;
  ConfusionPolicy confusion;
  ModelConfig model;
};

// Relative resource paths are looked up under $MARKKIT_RESOURCES when the
// variable is set and the path does not exist as given.
inline std::string resolve_resource(const std::string& path) {
  if (path.empty() || path == "-") return path;
  namespace fs = std::filesystem;
  if (fs::path(path).is_absolute() || fs::exists(path)) return path;
  if (const char* prefix = std::getenv("MARKKIT_RESOURCES"); prefix && *prefix)
    return (fs::path(prefix) / path).string();
  return path;
}

inline std::string require_path(const std::string& path, const char* flag) {
  if (path.empty()) throw UsageError(std::string("missing required flag ") + flag);
  return resolve_resource(path);
}

// Input/output stream holders: "-" means stdin/stdout.
class Input {
 public:
  Input(const std::string& path, std::istream& fallback) {
    if (path.empty() || path == "-") {
      stream_ = &fallback;
    } else {
      file_ = std::make_unique<std::ifstream>(path, std::ios::binary);
      if (!*file_) throw ResourceError("cannot open '" + path + "'");
      stream_ = file_.get();
    }
  }
  std::istream& get() { return *stream_; }

 private:
  std::unique_ptr<std::ifstream> file_;
  std::istream* stream_;
};

class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) {
    if (path.empty() || path == "-") {
      stream_ = &fallback;
    } else {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw ResourceError("cannot open '" + path + "' for writing");
      stream_ = file_.get();
    }
  }
  std::ostream& get() { return *stream_; }
  void finish() {
    stream_->flush();
    if (!*stream_) throw ResourceError("write failed");
  }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_;
};

inline std::string fixed(double v, int precision = 6) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// Stats report

inline double round6(double v) { return std::round(v * 1e6) / 1e6; }

inline nlohmann::ordered_json stats_to_json(const MaskingStats& s) {
  nlohmann::ordered_json j;
  j["examples"] = s.examples;
  j["marked_examples"] = s.marked_examples;
  j["wwm_examples"] = s.wwm_examples;
  j["chars"] = s.chars;
  j["masked_chars"] = s.masked_chars;
  j["markers"] = s.markers;
  j["masked_markers"] = s.masked_markers;
  j["pinyin_confusions"] = s.pinyin_confusions;
  j["synonym_confusions"] = s.synonym_confusions;
  j["confusion_loss"] = s.confusion_loss;
  j["normal_markers"] = s.normal_markers;
  j["normal_loss"] = s.normal_loss;
  auto rate = [](std::optional<double> r) -> nlohmann::ordered_json {
    if (!r) return nullptr;
    return round6(*r);
  };
  nlohmann::ordered_json r;
  r["masked_char"] = rate(s.masked_char_rate());
  r["no_marker"] = rate(s.no_marker_rate());
  r["wwm"] = rate(s.wwm_rate());
  r["wwm_among_marked"] = rate(s.wwm_rate_marked());
  r["word_replacement"] = rate(s.replace_rate());
  r["pinyin_replacement"] = rate(s.pinyin_rate());
  r["synonym_replacement"] = rate(s.synonym_rate());
  r["normal_marker_loss"] = rate(s.normal_loss_rate());
  r["confusion_marker_loss"] = rate(s.confusion_loss_rate());
  r["masked_marker"] = rate(s.masked_marker_rate());
  j["rates"] = std::move(r);
  return j;
}

// Human-readable table followed by a JSON block carrying the same numbers.
inline std::string print_stats(const MaskingStats& s) {
  std::ostringstream os;
  auto count = [&](const char* name, std::size_t v) {
    os << std::left << std::setw(24) << name << std::right << std::setw(12) << v << '\n';
  };
  auto rate = [&](const char* name, std::optional<double> r) {
    os << std::left << std::setw(24) << name << std::right << std::setw(12)
       << (r ? fixed(round6(*r)) : std::string("n/a")) << '\n';
  };
  os << "# counts\n";
  count("examples", s.examples);
  count("marked_examples", s.marked_examples);
  count("wwm_examples", s.wwm_examples);
  count("chars", s.chars);
  count("masked_chars", s.masked_chars);
  count("markers", s.markers);
  count("masked_markers", s.masked_markers);
  count("pinyin_confusions", s.pinyin_confusions);
  count("synonym_confusions", s.synonym_confusions);
  count("confusion_loss", s.confusion_loss);
  count("normal_markers", s.normal_markers);
  count("normal_loss", s.normal_loss);
  os << "# rates\n";
  rate("masked_char", s.masked_char_rate());
  rate("no_marker", s.no_marker_rate());
  rate("wwm", s.wwm_rate());
  rate("wwm_among_marked", s.wwm_rate_marked());
  rate("word_replacement", s.replace_rate());
  rate("pinyin_replacement", s.pinyin_rate());
  rate("synonym_replacement", s.synonym_rate());
  rate("normal_marker_loss", s.normal_loss_rate());
  rate("confusion_marker_loss", s.confusion_loss_rate());
  rate("masked_marker", s.masked_marker_rate());
  os << "# json\n" << stats_to_json(s).dump() << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Subcommands

// Reads raw or pre-segmented lines; blank lines separate documents.
inline std::vector<std::vector<Segmentation>> read_documents(std::istream& in,
                                                             const Lexicon* lexicon) {
  std::vector<std::vector<Segmentation>> docs(1);
  std::string line;
  std::size_t lineno = 0;
  while (detail::next_line(in, line)) {
    ++lineno;
    if (line.empty()) {
      if (!docs.back().empty()) docs.emplace_back();
      continue;
    }
    try {
      docs.back().push_back(lexicon ? segment(std::string_view(line), *lexicon)
                                    : parse_pretokenized(line));
    } catch (const ParseError& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  if (docs.back().empty()) docs.pop_back();
  return docs;
}

inline int cmd_segment(const RunConfig& rc, bool with_pos, std::istream& sin, std::ostream& sout) {
  const auto lex = load_lexicon(require_path(rc.lexicon, "--lexicon"));
  Input in(rc.in, sin);
  Output out(rc.out, sout);
  std::string line;
  std::size_t lineno = 0;
  while (detail::next_line(in.get(), line)) {
    ++lineno;
    try {
      out.get() << render_spaced(segment(std::string_view(line), lex), with_pos) << '\n';
    } catch (const ParseError& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  out.finish();
  return kOk;
}

inline int cmd_encode(const RunConfig& rc, const EncodeOptions& opts, bool pretokenized,
                      const std::string& format, std::istream& sin, std::ostream& sout) {
  const auto vocab = load_vocab(require_path(rc.vocab, "--vocab"));
  std::optional<Lexicon> lex;
  if (!pretokenized) lex = load_lexicon(require_path(rc.lexicon, "--lexicon"));
  Input in(rc.in, sin);
  Output out(rc.out, sout);
  std::string line;
  std::size_t lineno = 0;
  while (detail::next_line(in.get(), line)) {
    ++lineno;
    Segmentation seg;
    try {
      seg = lex ? segment(std::string_view(line), *lex) : parse_pretokenized(line);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), lineno);
    }
    const auto m = encode_marked(seg, vocab, opts);
    if (format == "json") {
      nlohmann::ordered_json j;
      j["ids"] = m.ids;
      j["marker_positions"] = m.marker_positions;
      j["truncated"] = m.truncated;
      out.get() << j.dump() << '\n';
    } else {
      for (std::size_t i = 0; i < m.ids.size(); ++i) out.get() << (i ? " " : "") << m.ids[i];
      out.get() << '\n';
    }
  }
  out.finish();
  return kOk;
}

inline int cmd_confusions(const RunConfig& rc, const std::string& kind, bool sample,
                          std::istream& sin, std::ostream& sout) {
  const auto emb = load_embeddings(require_path(rc.embeddings, "--embeddings"));
  const auto table = load_pinyin_table(require_path(rc.pinyin, "--pinyin"));
  rc.confusion.validate();
  if (kind != "all" && kind != "pinyin" && kind != "synonym")
    throw UsageError("--kind must be one of all, pinyin, synonym");
  Input in(rc.in, sin);
  Output out(rc.out, sout);
  auto emit = [&](const ConfusionChoice& c) {
    out.get() << c.original << '\t' << to_string(c.kind) << '\t' << c.replacement << '\t'
              << fixed(c.score) << '\n';
  };
  std::string word;
  std::uint64_t index = 0;
  while (detail::next_line(in.get(), word)) {
    if (word.empty()) continue;
    if (sample) {
      Rng rng(derive_seed(rc.seed, {index++}));
      if (auto c = sample_confusion(word, emb, table, rng, rc.confusion)) emit(*c);
      continue;
    }
    if (kind != "synonym")
      for (const auto& c : pinyin_candidates(word, table)) emit(c);
    if (kind != "pinyin")
      for (const auto& c : synonym_candidates(word, emb, rc.confusion.k_syn)) emit(c);
  }
  out.finish();
  return kOk;
}

inline int cmd_build_corpus(const RunConfig& rc, bool pretokenized, std::size_t dupe_factor,
                            std::istream& sin, std::ostream& sout) {
  rc.masking.validate();
  rc.confusion.validate();
  if (dupe_factor == 0) throw ConfigError("--dupe-factor must be at least 1");
  const auto vocab = load_vocab(require_path(rc.vocab, "--vocab"));
  const auto emb = load_embeddings(require_path(rc.embeddings, "--embeddings"));
  const auto table = load_pinyin_table(require_path(rc.pinyin, "--pinyin"));
  std::optional<Lexicon> lex;
  if (!pretokenized) lex = load_lexicon(require_path(rc.lexicon, "--lexicon"));
  const ConfusionIndex index(emb, table, rc.confusion);

  Input in(rc.in, sin);
  const auto docs = read_documents(in.get(), lex ? &*lex : nullptr);
  const auto packed = pack_documents(docs, rc.masking);
  Output out(rc.out, sout);
  for (std::size_t d = 0; d < dupe_factor; ++d) {
    // Pass 0 uses the root seed directly; later passes derive their own.
    const std::uint64_t seed = d == 0 ? rc.seed : derive_seed(rc.seed, {0xD0BE, d});
    write_examples(out.get(), build_corpus(packed, vocab, index, rc.masking, seed, rc.workers));
  }
  out.finish();
  return kOk;
}

inline std::vector<PretrainingExample> read_examples_from(const std::string& path,
                                                          std::istream& sin) {
  Input in(path, sin);
  return read_examples(in.get());
}

inline int cmd_pretrain(RunConfig rc, std::size_t steps, double lr, std::size_t batch_size,
                        const std::string& ckpt, std::istream& sin, std::ostream& sout) {
  if (ckpt.empty()) throw UsageError("missing required flag --ckpt");
  if (batch_size == 0) throw ConfigError("--batch-size must be at least 1");
  const auto vocab = load_vocab(require_path(rc.vocab, "--vocab"));
  const auto examples = read_examples_from(rc.in, sin);
  if (examples.empty()) throw InputError("no training examples in input");
  rc.model.vocab_size = vocab.size();
  rc.model.seed = rc.seed;
  std::size_t longest = 0;
  for (const auto& ex : examples) longest = std::max(longest, ex.attention_len);
  if (rc.model.max_positions < longest) rc.model.max_positions = longest;
  Encoder<double> model(rc.model);

  Output out(rc.out, sout);
  out.get() << "step\ttotal\tmlm_loss\trwd_loss\tmlm_acc\trwd_acc\n";
  std::vector<PretrainingExample> batch;
  for (std::size_t step = 0; step < steps; ++step) {
    batch.clear();
    for (std::size_t k = 0; k < batch_size; ++k)
      batch.push_back(examples[(step * batch_size + k) % examples.size()]);
    const auto m = train_step(model, batch, lr);
    out.get() << step << '\t' << fixed(m.loss.total) << '\t' << fixed(m.loss.mlm_loss) << '\t'
              << fixed(m.loss.rwd_loss) << '\t' << fixed(m.mlm_accuracy) << '\t'
              << fixed(m.rwd_accuracy) << '\n';
  }
  save_checkpoint(resolve_resource(ckpt), model);
  out.finish();
  return kOk;
}

inline int cmd_eval_ner(const RunConfig& rc, const std::string& pred_path,
                        const std::string& gold_path, std::ostream& sout) {
  if (pred_path.empty()) throw UsageError("missing required flag --pred");
  if (gold_path.empty()) throw UsageError("missing required flag --gold");
  const auto pred = ner::read_conll(pred_path);
  const auto gold = ner::read_conll(gold_path);
  if (pred.size() != gold.size())
    throw InputError("prediction has " + std::to_string(pred.size()) + " sentences, gold has " +
                     std::to_string(gold.size()));
  ner::NerScore score;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    if (pred[s].chars != gold[s].chars)
      throw InputError("sentence " + std::to_string(s + 1) + " differs between prediction and gold");
    score.add(pred[s].tags, gold[s].tags);
  }
  const auto prf = score.spans();
  Output out(rc.out, sout);
  out.get() << "span_precision\t" << fixed(prf.precision) << '\n'
            << "span_recall\t" << fixed(prf.recall) << '\n'
            << "span_f1\t" << fixed(prf.f1) << '\n'
            << "token_accuracy\t" << fixed(score.token_accuracy()) << '\n'
            << "gold_spans\t" << score.gold << '\n'
            << "predicted_spans\t" << score.predicted << '\n';
  out.finish();
  return kOk;
}

inline int cmd_attn_dump(const RunConfig& rc, const std::string& ckpt, std::int64_t index,
                         std::istream& sin, std::ostream& sout) {
  if (ckpt.empty()) throw UsageError("missing required flag --ckpt");
  const auto vocab = load_vocab(require_path(rc.vocab, "--vocab"));
  const auto model = load_checkpoint(resolve_resource(ckpt));
  if (model.config().vocab_size != vocab.size())
    throw ConfigError("checkpoint vocabulary size does not match --vocab");
  auto examples = read_examples_from(rc.in, sin);
  if (index >= 0) {
    if (static_cast<std::size_t>(index) >= examples.size())
      throw InputError("--index " + std::to_string(index) + " is past the end of the input");
    examples = {examples[static_cast<std::size_t>(index)]};
  }
  Output out(rc.out, sout);
  out.get() << export_attention(model, examples, vocab).dump() << '\n';
  out.finish();
  return kOk;
}

inline int cmd_stats(const RunConfig& rc, std::istream& sin, std::ostream& sout) {
  const auto examples = read_examples_from(rc.in, sin);
  Output out(rc.out, sout);
  out.get() << print_stats(corpus_stats(examples));
  out.finish();
  return kOk;
}

inline int cmd_build_vocab(const RunConfig& rc, std::istream& sin, std::ostream& sout) {
  const auto lex = load_lexicon(require_path(rc.lexicon, "--lexicon"));
  std::u32string extra;
  if (rc.in != "-" && !rc.in.empty()) {
    Input in(rc.in, sin);
    std::string line;
    while (detail::next_line(in.get(), line)) extra += utf8::decode(line);
  }
  Output out(rc.out, sout);
  build_vocab(lex, extra).write(out.get());
  out.finish();
  return kOk;
}

// ---------------------------------------------------------------------------

// Entry point shared by the binary and the tests. Errors are reported as one
// line on `err`: "error: <kind>: <message>".
inline int run(int argc, const char* const* argv, std::istream& sin = std::cin,
               std::ostream& sout = std::cout, std::ostream& serr = std::cerr) {
  CLI::App app{"Marker-aware Chinese pretraining toolkit"};
  app.require_subcommand(1);
  RunConfig rc;

  auto add_resources = [&](CLI::App* sc) {
    sc->add_option("--lexicon", rc.lexicon, "Lexicon TSV (word, pos, freq)");
    sc->add_option("--embeddings", rc.embeddings, "Word embeddings (word2vec text format)");
    sc->add_option("--pinyin", rc.pinyin, "Pinyin table TSV");
    sc->add_option("--vocab", rc.vocab, "Vocabulary, one token per line");
  };
  auto add_io = [&](CLI::App* sc) {
    sc->add_option("--in", rc.in, "Input path, '-' for stdin");
    sc->add_option("--out", rc.out, "Output path, '-' for stdout");
    sc->add_option("--seed", rc.seed, "Root random seed")->capture_default_str();
    sc->add_option("--workers", rc.workers, "Worker threads")->capture_default_str();
    sc->add_flag("--deterministic", rc.deterministic,
                 "Order-stable output (always on; accepted for scripting)");
  };
  auto add_masking = [&](CLI::App* sc) {
    sc->add_option("--max-len", rc.masking.max_len)->capture_default_str();
    sc->add_option("--mask-ratio", rc.masking.mask_ratio)->capture_default_str();
    sc->add_option("--p-no-marker", rc.masking.p_no_marker)->capture_default_str();
    sc->add_option("--p-wwm", rc.masking.p_wwm)->capture_default_str();
    sc->add_option("--p-replace-word", rc.masking.p_replace_word)->capture_default_str();
    sc->add_option("--p-normal-marker-loss", rc.masking.p_normal_marker_loss)->capture_default_str();
    sc->add_flag("--pos-markers", rc.masking.pos_markers, "Use POS-specific markers");
    sc->add_option("--p-pinyin", rc.confusion.p_pinyin)->capture_default_str();
    sc->add_option("--k-syn", rc.confusion.k_syn)->capture_default_str();
  };

  auto* seg = app.add_subcommand("segment", "Segment raw text with forward maximum matching");
  add_resources(seg);
  add_io(seg);
  bool seg_pos = false;
  seg->add_flag("--pos", seg_pos, "Emit word/POS");

  auto* enc = app.add_subcommand("encode", "Encode text into token ids with boundary markers");
  add_resources(enc);
  add_io(enc);
  EncodeOptions enc_opts;
  bool no_markers = false, no_cls_sep = false, pretokenized_enc = false;
  std::string enc_format = "ids";
  enc->add_flag("--no-markers", no_markers, "Plain character encoding");
  enc->add_flag("--pos-markers", enc_opts.pos_markers, "Use POS-specific markers");
  enc->add_flag("--no-cls-sep", no_cls_sep, "Omit CLS/SEP framing");
  enc->add_flag("--pretokenized", pretokenized_enc, "Input is space-separated words");
  enc->add_option("--max-len", enc_opts.max_len)->capture_default_str();
  enc->add_option("--format", enc_format, "ids or json")->check(CLI::IsMember({"ids", "json"}));

  auto* conf = app.add_subcommand("confusions", "List or sample confusion words");
  add_resources(conf);
  add_io(conf);
  std::string conf_kind = "all";
  bool conf_sample = false;
  conf->add_option("--k", rc.confusion.k_syn, "Synonyms per word")->capture_default_str();
  conf->add_option("--kind", conf_kind, "all, pinyin or synonym");
  conf->add_option("--p-pinyin", rc.confusion.p_pinyin)->capture_default_str();
  conf->add_flag("--sample", conf_sample, "Emit one sampled confusion per word");

  auto* bc = app.add_subcommand("build-corpus", "Generate pretraining examples as JSON Lines");
  add_resources(bc);
  add_io(bc);
  add_masking(bc);
  bool pretokenized_bc = false;
  std::size_t dupe_factor = 1;
  bc->add_flag("--pretokenized", pretokenized_bc, "Input is space-separated words");
  bc->add_option("--dupe-factor", dupe_factor, "Passes over the corpus with fresh seeds")
      ->capture_default_str();

  auto* pt = app.add_subcommand("pretrain", "Train the toy encoder on build-corpus output");
  add_resources(pt);
  add_io(pt);
  std::size_t steps = 100, batch_size = 8;
  double lr = 0.05;
  std::string pt_ckpt;
  pt->add_option("--steps", steps)->capture_default_str();
  pt->add_option("--lr", lr)->capture_default_str();
  pt->add_option("--batch-size", batch_size)->capture_default_str();
  pt->add_option("--ckpt", pt_ckpt, "Checkpoint output path");
  pt->add_option("--hidden-dim", rc.model.hidden_dim)->capture_default_str();
  pt->add_option("--num-layers", rc.model.num_layers)->capture_default_str();
  pt->add_option("--num-heads", rc.model.num_heads)->capture_default_str();
  pt->add_option("--ffn-dim", rc.model.ffn_dim)->capture_default_str();
  pt->add_option("--max-positions", rc.model.max_positions)->capture_default_str();
  pt->add_option("--rwd-classes", rc.model.rwd_classes)->capture_default_str();
  pt->add_option("--dropout", rc.model.dropout)->capture_default_str();

  auto* ev = app.add_subcommand("eval-ner", "Span-level P/R/F1 of CoNLL predictions");
  add_io(ev);
  std::string pred_path, gold_path;
  ev->add_option("--pred", pred_path, "Predicted tags (char<TAB>tag)");
  ev->add_option("--gold", gold_path, "Gold tags (char<TAB>tag)");

  auto* ad = app.add_subcommand("attn-dump", "Export marker attention rows as JSON");
  add_resources(ad);
  add_io(ad);
  std::string ad_ckpt;
  std::int64_t ad_index = 0;
  ad->add_option("--ckpt", ad_ckpt, "Checkpoint path");
  ad->add_option("--index", ad_index, "Example index, -1 for all")->capture_default_str();

  auto* st = app.add_subcommand("stats", "Masking statistics of build-corpus output");
  add_io(st);

  auto* bv = app.add_subcommand("build-vocab", "Build a vocabulary from a lexicon (+ corpus)");
  add_resources(bv);
  add_io(bv);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, sout, serr);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, sout, serr);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    for (auto& c : msg)
      if (c == '\n') c = ' ';
    serr << "error: usage: " << msg << '\n';
    return kUsage;
  }

  try {
    if (*seg) return cmd_segment(rc, seg_pos, sin, sout);
    if (*enc) {
      enc_opts.insert_markers = !no_markers;
      enc_opts.add_cls_sep = !no_cls_sep;
      return cmd_encode(rc, enc_opts, pretokenized_enc, enc_format, sin, sout);
    }
    if (*conf) return cmd_confusions(rc, conf_kind, conf_sample, sin, sout);
    if (*bc) return cmd_build_corpus(rc, pretokenized_bc, dupe_factor, sin, sout);
    if (*pt) return cmd_pretrain(rc, steps, lr, batch_size, pt_ckpt, sin, sout);
    if (*ev) return cmd_eval_ner(rc, pred_path, gold_path, sout);
    if (*ad) return cmd_attn_dump(rc, ad_ckpt, ad_index, sin, sout);
    if (*st) return cmd_stats(rc, sin, sout);
    if (*bv) return cmd_build_vocab(rc, sin, sout);
  } catch (const Error& e) {
    serr << "error: " << e.kind() << ": " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    serr << "error: internal: " << e.what() << '\n';
    return kInternal;
  }
  serr << "error: usage: no subcommand\n";
  return kUsage;
}

}  // namespace markkit::cli
