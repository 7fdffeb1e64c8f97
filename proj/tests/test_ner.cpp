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

#include <gtest/gtest.h>

#include <sstream>

#include "markkit/ner.hpp"
#include "markkit/rng.hpp"
#include "support.hpp"

using namespace markkit;
using namespace markkit::ner;

namespace {

using Tags = std::vector<std::string>;

// Oracle: enumerate every (start, end, type) and test the strict pattern.
std::set<EntitySpan> oracle_spans(const Tags& tags) {
  std::set<EntitySpan> out;
  const std::vector<std::string> types = {"PER", "LOC", "ORG"};
  for (std::size_t i = 0; i < tags.size(); ++i)
    for (std::size_t j = i; j < tags.size(); ++j)
      for (const auto& t : types) {
        bool ok;
        if (i == j) {
          ok = tags[i] == "S-" + t;
        } else {
          ok = tags[i] == "B-" + t && tags[j] == "E-" + t;
          for (std::size_t k = i + 1; ok && k < j; ++k) ok = tags[k] == "M-" + t;
        }
        if (ok) out.insert({i, j + 1, t});
      }
  return out;
}

}  // namespace

TEST(Tags, Parse) {
  EXPECT_EQ(parse_tag("B-PER").prefix, 'B');
  EXPECT_EQ(parse_tag("B-PER").type, "PER");
  EXPECT_EQ(parse_tag("O").prefix, 'O');
  EXPECT_THROW(parse_tag("X-PER"), InputError);
  EXPECT_THROW(parse_tag(""), InputError);
}

TEST(Tags, BioConvertsToBmeso) {
  EXPECT_EQ(to_bmeso({"B-PER", "I-PER", "I-PER", "O", "B-LOC", "B-LOC", "I-LOC"}),
            (Tags{"B-PER", "M-PER", "E-PER", "O", "S-LOC", "B-LOC", "E-LOC"}));
  // BIOES: I is the middle tag.
  EXPECT_EQ(to_bmeso({"B-PER", "I-PER", "E-PER", "S-LOC"}),
            (Tags{"B-PER", "M-PER", "E-PER", "S-LOC"}));
  EXPECT_EQ(to_bmeso({"B-PER", "E-PER"}), (Tags{"B-PER", "E-PER"}));
}

TEST(Spans, StrictExtraction) {
  EXPECT_EQ(extract_spans({"B-PER", "M-PER", "E-PER", "S-LOC"}),
            (std::set<EntitySpan>{{0, 3, "PER"}, {3, 4, "LOC"}}));
  EXPECT_TRUE(extract_spans({"B-PER", "O", "E-PER"}).empty());
  EXPECT_TRUE(extract_spans({"B-PER", "E-LOC"}).empty());
  EXPECT_TRUE(extract_spans({"M-PER", "E-PER"}).empty());
  EXPECT_TRUE(extract_spans({"B-PER"}).empty());
}

TEST(Spans, MatchOracleOnRandomSequences) {
  const Tags alphabet = {"O",     "B-PER", "M-PER", "E-PER", "S-PER", "B-LOC",
                         "M-LOC", "E-LOC", "S-LOC", "B-ORG", "E-ORG", "S-ORG"};
  Rng rng(3);
  for (int trial = 0; trial < 3000; ++trial) {
    Tags tags(rng.below(12));
    for (auto& t : tags) t = alphabet[rng.below(alphabet.size())];
    ASSERT_EQ(extract_spans(tags), oracle_spans(tags));
  }
}

TEST(Scores, SpanF1) {
  std::set<EntitySpan> gold = {{0, 2, "PER"}, {3, 4, "LOC"}};
  std::set<EntitySpan> pred = {{0, 2, "PER"}, {3, 4, "ORG"}, {5, 6, "LOC"}};
  auto r = span_f1(pred, gold);
  EXPECT_NEAR(r.precision, 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.recall, 0.5, 1e-12);
  EXPECT_NEAR(r.f1, 0.4, 1e-12);
  EXPECT_EQ(span_f1({}, {}).f1, 1.0);
  EXPECT_EQ(span_f1({}, gold).f1, 0.0);
  EXPECT_EQ(span_f1(gold, {}).f1, 0.0);
}

TEST(Scores, CorpusCountsArePooled) {
  NerScore s;
  s.add({"S-PER", "O"}, {"S-PER", "O"});
  s.add({"O", "O", "O"}, {"B-LOC", "M-LOC", "E-LOC"});
  auto p = s.spans();
  EXPECT_NEAR(p.precision, 1.0, 1e-12);
  EXPECT_NEAR(p.recall, 0.5, 1e-12);
  EXPECT_NEAR(s.token_accuracy(), 0.4, 1e-12);
  EXPECT_THROW(s.add({"O"}, {"O", "O"}), InputError);
}

TEST(Alignment, MarkersCopyPreviousTag) {
  Vocab v({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "[S]", "张", "三", "去", "北", "京"});
  NerExample ex;
  ex.chars = U"张三去北京";
  ex.labels = {"B-PER", "E-PER", "O", "B-LOC", "E-LOC"};
  auto marked = encode_marked(parse_pretokenized("张三 去 北京"), v);
  auto tags = align_labels_with_markers(ex, marked);
  EXPECT_EQ(tags, (Tags{"O", "B-PER", "E-PER", "E-PER", "O", "O", "B-LOC", "E-LOC", "E-LOC", "O"}));
  EXPECT_EQ(strip_marker_labels(tags, marked), ex.labels);
  ex.labels.pop_back();
  EXPECT_THROW(align_labels_with_markers(ex, marked), InputError);
}

TEST(Alignment, RandomRoundTripsPreserveSpans) {
  const auto& t = fixtures::toy();
  Rng rng(11);
  const Tags alphabet = {"O", "B-PER", "M-PER", "E-PER", "S-LOC"};
  const auto& words = t.embeddings.words();
  for (int trial = 0; trial < 300; ++trial) {
    std::string text;
    for (auto n = 1 + rng.below(8); n > 0; --n) text += words[rng.below(words.size())];
    NerExample ex;
    ex.chars = utf8::decode(text);
    ex.labels.resize(ex.chars.size());
    for (auto& l : ex.labels) l = alphabet[rng.below(alphabet.size())];
    auto marked = encode_marked(segment(std::u32string_view(ex.chars), t.lexicon), t.vocab);
    auto aligned = align_labels_with_markers(ex, marked);
    ASSERT_EQ(aligned.size(), marked.ids.size());
    auto back = strip_marker_labels(aligned, marked);
    ASSERT_EQ(back, ex.labels);
    EXPECT_EQ(extract_spans(back), extract_spans(ex.labels));
  }
}

TEST(Conll, ReadWriteRoundTrip) {
  std::istringstream in("张\tB-PER\n三\tE-PER\n\n去\tO\r\n");
  auto sents = read_conll(in);
  ASSERT_EQ(sents.size(), 2u);
  EXPECT_EQ(sents[0].tags, (Tags{"B-PER", "E-PER"}));
  std::ostringstream out;
  write_conll(out, sents);
  EXPECT_EQ(out.str(), "张\tB-PER\n三\tE-PER\n\n去\tO\n");
}

TEST(Conll, MalformedLines) {
  std::istringstream no_tab("张 B-PER\n");
  EXPECT_THROW(read_conll(no_tab), ParseError);
  std::istringstream bad_tag("张\tQ-PER\n");
  try {
    read_conll(bad_tag);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
}

TEST(Conll, ToyFileScoresPerfectAgainstItself) {
  auto sents = read_conll(fixtures::data_path("ner.tsv"));
  EXPECT_EQ(sents.size(), 60u);
  NerScore s;
  for (const auto& x : sents) s.add(x.tags, x.tags);
  EXPECT_EQ(s.spans().f1, 1.0);
  EXPECT_GT(s.gold, 0u);
}

TEST(Alignment, WorkedExamples) {
  Vocab v({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "[S]", "北", "京", "在", "张"});
  EncodeOptions bare;
  bare.add_cls_sep = false;
  NerExample ex{U"北京在", {"B-LOC", "E-LOC", "O"}, std::nullopt};
  auto marked = encode_marked(parse_pretokenized("北京 在"), v, bare);
  auto tags = align_labels_with_markers(ex, marked);
  EXPECT_EQ(tags, (Tags{"B-LOC", "E-LOC", "E-LOC", "O", "O"}));
  EXPECT_EQ(strip_marker_labels(tags, marked), ex.labels);

  bare.insert_markers = false;
  auto plain = encode_marked(parse_pretokenized("北京 在"), v, bare);
  EXPECT_EQ(align_labels_with_markers(ex, plain), ex.labels);
  EXPECT_EQ(strip_marker_labels(ex.labels, plain), ex.labels);

  bare.insert_markers = true;
  NerExample one{U"张", {"S-PER"}, std::nullopt};
  EXPECT_EQ(align_labels_with_markers(one, encode_marked(parse_pretokenized("张"), v, bare)),
            (Tags{"S-PER", "S-PER"}));
  NerExample outside{U"北京在", {"O", "O", "O"}, std::nullopt};
  auto m2 = encode_marked(parse_pretokenized("北京 在"), v, bare);
  EXPECT_EQ(strip_marker_labels(align_labels_with_markers(outside, m2), m2), outside.labels);
}

TEST(Spans, WorkedExamples) {
  EXPECT_EQ(extract_spans({"B-LOC", "E-LOC", "O"}), (std::set<EntitySpan>{{0, 2, "LOC"}}));
  EXPECT_TRUE(extract_spans({"M-LOC", "E-LOC"}).empty());
  EXPECT_EQ(extract_spans({"S-PER", "O", "B-ORG", "M-ORG", "E-ORG"}),
            (std::set<EntitySpan>{{0, 1, "PER"}, {2, 5, "ORG"}}));
  std::set<EntitySpan> g = {{0, 2, "LOC"}};
  auto same = span_f1(g, g);
  EXPECT_EQ(same.precision, 1.0);
  EXPECT_EQ(same.f1, 1.0);
  auto r = span_f1({{0, 2, "LOC"}, {3, 4, "PER"}}, g);
  EXPECT_DOUBLE_EQ(r.precision, 0.5);
  EXPECT_DOUBLE_EQ(r.recall, 1.0);
  EXPECT_DOUBLE_EQ(r.f1, 2.0 / 3.0);
}
