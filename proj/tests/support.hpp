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

#include <string>
#include <vector>

#include "markkit/confusion.hpp"
#include "markkit/marker_encoder.hpp"
#include "markkit/resources.hpp"

namespace markkit::fixtures {

inline std::string data_path(const std::string& name) {
  return std::string(MARKKIT_DATA_DIR) + "/" + name;
}

// Toy resources, loaded once per process.
struct Toy {
  Lexicon lexicon = load_lexicon(data_path("lexicon.tsv"));
  WordEmbeddings embeddings = load_embeddings(data_path("embeddings.txt"));
  PinyinTable pinyin = load_pinyin_table(data_path("pinyin.tsv"));
  Vocab vocab = load_vocab(data_path("vocab.txt"));
};

inline const Toy& toy() {
  static const Toy t;
  return t;
}

inline Lexicon lexicon_of(const std::vector<std::u32string>& words) {
  Lexicon lex;
  for (const auto& w : words) lex.insert(w, {});
  return lex;
}

}  // namespace markkit::fixtures
