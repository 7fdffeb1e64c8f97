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

#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "markkit/error.hpp"
#include "markkit/pretrain_builder.hpp"

namespace markkit {

// One JSON Lines record per example:
//   {"input_ids":[...],
//    "mlm_labels":[[pos,id],...],          sparse, ascending positions
//    "rwd_labels":[[pos,"NORMAL"],...],    one entry per marker
//    "rwd_loss_mask":[pos,...],            markers whose RWD loss is on
//    "meta":{"doc":d,"seq":s,"seed":n,"markers":b,"wwm":b,"truncated":b,
//            "chars":n,"masked":[...],"replaced":[...]}}
inline nlohmann::ordered_json example_to_json(const PretrainingExample& ex) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["input_ids"] = ex.input_ids;
  ordered_json mlm = ordered_json::array();
  for (std::size_t i = 0; i < ex.mlm_labels.size(); ++i)
    if (ex.mlm_labels[i] != kIgnoreLabel) mlm.push_back({i, ex.mlm_labels[i]});
  j["mlm_labels"] = std::move(mlm);
  ordered_json rwd = ordered_json::array();
  ordered_json loss = ordered_json::array();
  for (std::size_t i = 0; i < ex.marker_positions.size(); ++i) {
    rwd.push_back({ex.marker_positions[i], to_string(ex.rwd_labels[i])});
    if (ex.rwd_loss_mask[i]) loss.push_back(ex.marker_positions[i]);
  }
  j["rwd_labels"] = std::move(rwd);
  j["rwd_loss_mask"] = std::move(loss);
  ordered_json meta;
  meta["doc"] = ex.meta.doc;
  meta["seq"] = ex.meta.seq;
  meta["seed"] = ex.meta.seed;
  meta["markers"] = ex.meta.markers;
  meta["wwm"] = ex.meta.wwm;
  meta["truncated"] = ex.meta.truncated;
  meta["chars"] = ex.meta.chars;
  meta["masked"] = ex.meta.masked;
  meta["replaced"] = ex.meta.replaced;
  j["meta"] = std::move(meta);
  return j;
}

inline std::string example_to_line(const PretrainingExample& ex) {
  return example_to_json(ex).dump();
}

inline PretrainingExample example_from_json(const nlohmann::json& j) {
  PretrainingExample ex;
  try {
    ex.input_ids = j.at("input_ids").get<std::vector<TokenId>>();
    ex.attention_len = ex.input_ids.size();
    ex.mlm_labels.assign(ex.input_ids.size(), kIgnoreLabel);
    for (const auto& pair : j.at("mlm_labels")) {
      const auto pos = pair.at(0).get<std::size_t>();
      if (pos >= ex.input_ids.size()) throw ParseError("mlm label position out of range");
      ex.mlm_labels[pos] = pair.at(1).get<TokenId>();
    }
    for (const auto& pair : j.at("rwd_labels")) {
      const auto pos = pair.at(0).get<std::size_t>();
      if (pos >= ex.input_ids.size()) throw ParseError("marker position out of range");
      if (!ex.marker_positions.empty() && pos <= ex.marker_positions.back())
        throw ParseError("marker positions must be strictly ascending");
      ex.marker_positions.push_back(pos);
      ex.rwd_labels.push_back(rwd_label_from_string(pair.at(1).get<std::string>()));
    }
    ex.rwd_loss_mask.assign(ex.marker_positions.size(), false);
    for (const auto& p : j.at("rwd_loss_mask")) {
      const auto pos = p.get<std::size_t>();
      auto it = std::lower_bound(ex.marker_positions.begin(), ex.marker_positions.end(), pos);
      if (it == ex.marker_positions.end() || *it != pos)
        throw ParseError("rwd_loss_mask position " + std::to_string(pos) + " is not a marker");
      ex.rwd_loss_mask[static_cast<std::size_t>(it - ex.marker_positions.begin())] = true;
    }
    if (j.contains("meta")) {
      const auto& m = j.at("meta");
      ex.meta.doc = m.value("doc", std::uint64_t{0});
      ex.meta.seq = m.value("seq", std::uint64_t{0});
      ex.meta.seed = m.value("seed", std::uint64_t{0});
      ex.meta.markers = m.value("markers", !ex.marker_positions.empty());
      ex.meta.wwm = m.value("wwm", false);
      ex.meta.truncated = m.value("truncated", false);
      ex.meta.chars = m.value("chars", std::size_t{0});
      if (m.contains("masked")) ex.meta.masked = m.at("masked").get<std::vector<std::size_t>>();
      if (m.contains("replaced")) ex.meta.replaced = m.at("replaced").get<std::vector<std::size_t>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed example record: ") + e.what());
  }
  return ex;
}

inline PretrainingExample example_from_line(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  return example_from_json(j);
}

inline void write_examples(std::ostream& out, const std::vector<PretrainingExample>& examples) {
  for (const auto& ex : examples) out << example_to_line(ex) << '\n';
}

inline std::vector<PretrainingExample> read_examples(std::istream& in) {
  std::vector<PretrainingExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (detail::next_line(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(example_from_line(line));
    } catch (const ParseError& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  return out;
}

}  // namespace markkit
