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

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "markkit/error.hpp"
#include "markkit/marker_encoder.hpp"
#include "markkit/model.hpp"

namespace markkit {

// Checkpoint layout:
//
//   offset 0   8 bytes   magic "MKCKPT01"
//   offset 8   8 bytes   header length N, unsigned little-endian
//   offset 16  N bytes   UTF-8 JSON header
//   offset 16+N          tensor data, float64 little-endian, row-major,
//                        concatenated in header order
//
// Header: {"format":1, "dtype":"float64", "config":{...ModelConfig...},
//          "tensors":[{"name":..., "shape":[rows, cols], "offset":bytes}, ...]}
// where "offset" is relative to the start of the data section.
inline constexpr char kCheckpointMagic[9] = "MKCKPT01";

inline nlohmann::ordered_json config_to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["vocab_size"] = c.vocab_size;
  j["hidden_dim"] = c.hidden_dim;
  j["num_layers"] = c.num_layers;
  j["num_heads"] = c.num_heads;
  j["ffn_dim"] = c.ffn_dim;
  j["max_positions"] = c.max_positions;
  j["rwd_classes"] = c.rwd_classes;
  j["dropout"] = c.dropout;
  j["seed"] = c.seed;
  return j;
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.num_layers = j.at("num_layers").get<std::size_t>();
  c.num_heads = j.at("num_heads").get<std::size_t>();
  c.ffn_dim = j.at("ffn_dim").get<std::size_t>();
  c.max_positions = j.at("max_positions").get<std::size_t>();
  c.rwd_classes = j.at("rwd_classes").get<std::size_t>();
  c.dropout = j.at("dropout").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

namespace detail {

inline void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw ParseError("truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{b[i]} << (8 * i);
  return v;
}

inline void put_f64(std::ostream& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }
inline double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

}  // namespace detail

template <typename T>
void save_checkpoint(std::ostream& out, const Encoder<T>& model) {
  nlohmann::ordered_json header;
  header["format"] = 1;
  header["dtype"] = "float64";
  header["config"] = config_to_json(model.config());
  auto tensors = nlohmann::ordered_json::array();
  std::uint64_t offset = 0;
  model.params().visit([&](const std::string& name, const Matrix<T>& m) {
    tensors.push_back({{"name", name}, {"shape", {m.rows(), m.cols()}}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(m.size()) * 8;
  });
  header["tensors"] = std::move(tensors);
  const std::string h = header.dump();
  out.write(kCheckpointMagic, 8);
  detail::put_u64(out, h.size());
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  model.params().visit([&](const std::string&, const Matrix<T>& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) detail::put_f64(out, static_cast<double>(m.data()[i]));
  });
  if (!out) throw ResourceError("failed to write checkpoint");
}

template <typename T>
void save_checkpoint(const std::string& path, const Encoder<T>& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ResourceError("cannot open '" + path + "' for writing");
  save_checkpoint(out, model);
}

inline Encoder<double> load_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw ParseError("not a checkpoint file (bad magic)");
  const std::uint64_t hlen = detail::get_u64(in);
  if (hlen > (1u << 26)) throw ParseError("checkpoint header too large");
  std::string h(hlen, '\0');
  if (!in.read(h.data(), static_cast<std::streamsize>(hlen))) throw ParseError("truncated checkpoint");
  nlohmann::json header;
  ModelConfig cfg;
  try {
    header = nlohmann::json::parse(h);
    if (header.at("format").get<int>() != 1 || header.at("dtype").get<std::string>() != "float64")
      throw ParseError("unsupported checkpoint format");
    cfg = config_from_json(header.at("config"));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad checkpoint header: ") + e.what());
  }
  Encoder<double> model(cfg);
  const auto& tensors = header.at("tensors");
  std::size_t idx = 0;
  model.params().visit([&](const std::string& name, Matrix<double>& m) {
    if (idx >= tensors.size()) throw ParseError("checkpoint is missing tensor '" + name + "'");
    const auto& t = tensors[idx++];
    if (t.at("name").get<std::string>() != name)
      throw ParseError("checkpoint tensor order mismatch at '" + name + "'");
    const auto shape = t.at("shape").get<std::vector<Eigen::Index>>();
    if (shape.size() != 2 || shape[0] != m.rows() || shape[1] != m.cols())
      throw ParseError("checkpoint tensor '" + name + "' has the wrong shape");
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = detail::get_f64(in);
  });
  if (idx != tensors.size()) throw ParseError("checkpoint has unexpected extra tensors");
  return model;
}

inline Encoder<double> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ResourceError("cannot open '" + path + "'");
  return load_checkpoint(in);
}

// ---------------------------------------------------------------------------
// Attention export

// Rows of every layer/head attention matrix at marker positions, with the
// token strings labelling the columns:
//   {"tokens":[...], "layers":L, "heads":H,
//    "markers":[{"position":p, "token":"[S]", "weights":[[[...] x H] x L]}]}
template <typename T>
nlohmann::ordered_json export_attention(const ForwardOutput<T>& out, const PretrainingExample& ex,
                                        const Vocab& vocab) {
  if (out.attentions.empty())
    throw UsageError("attention capture was not enabled for this forward pass");
  nlohmann::ordered_json j;
  auto tokens = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < ex.attention_len; ++i)
    tokens.push_back(vocab.token(ex.input_ids[i]));
  j["tokens"] = std::move(tokens);
  j["layers"] = out.attentions.size();
  j["heads"] = out.attentions.front().size();
  auto markers = nlohmann::ordered_json::array();
  for (std::size_t p : out.marker_positions) {
    nlohmann::ordered_json rec;
    rec["position"] = p;
    rec["token"] = vocab.token(ex.input_ids[p]);
    auto layers = nlohmann::ordered_json::array();
    for (const auto& layer : out.attentions) {
      auto heads = nlohmann::ordered_json::array();
      for (const auto& a : layer) {
        std::vector<double> row(static_cast<std::size_t>(a.cols()));
        for (Eigen::Index c = 0; c < a.cols(); ++c)
          row[static_cast<std::size_t>(c)] = static_cast<double>(a(static_cast<Eigen::Index>(p), c));
        heads.push_back(std::move(row));
      }
      layers.push_back(std::move(heads));
    }
    rec["weights"] = std::move(layers);
    markers.push_back(std::move(rec));
  }
  j["markers"] = std::move(markers);
  return j;
}

template <typename T>
nlohmann::ordered_json export_attention(const Encoder<T>& model,
                                        const std::vector<PretrainingExample>& batch,
                                        const Vocab& vocab) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& ex : batch) arr.push_back(export_attention(model.forward(ex, true), ex, vocab));
  return arr;
}

}  // namespace markkit
