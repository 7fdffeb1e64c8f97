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

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "markkit/error.hpp"
#include "markkit/marker_encoder.hpp"
#include "markkit/pretrain_builder.hpp"
#include "markkit/rng.hpp"

namespace markkit {

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t hidden_dim = 64;
  std::size_t num_layers = 2;
  std::size_t num_heads = 4;
  std::size_t ffn_dim = 128;
  std::size_t max_positions = 512;
  std::size_t rwd_classes = 3;
  double dropout = 0.0;
  std::uint64_t seed = 1234;

  void validate() const {
    if (vocab_size == 0) throw ConfigError("vocab_size must be positive");
    if (hidden_dim == 0 || num_heads == 0 || num_layers == 0 || ffn_dim == 0 || max_positions == 0)
      throw ConfigError("model dimensions must be positive");
    if (hidden_dim % num_heads != 0)
      throw ConfigError("hidden_dim " + std::to_string(hidden_dim) +
                        " is not divisible by num_heads " + std::to_string(num_heads));
    if (rwd_classes != 2 && rwd_classes != 3) throw ConfigError("rwd_classes must be 2 or 3");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  }

  bool operator==(const ModelConfig&) const = default;
};

// Target class of a marker under the configured RWD head.
inline std::size_t rwd_target(RwdLabel label, std::size_t classes) {
  if (classes == 2) return label == RwdLabel::kNormal ? 0 : 1;
  return static_cast<std::size_t>(label);
}

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// ---------------------------------------------------------------------------
// Parameters

template <typename T>
struct LayerParams {
  Matrix<T> wq, bq, wk, bk, wv, bv, wo, bo;
  Matrix<T> ln1_g, ln1_b;
  Matrix<T> w1, b1, w2, b2;
  Matrix<T> ln2_g, ln2_b;

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + "attn.q.weight", wq);
    f(prefix + "attn.q.bias", bq);
    f(prefix + "attn.k.weight", wk);
    f(prefix + "attn.k.bias", bk);
    f(prefix + "attn.v.weight", wv);
    f(prefix + "attn.v.bias", bv);
    f(prefix + "attn.out.weight", wo);
    f(prefix + "attn.out.bias", bo);
    f(prefix + "attn.ln.gamma", ln1_g);
    f(prefix + "attn.ln.beta", ln1_b);
    f(prefix + "ffn.in.weight", w1);
    f(prefix + "ffn.in.bias", b1);
    f(prefix + "ffn.out.weight", w2);
    f(prefix + "ffn.out.bias", b2);
    f(prefix + "ffn.ln.gamma", ln2_g);
    f(prefix + "ffn.ln.beta", ln2_b);
  }
};

// Named parameter tensors. Bias and scale vectors are 1 x n matrices.
template <typename T>
struct Params {
  Matrix<T> tok_emb;  // vocab x hidden, tied with the MLM decoder
  Matrix<T> pos_emb;  // max_positions x hidden
  Matrix<T> emb_ln_g, emb_ln_b;
  std::vector<LayerParams<T>> layers;
  Matrix<T> mlm_w, mlm_b, mlm_ln_g, mlm_ln_b, mlm_out_b;
  Matrix<T> rwd_w, rwd_b;

  // Calls f(name, tensor) for every tensor in a fixed order.
  template <typename F>
  void visit(F&& f) {
    f("embeddings.token", tok_emb);
    f("embeddings.position", pos_emb);
    f("embeddings.ln.gamma", emb_ln_g);
    f("embeddings.ln.beta", emb_ln_b);
    for (std::size_t l = 0; l < layers.size(); ++l)
      layers[l].visit("layers." + std::to_string(l) + ".", f);
    f("mlm.transform.weight", mlm_w);
    f("mlm.transform.bias", mlm_b);
    f("mlm.ln.gamma", mlm_ln_g);
    f("mlm.ln.beta", mlm_ln_b);
    f("mlm.decoder.bias", mlm_out_b);
    f("rwd.weight", rwd_w);
    f("rwd.bias", rwd_b);
  }
  template <typename F>
  void visit(F&& f) const {
    const_cast<Params*>(this)->visit([&](const std::string& n, Matrix<T>& m) {
      f(n, static_cast<const Matrix<T>&>(m));
    });
  }

  // Zero tensors of identical shapes.
  Params zeros_like() const {
    Params z = *this;
    z.visit([](const std::string&, Matrix<T>& m) { m.setZero(); });
    return z;
  }

  std::size_t count() const {
    std::size_t n = 0;
    visit([&](const std::string&, const Matrix<T>& m) { n += static_cast<std::size_t>(m.size()); });
    return n;
  }
};

// Closed-form parameter count of the architecture.
inline std::size_t parameter_count(const ModelConfig& c) {
  const std::size_t V = c.vocab_size, H = c.hidden_dim, F = c.ffn_dim, P = c.max_positions,
                    C = c.rwd_classes;
  const std::size_t per_layer = 4 * (H * H + H) + 2 * H + (H * F + F) + (F * H + H) + 2 * H;
  return V * H + P * H + 2 * H + c.num_layers * per_layer + (H * H + H) + 2 * H + V + (H * C + C);
}

// ---------------------------------------------------------------------------
// Outputs

struct LossBreakdown {
  double mlm_loss = 0.0;
  double rwd_loss = 0.0;
  double total = 0.0;
  std::size_t mlm_count = 0;
  std::size_t rwd_count = 0;
};

template <typename T>
struct ForwardOutput {
  Matrix<T> mlm_logits;  // attention_len x vocab
  Matrix<T> rwd_logits;  // markers x rwd_classes
  std::vector<std::size_t> marker_positions;
  // attentions[layer][head] is attention_len x attention_len; empty unless captured.
  std::vector<std::vector<Matrix<T>>> attentions;
};

struct TrainMetrics {
  LossBreakdown loss;
  double mlm_accuracy = 0.0;      // argmax == label over labeled positions
  double rwd_accuracy = 0.0;      // over loss-included markers
  double rwd_accuracy_all = 0.0;  // over every marker
  std::size_t mlm_count = 0;
  std::size_t rwd_count = 0;
  std::size_t marker_count = 0;
};

// ---------------------------------------------------------------------------
// Numerics

namespace nn {

template <typename T>
T gelu(T x) {
  return T(0.5) * x * (T(1) + std::erf(x / std::sqrt(T(2))));
}

template <typename T>
T gelu_grad(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x / std::sqrt(T(2))));
  const T pdf = std::exp(T(-0.5) * x * x) / std::sqrt(T(2) * T(M_PI));
  return cdf + x * pdf;
}

template <typename T>
struct LayerNormCache {
  Matrix<T> xhat;
  Eigen::Matrix<T, Eigen::Dynamic, 1> inv_std;
};

inline constexpr double kLayerNormEps = 1e-5;

template <typename T>
Matrix<T> layer_norm(const Matrix<T>& x, const Matrix<T>& g, const Matrix<T>& b,
                     LayerNormCache<T>* cache) {
  const auto n = x.cols();
  Matrix<T> xhat(x.rows(), n);
  Eigen::Matrix<T, Eigen::Dynamic, 1> inv(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const T mean = x.row(r).mean();
    const T var = (x.row(r).array() - mean).square().mean();
    inv(r) = T(1) / std::sqrt(var + T(kLayerNormEps));
    xhat.row(r) = (x.row(r).array() - mean) * inv(r);
  }
  Matrix<T> y = (xhat.array().rowwise() * g.row(0).array()).rowwise() + b.row(0).array();
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv);
  }
  return y;
}

template <typename T>
Matrix<T> layer_norm_backward(const Matrix<T>& dy, const Matrix<T>& g, const LayerNormCache<T>& c,
                              Matrix<T>& dg, Matrix<T>& db) {
  const T n = static_cast<T>(dy.cols());
  dg.row(0) += (dy.array() * c.xhat.array()).colwise().sum().matrix();
  db.row(0) += dy.colwise().sum();
  Matrix<T> dxhat = dy.array().rowwise() * g.row(0).array();
  Matrix<T> dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const T s1 = dxhat.row(r).sum();
    const T s2 = dxhat.row(r).dot(c.xhat.row(r));
    dx.row(r) = (c.inv_std(r) / n) * (n * dxhat.row(r).array() - s1 - c.xhat.row(r).array() * s2);
  }
  return dx;
}

template <typename T>
void softmax_rows(Matrix<T>& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const T mx = m.row(r).maxCoeff();
    m.row(r) = (m.row(r).array() - mx).exp();
    m.row(r) /= m.row(r).sum();
  }
}

// -log softmax(logits)[target] and its gradient w.r.t. logits.
template <typename T>
T cross_entropy(const Eigen::Ref<const Eigen::Matrix<T, 1, Eigen::Dynamic>>& logits,
                std::size_t target, Eigen::Matrix<T, 1, Eigen::Dynamic>* grad) {
  const T mx = logits.maxCoeff();
  Eigen::Matrix<T, 1, Eigen::Dynamic> e = (logits.array() - mx).exp();
  const T z = e.sum();
  const T loss = std::log(z) - (logits(static_cast<Eigen::Index>(target)) - mx);
  if (grad) {
    *grad = e / z;
    (*grad)(static_cast<Eigen::Index>(target)) -= T(1);
  }
  return loss;
}

template <typename T>
Matrix<T> add_bias(Matrix<T> x, const Matrix<T>& b) {
  x.rowwise() += b.row(0);
  return x;
}

}  // namespace nn

// ---------------------------------------------------------------------------
// Model

// Post-LN transformer encoder with learned absolute positions, a tied MLM
// decoder and a linear replaced-word-detection head over marker positions.
template <typename T = double>
class Encoder {
 public:
  explicit Encoder(const ModelConfig& cfg) : cfg_(cfg), dropout_rng_(mix64(cfg.seed ^ 0xD50)) {
    cfg_.validate();
    init();
  }

  Encoder(const ModelConfig& cfg, Params<T> params)
      : cfg_(cfg), params_(std::move(params)), dropout_rng_(mix64(cfg.seed ^ 0xD50)) {
    cfg_.validate();
  }

  const ModelConfig& config() const { return cfg_; }
  const Params<T>& params() const { return params_; }
  Params<T>& params() { return params_; }

  // Validates ids and positions of one example.
  void check_input(const PretrainingExample& ex) const {
    const std::size_t len = ex.attention_len;
    if (len > ex.input_ids.size()) throw InputError("attention_len exceeds input length");
    if (len > cfg_.max_positions)
      throw InputError("sequence length " + std::to_string(len) + " exceeds max_positions " +
                       std::to_string(cfg_.max_positions));
    for (std::size_t i = 0; i < len; ++i)
      if (ex.input_ids[i] < 0 || static_cast<std::size_t>(ex.input_ids[i]) >= cfg_.vocab_size)
        throw InputError("token id " + std::to_string(ex.input_ids[i]) + " at position " +
                         std::to_string(i) + " is out of range");
  }

  ForwardOutput<T> forward(const PretrainingExample& ex, bool capture_attention = false) const {
    Cache cache;
    return run_forward(ex, capture_attention, /*train=*/false, nullptr, cache);
  }

  std::vector<ForwardOutput<T>> forward(const std::vector<PretrainingExample>& batch,
                                        bool capture_attention = false) const {
    std::vector<ForwardOutput<T>> out;
    out.reserve(batch.size());
    for (const auto& ex : batch) out.push_back(forward(ex, capture_attention));
    return out;
  }

  // Mean MLM cross-entropy over labeled positions plus mean RWD
  // cross-entropy over loss-included markers, pooled over the batch.
  LossBreakdown loss(const std::vector<PretrainingExample>& batch) const {
    LossTotals totals;
    for (const auto& ex : batch) {
      auto out = forward(ex);
      accumulate_loss(out, ex, totals, nullptr, nullptr);
    }
    return totals.breakdown();
  }

  // Gradient of the pooled batch loss w.r.t. every parameter. Dropout is
  // applied when `train` is set.
  Params<T> gradients(const std::vector<PretrainingExample>& batch, LossBreakdown* loss_out = nullptr,
                      TrainMetrics* metrics = nullptr, bool train = false) {
    Params<T> grads = params_.zeros_like();
    // First pass: counts for normalization.
    std::size_t mlm_n = 0, rwd_n = 0;
    for (const auto& ex : batch) {
      check_input(ex);
      mlm_n += count_mlm(ex);
      rwd_n += count_rwd(ex);
    }
    LossTotals totals;
    std::size_t mlm_hits = 0, rwd_hits = 0, rwd_all_hits = 0, markers = 0;
    for (const auto& ex : batch) {
      Cache cache;
      auto out = run_forward(ex, false, train, train ? &dropout_rng_ : nullptr, cache);
      Matrix<T> d_mlm = Matrix<T>::Zero(out.mlm_logits.rows(), out.mlm_logits.cols());
      Matrix<T> d_rwd = Matrix<T>::Zero(out.rwd_logits.rows(), out.rwd_logits.cols());
      accumulate_loss(out, ex, totals, &d_mlm, &d_rwd);
      if (mlm_n) d_mlm /= static_cast<T>(mlm_n);
      if (rwd_n) d_rwd /= static_cast<T>(rwd_n);
      backward(cache, d_mlm, d_rwd, grads);
      if (metrics) {
        count_hits(out, ex, mlm_hits, rwd_hits, rwd_all_hits, markers);
      }
    }
    auto br = totals.breakdown();
    if (loss_out) *loss_out = br;
    if (metrics) {
      metrics->loss = br;
      metrics->mlm_count = mlm_n;
      metrics->rwd_count = rwd_n;
      metrics->marker_count = markers;
      metrics->mlm_accuracy = mlm_n ? double(mlm_hits) / double(mlm_n) : 0.0;
      metrics->rwd_accuracy = rwd_n ? double(rwd_hits) / double(rwd_n) : 0.0;
      metrics->rwd_accuracy_all = markers ? double(rwd_all_hits) / double(markers) : 0.0;
    }
    return grads;
  }

  // Gradients of the loss w.r.t. the final hidden states, split by head.
  // Rows are positions; used to check that each loss only touches the
  // positions it labels.
  struct HeadInputGradients {
    Matrix<T> from_mlm;
    Matrix<T> from_rwd;
  };
  HeadInputGradients head_input_gradients(const PretrainingExample& ex) const {
    check_input(ex);
    Cache cache;
    auto out = run_forward(ex, false, false, nullptr, cache);
    LossTotals totals;
    Matrix<T> d_mlm = Matrix<T>::Zero(out.mlm_logits.rows(), out.mlm_logits.cols());
    Matrix<T> d_rwd = Matrix<T>::Zero(out.rwd_logits.rows(), out.rwd_logits.cols());
    accumulate_loss(out, ex, totals, &d_mlm, &d_rwd);
    if (totals.mlm_n) d_mlm /= static_cast<T>(totals.mlm_n);
    if (totals.rwd_n) d_rwd /= static_cast<T>(totals.rwd_n);
    Params<T> scratch = params_.zeros_like();
    HeadInputGradients g;
    g.from_mlm = mlm_head_backward(cache, d_mlm, scratch);
    g.from_rwd = rwd_head_backward(cache, d_rwd, scratch);
    return g;
  }

  // Gradient of the MLM loss w.r.t. the MLM logits of one example.
  Matrix<T> mlm_logit_gradients(const PretrainingExample& ex) const {
    auto out = forward(ex);
    LossTotals totals;
    Matrix<T> d_mlm = Matrix<T>::Zero(out.mlm_logits.rows(), out.mlm_logits.cols());
    Matrix<T> d_rwd = Matrix<T>::Zero(out.rwd_logits.rows(), out.rwd_logits.cols());
    accumulate_loss(out, ex, totals, &d_mlm, &d_rwd);
    if (totals.mlm_n) d_mlm /= static_cast<T>(totals.mlm_n);
    return d_mlm;
  }

  // Scores of the current parameters on a batch without updating them.
  TrainMetrics evaluate(const std::vector<PretrainingExample>& batch) const {
    TrainMetrics m;
    LossTotals totals;
    std::size_t mlm_hits = 0, rwd_hits = 0, rwd_all_hits = 0, markers = 0;
    for (const auto& ex : batch) {
      auto out = forward(ex);
      accumulate_loss(out, ex, totals, nullptr, nullptr);
      count_hits(out, ex, mlm_hits, rwd_hits, rwd_all_hits, markers);
    }
    m.loss = totals.breakdown();
    m.mlm_count = totals.mlm_n;
    m.rwd_count = totals.rwd_n;
    m.marker_count = markers;
    m.mlm_accuracy = totals.mlm_n ? double(mlm_hits) / double(totals.mlm_n) : 0.0;
    m.rwd_accuracy = totals.rwd_n ? double(rwd_hits) / double(totals.rwd_n) : 0.0;
    m.rwd_accuracy_all = markers ? double(rwd_all_hits) / double(markers) : 0.0;
    return m;
  }

  Rng& dropout_rng() { return dropout_rng_; }

 private:
  struct LayerCache {
    Matrix<T> input, q, k, v, ctx;
    std::vector<Matrix<T>> probs;  // per head
    Matrix<T> attn_mask, h1, z, f, ffn_mask;
    nn::LayerNormCache<T> ln1, ln2;
  };
  struct Cache {
    std::vector<TokenId> ids;
    std::vector<std::size_t> markers;
    nn::LayerNormCache<T> emb_ln;
    Matrix<T> emb_mask;
    std::vector<LayerCache> layers;
    Matrix<T> hidden, mlm_z, mlm_u;
    nn::LayerNormCache<T> mlm_ln;
  };

  struct LossTotals {
    double mlm_sum = 0.0, rwd_sum = 0.0;
    std::size_t mlm_n = 0, rwd_n = 0;
    LossBreakdown breakdown() const {
      LossBreakdown b;
      b.mlm_count = mlm_n;
      b.rwd_count = rwd_n;
      b.mlm_loss = mlm_n ? mlm_sum / double(mlm_n) : 0.0;
      b.rwd_loss = rwd_n ? rwd_sum / double(rwd_n) : 0.0;
      b.total = b.mlm_loss + b.rwd_loss;
      return b;
    }
  };

  void init() {
    const auto V = static_cast<Eigen::Index>(cfg_.vocab_size);
    const auto H = static_cast<Eigen::Index>(cfg_.hidden_dim);
    const auto F = static_cast<Eigen::Index>(cfg_.ffn_dim);
    const auto P = static_cast<Eigen::Index>(cfg_.max_positions);
    const auto C = static_cast<Eigen::Index>(cfg_.rwd_classes);
    Rng rng(cfg_.seed);
    // Uniform(-a, a) with a = sqrt(3 / fan_in): zero mean, variance 1 / fan_in.
    auto uniform = [&](Eigen::Index rows, Eigen::Index cols, double fan_in) {
      const double a = std::sqrt(3.0 / fan_in);
      Matrix<T> m(rows, cols);
      for (Eigen::Index i = 0; i < m.size(); ++i)
        m.data()[i] = static_cast<T>((2.0 * rng.uniform() - 1.0) * a);
      return m;
    };
    auto zeros = [](Eigen::Index n) { return Matrix<T>::Zero(1, n).eval(); };
    auto ones = [](Eigen::Index n) { return Matrix<T>::Ones(1, n).eval(); };

    params_.tok_emb = uniform(V, H, double(H));
    params_.pos_emb = uniform(P, H, double(H));
    params_.emb_ln_g = ones(H);
    params_.emb_ln_b = zeros(H);
    params_.layers.resize(cfg_.num_layers);
    for (auto& l : params_.layers) {
      l.wq = uniform(H, H, double(H));
      l.bq = zeros(H);
      l.wk = uniform(H, H, double(H));
      l.bk = zeros(H);
      l.wv = uniform(H, H, double(H));
      l.bv = zeros(H);
      l.wo = uniform(H, H, double(H));
      l.bo = zeros(H);
      l.ln1_g = ones(H);
      l.ln1_b = zeros(H);
      l.w1 = uniform(H, F, double(H));
      l.b1 = zeros(F);
      l.w2 = uniform(F, H, double(F));
      l.b2 = zeros(H);
      l.ln2_g = ones(H);
      l.ln2_b = zeros(H);
    }
    params_.mlm_w = uniform(H, H, double(H));
    params_.mlm_b = zeros(H);
    params_.mlm_ln_g = ones(H);
    params_.mlm_ln_b = zeros(H);
    params_.mlm_out_b = zeros(V);
    params_.rwd_w = uniform(H, C, double(H));
    params_.rwd_b = zeros(C);
  }

  static std::size_t count_mlm(const PretrainingExample& ex) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < ex.attention_len && i < ex.mlm_labels.size(); ++i)
      if (ex.mlm_labels[i] != kIgnoreLabel) ++n;
    return n;
  }
  static std::size_t count_rwd(const PretrainingExample& ex) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < ex.marker_positions.size(); ++i)
      if (ex.marker_positions[i] < ex.attention_len && ex.rwd_loss_mask[i]) ++n;
    return n;
  }

  Matrix<T> dropout_mask(Eigen::Index rows, Eigen::Index cols, Rng* rng) const {
    Matrix<T> mask = Matrix<T>::Ones(rows, cols);
    if (!rng || cfg_.dropout <= 0.0) return mask;
    const T keep_scale = T(1) / T(1.0 - cfg_.dropout);
    for (Eigen::Index i = 0; i < mask.size(); ++i)
      mask.data()[i] = rng->bernoulli(cfg_.dropout) ? T(0) : keep_scale;
    return mask;
  }

  ForwardOutput<T> run_forward(const PretrainingExample& ex, bool capture, bool train, Rng* rng,
                               Cache& cache) const {
    check_input(ex);
    const auto len = static_cast<Eigen::Index>(ex.attention_len);
    const auto H = static_cast<Eigen::Index>(cfg_.hidden_dim);
    const auto heads = static_cast<Eigen::Index>(cfg_.num_heads);
    const Eigen::Index dh = H / heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));
    if (!train) rng = nullptr;

    ForwardOutput<T> out;
    cache.ids.assign(ex.input_ids.begin(), ex.input_ids.begin() + len);
    cache.markers.clear();
    for (std::size_t p : ex.marker_positions)
      if (p < ex.attention_len) cache.markers.push_back(p);
    out.marker_positions = cache.markers;

    Matrix<T> x(len, H);
    for (Eigen::Index t = 0; t < len; ++t)
      x.row(t) = params_.tok_emb.row(cache.ids[t]) + params_.pos_emb.row(t);
    Matrix<T> h = nn::layer_norm(x, params_.emb_ln_g, params_.emb_ln_b, &cache.emb_ln);
    cache.emb_mask = dropout_mask(len, H, rng);
    h = h.cwiseProduct(cache.emb_mask);

    cache.layers.resize(cfg_.num_layers);
    if (capture) out.attentions.resize(cfg_.num_layers);
    for (std::size_t l = 0; l < cfg_.num_layers; ++l) {
      const auto& p = params_.layers[l];
      auto& c = cache.layers[l];
      c.input = h;
      c.q = nn::add_bias<T>(h * p.wq, p.bq);
      c.k = nn::add_bias<T>(h * p.wk, p.bk);
      c.v = nn::add_bias<T>(h * p.wv, p.bv);
      c.ctx.resize(len, H);
      c.probs.resize(static_cast<std::size_t>(heads));
      for (Eigen::Index hd = 0; hd < heads; ++hd) {
        Matrix<T> s = c.q.middleCols(hd * dh, dh) * c.k.middleCols(hd * dh, dh).transpose() * scale;
        nn::softmax_rows(s);
        c.ctx.middleCols(hd * dh, dh) = s * c.v.middleCols(hd * dh, dh);
        if (capture) out.attentions[l].push_back(s);
        c.probs[static_cast<std::size_t>(hd)] = std::move(s);
      }
      Matrix<T> o = nn::add_bias<T>(c.ctx * p.wo, p.bo);
      c.attn_mask = dropout_mask(len, H, rng);
      o = o.cwiseProduct(c.attn_mask);
      c.h1 = nn::layer_norm<T>(h + o, p.ln1_g, p.ln1_b, &c.ln1);
      c.z = nn::add_bias<T>(c.h1 * p.w1, p.b1);
      c.f = c.z.unaryExpr([](T v) { return nn::gelu(v); });
      Matrix<T> g = nn::add_bias<T>(c.f * p.w2, p.b2);
      c.ffn_mask = dropout_mask(len, H, rng);
      g = g.cwiseProduct(c.ffn_mask);
      h = nn::layer_norm<T>(c.h1 + g, p.ln2_g, p.ln2_b, &c.ln2);
    }
    cache.hidden = h;

    cache.mlm_z = nn::add_bias<T>(h * params_.mlm_w, params_.mlm_b);
    Matrix<T> ft = cache.mlm_z.unaryExpr([](T v) { return nn::gelu(v); });
    cache.mlm_u = nn::layer_norm<T>(ft, params_.mlm_ln_g, params_.mlm_ln_b, &cache.mlm_ln);
    out.mlm_logits = nn::add_bias<T>(cache.mlm_u * params_.tok_emb.transpose(), params_.mlm_out_b);

    const auto m = static_cast<Eigen::Index>(cache.markers.size());
    Matrix<T> hm(m, H);
    for (Eigen::Index i = 0; i < m; ++i) hm.row(i) = h.row(static_cast<Eigen::Index>(cache.markers[i]));
    out.rwd_logits = nn::add_bias<T>(hm * params_.rwd_w, params_.rwd_b);
    if (m == 0) out.rwd_logits.resize(0, static_cast<Eigen::Index>(cfg_.rwd_classes));
    return out;
  }

  void accumulate_loss(const ForwardOutput<T>& out, const PretrainingExample& ex, LossTotals& tot,
                       Matrix<T>* d_mlm, Matrix<T>* d_rwd) const {
    Eigen::Matrix<T, 1, Eigen::Dynamic> g;
    for (std::size_t i = 0; i < ex.attention_len && i < ex.mlm_labels.size(); ++i) {
      if (ex.mlm_labels[i] == kIgnoreLabel) continue;
      const auto r = static_cast<Eigen::Index>(i);
      tot.mlm_sum += static_cast<double>(nn::cross_entropy<T>(
          out.mlm_logits.row(r), static_cast<std::size_t>(ex.mlm_labels[i]), d_mlm ? &g : nullptr));
      ++tot.mlm_n;
      if (d_mlm) d_mlm->row(r) += g;
    }
    std::size_t row = 0;
    for (std::size_t i = 0; i < ex.marker_positions.size(); ++i) {
      if (ex.marker_positions[i] >= ex.attention_len) continue;
      const auto r = static_cast<Eigen::Index>(row++);
      if (!ex.rwd_loss_mask[i]) continue;
      tot.rwd_sum += static_cast<double>(nn::cross_entropy<T>(
          out.rwd_logits.row(r), rwd_target(ex.rwd_labels[i], cfg_.rwd_classes),
          d_rwd ? &g : nullptr));
      ++tot.rwd_n;
      if (d_rwd) d_rwd->row(r) += g;
    }
  }

  void count_hits(const ForwardOutput<T>& out, const PretrainingExample& ex, std::size_t& mlm_hits,
                  std::size_t& rwd_hits, std::size_t& rwd_all_hits, std::size_t& markers) const {
    for (std::size_t i = 0; i < ex.attention_len && i < ex.mlm_labels.size(); ++i) {
      if (ex.mlm_labels[i] == kIgnoreLabel) continue;
      Eigen::Index arg;
      out.mlm_logits.row(static_cast<Eigen::Index>(i)).maxCoeff(&arg);
      if (arg == ex.mlm_labels[i]) ++mlm_hits;
    }
    std::size_t row = 0;
    for (std::size_t i = 0; i < ex.marker_positions.size(); ++i) {
      if (ex.marker_positions[i] >= ex.attention_len) continue;
      Eigen::Index arg;
      out.rwd_logits.row(static_cast<Eigen::Index>(row++)).maxCoeff(&arg);
      const bool hit =
          static_cast<std::size_t>(arg) == rwd_target(ex.rwd_labels[i], cfg_.rwd_classes);
      ++markers;
      if (hit) ++rwd_all_hits;
      if (hit && ex.rwd_loss_mask[i]) ++rwd_hits;
    }
  }

  Matrix<T> mlm_head_backward(const Cache& c, const Matrix<T>& d_logits, Params<T>& g) const {
    g.mlm_out_b.row(0) += d_logits.colwise().sum();
    g.tok_emb += d_logits.transpose() * c.mlm_u;
    Matrix<T> du = d_logits * params_.tok_emb;
    Matrix<T> dft = nn::layer_norm_backward<T>(du, params_.mlm_ln_g, c.mlm_ln, g.mlm_ln_g, g.mlm_ln_b);
    Matrix<T> dz = dft.cwiseProduct(c.mlm_z.unaryExpr([](T v) { return nn::gelu_grad(v); }));
    g.mlm_w += c.hidden.transpose() * dz;
    g.mlm_b.row(0) += dz.colwise().sum();
    return dz * params_.mlm_w.transpose();
  }

  Matrix<T> rwd_head_backward(const Cache& c, const Matrix<T>& d_rwd, Params<T>& g) const {
    Matrix<T> dh = Matrix<T>::Zero(c.hidden.rows(), c.hidden.cols());
    if (d_rwd.rows() == 0) return dh;
    const auto m = static_cast<Eigen::Index>(c.markers.size());
    Matrix<T> hm(m, c.hidden.cols());
    for (Eigen::Index i = 0; i < m; ++i) hm.row(i) = c.hidden.row(static_cast<Eigen::Index>(c.markers[i]));
    g.rwd_w += hm.transpose() * d_rwd;
    g.rwd_b.row(0) += d_rwd.colwise().sum();
    Matrix<T> dhm = d_rwd * params_.rwd_w.transpose();
    for (Eigen::Index i = 0; i < m; ++i) dh.row(static_cast<Eigen::Index>(c.markers[i])) += dhm.row(i);
    return dh;
  }

  void backward(const Cache& c, const Matrix<T>& d_mlm, const Matrix<T>& d_rwd, Params<T>& g) const {
    const auto len = static_cast<Eigen::Index>(c.ids.size());
    if (len == 0) return;
    const auto H = static_cast<Eigen::Index>(cfg_.hidden_dim);
    const auto heads = static_cast<Eigen::Index>(cfg_.num_heads);
    const Eigen::Index dh = H / heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));

    Matrix<T> dh_out = mlm_head_backward(c, d_mlm, g);
    dh_out += rwd_head_backward(c, d_rwd, g);

    for (std::size_t li = cfg_.num_layers; li-- > 0;) {
      const auto& p = params_.layers[li];
      auto& gp = g.layers[li];
      const auto& lc = c.layers[li];

      Matrix<T> dr2 = nn::layer_norm_backward<T>(dh_out, p.ln2_g, lc.ln2, gp.ln2_g, gp.ln2_b);
      Matrix<T> dgm = dr2.cwiseProduct(lc.ffn_mask);
      gp.w2 += lc.f.transpose() * dgm;
      gp.b2.row(0) += dgm.colwise().sum();
      Matrix<T> df = dgm * p.w2.transpose();
      Matrix<T> dz = df.cwiseProduct(lc.z.unaryExpr([](T v) { return nn::gelu_grad(v); }));
      gp.w1 += lc.h1.transpose() * dz;
      gp.b1.row(0) += dz.colwise().sum();
      Matrix<T> dh1 = dr2 + dz * p.w1.transpose();

      Matrix<T> dr1 = nn::layer_norm_backward<T>(dh1, p.ln1_g, lc.ln1, gp.ln1_g, gp.ln1_b);
      Matrix<T> dom = dr1.cwiseProduct(lc.attn_mask);
      gp.wo += lc.ctx.transpose() * dom;
      gp.bo.row(0) += dom.colwise().sum();
      Matrix<T> dctx = dom * p.wo.transpose();

      Matrix<T> dq(len, H), dk(len, H), dv(len, H);
      for (Eigen::Index hd = 0; hd < heads; ++hd) {
        const auto& a = lc.probs[static_cast<std::size_t>(hd)];
        Matrix<T> dch = dctx.middleCols(hd * dh, dh);
        Matrix<T> da = dch * lc.v.middleCols(hd * dh, dh).transpose();
        dv.middleCols(hd * dh, dh) = a.transpose() * dch;
        Matrix<T> ds(len, len);
        for (Eigen::Index r = 0; r < len; ++r) {
          const T dot = da.row(r).dot(a.row(r));
          ds.row(r) = a.row(r).array() * (da.row(r).array() - dot);
        }
        dq.middleCols(hd * dh, dh) = ds * lc.k.middleCols(hd * dh, dh) * scale;
        dk.middleCols(hd * dh, dh) = ds.transpose() * lc.q.middleCols(hd * dh, dh) * scale;
      }
      gp.wq += lc.input.transpose() * dq;
      gp.bq.row(0) += dq.colwise().sum();
      gp.wk += lc.input.transpose() * dk;
      gp.bk.row(0) += dk.colwise().sum();
      gp.wv += lc.input.transpose() * dv;
      gp.bv.row(0) += dv.colwise().sum();
      dh_out = dr1 + dq * p.wq.transpose() + dk * p.wk.transpose() + dv * p.wv.transpose();
    }

    Matrix<T> dx = nn::layer_norm_backward<T>(dh_out.cwiseProduct(c.emb_mask), params_.emb_ln_g,
                                              c.emb_ln, g.emb_ln_g, g.emb_ln_b);
    for (Eigen::Index t = 0; t < len; ++t) {
      g.tok_emb.row(c.ids[static_cast<std::size_t>(t)]) += dx.row(t);
      g.pos_emb.row(t) += dx.row(t);
    }
  }

  ModelConfig cfg_;
  Params<T> params_;
  Rng dropout_rng_;
};

// ---------------------------------------------------------------------------
// Free-function surface

template <typename T = double>
Encoder<T> init_model(const ModelConfig& cfg) {
  return Encoder<T>(cfg);
}

// Per-example loss. Means are over labeled positions / included markers;
// an empty set contributes 0.
template <typename T>
LossBreakdown compute_loss(const ForwardOutput<T>& out, const PretrainingExample& ex,
                           std::size_t rwd_classes) {
  LossBreakdown b;
  double mlm = 0.0, rwd = 0.0;
  for (std::size_t i = 0; i < ex.attention_len && i < ex.mlm_labels.size(); ++i) {
    if (ex.mlm_labels[i] == kIgnoreLabel) continue;
    mlm += static_cast<double>(nn::cross_entropy<T>(out.mlm_logits.row(static_cast<Eigen::Index>(i)),
                                                    static_cast<std::size_t>(ex.mlm_labels[i]),
                                                    nullptr));
    ++b.mlm_count;
  }
  std::size_t row = 0;
  for (std::size_t i = 0; i < ex.marker_positions.size(); ++i) {
    if (ex.marker_positions[i] >= ex.attention_len) continue;
    const auto r = static_cast<Eigen::Index>(row++);
    if (!ex.rwd_loss_mask[i]) continue;
    rwd += static_cast<double>(nn::cross_entropy<T>(
        out.rwd_logits.row(r), rwd_target(ex.rwd_labels[i], rwd_classes), nullptr));
    ++b.rwd_count;
  }
  b.mlm_loss = b.mlm_count ? mlm / double(b.mlm_count) : 0.0;
  b.rwd_loss = b.rwd_count ? rwd / double(b.rwd_count) : 0.0;
  b.total = b.mlm_loss + b.rwd_loss;
  return b;
}

// One plain gradient-descent step on the pooled batch loss.
template <typename T>
TrainMetrics train_step(Encoder<T>& model, const std::vector<PretrainingExample>& batch, double lr) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be non-negative");
  TrainMetrics metrics;
  Params<T> grads = model.gradients(batch, nullptr, &metrics, /*train=*/true);
  if (!std::isfinite(metrics.loss.total)) {
    std::ostringstream os;
    os << "non-finite loss (mlm=" << metrics.loss.mlm_loss << ", rwd=" << metrics.loss.rwd_loss
       << ", lr=" << lr << ")";
    throw TrainingError(os.str());
  }
  if (lr == 0.0) return metrics;
  std::vector<Matrix<T>*> gs;
  grads.visit([&](const std::string&, Matrix<T>& m) { gs.push_back(&m); });
  std::size_t i = 0;
  model.params().visit([&](const std::string&, Matrix<T>& m) { m -= static_cast<T>(lr) * *gs[i++]; });
  return metrics;
}

}  // namespace markkit
