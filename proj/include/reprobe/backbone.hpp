// Copyright 2026 The reprobe Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "reprobe/binary_io.hpp"
#include "reprobe/error.hpp"
#include "reprobe/rng.hpp"
#include "reprobe/tokenizer.hpp"

namespace reprobe {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

struct ModelConfig {
  std::uint32_t d_model = 64;
  std::uint32_t n_layers = 2;
  std::uint32_t n_heads = 4;
  std::uint32_t max_seq_len = 2048;
  std::uint32_t vocab = kVocabSize;
  std::uint32_t ffn = 0;  // 0 means 4 * d_model
  std::uint64_t seed = 0;

  std::uint32_t ffn_dim() const { return ffn == 0 ? 4 * d_model : ffn; }
  std::uint32_t head_dim() const { return d_model / n_heads; }

  void validate() const {
    require(d_model >= 1 && n_layers >= 1 && n_heads >= 1, Errc::InvalidArgument,
            "d_model, n_layers and n_heads must be positive");
    require(d_model % n_heads == 0, Errc::InvalidArgument, "d_model must be divisible by n_heads");
    require(max_seq_len >= 1, Errc::InvalidArgument, "max_seq_len must be positive");
    require(vocab == kVocabSize, Errc::InvalidArgument, "vocab size must be " + std::to_string(kVocabSize));
  }

  bool operator==(const ModelConfig&) const = default;
};

inline constexpr double kNormEps = 1e-5;
inline constexpr double kInitStd = 0.02;
inline constexpr std::uint16_t kModelFileVersion = 1;

/// Backbone parameters θ in storage precision. Matrices are row-major and
/// multiply row vectors from the right (y = x W).
struct FrozenParams {
  struct Layer {
    std::vector<float> norm1, wq, wk, wv, wo, norm2, w1, w2;
    bool operator==(const Layer&) const = default;
  };

  ModelConfig config;
  std::vector<float> tok_emb;  // vocab x m
  std::vector<float> pos_emb;  // max_seq_len x m
  std::vector<Layer> layers;
  std::vector<float> norm_f;  // m
  std::vector<float> w_out;   // m x vocab

  bool operator==(const FrozenParams&) const = default;

  static FrozenParams random(const ModelConfig& config) {
    config.validate();
    const std::size_t m = config.d_model, f = config.ffn_dim(), v = config.vocab;
    Rng rng(mix_seed(config.seed, 0x52424b42));
    auto normal = [&](std::size_t n, double sd) {
      std::vector<float> out(n);
      for (auto& x : out) x = static_cast<float>(sd * rng.normal());
      return out;
    };
    const double proj_sd = kInitStd / std::sqrt(2.0 * config.n_layers);
    FrozenParams p;
    p.config = config;
    p.tok_emb = normal(v * m, kInitStd);
    p.pos_emb = normal(static_cast<std::size_t>(config.max_seq_len) * m, kInitStd);
    for (std::uint32_t l = 0; l < config.n_layers; ++l) {
      Layer layer;
      layer.norm1.assign(m, 1.0f);
      layer.wq = normal(m * m, kInitStd);
      layer.wk = normal(m * m, kInitStd);
      layer.wv = normal(m * m, kInitStd);
      layer.wo = normal(m * m, proj_sd);
      layer.norm2.assign(m, 1.0f);
      layer.w1 = normal(m * f, kInitStd);
      layer.w2 = normal(f * m, proj_sd);
      p.layers.push_back(std::move(layer));
    }
    p.norm_f.assign(m, 1.0f);
    p.w_out = normal(m * v, kInitStd);
    return p;
  }

  std::string serialize() const {
    ByteWriter w;
    w.magic("RBKB");
    w.put<std::uint16_t>(kModelFileVersion);
    w.put(config.d_model);
    w.put(config.n_layers);
    w.put(config.n_heads);
    w.put(config.max_seq_len);
    w.put(config.vocab);
    w.put(config.ffn);
    w.put(config.seed);
    w.put_f32(tok_emb);
    w.put_f32(pos_emb);
    for (const auto& l : layers) {
      for (const auto* t : {&l.norm1, &l.wq, &l.wk, &l.wv, &l.wo, &l.norm2, &l.w1, &l.w2}) w.put_f32(*t);
    }
    w.put_f32(norm_f);
    w.put_f32(w_out);
    w.seal();
    return w.take();
  }

  static FrozenParams deserialize(std::string_view bytes) {
    ByteReader r(check_crc_trailer(bytes));
    r.expect_magic("RBKB");
    const auto version = r.get<std::uint16_t>();
    require(version == kModelFileVersion, Errc::SchemaError, "unsupported model file version " + std::to_string(version));
    FrozenParams p;
    auto& c = p.config;
    c.d_model = r.get<std::uint32_t>();
    c.n_layers = r.get<std::uint32_t>();
    c.n_heads = r.get<std::uint32_t>();
    c.max_seq_len = r.get<std::uint32_t>();
    c.vocab = r.get<std::uint32_t>();
    c.ffn = r.get<std::uint32_t>();
    c.seed = r.get<std::uint64_t>();
    try {
      c.validate();
    } catch (const Error& e) {
      fail(Errc::SchemaError, std::string("bad model config: ") + e.what());
    }
    const std::size_t m = c.d_model, f = c.ffn_dim(), v = c.vocab;
    p.tok_emb = r.get_f32(v * m);
    p.pos_emb = r.get_f32(static_cast<std::size_t>(c.max_seq_len) * m);
    for (std::uint32_t i = 0; i < c.n_layers; ++i) {
      Layer l;
      l.norm1 = r.get_f32(m);
      l.wq = r.get_f32(m * m);
      l.wk = r.get_f32(m * m);
      l.wv = r.get_f32(m * m);
      l.wo = r.get_f32(m * m);
      l.norm2 = r.get_f32(m);
      l.w1 = r.get_f32(m * f);
      l.w2 = r.get_f32(f * m);
      p.layers.push_back(std::move(l));
    }
    p.norm_f = r.get_f32(m);
    p.w_out = r.get_f32(m * v);
    require(r.remaining() == 0, Errc::SchemaError, "trailing bytes in model file");
    return p;
  }

  void save(const std::filesystem::path& path) const { write_file(path, serialize()); }
  static FrozenParams load(const std::filesystem::path& path) { return deserialize(read_file(path)); }
};

/// Trainable input-side parameters: full embeddings for the probe specials and
/// a low-rank update for byte-token embeddings.
template <typename T>
struct EmbeddingDelta {
  Mat<T> e_sp;  // kProbeSpecials x m
  Mat<T> a;     // r x 256
  Mat<T> b;     // m x r
  T scale = T(1);

  int rank() const { return static_cast<int>(a.rows()); }

  /// A delta whose forward pass matches the bare backbone exactly.
  static EmbeddingDelta neutral(const FrozenParams& p, int rank, double alpha) {
    require(rank >= 1, Errc::InvalidArgument, "rank must be at least 1");
    const int m = static_cast<int>(p.config.d_model);
    EmbeddingDelta d;
    d.e_sp.resize(kProbeSpecials, m);
    for (int i = 0; i < kProbeSpecials; ++i)
      for (int j = 0; j < m; ++j) d.e_sp(i, j) = static_cast<T>(p.tok_emb[static_cast<std::size_t>(kFirstSpecial + i) * m + j]);
    d.a = Mat<T>::Zero(rank, kByteTokens);
    d.b = Mat<T>::Zero(m, rank);
    d.scale = static_cast<T>(alpha / rank);
    return d;
  }

  void check_shape(int m) const {
    require(e_sp.rows() == kProbeSpecials && e_sp.cols() == m, Errc::ShapeMismatch, "E_sp has wrong shape");
    require(a.rows() >= 1 && a.cols() == kByteTokens, Errc::ShapeMismatch, "A has wrong shape");
    require(b.rows() == m && b.cols() == a.rows(), Errc::ShapeMismatch, "B has wrong shape");
  }
};

template <typename T>
struct DeltaGrad {
  Mat<T> e_sp, a, b;
};

template <typename T>
struct LayerTape {
  Mat<T> x, h, q, k, v, o, y1, h2, u;
  Vec<T> r1, r2;
  std::vector<Mat<T>> probs;  // per head: queries x keys
  Eigen::Index q_begin = 0;
};

template <typename T>
struct Tape {
  bool recorded = false;
  Tokens tokens;
  std::vector<T> dropout;  // per-position multiplier on the delta; empty means 1
  std::optional<EmbeddingDelta<T>> delta;
  std::vector<LayerTape<T>> layers;
  Vec<T> final_in;
  T final_r = T(0);
};

struct ForwardOptions {
  /// Compute the last layer only at the final position.
  bool last_only = false;
};

namespace detail {

template <typename T>
T gelu(T u) {
  const T c = static_cast<T>(std::sqrt(2.0 / std::numbers::pi));
  return T(0.5) * u * (T(1) + std::tanh(c * (u + T(0.044715) * u * u * u)));
}

template <typename T>
T gelu_grad(T u) {
  const T c = static_cast<T>(std::sqrt(2.0 / std::numbers::pi));
  const T t = std::tanh(c * (u + T(0.044715) * u * u * u));
  return T(0.5) * (T(1) + t) + T(0.5) * u * (T(1) - t * t) * c * (T(1) + T(3 * 0.044715) * u * u);
}

template <typename T>
Mat<T> rms_norm(const Mat<T>& x, const Vec<T>& g, Vec<T>& r) {
  const auto m = x.cols();
  r.resize(x.rows());
  Mat<T> y(x.rows(), m);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    r(i) = T(1) / std::sqrt(x.row(i).squaredNorm() / static_cast<T>(m) + static_cast<T>(kNormEps));
    y.row(i) = (x.row(i) * r(i)).cwiseProduct(g.transpose());
  }
  return y;
}

template <typename T>
Mat<T> rms_norm_back(const Mat<T>& x, const Vec<T>& r, const Vec<T>& g, const Mat<T>& dy) {
  const auto m = static_cast<T>(x.cols());
  Mat<T> dx(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto a = dy.row(i).cwiseProduct(g.transpose()).eval();
    const T dot = x.row(i).dot(a);
    dx.row(i) = r(i) * a - (r(i) * r(i) * r(i) * dot / m) * x.row(i);
  }
  return dx;
}

template <typename T>
Mat<T> to_mat(const std::vector<float>& data, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const Mat<float>>(data.data(), rows, cols).template cast<T>();
}

template <typename T>
Vec<T> to_vec(const std::vector<float>& data) {
  return Eigen::Map<const Vec<float>>(data.data(), static_cast<Eigen::Index>(data.size())).template cast<T>();
}

}  // namespace detail

/// Result of one sampling step with the nucleus it was drawn from.
struct SampleStep {
  int token = 0;
  std::vector<int> nucleus;
};

/// Temperature 0 is argmax. Otherwise the token is drawn from the smallest
/// prefix of the probability-sorted vocabulary whose mass reaches top_p.
/// `allowed`, when nonempty, masks the candidate set.
inline SampleStep sample_token(const Vec<double>& logits, double temperature, double top_p, Rng& rng,
                               const std::vector<bool>& allowed = {}) {
  require(temperature >= 0.0, Errc::InvalidArgument, "temperature must be nonnegative");
  require(top_p >= 0.0 && top_p <= 1.0, Errc::InvalidArgument, "top_p must lie in [0, 1]");
  std::vector<int> ids;
  for (int i = 0; i < logits.size(); ++i)
    if (allowed.empty() || allowed[static_cast<std::size_t>(i)]) ids.push_back(i);
  require(!ids.empty(), Errc::InvalidArgument, "no token is allowed");
  if (temperature == 0.0) {
    int best = ids.front();
    for (int i : ids)
      if (logits(i) > logits(best)) best = i;
    return {best, {best}};
  }
  double top = -INFINITY;
  for (int i : ids) top = std::max(top, logits(i) / temperature);
  std::vector<std::pair<double, int>> probs;
  double total = 0.0;
  for (int i : ids) {
    const double w = std::exp(logits(i) / temperature - top);
    probs.emplace_back(w, i);
    total += w;
  }
  std::sort(probs.begin(), probs.end(), [](const auto& x, const auto& y) {
    return x.first != y.first ? x.first > y.first : x.second < y.second;
  });
  std::size_t keep = 0;
  double mass = 0.0;
  while (keep < probs.size()) {
    mass += probs[keep].first / total;
    ++keep;
    if (mass >= top_p) break;
  }
  SampleStep step;
  double kept = 0.0;
  for (std::size_t i = 0; i < keep; ++i) {
    step.nucleus.push_back(probs[i].second);
    kept += probs[i].first;
  }
  const double u = rng.uniform() * kept;
  double acc = 0.0;
  step.token = probs[keep - 1].second;
  for (std::size_t i = 0; i < keep; ++i) {
    acc += probs[i].first;
    if (u < acc) {
      step.token = probs[i].second;
      break;
    }
  }
  std::sort(step.nucleus.begin(), step.nucleus.end());
  return step;
}

struct Generation {
  Tokens tokens;
  std::vector<std::vector<int>> nuclei;
  bool stopped_at_eos = false;
};

/// Decoder-only transformer with pre-RMSNorm blocks and learned positions,
/// evaluated in precision T.
template <typename T>
class Backbone {
 public:
  explicit Backbone(FrozenParams params) : params_(std::move(params)) {
    const auto& c = params_.config;
    c.validate();
    const Eigen::Index m = c.d_model, f = c.ffn_dim(), v = c.vocab;
    tok_emb_ = detail::to_mat<T>(params_.tok_emb, v, m);
    pos_emb_ = detail::to_mat<T>(params_.pos_emb, c.max_seq_len, m);
    for (const auto& l : params_.layers) {
      Weights w;
      w.norm1 = detail::to_vec<T>(l.norm1);
      w.wq = detail::to_mat<T>(l.wq, m, m);
      w.wk = detail::to_mat<T>(l.wk, m, m);
      w.wv = detail::to_mat<T>(l.wv, m, m);
      w.wo = detail::to_mat<T>(l.wo, m, m);
      w.norm2 = detail::to_vec<T>(l.norm2);
      w.w1 = detail::to_mat<T>(l.w1, m, f);
      w.w2 = detail::to_mat<T>(l.w2, f, m);
      layers_.push_back(std::move(w));
    }
    norm_f_ = detail::to_vec<T>(params_.norm_f);
    w_out_ = detail::to_mat<T>(params_.w_out, m, v);
  }

  const FrozenParams& params() const { return params_; }
  const ModelConfig& config() const { return params_.config; }
  int d_model() const { return static_cast<int>(params_.config.d_model); }

  /// Final-layer states (after the output norm) for every position, or for the
  /// last position only when opts.last_only is set.
  Mat<T> forward(const Tokens& tokens, const EmbeddingDelta<T>* delta = nullptr, Tape<T>* tape = nullptr,
                 ForwardOptions opts = {}, const std::vector<T>& dropout = {}) const {
    const auto n = static_cast<Eigen::Index>(tokens.size());
    require(n > 0, Errc::EmptyInput, "empty token sequence");
    require(n <= static_cast<Eigen::Index>(config().max_seq_len), Errc::SequenceTooLong,
            "sequence of " + std::to_string(n) + " tokens exceeds window " + std::to_string(config().max_seq_len));
    require(dropout.empty() || dropout.size() == tokens.size(), Errc::ShapeMismatch, "dropout length mismatch");
    if (delta) delta->check_shape(d_model());
    if (tape) {
      *tape = Tape<T>{};
      tape->tokens = tokens;
      tape->dropout = dropout;
      if (delta) tape->delta = *delta;
      tape->layers.resize(layers_.size());
    }
    Mat<T> x = embed(tokens, delta, dropout);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const bool last = l + 1 == layers_.size();
      const Eigen::Index qb = (last && opts.last_only) ? n - 1 : 0;
      x = layer_forward(layers_[l], x, qb, tape ? &tape->layers[l] : nullptr);
    }
    Vec<T> r;
    Mat<T> out = detail::rms_norm(x, norm_f_, r);
    if (tape) {
      tape->final_in = x.row(x.rows() - 1).transpose();
      tape->final_r = r(r.size() - 1);
      tape->recorded = true;
    }
    return out;
  }

  /// Gradients of <grad_c, c> with respect to the delta parameters, where c is
  /// the final-layer state at the last position of the taped forward pass.
  DeltaGrad<T> backward_to_embeddings(const Tape<T>& tape, const Vec<T>& grad_c) const {
    require(tape.recorded, Errc::MissingTape, "forward was run without a tape");
    require(tape.delta.has_value(), Errc::MissingTape, "tape was recorded without an embedding delta");
    const auto m = d_model();
    require(grad_c.size() == m, Errc::ShapeMismatch, "gradient length must equal d_model");
    const auto& delta = *tape.delta;

    Mat<T> dy(1, m);
    {
      Mat<T> xin = tape.final_in.transpose();
      Vec<T> r(1);
      r(0) = tape.final_r;
      dy = detail::rms_norm_back<T>(xin, r, norm_f_, grad_c.transpose());
    }
    {
      Mat<T> full = Mat<T>::Zero(tape.layers.back().y1.rows(), m);
      full.bottomRows(1) = dy;
      dy = std::move(full);
    }
    for (std::size_t l = layers_.size(); l-- > 0;) dy = layer_backward(layers_[l], tape.layers[l], dy);

    DeltaGrad<T> g;
    g.e_sp = Mat<T>::Zero(kProbeSpecials, m);
    Mat<T> by_byte = Mat<T>::Zero(kByteTokens, m);
    for (std::size_t i = 0; i < tape.tokens.size(); ++i) {
      const int t = tape.tokens[i];
      const auto row = dy.row(static_cast<Eigen::Index>(i));
      if (is_probe_special(t)) {
        g.e_sp.row(t - kFirstSpecial) += row;
      } else if (t < kByteTokens) {
        const T keep = tape.dropout.empty() ? T(1) : tape.dropout[i];
        if (keep != T(0)) by_byte.row(t) += keep * row;
      }
    }
    g.b = delta.scale * by_byte.transpose() * delta.a.transpose();
    g.a = delta.scale * delta.b.transpose() * by_byte.transpose();
    return g;
  }

  Vec<T> extract_representation(const Tokens& tokens, const EmbeddingDelta<T>* delta = nullptr) const {
    const Mat<T> out = forward(tokens, delta, nullptr, ForwardOptions{.last_only = true});
    return out.row(out.rows() - 1).transpose();
  }

  /// Next-token logits from a final-layer state.
  Vec<T> logits(const Vec<T>& c) const { return (c.transpose() * w_out_).transpose(); }

  /// Autoregressive sampling. Context beyond the window is cut from the left.
  Generation generate(const Tokens& prompt, double temperature, double top_p, int max_new, std::uint64_t seed,
                      const std::vector<bool>& allowed = {}) const {
    require(!prompt.empty(), Errc::EmptyInput, "empty prompt");
    require(max_new >= 0, Errc::InvalidArgument, "max_new must be nonnegative");
    Rng rng(seed);
    Generation gen;
    Tokens context = prompt;
    const std::size_t window = config().max_seq_len;
    for (int step = 0; step < max_new; ++step) {
      Tokens view(context.end() - static_cast<std::ptrdiff_t>(std::min(window, context.size())), context.end());
      const Vec<T> c = extract_representation(view);
      const Vec<double> z = logits(c).template cast<double>();
      auto s = sample_token(z, temperature, top_p, rng, allowed);
      gen.nuclei.push_back(std::move(s.nucleus));
      if (s.token == id_of(Special::Eos)) {
        gen.stopped_at_eos = true;
        break;
      }
      gen.tokens.push_back(s.token);
      context.push_back(s.token);
    }
    return gen;
  }

 private:
  struct Weights {
    Vec<T> norm1, norm2;
    Mat<T> wq, wk, wv, wo, w1, w2;
  };

  Mat<T> embed(const Tokens& tokens, const EmbeddingDelta<T>* delta, const std::vector<T>& dropout) const {
    const auto n = static_cast<Eigen::Index>(tokens.size());
    Mat<T> x(n, d_model());
    for (Eigen::Index i = 0; i < n; ++i) {
      const int t = tokens[static_cast<std::size_t>(i)];
      require(t >= 0 && t < static_cast<int>(config().vocab), Errc::InvalidArgument,
              "token id out of range: " + std::to_string(t));
      if (delta && is_probe_special(t)) {
        x.row(i) = delta->e_sp.row(t - kFirstSpecial);
      } else {
        x.row(i) = tok_emb_.row(t);
        if (delta && t < kByteTokens) {
          const T keep = dropout.empty() ? T(1) : dropout[static_cast<std::size_t>(i)];
          if (keep != T(0)) x.row(i) += (delta->scale * keep) * (delta->b * delta->a.col(t)).transpose();
        }
      }
      x.row(i) += pos_emb_.row(i);
    }
    return x;
  }

  Mat<T> layer_forward(const Weights& w, const Mat<T>& x, Eigen::Index qb, LayerTape<T>* lt) const {
    const auto n = x.rows();
    const auto nq = n - qb;
    const auto heads = static_cast<Eigen::Index>(config().n_heads);
    const auto dh = static_cast<Eigen::Index>(config().head_dim());
    const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dh));

    Vec<T> r1;
    Mat<T> h = detail::rms_norm(x, w.norm1, r1);
    Mat<T> q = h.bottomRows(nq) * w.wq;
    Mat<T> k = h * w.wk;
    Mat<T> v = h * w.wv;
    Mat<T> o(nq, x.cols());
    std::vector<Mat<T>> probs;
    for (Eigen::Index hd = 0; hd < heads; ++hd) {
      Mat<T> s = (q.middleCols(hd * dh, dh) * k.middleCols(hd * dh, dh).transpose()) * inv_sqrt;
      for (Eigen::Index i = 0; i < nq; ++i) {
        const Eigen::Index visible = qb + i + 1;
        auto row = s.row(i);
        const T top = row.head(visible).maxCoeff();
        row.head(visible) = (row.head(visible).array() - top).exp();
        row.head(visible) /= row.head(visible).sum();
        row.tail(n - visible).setZero();
      }
      o.middleCols(hd * dh, dh).noalias() = s * v.middleCols(hd * dh, dh);
      if (lt) probs.push_back(std::move(s));
    }
    Mat<T> y1 = x.bottomRows(nq) + o * w.wo;
    Vec<T> r2;
    Mat<T> h2 = detail::rms_norm(y1, w.norm2, r2);
    Mat<T> u = h2 * w.w1;
    Mat<T> g = u.unaryExpr([](T z) { return detail::gelu(z); });
    Mat<T> y = y1 + g * w.w2;
    if (lt) {
      lt->x = x;
      lt->h = std::move(h);
      lt->q = std::move(q);
      lt->k = std::move(k);
      lt->v = std::move(v);
      lt->o = std::move(o);
      lt->y1 = std::move(y1);
      lt->h2 = std::move(h2);
      lt->u = std::move(u);
      lt->r1 = std::move(r1);
      lt->r2 = std::move(r2);
      lt->probs = std::move(probs);
      lt->q_begin = qb;
    }
    return y;
  }

  Mat<T> layer_backward(const Weights& w, const LayerTape<T>& lt, const Mat<T>& dy) const {
    const auto n = lt.x.rows();
    const auto nq = n - lt.q_begin;
    const auto heads = static_cast<Eigen::Index>(config().n_heads);
    const auto dh = static_cast<Eigen::Index>(config().head_dim());
    const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dh));

    Mat<T> du = (dy * w.w2.transpose()).cwiseProduct(lt.u.unaryExpr([](T z) { return detail::gelu_grad(z); }));
    Mat<T> dy1 = dy + detail::rms_norm_back<T>(lt.y1, lt.r2, w.norm2, du * w.w1.transpose());
    Mat<T> d_o = dy1 * w.wo.transpose();

    Mat<T> dq(nq, lt.x.cols()), dk(n, lt.x.cols()), dv(n, lt.x.cols());
    for (Eigen::Index hd = 0; hd < heads; ++hd) {
      const auto& p = lt.probs[static_cast<std::size_t>(hd)];
      const auto doh = d_o.middleCols(hd * dh, dh);
      Mat<T> dp = doh * lt.v.middleCols(hd * dh, dh).transpose();
      dv.middleCols(hd * dh, dh).noalias() = p.transpose() * doh;
      const Vec<T> inner = p.cwiseProduct(dp).rowwise().sum();
      Mat<T> ds = p.cwiseProduct(dp.colwise() - inner) * inv_sqrt;
      dq.middleCols(hd * dh, dh).noalias() = ds * lt.k.middleCols(hd * dh, dh);
      dk.middleCols(hd * dh, dh).noalias() = ds.transpose() * lt.q.middleCols(hd * dh, dh);
    }
    Mat<T> dh_all = dk * w.wk.transpose() + dv * w.wv.transpose();
    dh_all.bottomRows(nq) += dq * w.wq.transpose();
    Mat<T> dx = detail::rms_norm_back<T>(lt.x, lt.r1, w.norm1, dh_all);
    dx.bottomRows(nq) += dy1;
    return dx;
  }

  FrozenParams params_;
  Mat<T> tok_emb_, pos_emb_, w_out_;
  std::vector<Weights> layers_;
  Vec<T> norm_f_;
};

}  // namespace reprobe
