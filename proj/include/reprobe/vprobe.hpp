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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nlohmann/json.hpp"
#include "reprobe/backbone.hpp"
#include "reprobe/binary_io.hpp"
#include "reprobe/error.hpp"
#include "reprobe/parallel.hpp"
#include "reprobe/repr_io.hpp"
#include "reprobe/rng.hpp"
#include "reprobe/task_item.hpp"
#include "reprobe/tokenizer.hpp"

namespace reprobe {

inline constexpr std::size_t kCotTokenLimit = 5120;

struct ProbeConfig {
  int rank = 4;
  double alpha = 16.0;
  double dropout = 0.1;
  double lr = 1e-4;
  int batch = 32;
  int epochs = -1;  // negative: 10, or 30 when the training set is small
  int num_classes = 2;
  int num_special = kProbeSpecials;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;

  int resolved_epochs(std::size_t train_size) const {
    if (epochs >= 0) return epochs;
    return train_size < 10000 ? 30 : 10;
  }

  void validate() const {
    require(rank >= 1, Errc::InvalidArgument, "rank must be at least 1");
    require(batch >= 1, Errc::InvalidArgument, "batch must be at least 1");
    require(num_classes >= 2, Errc::InvalidArgument, "num_classes must be at least 2");
    require(num_special == kProbeSpecials, Errc::ShapeMismatch,
            "num_special must be " + std::to_string(kProbeSpecials));
    require(dropout >= 0.0 && dropout < 1.0, Errc::InvalidArgument, "dropout must lie in [0, 1)");
    require(lr > 0.0, Errc::InvalidArgument, "learning rate must be positive");
  }
};

inline void to_json(nlohmann::json& j, const ProbeConfig& c) {
  j = {{"rank", c.rank},         {"alpha", c.alpha},   {"dropout", c.dropout},
       {"lr", c.lr},             {"batch", c.batch},   {"epochs", c.epochs},
       {"num_classes", c.num_classes}, {"num_special", c.num_special}, {"beta1", c.beta1},
       {"beta2", c.beta2},       {"adam_eps", c.adam_eps}, {"seed", c.seed}};
}

/// Φ: special embeddings and low-rank delta, plus the linear head (m x s).
struct ProbeParams {
  EmbeddingDelta<float> delta;
  Mat<float> head;

  int d_model() const { return static_cast<int>(head.rows()); }
  int num_classes() const { return static_cast<int>(head.cols()); }

  bool operator==(const ProbeParams& o) const {
    return delta.e_sp == o.delta.e_sp && delta.a == o.delta.a && delta.b == o.delta.b &&
           delta.scale == o.delta.scale && head == o.head;
  }
};

/// Deterministic starting point: every special row copies the frozen END
/// embedding, A is small Gaussian, B and the head are zero.
inline ProbeParams init_probe(const FrozenParams& backbone, const ProbeConfig& config) {
  config.validate();
  const int m = static_cast<int>(backbone.config.d_model);
  ProbeParams p;
  p.delta = EmbeddingDelta<float>::neutral(backbone, config.rank, config.alpha);
  const std::size_t end_row = static_cast<std::size_t>(id_of(Special::End)) * m;
  for (int i = 0; i < kProbeSpecials; ++i)
    for (int j = 0; j < m; ++j) p.delta.e_sp(i, j) = backbone.tok_emb[end_row + j];
  Rng rng(mix_seed(config.seed, 0x494e4954));
  for (Eigen::Index i = 0; i < p.delta.a.size(); ++i) p.delta.a.data()[i] = static_cast<float>(0.02 * rng.normal());
  p.head = Mat<float>::Zero(m, config.num_classes);
  return p;
}

inline constexpr std::uint16_t kProbeFileVersion = 1;

inline std::string serialize_probe(const ProbeParams& p, const ProbeConfig& c) {
  ByteWriter w;
  w.magic("RPRM");
  w.put<std::uint16_t>(kProbeFileVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(p.d_model()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(p.delta.e_sp.rows()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(p.delta.rank()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(p.num_classes()));
  w.put<double>(c.alpha);
  w.put<double>(c.dropout);
  w.put<double>(c.lr);
  w.put<std::int32_t>(c.batch);
  w.put<std::int32_t>(c.epochs);
  w.put<std::uint64_t>(c.seed);
  for (const Mat<float>* t : {&p.delta.e_sp, &p.delta.a, &p.delta.b, &p.head})
    w.put_f32(std::span<const float>(t->data(), static_cast<std::size_t>(t->size())));
  w.seal();
  return w.take();
}

inline std::pair<ProbeParams, ProbeConfig> deserialize_probe(std::string_view bytes) {
  ByteReader r(check_crc_trailer(bytes));
  r.expect_magic("RPRM");
  require(r.get<std::uint16_t>() == kProbeFileVersion, Errc::SchemaError, "unsupported probe file version");
  const auto m = r.get<std::uint32_t>();
  const auto k = r.get<std::uint32_t>();
  const auto rank = r.get<std::uint32_t>();
  const auto s = r.get<std::uint32_t>();
  require(m >= 1 && k == kProbeSpecials && rank >= 1 && s >= 2, Errc::SchemaError, "bad probe file header");
  ProbeConfig c;
  c.rank = static_cast<int>(rank);
  c.num_classes = static_cast<int>(s);
  c.alpha = r.get<double>();
  c.dropout = r.get<double>();
  c.lr = r.get<double>();
  c.batch = r.get<std::int32_t>();
  c.epochs = r.get<std::int32_t>();
  c.seed = r.get<std::uint64_t>();
  auto read = [&](Eigen::Index rows, Eigen::Index cols) {
    const auto v = r.get_f32(static_cast<std::size_t>(rows * cols));
    return Mat<float>(Eigen::Map<const Mat<float>>(v.data(), rows, cols));
  };
  ProbeParams p;
  p.delta.e_sp = read(k, m);
  p.delta.a = read(rank, kByteTokens);
  p.delta.b = read(m, rank);
  p.head = read(m, s);
  p.delta.scale = static_cast<float>(c.alpha / c.rank);
  require(r.remaining() == 0, Errc::SchemaError, "trailing bytes in probe file");
  return {std::move(p), c};
}

struct ProbeItem {
  std::uint64_t id = 0;
  int label = 0;
  int stage = 0;
  Tokens tokens;
};

struct ProbeDataset {
  std::string provenance = "initial";
  std::vector<ProbeItem> items;
  std::size_t dropped = 0;
};

inline nlohmann::json dataset_to_json(const ProbeDataset& d) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& it : d.items)
    items.push_back({{"id", it.id}, {"label", it.label}, {"stage", it.stage}, {"tokens", it.tokens}});
  return {{"provenance", d.provenance}, {"dropped", d.dropped}, {"items", std::move(items)}};
}

inline ProbeDataset dataset_from_json(const nlohmann::json& j) {
  try {
    ProbeDataset d;
    d.provenance = j.at("provenance").get<std::string>();
    d.dropped = j.value("dropped", std::size_t{0});
    for (const auto& e : j.at("items")) {
      ProbeItem it;
      it.id = e.at("id").get<std::uint64_t>();
      it.label = e.at("label").get<int>();
      it.stage = e.value("stage", 0);
      it.tokens = e.at("tokens").get<Tokens>();
      require(!it.tokens.empty(), Errc::SchemaError, "empty token sequence");
      for (int t : it.tokens) require(t >= 0 && t < kVocabSize, Errc::SchemaError, "token id out of range");
      d.items.push_back(std::move(it));
    }
    return d;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::SchemaError, std::string("malformed probe dataset: ") + e.what());
  }
}

/// Problem bytes, then optionally <|Reasoning|> and the first 5,120 CoT
/// tokens, then the probe trigger.
inline Tokens compose_input(std::string_view problem, const std::optional<std::string>& cot,
                            const std::vector<ProbeField>& fields) {
  require(!fields.empty(), Errc::InvalidArgument, "probe trigger needs at least one field");
  Tokens out = tokenize(problem);
  if (cot) {
    out.push_back(id_of(Special::Reasoning));
    const Tokens c = tokenize(*cot);
    out.insert(out.end(), c.begin(), c.begin() + static_cast<std::ptrdiff_t>(std::min(c.size(), kCotTokenLimit)));
  }
  const Tokens trigger = tokenize_trigger(fields);
  out.insert(out.end(), trigger.begin(), trigger.end());
  return out;
}

/// Composes one dataset. cots[i], when present, is the reasoning text for
/// items[i]. Sequences longer than max_len are dropped and counted.
inline ProbeDataset compose_dataset(const std::vector<TaskItem>& items, const std::vector<std::optional<std::string>>& cots,
                                    int stage, std::string provenance, std::size_t max_len) {
  require(cots.empty() || cots.size() == items.size(), Errc::LengthMismatch, "one CoT per item expected");
  ProbeDataset d;
  d.provenance = std::move(provenance);
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    Tokens t = compose_input(item.prompt, cots.empty() ? std::nullopt : cots[i], item.probe_fields);
    if (t.size() > max_len) {
      ++d.dropped;
      continue;
    }
    d.items.push_back({item.id, item.label, stage, std::move(t)});
  }
  return d;
}

inline ProbeDataset initial_dataset(const std::vector<TaskItem>& items, std::size_t max_len) {
  return compose_dataset(items, {}, 0, "initial", max_len);
}

inline std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find('\n', start);
    if (pos == std::string_view::npos) {
      out.emplace_back(text.substr(start));
      return out;
    }
    out.emplace_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

/// First j newline-delimited segments of a response, rejoined.
inline std::string cot_prefix(std::string_view response, std::size_t j) {
  const auto parts = split_lines(response);
  std::string out;
  for (std::size_t i = 0; i < std::min(j, parts.size()); ++i) {
    if (i) out.push_back('\n');
    out += parts[i];
  }
  return out;
}

inline std::vector<std::optional<std::string>> aligned_responses(const std::vector<TaskItem>& items,
                                                                 const std::map<std::uint64_t, std::string>& responses) {
  std::vector<std::optional<std::string>> out;
  for (const auto& item : items) {
    const auto it = responses.find(item.id);
    require(it != responses.end(), Errc::IdMismatch, "no response for item " + std::to_string(item.id));
    out.emplace_back(it->second);
  }
  require(responses.size() == items.size(), Errc::IdMismatch, "responses reference ids with no item");
  return out;
}

/// Stage 0 is the initial composition; stage j appends the first j lines of
/// each response.
inline std::vector<ProbeDataset> progressive_datasets(const std::vector<TaskItem>& items,
                                                      const std::map<std::uint64_t, std::string>& responses,
                                                      std::size_t max_len) {
  const auto full = aligned_responses(items, responses);
  std::size_t stages = 0;
  for (const auto& r : full) stages = std::max(stages, split_lines(*r).size());
  std::vector<ProbeDataset> out;
  out.push_back(initial_dataset(items, max_len));
  for (std::size_t j = 1; j <= stages; ++j) {
    std::vector<std::optional<std::string>> cots;
    for (const auto& r : full) cots.emplace_back(cot_prefix(*r, j));
    out.push_back(compose_dataset(items, cots, static_cast<int>(j), "prefix(" + std::to_string(j) + ")", max_len));
  }
  return out;
}

struct ProbeEval {
  double accuracy = 0.0;
  std::vector<std::uint64_t> ids;
  std::vector<int> labels;
  std::vector<int> predicted;
  std::vector<double> p_correct;
  std::vector<std::vector<double>> probs;
};

inline nlohmann::json eval_to_json(const ProbeEval& e) {
  nlohmann::json samples = nlohmann::json::array();
  for (std::size_t i = 0; i < e.ids.size(); ++i)
    samples.push_back({{"id", e.ids[i]}, {"label", e.labels[i]}, {"predicted", e.predicted[i]},
                       {"p_correct", e.p_correct[i]}, {"probs", e.probs[i]}});
  return {{"accuracy", e.accuracy}, {"n", e.ids.size()}, {"samples", std::move(samples)}};
}

namespace detail {

inline std::vector<double> softmax(const Vec<double>& z) {
  const double top = z.maxCoeff();
  std::vector<double> p(static_cast<std::size_t>(z.size()));
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) total += (p[static_cast<std::size_t>(i)] = std::exp(z(i) - top));
  for (auto& v : p) v /= total;
  return p;
}

inline int argmax(const std::vector<double>& p) {
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

inline void append_eval(ProbeEval& e, std::uint64_t id, int label, std::vector<double> p) {
  e.ids.push_back(id);
  e.labels.push_back(label);
  e.predicted.push_back(argmax(p));
  e.p_correct.push_back(p[static_cast<std::size_t>(label)]);
  e.probs.push_back(std::move(p));
}

inline void finish_eval(ProbeEval& e) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < e.labels.size(); ++i) hits += e.labels[i] == e.predicted[i];
  e.accuracy = e.labels.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(e.labels.size());
}

template <typename M>
struct AdamSlot {
  M m, v;
  explicit AdamSlot(const M& like) : m(M::Zero(like.rows(), like.cols())), v(M::Zero(like.rows(), like.cols())) {}

  template <typename G>
  void step(M& param, const G& grad, double lr, double b1, double b2, double eps, long t) {
    using S = typename M::Scalar;
    m = S(b1) * m + S(1 - b1) * grad;
    v = S(b2) * v + S(1 - b2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
    param.array() -= S(lr) * (m.array() / S(c1)) / ((v.array() / S(c2)).sqrt() + S(eps));
  }
};

inline void check_labels(const ProbeDataset& d, int classes) {
  for (const auto& it : d.items)
    require(it.label >= 0 && it.label < classes, Errc::ShapeMismatch,
            "label " + std::to_string(it.label) + " outside [0, " + std::to_string(classes) + ")");
}

}  // namespace detail

inline ProbeEval eval_probe(const Backbone<float>& backbone, const ProbeParams& phi, const ProbeDataset& data,
                            int threads = default_threads()) {
  require(phi.d_model() == backbone.d_model(), Errc::ShapeMismatch, "probe width does not match backbone");
  phi.delta.check_shape(backbone.d_model());
  detail::check_labels(data, phi.num_classes());
  std::vector<std::vector<double>> probs(data.items.size());
  parallel_for(data.items.size(), threads, [&](std::size_t i) {
    const Vec<float> c = backbone.extract_representation(data.items[i].tokens, &phi.delta);
    probs[i] = detail::softmax((c.transpose() * phi.head).transpose().cast<double>());
  });
  ProbeEval e;
  for (std::size_t i = 0; i < data.items.size(); ++i)
    detail::append_eval(e, data.items[i].id, data.items[i].label, std::move(probs[i]));
  detail::finish_eval(e);
  return e;
}

struct TrainReport {
  std::vector<double> epoch_losses;
  double final_train_acc = 0.0;
  std::uint64_t seed = 0;
  ProbeConfig config;
  int epochs = 0;
  std::size_t dropped = 0;
};

inline nlohmann::json report_to_json(const TrainReport& r) {
  return {{"epoch_losses", r.epoch_losses}, {"final_train_acc", r.final_train_acc}, {"seed", r.seed},
          {"config", r.config},             {"epochs", r.epochs},                   {"dropped", r.dropped}};
}

struct TrainResult {
  ProbeParams params;
  TrainReport report;
};

/// Mini-batch Adam on Φ with cross-entropy; the backbone is only read.
inline TrainResult train_vprobe(const Backbone<float>& backbone, const ProbeDataset& train, const ProbeConfig& config,
                                int threads = default_threads()) {
  config.validate();
  require(!train.items.empty(), Errc::EmptyDataset, "training set is empty");
  detail::check_labels(train, config.num_classes);
  const int m = backbone.d_model();
  const std::size_t n = train.items.size();
  const int epochs = config.resolved_epochs(n);

  TrainResult out;
  auto& phi = out.params;
  phi = init_probe(backbone.params(), config);
  detail::AdamSlot<Mat<float>> s_esp(phi.delta.e_sp), s_a(phi.delta.a), s_b(phi.delta.b), s_h(phi.head);

  struct Slot {
    DeltaGrad<float> g;
    Mat<float> gh;
    double loss = 0.0;
  };
  long step = 0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    Rng shuffler(mix_seed(config.seed, 0x53485546, static_cast<std::uint64_t>(epoch)));
    const auto order = shuffler.permutation(n);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.batch)) {
      const std::size_t count = std::min(static_cast<std::size_t>(config.batch), n - start);
      std::vector<Slot> slots(count);
      parallel_for(count, threads, [&](std::size_t b) {
        const std::size_t idx = order[start + b];
        const auto& item = train.items[idx];
        std::vector<float> mask;
        if (config.dropout > 0.0) {
          Rng drop(mix_seed(config.seed, static_cast<std::uint64_t>(epoch) + 1, idx));
          const float keep = static_cast<float>(1.0 / (1.0 - config.dropout));
          mask.resize(item.tokens.size());
          for (auto& v : mask) v = drop.bernoulli(config.dropout) ? 0.0f : keep;
        }
        Tape<float> tape;
        const Mat<float> c = backbone.forward(item.tokens, &phi.delta, &tape, {.last_only = true}, mask);
        const Vec<float> cv = c.row(0).transpose();
        const auto p = detail::softmax((cv.transpose() * phi.head).transpose().cast<double>());
        Vec<float> dz(config.num_classes);
        for (int k = 0; k < config.num_classes; ++k)
          dz(k) = static_cast<float>(p[static_cast<std::size_t>(k)] - (k == item.label ? 1.0 : 0.0));
        auto& slot = slots[b];
        slot.loss = -std::log(std::max(p[static_cast<std::size_t>(item.label)], 1e-300));
        slot.gh = cv * dz.transpose();
        slot.g = backbone.backward_to_embeddings(tape, phi.head * dz);
      });
      Mat<float> g_esp = Mat<float>::Zero(phi.delta.e_sp.rows(), m);
      Mat<float> g_a = Mat<float>::Zero(phi.delta.a.rows(), phi.delta.a.cols());
      Mat<float> g_b = Mat<float>::Zero(phi.delta.b.rows(), phi.delta.b.cols());
      Mat<float> g_h = Mat<float>::Zero(phi.head.rows(), phi.head.cols());
      for (const auto& s : slots) {
        g_esp += s.g.e_sp;
        g_a += s.g.a;
        g_b += s.g.b;
        g_h += s.gh;
        epoch_loss += s.loss;
      }
      const float inv = 1.0f / static_cast<float>(count);
      ++step;
      const auto& c = config;
      s_esp.step(phi.delta.e_sp, g_esp * inv, c.lr, c.beta1, c.beta2, c.adam_eps, step);
      s_a.step(phi.delta.a, g_a * inv, c.lr, c.beta1, c.beta2, c.adam_eps, step);
      s_b.step(phi.delta.b, g_b * inv, c.lr, c.beta1, c.beta2, c.adam_eps, step);
      s_h.step(phi.head, g_h * inv, c.lr, c.beta1, c.beta2, c.adam_eps, step);
    }
    out.report.epoch_losses.push_back(epoch_loss / static_cast<double>(n));
  }
  out.report.final_train_acc = eval_probe(backbone, phi, train, threads).accuracy;
  out.report.seed = config.seed;
  out.report.config = config;
  out.report.epochs = epochs;
  out.report.dropped = train.dropped;
  return out;
}

/// Final-layer last-token states for every item, optionally under a trained delta.
inline std::vector<RepresentationRecord> extract_records(const Backbone<float>& backbone, const ProbeDataset& data,
                                                         const ProbeParams* phi = nullptr,
                                                         int threads = default_threads()) {
  std::vector<RepresentationRecord> out(data.items.size());
  parallel_for(data.items.size(), threads, [&](std::size_t i) {
    const auto& it = data.items[i];
    const Vec<float> c = backbone.extract_representation(it.tokens, phi ? &phi->delta : nullptr);
    out[i] = {it.id, static_cast<std::uint32_t>(it.stage), it.label, std::vector<float>(c.data(), c.data() + c.size()),
              data.provenance};
  });
  return out;
}

/// Linear classifier (weights and bias) on stored representations.
struct LinearProbe {
  Mat<double> weights;  // m x s
  Vec<double> bias;     // s

  std::vector<double> probabilities(const std::vector<float>& x) const {
    const Vec<double> c = Eigen::Map<const Vec<float>>(x.data(), static_cast<Eigen::Index>(x.size())).cast<double>();
    return detail::softmax((c.transpose() * weights).transpose() + bias);
  }
};

inline ProbeEval eval_linear_probe(const LinearProbe& h, const std::vector<RepresentationRecord>& records) {
  ProbeEval e;
  for (const auto& r : records) {
    require(r.values.size() == static_cast<std::size_t>(h.weights.rows()), Errc::DimensionMismatch,
            "representation width does not match the probe");
    require(r.label >= 0 && r.label < h.weights.cols(), Errc::ShapeMismatch, "label outside the probe's classes");
    detail::append_eval(e, r.id, r.label, h.probabilities(r.values));
  }
  detail::finish_eval(e);
  return e;
}

struct LinearProbeResult {
  LinearProbe probe;
  ProbeEval eval;
  TrainReport report;
};

inline LinearProbeResult train_linear_probe(const std::vector<RepresentationRecord>& train,
                                            const std::vector<RepresentationRecord>& test, const ProbeConfig& config) {
  config.validate();
  require(!train.empty(), Errc::EmptyDataset, "training set is empty");
  const std::size_t m = train.front().values.size();
  for (const auto* set : {&train, &test})
    for (const auto& r : *set)
      require(r.values.size() == m, Errc::DimensionMismatch, "representations must share one dimension");
  const int s = config.num_classes;
  for (const auto& r : train) require(r.label >= 0 && r.label < s, Errc::ShapeMismatch, "label outside classes");

  LinearProbeResult out;
  auto& h = out.probe;
  h.weights = Mat<double>::Zero(static_cast<Eigen::Index>(m), s);
  h.bias = Vec<double>::Zero(s);
  detail::AdamSlot<Mat<double>> sw(h.weights);
  detail::AdamSlot<Vec<double>> sb(h.bias);
  const int epochs = config.resolved_epochs(train.size());
  long step = 0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    Rng shuffler(mix_seed(config.seed, 0x4c494e, static_cast<std::uint64_t>(epoch)));
    const auto order = shuffler.permutation(train.size());
    double loss = 0.0;
    for (std::size_t start = 0; start < train.size(); start += static_cast<std::size_t>(config.batch)) {
      const std::size_t count = std::min(static_cast<std::size_t>(config.batch), train.size() - start);
      Mat<double> gw = Mat<double>::Zero(h.weights.rows(), s);
      Vec<double> gb = Vec<double>::Zero(s);
      for (std::size_t b = 0; b < count; ++b) {
        const auto& r = train[order[start + b]];
        const auto p = h.probabilities(r.values);
        Vec<double> dz(s);
        for (int k = 0; k < s; ++k) dz(k) = p[static_cast<std::size_t>(k)] - (k == r.label ? 1.0 : 0.0);
        loss -= std::log(std::max(p[static_cast<std::size_t>(r.label)], 1e-300));
        const Vec<double> c =
            Eigen::Map<const Vec<float>>(r.values.data(), static_cast<Eigen::Index>(m)).cast<double>();
        gw += c * dz.transpose();
        gb += dz;
      }
      ++step;
      const double inv = 1.0 / static_cast<double>(count);
      sw.step(h.weights, gw * inv, config.lr, config.beta1, config.beta2, config.adam_eps, step);
      sb.step(h.bias, gb * inv, config.lr, config.beta1, config.beta2, config.adam_eps, step);
    }
    out.report.epoch_losses.push_back(loss / static_cast<double>(train.size()));
  }
  out.report.final_train_acc = eval_linear_probe(h, train).accuracy;
  out.report.seed = config.seed;
  out.report.config = config;
  out.report.epochs = epochs;
  out.eval = eval_linear_probe(h, test);
  return out;
}

}  // namespace reprobe
