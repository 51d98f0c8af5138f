// Copyright 2026 The Fastslow Authors.
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

#include "fastslow/checkpoint.h"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace fastslow {
namespace {

using nlohmann::json;

json encoder_config_to_json(const EncoderConfig& c) {
  json j = {{"num_layers", c.num_layers},      {"input_dim", c.input_dim},
            {"model_dim", c.model_dim},        {"num_heads", c.num_heads},
            {"ffn_dim", c.ffn_dim},            {"segment_size", c.segment_size},
            {"right_context", c.right_context}, {"max_history", c.max_history}};
  if (c.shared_layer_range.has_value()) {
    j["shared_layer_range"] = {c.shared_layer_range->first, c.shared_layer_range->second};
  }
  return j;
}

EncoderConfig encoder_config_from_json(const json& j) {
  EncoderConfig c;
  c.num_layers = j.at("num_layers").get<int>();
  c.input_dim = j.at("input_dim").get<int>();
  c.model_dim = j.at("model_dim").get<int>();
  c.num_heads = j.at("num_heads").get<int>();
  c.ffn_dim = j.at("ffn_dim").get<int>();
  c.segment_size = j.at("segment_size").get<int>();
  c.right_context = j.at("right_context").get<int>();
  c.max_history = j.value("max_history", kUnlimitedHistory);
  if (j.contains("shared_layer_range")) {
    const auto& r = j.at("shared_layer_range");
    c.shared_layer_range = std::make_pair(r.at(0).get<int>(), r.at(1).get<int>());
  }
  return c;
}

void put_tensor(json& weights, const std::string& path, const Matrix& m) {
  weights[path] = {{"shape", {m.rows, m.cols}}, {"data", m.data}};
}

void put_tensor(json& weights, const std::string& path, const std::vector<float>& v) {
  weights[path] = {{"shape", {v.size()}}, {"data", v}};
}

Matrix get_matrix(const json& weights, const std::string& path) {
  if (!weights.contains(path)) {
    throw std::runtime_error("checkpoint: missing tensor '" + path + "'");
  }
  const json& t = weights.at(path);
  const auto& shape = t.at("shape");
  if (shape.size() != 2) throw std::runtime_error("checkpoint: '" + path + "' is not a matrix");
  Matrix m(shape.at(0).get<std::size_t>(), shape.at(1).get<std::size_t>());
  const auto data = t.at("data").get<std::vector<float>>();
  if (data.size() != m.data.size()) {
    throw std::runtime_error("checkpoint: '" + path + "' shape/data mismatch");
  }
  m.data = data;
  return m;
}

std::vector<float> get_vector(const json& weights, const std::string& path) {
  if (!weights.contains(path)) {
    throw std::runtime_error("checkpoint: missing tensor '" + path + "'");
  }
  const json& t = weights.at(path);
  const auto& shape = t.at("shape");
  if (shape.size() != 1) throw std::runtime_error("checkpoint: '" + path + "' is not a vector");
  auto data = t.at("data").get<std::vector<float>>();
  if (data.size() != shape.at(0).get<std::size_t>()) {
    throw std::runtime_error("checkpoint: '" + path + "' shape/data mismatch");
  }
  return data;
}

void put_layer(json& weights, const std::string& prefix, const LayerWeights& l) {
  put_tensor(weights, prefix + ".ln1.gain", l.ln1_gain);
  put_tensor(weights, prefix + ".ln1.bias", l.ln1_bias);
  put_tensor(weights, prefix + ".attn.q", l.wq);
  put_tensor(weights, prefix + ".attn.q_bias", l.bq);
  put_tensor(weights, prefix + ".attn.k", l.wk);
  put_tensor(weights, prefix + ".attn.k_bias", l.bk);
  put_tensor(weights, prefix + ".attn.v", l.wv);
  put_tensor(weights, prefix + ".attn.v_bias", l.bv);
  put_tensor(weights, prefix + ".attn.out", l.wo);
  put_tensor(weights, prefix + ".attn.out_bias", l.bo);
  put_tensor(weights, prefix + ".ln2.gain", l.ln2_gain);
  put_tensor(weights, prefix + ".ln2.bias", l.ln2_bias);
  put_tensor(weights, prefix + ".ffn.w1", l.ffn_w1);
  put_tensor(weights, prefix + ".ffn.b1", l.ffn_b1);
  put_tensor(weights, prefix + ".ffn.w2", l.ffn_w2);
  put_tensor(weights, prefix + ".ffn.b2", l.ffn_b2);
}

std::shared_ptr<LayerWeights> get_layer(const json& weights, const std::string& prefix) {
  auto l = std::make_shared<LayerWeights>();
  l->ln1_gain = get_vector(weights, prefix + ".ln1.gain");
  l->ln1_bias = get_vector(weights, prefix + ".ln1.bias");
  l->wq = get_matrix(weights, prefix + ".attn.q");
  l->bq = get_vector(weights, prefix + ".attn.q_bias");
  l->wk = get_matrix(weights, prefix + ".attn.k");
  l->bk = get_vector(weights, prefix + ".attn.k_bias");
  l->wv = get_matrix(weights, prefix + ".attn.v");
  l->bv = get_vector(weights, prefix + ".attn.v_bias");
  l->wo = get_matrix(weights, prefix + ".attn.out");
  l->bo = get_vector(weights, prefix + ".attn.out_bias");
  l->ln2_gain = get_vector(weights, prefix + ".ln2.gain");
  l->ln2_bias = get_vector(weights, prefix + ".ln2.bias");
  l->ffn_w1 = get_matrix(weights, prefix + ".ffn.w1");
  l->ffn_b1 = get_vector(weights, prefix + ".ffn.b1");
  l->ffn_w2 = get_matrix(weights, prefix + ".ffn.w2");
  l->ffn_b2 = get_vector(weights, prefix + ".ffn.b2");
  return l;
}

// Shared ranges serialize once: layer i is written only when it owns its
// block (first occurrence).
void put_encoder(json& weights, const std::string& name, const EncoderWeights& enc) {
  put_tensor(weights, name + ".input.w", enc.input_w);
  put_tensor(weights, name + ".input.b", enc.input_b);
  const LayerWeights* prev = nullptr;
  for (std::size_t i = 0; i < enc.layers.size(); ++i) {
    if (enc.layers[i].get() == prev) continue;
    put_layer(weights, name + ".layer" + std::to_string(i), *enc.layers[i]);
    prev = enc.layers[i].get();
  }
  put_tensor(weights, name + ".final_ln.gain", enc.final_ln_gain);
  put_tensor(weights, name + ".final_ln.bias", enc.final_ln_bias);
}

EncoderWeights get_encoder(const json& weights, const std::string& name,
                           const EncoderConfig& cfg) {
  EncoderWeights enc;
  enc.config = cfg;
  enc.input_w = get_matrix(weights, name + ".input.w");
  enc.input_b = get_vector(weights, name + ".input.b");
  enc.layers.resize(cfg.num_layers);
  std::shared_ptr<LayerWeights> shared_block;
  for (int i = 0; i < cfg.num_layers; ++i) {
    const int one_based = i + 1;
    const bool in_range = cfg.shared_layer_range.has_value() &&
                          one_based >= cfg.shared_layer_range->first &&
                          one_based <= cfg.shared_layer_range->second;
    if (in_range && shared_block) {
      enc.layers[i] = shared_block;
      continue;
    }
    enc.layers[i] = get_layer(weights, name + ".layer" + std::to_string(i));
    if (in_range) shared_block = enc.layers[i];
  }
  enc.final_ln_gain = get_vector(weights, name + ".final_ln.gain");
  enc.final_ln_bias = get_vector(weights, name + ".final_ln.bias");
  return enc;
}

void put_predictor(json& weights, const PredictorWeights& p) {
  put_tensor(weights, "predictor.embed.w", p.embed);
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    const std::string prefix = "predictor.layer" + std::to_string(i);
    const auto& l = p.layers[i];
    put_tensor(weights, prefix + ".wz", l.wz);
    put_tensor(weights, prefix + ".uz", l.uz);
    put_tensor(weights, prefix + ".bz", l.bz);
    put_tensor(weights, prefix + ".wr", l.wr);
    put_tensor(weights, prefix + ".ur", l.ur);
    put_tensor(weights, prefix + ".br", l.br);
    put_tensor(weights, prefix + ".wh", l.wh);
    put_tensor(weights, prefix + ".uh", l.uh);
    put_tensor(weights, prefix + ".bh", l.bh);
  }
}

PredictorWeights get_predictor(const json& weights, const PredictorConfig& cfg,
                               int vocab_size) {
  PredictorWeights p;
  p.config = cfg;
  p.vocab_size = vocab_size;
  p.embed = get_matrix(weights, "predictor.embed.w");
  p.layers.resize(cfg.num_layers);
  for (int i = 0; i < cfg.num_layers; ++i) {
    const std::string prefix = "predictor.layer" + std::to_string(i);
    auto& l = p.layers[i];
    l.wz = get_matrix(weights, prefix + ".wz");
    l.uz = get_matrix(weights, prefix + ".uz");
    l.bz = get_vector(weights, prefix + ".bz");
    l.wr = get_matrix(weights, prefix + ".wr");
    l.ur = get_matrix(weights, prefix + ".ur");
    l.br = get_vector(weights, prefix + ".br");
    l.wh = get_matrix(weights, prefix + ".wh");
    l.uh = get_matrix(weights, prefix + ".uh");
    l.bh = get_vector(weights, prefix + ".bh");
  }
  return p;
}

}  // namespace

Checkpoint init_checkpoint(const CascadeConfig& cascade, const PredictorConfig& predictor,
                           const JoinerConfig& joiner, const Vocabulary& vocab,
                           std::uint64_t seed) {
  cascade.validate();
  predictor.validate();
  vocab.validate();
  JoinerConfig jc = joiner;
  jc.num_classes = vocab.size();
  jc.enc_dim = cascade.slow.model_dim;
  jc.pred_dim = predictor.hidden_dim;
  jc.validate();
  if (cascade.fast.model_dim != cascade.slow.model_dim) {
    // One joiner serves both encoders, so their output dims must agree.
    throw std::invalid_argument(
        "init_checkpoint: fast and slow model_dim must match (shared joiner)");
  }

  Checkpoint ckpt;
  ckpt.cascade_cfg = cascade;
  ckpt.predictor_cfg = predictor;
  ckpt.joiner_cfg = jc;
  ckpt.vocab = vocab;
  ckpt.cascade = build_cascade(cascade, seed);
  ckpt.predictor = std::make_shared<PredictorWeights>(
      build_predictor_weights(predictor, vocab.size(), seed * 0x9e3779b97f4a7c15ULL + 3));
  ckpt.joiner = std::make_shared<JoinerWeights>(
      build_joiner_weights(jc, seed * 0x9e3779b97f4a7c15ULL + 4));
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  json config;
  config["cascade"] = {{"fast", encoder_config_to_json(ckpt.cascade_cfg.fast)},
                       {"slow", encoder_config_to_json(ckpt.cascade_cfg.slow)},
                       {"slow_segment_multiple", ckpt.cascade_cfg.slow_segment_multiple}};
  config["predictor"] = {{"num_layers", ckpt.predictor_cfg.num_layers},
                         {"embed_dim", ckpt.predictor_cfg.embed_dim},
                         {"hidden_dim", ckpt.predictor_cfg.hidden_dim}};
  config["joiner"] = {{"enc_dim", ckpt.joiner_cfg.enc_dim},
                      {"pred_dim", ckpt.joiner_cfg.pred_dim},
                      {"joint_dim", ckpt.joiner_cfg.joint_dim},
                      {"num_classes", ckpt.joiner_cfg.num_classes}};
  config["vocab"] = {{"tokens", ckpt.vocab.tokens}, {"blank_id", ckpt.vocab.blank_id}};

  json weights;
  put_encoder(weights, "fast", *ckpt.cascade.fast);
  put_encoder(weights, "slow", *ckpt.cascade.slow);
  put_predictor(weights, *ckpt.predictor);
  put_tensor(weights, "joiner.enc.w", ckpt.joiner->enc_w);
  put_tensor(weights, "joiner.enc.b", ckpt.joiner->enc_b);
  put_tensor(weights, "joiner.pred.w", ckpt.joiner->pred_w);
  put_tensor(weights, "joiner.pred.b", ckpt.joiner->pred_b);
  put_tensor(weights, "joiner.out.w", ckpt.joiner->out_w);
  put_tensor(weights, "joiner.out.b", ckpt.joiner->out_b);

  json doc = {{"version", 1}, {"config", config}, {"weights", weights}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
  out << doc.dump();
  if (!out) throw std::runtime_error("checkpoint: write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("checkpoint: '" + path + "' is not valid JSON: " + e.what());
  }
  if (doc.value("version", 0) != 1) {
    throw std::runtime_error("checkpoint: unsupported version in '" + path + "'");
  }
  const json& config = doc.at("config");
  const json& weights = doc.at("weights");

  Checkpoint ckpt;
  ckpt.cascade_cfg.fast = encoder_config_from_json(config.at("cascade").at("fast"));
  ckpt.cascade_cfg.slow = encoder_config_from_json(config.at("cascade").at("slow"));
  ckpt.cascade_cfg.slow_segment_multiple =
      config.at("cascade").at("slow_segment_multiple").get<int>();
  ckpt.cascade_cfg.validate();

  const json& pj = config.at("predictor");
  ckpt.predictor_cfg = {pj.at("num_layers").get<int>(), pj.at("embed_dim").get<int>(),
                        pj.at("hidden_dim").get<int>()};
  const json& jj = config.at("joiner");
  ckpt.joiner_cfg = {jj.at("enc_dim").get<int>(), jj.at("pred_dim").get<int>(),
                     jj.at("joint_dim").get<int>(), jj.at("num_classes").get<int>()};
  ckpt.vocab.tokens = config.at("vocab").at("tokens").get<std::vector<std::string>>();
  ckpt.vocab.blank_id = config.at("vocab").at("blank_id").get<int>();
  ckpt.vocab.validate();

  ckpt.cascade.fast = std::make_shared<EncoderWeights>(
      get_encoder(weights, "fast", ckpt.cascade_cfg.fast));
  ckpt.cascade.slow = std::make_shared<EncoderWeights>(
      get_encoder(weights, "slow", ckpt.cascade_cfg.slow));

  PredictorWeights pred = get_predictor(weights, ckpt.predictor_cfg, ckpt.vocab.size());
  ckpt.predictor = std::make_shared<PredictorWeights>(std::move(pred));

  JoinerWeights jw;
  jw.config = ckpt.joiner_cfg;
  jw.enc_w = get_matrix(weights, "joiner.enc.w");
  jw.enc_b = get_vector(weights, "joiner.enc.b");
  jw.pred_w = get_matrix(weights, "joiner.pred.w");
  jw.pred_b = get_vector(weights, "joiner.pred.b");
  jw.out_w = get_matrix(weights, "joiner.out.w");
  jw.out_b = get_vector(weights, "joiner.out.b");
  ckpt.joiner = std::make_shared<JoinerWeights>(std::move(jw));
  return ckpt;
}

}  // namespace fastslow
