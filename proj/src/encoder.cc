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

#include "fastslow/encoder.h"

#include <cmath>
#include <random>
#include <set>
#include <stdexcept>
#include <string>

#include "fastslow/kernels.h"
#include "fastslow/numerics.h"

namespace fastslow {
namespace {

// mt19937_64 is fully specified by the standard; scaling its raw bits by
// hand keeps weight init identical across standard libraries.
class WeightRng {
 public:
  explicit WeightRng(std::uint64_t seed) : gen_(seed) {}

  float uniform(float lo, float hi) {
    const double u = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    return static_cast<float>(lo + u * (static_cast<double>(hi) - lo));
  }

  void fill(Matrix& m, float scale) {
    for (float& v : m.data) v = uniform(-scale, scale);
  }
  void fill(std::vector<float>& v, float scale) {
    for (float& x : v) x = uniform(-scale, scale);
  }

 private:
  std::mt19937_64 gen_;
};

std::shared_ptr<LayerWeights> build_layer(WeightRng& rng, const EncoderConfig& cfg) {
  auto lw = std::make_shared<LayerWeights>();
  const int d = cfg.model_dim;
  const int f = cfg.ffn_dim;
  const float sd = 1.0f / std::sqrt(static_cast<float>(d));
  const float sf = 1.0f / std::sqrt(static_cast<float>(f));

  lw->wq = Matrix(d, d);
  lw->wk = Matrix(d, d);
  lw->wv = Matrix(d, d);
  lw->wo = Matrix(d, d);
  rng.fill(lw->wq, sd);
  rng.fill(lw->wk, sd);
  rng.fill(lw->wv, sd);
  rng.fill(lw->wo, sd);
  lw->bq.assign(d, 0.0f);
  lw->bk.assign(d, 0.0f);
  lw->bv.assign(d, 0.0f);
  lw->bo.assign(d, 0.0f);
  lw->ln1_gain.assign(d, 1.0f);
  lw->ln1_bias.assign(d, 0.0f);
  lw->ln2_gain.assign(d, 1.0f);
  lw->ln2_bias.assign(d, 0.0f);
  lw->ffn_w1 = Matrix(d, f);
  rng.fill(lw->ffn_w1, sd);
  lw->ffn_b1.assign(f, 0.0f);
  lw->ffn_w2 = Matrix(f, d);
  rng.fill(lw->ffn_w2, sf);
  lw->ffn_b2.assign(d, 0.0f);
  return lw;
}

// One pre-norm transformer layer. `hist_k`/`hist_v` prepend cached
// projections (streaming); `mask` restricts visibility (offline). The key
// and value projections of this call's rows are returned through
// `new_k`/`new_v` for caching.
Matrix layer_forward(const LayerWeights& lw, int num_heads, const Matrix& x_in,
                     const Matrix* hist_k, const Matrix* hist_v,
                     const AttentionMask* mask, Matrix* new_k, Matrix* new_v) {
  Matrix xn = x_in;
  for (std::size_t i = 0; i < xn.rows; ++i) {
    num::layer_norm_row(xn.row_span(i), lw.ln1_gain, lw.ln1_bias);
  }
  Matrix q = num::linear(xn, lw.wq, lw.bq);
  Matrix k_new = num::linear(xn, lw.wk, lw.bk);
  Matrix v_new = num::linear(xn, lw.wv, lw.bv);

  Matrix x1;
  {
    const Matrix* k = &k_new;
    const Matrix* v = &v_new;
    Matrix k_cat, v_cat;
    if (hist_k != nullptr && hist_k->rows > 0) {
      k_cat = *hist_k;
      k_cat.append_rows(k_new);
      v_cat = *hist_v;
      v_cat.append_rows(v_new);
      k = &k_cat;
      v = &v_cat;
    }
    Matrix attn = num::multi_head_attention(q, *k, *v, num_heads, mask);
    Matrix proj = num::linear(attn, lw.wo, lw.bo);
    x1 = x_in;
    kernels::add(x1.data.size(), proj.data.data(), x1.data.data());
  }

  Matrix x2n = x1;
  for (std::size_t i = 0; i < x2n.rows; ++i) {
    num::layer_norm_row(x2n.row_span(i), lw.ln2_gain, lw.ln2_bias);
  }
  Matrix h = num::linear(x2n, lw.ffn_w1, lw.ffn_b1);
  kernels::relu(h.data.size(), h.data.data());
  Matrix f = num::linear(h, lw.ffn_w2, lw.ffn_b2);
  kernels::add(x1.data.size(), f.data.data(), x1.data.data());

  if (new_k != nullptr) *new_k = std::move(k_new);
  if (new_v != nullptr) *new_v = std::move(v_new);
  return x1;
}

}  // namespace

void EncoderConfig::validate() const {
  auto bad = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("EncoderConfig." + field + ": " + why);
  };
  if (num_layers < 1) bad("num_layers", "must be >= 1");
  if (input_dim < 1) bad("input_dim", "must be >= 1");
  if (model_dim < 1) bad("model_dim", "must be >= 1");
  if (num_heads < 1) bad("num_heads", "must be >= 1");
  if (model_dim % num_heads != 0) bad("num_heads", "must divide model_dim");
  if (ffn_dim < 1) bad("ffn_dim", "must be >= 1");
  if (segment_size < 1) bad("segment_size", "must be >= 1");
  if (right_context < 0) bad("right_context", "must be >= 0");
  if (max_history < 0) bad("max_history", "must be >= 0");
  if (shared_layer_range.has_value()) {
    const auto [a, b] = *shared_layer_range;
    if (a < 1 || b < a || b > num_layers) {
      bad("shared_layer_range", "must satisfy 1 <= first <= last <= num_layers");
    }
  }
}

void CascadeConfig::validate() const {
  fast.validate();
  slow.validate();
  if (slow_segment_multiple < 1) {
    throw std::invalid_argument("CascadeConfig.slow_segment_multiple: must be >= 1");
  }
  if (slow.segment_size != fast.segment_size * slow_segment_multiple) {
    throw std::invalid_argument(
        "CascadeConfig.slow.segment_size: must equal fast.segment_size * "
        "slow_segment_multiple");
  }
  if (slow.input_dim != fast.model_dim) {
    throw std::invalid_argument(
        "CascadeConfig.slow.input_dim: must equal fast.model_dim (the slow "
        "encoder consumes fast outputs)");
  }
  if (slow.right_context != fast.right_context) {
    throw std::invalid_argument(
        "CascadeConfig.slow.right_context: must equal fast.right_context");
  }
}

std::size_t LayerWeights::param_count() const {
  return wq.data.size() + wk.data.size() + wv.data.size() + wo.data.size() +
         bq.size() + bk.size() + bv.size() + bo.size() + ln1_gain.size() +
         ln1_bias.size() + ln2_gain.size() + ln2_bias.size() + ffn_w1.data.size() +
         ffn_b1.size() + ffn_w2.data.size() + ffn_b2.size();
}

std::size_t EncoderWeights::distinct_layer_blocks() const {
  std::set<const LayerWeights*> seen;
  for (const auto& l : layers) seen.insert(l.get());
  return seen.size();
}

std::size_t EncoderWeights::layer_param_count() const {
  std::set<const LayerWeights*> seen;
  std::size_t total = 0;
  for (const auto& l : layers) {
    if (seen.insert(l.get()).second) total += l->param_count();
  }
  return total;
}

std::size_t EncoderWeights::param_count() const {
  return input_w.data.size() + input_b.size() + layer_param_count() +
         final_ln_gain.size() + final_ln_bias.size();
}

EncoderWeights build_encoder_weights(const EncoderConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  WeightRng rng(seed);
  EncoderWeights w;
  w.config = cfg;
  w.input_w = Matrix(cfg.input_dim, cfg.model_dim);
  rng.fill(w.input_w, 1.0f / std::sqrt(static_cast<float>(cfg.input_dim)));
  w.input_b.assign(cfg.model_dim, 0.0f);

  w.layers.resize(cfg.num_layers);
  std::shared_ptr<LayerWeights> shared_block;
  for (int i = 0; i < cfg.num_layers; ++i) {
    const int layer_1based = i + 1;
    const bool in_shared_range =
        cfg.shared_layer_range.has_value() &&
        layer_1based >= cfg.shared_layer_range->first &&
        layer_1based <= cfg.shared_layer_range->second;
    if (in_shared_range) {
      if (!shared_block) shared_block = build_layer(rng, cfg);
      w.layers[i] = shared_block;
    } else {
      w.layers[i] = build_layer(rng, cfg);
    }
  }
  w.final_ln_gain.assign(cfg.model_dim, 1.0f);
  w.final_ln_bias.assign(cfg.model_dim, 0.0f);
  return w;
}

std::vector<StreamBlock> segment_stream(const Matrix& features, int segment_size,
                                        int right_context) {
  if (segment_size < 1) throw std::invalid_argument("segment_stream: segment_size must be >= 1");
  if (right_context < 0) throw std::invalid_argument("segment_stream: right_context must be >= 0");
  std::vector<StreamBlock> out;
  const std::size_t total = features.rows;
  for (std::size_t start = 0; start < total; start += segment_size) {
    const std::size_t end = std::min(total, start + static_cast<std::size_t>(segment_size));
    const std::size_t rc_end = std::min(total, end + static_cast<std::size_t>(right_context));
    StreamBlock b;
    b.block = features.slice_rows(start, end);
    b.right_context = features.slice_rows(end, rc_end);
    if (b.right_context.empty()) b.right_context = Matrix(0, features.cols);
    b.start_frame = static_cast<long>(start);
    out.push_back(std::move(b));
  }
  return out;
}

Matrix time_reduction(const Matrix& features, int stride) {
  if (stride < 1) throw std::invalid_argument("time_reduction: stride must be >= 1");
  const std::size_t out_frames = features.rows / static_cast<std::size_t>(stride);
  Matrix out(out_frames, features.cols * static_cast<std::size_t>(stride));
  for (std::size_t i = 0; i < out_frames; ++i) {
    float* dst = out.row(i);
    for (int s = 0; s < stride; ++s) {
      const float* src = features.row(i * stride + s);
      std::copy(src, src + features.cols, dst + static_cast<std::size_t>(s) * features.cols);
    }
  }
  return out;
}

EmformerEncoder::EmformerEncoder(std::shared_ptr<const EncoderWeights> weights)
    : weights_(std::move(weights)) {
  weights_->config.validate();
}

EncoderState EmformerEncoder::make_state() const {
  EncoderState s;
  s.owner = weights_.get();
  s.layers.resize(weights_->config.num_layers);
  for (auto& l : s.layers) {
    l.keys = Matrix(0, weights_->config.model_dim);
    l.values = Matrix(0, weights_->config.model_dim);
  }
  return s;
}

BlockOutput EmformerEncoder::encode_block(const Matrix& block, const Matrix& rc,
                                          EncoderState& state) const {
  const EncoderConfig& cfg = weights_->config;
  if (state.owner != weights_.get()) {
    throw std::invalid_argument("encode_block: state/config mismatch (state belongs to a different encoder)");
  }
  if (block.rows == 0) throw std::invalid_argument("encode_block: empty block");
  if (block.cols != static_cast<std::size_t>(cfg.input_dim) ||
      (rc.rows > 0 && rc.cols != static_cast<std::size_t>(cfg.input_dim))) {
    throw std::invalid_argument("encode_block: state/config mismatch (input dim)");
  }
  if (block.rows > static_cast<std::size_t>(cfg.segment_size)) {
    throw std::invalid_argument("encode_block: block longer than segment_size");
  }
  if (rc.rows > static_cast<std::size_t>(cfg.right_context)) {
    throw std::invalid_argument("encode_block: right context longer than configured");
  }

  Matrix x = block;
  if (rc.rows > 0) x.append_rows(rc);
  x = num::linear(x, weights_->input_w, weights_->input_b);

  const std::size_t n_main = block.rows;
  for (int l = 0; l < cfg.num_layers; ++l) {
    const LayerWeights& lw = *weights_->layers[l];
    EncoderState::LayerCache& cache = state.layers[l];
    Matrix new_k, new_v;
    x = layer_forward(lw, cfg.num_heads, x, &cache.keys, &cache.values,
                      /*mask=*/nullptr, &new_k, &new_v);
    // Cache only the main rows; lookahead frames are recomputed with the
    // next segment's context when they arrive as block frames.
    cache.keys.append_rows(new_k.slice_rows(0, n_main));
    cache.values.append_rows(new_v.slice_rows(0, n_main));
    cache.keys.trim_front_rows(static_cast<std::size_t>(cfg.max_history));
    cache.values.trim_front_rows(static_cast<std::size_t>(cfg.max_history));
  }

  for (std::size_t i = 0; i < x.rows; ++i) {
    num::layer_norm_row(x.row_span(i), weights_->final_ln_gain, weights_->final_ln_bias);
  }

  BlockOutput out;
  out.main_outputs = x.slice_rows(0, n_main);
  out.lookahead_outputs =
      x.rows > n_main ? x.slice_rows(n_main, x.rows) : Matrix(0, cfg.model_dim);
  state.frames_consumed += static_cast<long>(n_main);
  return out;
}

Matrix EmformerEncoder::encode_offline(const Matrix& features) const {
  const EncoderConfig& cfg = weights_->config;
  if (features.rows == 0) return Matrix(0, cfg.model_dim);
  if (features.cols != static_cast<std::size_t>(cfg.input_dim)) {
    throw std::invalid_argument("encode_offline: input dim mismatch");
  }

  const std::size_t total = features.rows;
  const std::size_t seg = cfg.segment_size;
  const std::size_t num_segments = (total + seg - 1) / seg;

  // Lookahead frames are appended as per-segment copies after the main
  // rows so each copy can carry its own segment's visibility. A frame then
  // exists twice: once as a main row (next segment's context) and once as
  // a copy (this segment's lookahead), exactly as the streaming pass
  // computes it.
  std::vector<std::size_t> copy_begin(num_segments), copy_len(num_segments);
  std::size_t aug_rows = total;
  for (std::size_t j = 0; j < num_segments; ++j) {
    const std::size_t seg_end = std::min(total, (j + 1) * seg);
    const std::size_t rc_end =
        std::min(total, seg_end + static_cast<std::size_t>(cfg.right_context));
    copy_begin[j] = aug_rows;
    copy_len[j] = rc_end - seg_end;
    aug_rows += copy_len[j];
  }

  Matrix aug(aug_rows, features.cols);
  std::copy(features.data.begin(), features.data.end(), aug.data.begin());
  for (std::size_t j = 0; j < num_segments; ++j) {
    const std::size_t seg_end = std::min(total, (j + 1) * seg);
    for (std::size_t r = 0; r < copy_len[j]; ++r) {
      std::copy(features.row(seg_end + r), features.row(seg_end + r) + features.cols,
                aug.row(copy_begin[j] + r));
    }
  }

  AttentionMask mask(aug_rows, aug_rows, false);
  for (std::size_t j = 0; j < num_segments; ++j) {
    const std::size_t seg_begin = j * seg;
    const std::size_t seg_end = std::min(total, (j + 1) * seg);
    const std::size_t hist_begin =
        static_cast<long>(seg_begin) > cfg.max_history
            ? seg_begin - static_cast<std::size_t>(cfg.max_history)
            : 0;
    auto allow_row = [&](std::size_t q) {
      for (std::size_t kf = hist_begin; kf < seg_end; ++kf) mask.set(q, kf, true);
      for (std::size_t r = 0; r < copy_len[j]; ++r) mask.set(q, copy_begin[j] + r, true);
    };
    for (std::size_t q = seg_begin; q < seg_end; ++q) allow_row(q);
    for (std::size_t r = 0; r < copy_len[j]; ++r) allow_row(copy_begin[j] + r);
  }

  Matrix x = num::linear(aug, weights_->input_w, weights_->input_b);
  for (int l = 0; l < cfg.num_layers; ++l) {
    x = layer_forward(*weights_->layers[l], cfg.num_heads, x, nullptr, nullptr,
                      &mask, nullptr, nullptr);
  }
  for (std::size_t i = 0; i < x.rows; ++i) {
    num::layer_norm_row(x.row_span(i), weights_->final_ln_gain, weights_->final_ln_bias);
  }
  return x.slice_rows(0, total);
}

CascadeWeights build_cascade(const CascadeConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  CascadeWeights w;
  w.fast = std::make_shared<EncoderWeights>(
      build_encoder_weights(cfg.fast, seed * 0x9e3779b97f4a7c15ULL + 1));
  w.slow = std::make_shared<EncoderWeights>(
      build_encoder_weights(cfg.slow, seed * 0x9e3779b97f4a7c15ULL + 2));
  return w;
}

CascadeSession::CascadeSession(CascadeWeights weights)
    : weights_(std::move(weights)), fast_(weights_.fast), slow_(weights_.slow) {
  if (weights_.fast->config.segment_size <= 0 ||
      weights_.slow->config.segment_size % weights_.fast->config.segment_size != 0) {
    throw std::invalid_argument("CascadeSession: slow segment must be a multiple of fast segment");
  }
  fast_state_ = fast_.make_state();
  slow_state_ = slow_.make_state();
  slow_buffer_ = Matrix(0, weights_.fast->config.model_dim);
  last_lookahead_ = Matrix(0, weights_.fast->config.model_dim);
}

CascadeSession::SegmentResult CascadeSession::feed(const Matrix& block,
                                                   const Matrix& rc,
                                                   bool last_segment) {
  const int multiple =
      weights_.slow->config.segment_size / weights_.fast->config.segment_size;

  if (buffered_segments_ == 0) slow_start_frame_ = fast_state_.frames_consumed;

  SegmentResult result;
  result.fast = fast_.encode_block(block, rc, fast_state_);
  slow_buffer_.append_rows(result.fast.main_outputs);
  last_lookahead_ = result.fast.lookahead_outputs;
  ++buffered_segments_;

  result.slow_start_frame = slow_start_frame_;
  if (buffered_segments_ == multiple || last_segment) {
    result.slow = slow_.encode_block(slow_buffer_, last_lookahead_, slow_state_);
    slow_buffer_ = Matrix(0, weights_.fast->config.model_dim);
    buffered_segments_ = 0;
  }
  return result;
}

}  // namespace fastslow
