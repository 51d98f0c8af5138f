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

#ifndef FASTSLOW_ENCODER_H_
#define FASTSLOW_ENCODER_H_

#include <cstdint>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "fastslow/matrix.h"

namespace fastslow {

inline constexpr long kUnlimitedHistory = 1L << 40;

// A limited-context streaming transformer encoder. The stream is cut into
// fixed segments; each segment is processed together with a short lookahead
// (right context) and the cached keys/values of everything already seen.
// Within one segment every query row, main and lookahead alike, sees the
// same context: {history, current segment, right context}. Only the main
// rows' keys/values enter the cache; lookahead rows are recomputed when
// their frames arrive as part of the next segment.
struct EncoderConfig {
  int num_layers = 1;
  int input_dim = 8;   // dim of raw block rows fed to encode_block
  int model_dim = 8;
  int num_heads = 1;
  int ffn_dim = 16;
  int segment_size = 4;    // encoder frames per block
  int right_context = 1;   // lookahead frames per block
  long max_history = kUnlimitedHistory;  // cap on cached left-context frames
  // 1-based inclusive layer range whose parameters are one shared block.
  std::optional<std::pair<int, int>> shared_layer_range;

  void validate() const;  // throws std::invalid_argument with the field name
};

struct CascadeConfig {
  EncoderConfig fast;
  EncoderConfig slow;
  int slow_segment_multiple = 2;  // slow segment = fast segment * multiple

  void validate() const;
};

struct LayerWeights {
  Matrix wq, wk, wv, wo;                   // model_dim x model_dim
  std::vector<float> bq, bk, bv, bo;       // model_dim
  std::vector<float> ln1_gain, ln1_bias;   // pre-attention norm
  std::vector<float> ln2_gain, ln2_bias;   // pre-ffn norm
  Matrix ffn_w1;                           // model_dim x ffn_dim
  std::vector<float> ffn_b1;
  Matrix ffn_w2;                           // ffn_dim x model_dim
  std::vector<float> ffn_b2;

  std::size_t param_count() const;
};

struct EncoderWeights {
  EncoderConfig config;
  Matrix input_w;  // input_dim x model_dim
  std::vector<float> input_b;
  // Layers inside config.shared_layer_range alias one LayerWeights block.
  std::vector<std::shared_ptr<LayerWeights>> layers;
  std::vector<float> final_ln_gain, final_ln_bias;

  std::size_t distinct_layer_blocks() const;
  // Counts shared storage once.
  std::size_t param_count() const;
  std::size_t layer_param_count() const;  // layer blocks only, distinct storage
};

// Deterministic random init from the seed.
EncoderWeights build_encoder_weights(const EncoderConfig& cfg, std::uint64_t seed);

struct EncoderState {
  struct LayerCache {
    Matrix keys;    // cached key projections of main frames
    Matrix values;  // cached value projections of main frames
  };
  const EncoderWeights* owner = nullptr;
  std::vector<LayerCache> layers;
  long frames_consumed = 0;
};

struct BlockOutput {
  Matrix main_outputs;       // one row per block frame
  Matrix lookahead_outputs;  // one row per right-context frame (may be empty)
};

struct StreamBlock {
  Matrix block;
  Matrix right_context;
  long start_frame = 0;
};

// Cuts features into (block, right-context) pairs. Concatenated blocks
// reproduce the input; each right context holds the frames that follow the
// block, truncated at stream end. The final block may be short.
std::vector<StreamBlock> segment_stream(const Matrix& features, int segment_size,
                                        int right_context);

// Output frame i = concat of input frames [i*stride, (i+1)*stride);
// trailing remainder frames are dropped.
Matrix time_reduction(const Matrix& features, int stride);

class EmformerEncoder {
 public:
  explicit EmformerEncoder(std::shared_ptr<const EncoderWeights> weights);

  EncoderState make_state() const;

  // One streaming step. `block` holds up to segment_size frames (the last
  // block of a stream may be short), `rc` the lookahead frames (may be
  // empty at stream end). Both carry input_dim columns. The state is
  // advanced in place: this block's per-layer keys/values are appended and
  // the cache trimmed to max_history.
  BlockOutput encode_block(const Matrix& block, const Matrix& rc,
                           EncoderState& state) const;

  // Whole-utterance forward with a visibility mask that reproduces the
  // block-processing rule exactly, lookahead copies included. Reference
  // path for streaming-equivalence checks and non-streaming scoring.
  Matrix encode_offline(const Matrix& features) const;

  const EncoderConfig& config() const { return weights_->config; }
  const EncoderWeights& weights() const { return *weights_; }
  std::shared_ptr<const EncoderWeights> weights_ptr() const { return weights_; }

 private:
  std::shared_ptr<const EncoderWeights> weights_;
};

struct CascadeWeights {
  std::shared_ptr<const EncoderWeights> fast;
  std::shared_ptr<const EncoderWeights> slow;
};

// Deterministic cascade init; layer sharing per each config's range.
CascadeWeights build_cascade(const CascadeConfig& cfg, std::uint64_t seed);

// Streams a cascade: every fed segment runs the fast encoder; once
// slow_segment_multiple fast segments are buffered (or the stream ends),
// the slow encoder consumes the buffered fast main outputs with the latest
// fast lookahead as its right context, and the buffer clears.
class CascadeSession {
 public:
  explicit CascadeSession(CascadeWeights weights);

  struct SegmentResult {
    BlockOutput fast;
    std::optional<BlockOutput> slow;
    long slow_start_frame = 0;  // first frame covered by `slow`, when present
  };

  SegmentResult feed(const Matrix& block, const Matrix& rc, bool last_segment);

  const CascadeWeights& weights() const { return weights_; }
  long frames_consumed() const { return fast_state_.frames_consumed; }

 private:
  CascadeWeights weights_;
  EmformerEncoder fast_;
  EmformerEncoder slow_;
  EncoderState fast_state_;
  EncoderState slow_state_;
  Matrix slow_buffer_;
  Matrix last_lookahead_;
  int buffered_segments_ = 0;
  long slow_start_frame_ = 0;
};

}  // namespace fastslow

#endif  // FASTSLOW_ENCODER_H_
