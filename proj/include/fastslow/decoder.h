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

#ifndef FASTSLOW_DECODER_H_
#define FASTSLOW_DECODER_H_

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fastslow/encoder.h"
#include "fastslow/matrix.h"
#include "fastslow/transducer.h"

namespace fastslow {

// Model surface the beam search drives: a predictor evaluated prefix by
// prefix and a joint distribution per (encoder frame, prefix). The neural
// model and the table-backed test double both implement it.
class DecoderModel {
 public:
  virtual ~DecoderModel() = default;
  virtual int num_classes() const = 0;
  virtual int blank_id() const = 0;
  virtual std::string token_text(int token) const = 0;

  struct PredictorOutput {
    std::vector<float> embedding;
    PredictorState state;
  };
  virtual PredictorOutput predictor_start() const = 0;
  virtual PredictorOutput predictor_extend(const PredictorOutput& parent,
                                           int token) const = 0;
  // Normalized log distribution over num_classes for one encoder row.
  virtual std::vector<float> joint(std::span<const float> enc_row,
                                   const PredictorOutput& pred,
                                   int prefix_len) const = 0;
};

class NeuralModel : public DecoderModel {
 public:
  NeuralModel(Vocabulary vocab, std::shared_ptr<const PredictorWeights> predictor,
              std::shared_ptr<const JoinerWeights> joiner);

  int num_classes() const override { return vocab_.size(); }
  int blank_id() const override { return vocab_.blank_id; }
  std::string token_text(int token) const override { return vocab_.tokens.at(token); }
  PredictorOutput predictor_start() const override;
  PredictorOutput predictor_extend(const PredictorOutput& parent, int token) const override;
  std::vector<float> joint(std::span<const float> enc_row, const PredictorOutput& pred,
                           int prefix_len) const override;
  const Vocabulary& vocab() const { return vocab_; }

 private:
  Vocabulary vocab_;
  std::shared_ptr<const PredictorWeights> predictor_;
  std::shared_ptr<const JoinerWeights> joiner_;
};

// Test double: joint log-probs come from lattice fixtures instead of a
// neural forward. Encoder rows are (frame_index, source) pairs; source 0
// reads the fast table, 1 the slow table. Prefix lengths beyond the table
// clamp to its last row.
class TableModel : public DecoderModel {
 public:
  struct Table {
    int num_frames = 0;
    int max_prefix = 0;  // tables hold rows for prefix lengths 0..max_prefix
    std::vector<float> log_probs;  // num_frames * (max_prefix+1) * num_classes
  };

  TableModel(Vocabulary vocab, Table fast, Table slow);

  int num_classes() const override { return vocab_.size(); }
  int blank_id() const override { return vocab_.blank_id; }
  std::string token_text(int token) const override { return vocab_.tokens.at(token); }
  PredictorOutput predictor_start() const override { return {}; }
  PredictorOutput predictor_extend(const PredictorOutput&, int) const override {
    return {};
  }
  std::vector<float> joint(std::span<const float> enc_row, const PredictorOutput& pred,
                           int prefix_len) const override;

  std::span<const float> slice(bool slow, int frame, int prefix_len) const;
  const Table& fast_table() const { return fast_; }
  const Table& slow_table() const { return slow_; }
  const Vocabulary& vocab() const { return vocab_; }

  // Encoder-output stand-ins: row t = (t, source).
  static Matrix encoder_rows(long begin, long end, bool slow);

 private:
  Vocabulary vocab_;
  Table fast_;
  Table slow_;
};

// Cached predictor evaluation for one token prefix. Nodes live in a
// SearchSpace and are stable for the decode session's lifetime.
struct PrefixNode {
  const PrefixNode* parent = nullptr;
  int token = kSosToken;
  int depth = 0;
  std::uint64_t space_id = 0;
  DecoderModel::PredictorOutput pred;
  std::map<int, std::unique_ptr<PrefixNode>> children;
};

// Prefix store shared between the fast and the slow search. Any prefix is
// run through the predictor at most once per decode session, whichever
// search reaches it first; the other gets a cache hit.
class SearchSpace {
 public:
  explicit SearchSpace(const DecoderModel& model);

  const PrefixNode* root() const { return root_.get(); }
  const PrefixNode* extend(const PrefixNode* node, int token);

  std::uint64_t id() const { return id_; }
  long predictor_evals() const { return predictor_evals_; }
  long cache_hits() const { return cache_hits_; }

 private:
  const DecoderModel& model_;
  std::unique_ptr<PrefixNode> root_;
  std::uint64_t id_ = 0;
  long predictor_evals_ = 0;
  long cache_hits_ = 0;
};

struct Hypothesis {
  std::vector<int> tokens;
  double log_prob = 0.0;
  const PrefixNode* node = nullptr;
  // Global encoder frame at which each token first entered the hypothesis.
  std::vector<long> token_emit_frames;
};

struct BeamSet {
  std::vector<Hypothesis> hyps;  // log_prob descending, unique token sequences
  int beam_size = 0;
  std::uint64_t space_id = 0;

  bool empty() const { return hyps.empty(); }
};

struct DecodeCounters {
  long predictor_evals = 0;
  long joiner_evals = 0;
};

// Transducer beam search over `enc_outputs` starting from `beam_in`.
// Within each frame, hypotheses are expanded breadth-first by emitted
// symbol count (capped at max_symbols); duplicate token sequences merge by
// log-sum-exp, so with a beam at least as large as the reachable prefix
// count the scores are the exact path sums. Empty enc_outputs returns
// beam_in unchanged.
BeamSet beam_search(const Matrix& enc_outputs, const BeamSet& beam_in, int beam_size,
                    SearchSpace& space, const DecoderModel& model, long start_frame,
                    int max_symbols, DecodeCounters& counters);

// Top of `slow` truncated to fast's beam size; predictor handles are
// reused, never re-evaluated. Throws if the beams live in different
// search spaces.
BeamSet merge_beams(const BeamSet& fast, const BeamSet& slow, int fast_beam_size);

// Highest log Pr(y) / max(1, |y|); ties prefer shorter, then smaller token
// ids. Throws on an empty beam.
const Hypothesis& best_hypothesis(const BeamSet& beam);

struct DecodeConfig {
  int fast_segment = 4;
  int slow_segment = 8;
  int fast_beam = 4;
  int slow_beam = 4;
  int max_symbols_per_frame = 10;
  // Diagnostic switch: false gives each pass a private search space, for
  // measuring what sharing saves.
  bool shared_search_space = true;

  void validate() const;
};

struct TimelineEntry {
  long audio_frame = 0;  // frames consumed when this partial was produced
  bool from_slow = false;
  std::vector<int> best_tokens;
};

struct DecodeResult {
  Hypothesis final;       // length-normalized best of the final slow beam
  Hypothesis fast_final;  // best fast hypothesis before the last merge
  std::vector<TimelineEntry> timeline;
  DecodeCounters counters;
  DecodeCounters fast_pass_counters;  // portion spent in fast searches
};

// Source of encoder outputs for the parallel search; implemented over the
// neural cascade and over table fixtures.
class CascadeStream {
 public:
  virtual ~CascadeStream() = default;
  virtual long total_frames() const = 0;
  // Fast-encoder outputs for frames [begin, end); called segment by segment.
  virtual Matrix fast_block(long begin, long end) = 0;
  // Slow-encoder outputs for frames [begin, end); called at slow boundaries.
  virtual Matrix slow_block(long begin, long end) = 0;
};

class NeuralCascadeStream : public CascadeStream {
 public:
  NeuralCascadeStream(CascadeWeights weights, const Matrix& encoder_features);
  long total_frames() const override { return static_cast<long>(blocks_total_); }
  Matrix fast_block(long begin, long end) override;
  Matrix slow_block(long begin, long end) override;

 private:
  CascadeSession session_;
  std::vector<StreamBlock> blocks_;
  std::size_t next_block_ = 0;
  std::size_t blocks_total_ = 0;
  Matrix pending_slow_;
  long pending_slow_begin_ = 0;
  bool have_pending_slow_ = false;
};

class TableCascadeStream : public CascadeStream {
 public:
  explicit TableCascadeStream(long total) : total_(total) {}
  long total_frames() const override { return total_; }
  Matrix fast_block(long begin, long end) override {
    return TableModel::encoder_rows(begin, end, /*slow=*/false);
  }
  Matrix slow_block(long begin, long end) override {
    return TableModel::encoder_rows(begin, end, /*slow=*/true);
  }

 private:
  long total_;
};

// Parallel fast-slow beam search. Every fast segment updates the fast beam
// and appends to the slow input buffer; at every slow boundary (and at
// stream end) the slow search catches up on the buffered frames, the fast
// beam is replaced by the truncated slow beam, and the timeline records
// both partials. The returned hypothesis maximizes length-normalized
// log-probability over the final slow beam.
DecodeResult parallel_decode(CascadeStream& stream, const DecoderModel& model,
                             const DecodeConfig& config);

// Piece concatenation with the word-piece space marker expanded.
std::string tokens_to_text(const DecoderModel& model, std::span<const int> tokens);

}  // namespace fastslow

#endif  // FASTSLOW_DECODER_H_
