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

#include <filesystem>
#include <memory>
#include <random>

#include "doctest.h"
#include "fastslow/checkpoint.h"
#include "fastslow/encoder.h"
#include "testing/test_util.h"

using namespace fastslow;

namespace {

Matrix iota_features(std::size_t frames, std::size_t dims) {
  Matrix m(frames, dims);
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    m.data[i] = static_cast<float>(i % 97) * 0.01f;
  }
  return m;
}

// Streams `features` block by block and returns the concatenated main
// outputs.
Matrix stream_all(const EmformerEncoder& enc, const Matrix& features) {
  EncoderState state = enc.make_state();
  Matrix out(0, enc.config().model_dim);
  for (const StreamBlock& b : segment_stream(features, enc.config().segment_size,
                                             enc.config().right_context)) {
    out.append_rows(enc.encode_block(b.block, b.right_context, state).main_outputs);
  }
  return out;
}

}  // namespace

TEST_CASE("segment_stream cuts blocks with right context") {
  const Matrix feats = iota_features(9, 2);

  auto blocks = segment_stream(feats, 4, 1);
  REQUIRE(blocks.size() == 3);
  CHECK(blocks[0].block.rows == 4);
  CHECK(blocks[0].right_context.rows == 1);
  CHECK(blocks[0].right_context.at(0, 0) == feats.at(4, 0));
  CHECK(blocks[1].start_frame == 4);
  CHECK(blocks[1].right_context.at(0, 0) == feats.at(8, 0));
  CHECK(blocks[2].block.rows == 1);
  CHECK(blocks[2].right_context.rows == 0);

  // Concatenated blocks reproduce the input.
  Matrix cat(0, feats.cols);
  for (const auto& b : blocks) cat.append_rows(b.block);
  CHECK(cat.data == feats.data);

  auto exact = segment_stream(iota_features(4, 2), 4, 0);
  REQUIRE(exact.size() == 1);
  CHECK(exact[0].block.rows == 4);
  CHECK(exact[0].right_context.rows == 0);

  auto tail = segment_stream(iota_features(10, 2), 8, 1);
  REQUIRE(tail.size() == 2);
  CHECK(tail[0].block.rows == 8);
  CHECK(tail[0].right_context.rows == 1);
  CHECK(tail[1].block.rows == 2);
  CHECK(tail[1].right_context.rows == 0);

  CHECK(segment_stream(Matrix(0, 2), 4, 1).empty());
}

TEST_CASE("time_reduction stacks frames") {
  const Matrix feats80 = iota_features(8, 80);
  const Matrix reduced = time_reduction(feats80, 4);
  CHECK(reduced.rows == 2);
  CHECK(reduced.cols == 320);
  // Frame 0 is the concatenation of input frames 0..3.
  for (int s = 0; s < 4; ++s) {
    for (int d = 0; d < 80; ++d) {
      CHECK(reduced.at(0, s * 80 + d) == feats80.at(s, d));
    }
  }

  const Matrix same = time_reduction(feats80, 1);
  CHECK(same.data == feats80.data);

  const Matrix odd = time_reduction(iota_features(9, 2), 4);
  CHECK(odd.rows == 2);
  CHECK(odd.cols == 8);
  CHECK(odd.at(1, 7) == iota_features(9, 2).at(7, 1));  // frame 8 dropped
}

TEST_CASE("first block with no history matches the offline pass") {
  EncoderConfig cfg;
  cfg.num_layers = 2;
  cfg.input_dim = 6;
  cfg.model_dim = 8;
  cfg.num_heads = 2;
  cfg.segment_size = 4;
  cfg.right_context = 1;
  auto w = std::make_shared<EncoderWeights>(build_encoder_weights(cfg, 5));
  EmformerEncoder enc(w);

  const Matrix feats = iota_features(5, 6);
  EncoderState state = enc.make_state();
  const BlockOutput out =
      enc.encode_block(feats.slice_rows(0, 4), feats.slice_rows(4, 5), state);
  CHECK(out.main_outputs.rows == 4);
  CHECK(out.lookahead_outputs.rows == 1);

  const Matrix offline = enc.encode_offline(feats);
  CHECK(testing::max_abs_diff(out.main_outputs, offline.slice_rows(0, 4)) <= 1e-5);
}

TEST_CASE("block j=1 emits main rows 4..7 plus one lookahead row") {
  EncoderConfig cfg;
  cfg.num_layers = 1;
  cfg.input_dim = 4;
  cfg.model_dim = 8;
  cfg.segment_size = 4;
  cfg.right_context = 1;
  auto w = std::make_shared<EncoderWeights>(build_encoder_weights(cfg, 9));
  EmformerEncoder enc(w);

  const Matrix feats = iota_features(9, 4);
  const auto blocks = segment_stream(feats, 4, 1);
  EncoderState state = enc.make_state();
  enc.encode_block(blocks[0].block, blocks[0].right_context, state);
  const BlockOutput second =
      enc.encode_block(blocks[1].block, blocks[1].right_context, state);
  CHECK(state.frames_consumed == 8);
  CHECK(second.main_outputs.rows == 4);
  CHECK(second.lookahead_outputs.rows == 1);

  const Matrix offline = enc.encode_offline(feats);
  CHECK(testing::max_abs_diff(second.main_outputs, offline.slice_rows(4, 8)) <= 1e-5);
}

TEST_CASE("streaming equals offline over random configs") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 6; ++trial) {
    EncoderConfig cfg;
    cfg.num_layers = 1 + static_cast<int>(rng() % 3);
    cfg.model_dim = 8 * (1 + static_cast<int>(rng() % 3));
    cfg.num_heads = (rng() % 2) ? 2 : 1;
    cfg.input_dim = 3 + static_cast<int>(rng() % 6);
    cfg.ffn_dim = 16;
    cfg.segment_size = std::vector<int>{2, 4, 8}[rng() % 3];
    cfg.right_context = static_cast<int>(rng() % 3);
    auto w = std::make_shared<EncoderWeights>(build_encoder_weights(cfg, rng()));
    EmformerEncoder enc(w);

    const std::size_t frames = 1 + rng() % 20;
    const Matrix feats = testing::random_matrix(rng, frames, cfg.input_dim);
    CHECK(testing::max_abs_diff(stream_all(enc, feats), enc.encode_offline(feats)) <= 1e-5);
  }
}

TEST_CASE("streaming equals offline with a history cap") {
  std::mt19937_64 rng(78);
  EncoderConfig cfg;
  cfg.num_layers = 2;
  cfg.input_dim = 5;
  cfg.model_dim = 8;
  cfg.segment_size = 4;
  cfg.right_context = 1;
  cfg.max_history = 6;
  auto w = std::make_shared<EncoderWeights>(build_encoder_weights(cfg, 21));
  EmformerEncoder enc(w);
  const Matrix feats = testing::random_matrix(rng, 19, 5);
  CHECK(testing::max_abs_diff(stream_all(enc, feats), enc.encode_offline(feats)) <= 1e-5);
}

TEST_CASE("offline visibility follows the block rule") {
  EncoderConfig cfg;
  cfg.num_layers = 1;
  cfg.input_dim = 4;
  cfg.model_dim = 8;
  cfg.segment_size = 4;
  cfg.right_context = 1;
  auto w = std::make_shared<EncoderWeights>(build_encoder_weights(cfg, 31));
  EmformerEncoder enc(w);

  Matrix feats = iota_features(8, 4);
  const Matrix base = enc.encode_offline(feats);

  // Frame 5 is invisible to segment 0 (frames 0..3 see 0..4 only).
  Matrix poked = feats;
  poked.at(5, 0) += 1.0f;
  Matrix out = enc.encode_offline(poked);
  for (std::size_t t = 0; t < 4; ++t) {
    CHECK(std::equal(out.row(t), out.row(t) + out.cols, base.row(t)));
  }

  // Frame 4 is the lookahead of segment 0: all four rows must move.
  poked = feats;
  poked.at(4, 0) += 1.0f;
  out = enc.encode_offline(poked);
  for (std::size_t t = 0; t < 4; ++t) {
    CHECK_FALSE(std::equal(out.row(t), out.row(t) + out.cols, base.row(t)));
  }

  // Frame 0 is history for segment 1.
  poked = feats;
  poked.at(0, 0) += 1.0f;
  out = enc.encode_offline(poked);
  for (std::size_t t = 4; t < 8; ++t) {
    CHECK_FALSE(std::equal(out.row(t), out.row(t) + out.cols, base.row(t)));
  }

  // Single segment, no lookahead, unlimited history: plain full attention,
  // so every frame sees every other.
  EncoderConfig full = cfg;
  full.segment_size = 8;
  full.right_context = 0;
  auto wf = std::make_shared<EncoderWeights>(build_encoder_weights(full, 31));
  EmformerEncoder enc_full(wf);
  const Matrix dense_base = enc_full.encode_offline(feats);
  poked = feats;
  poked.at(7, 0) += 1.0f;
  out = enc_full.encode_offline(poked);
  for (std::size_t t = 0; t < 8; ++t) {
    CHECK_FALSE(std::equal(out.row(t), out.row(t) + out.cols, dense_base.row(t)));
  }
}

TEST_CASE("causal stability and determinism") {
  std::mt19937_64 rng(41);
  EncoderConfig cfg;
  cfg.num_layers = 2;
  cfg.input_dim = 4;
  cfg.model_dim = 8;
  cfg.segment_size = 4;
  cfg.right_context = 1;
  auto w = std::make_shared<EncoderWeights>(build_encoder_weights(cfg, 3));
  EmformerEncoder enc(w);

  const Matrix feats = testing::random_matrix(rng, 16, 4);
  const auto blocks = segment_stream(feats, 4, 1);

  // Two segments only.
  EncoderState s1 = enc.make_state();
  const Matrix first = enc.encode_block(blocks[0].block, blocks[0].right_context, s1).main_outputs;
  const Matrix second = enc.encode_block(blocks[1].block, blocks[1].right_context, s1).main_outputs;

  // Full stream from a fresh state: already-emitted outputs are identical
  // bits, and a second full pass reproduces itself.
  EncoderState s2 = enc.make_state();
  std::vector<Matrix> all;
  for (const auto& b : blocks) {
    all.push_back(enc.encode_block(b.block, b.right_context, s2).main_outputs);
  }
  CHECK(all[0].data == first.data);
  CHECK(all[1].data == second.data);

  EncoderState s3 = enc.make_state();
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const Matrix again =
        enc.encode_block(blocks[i].block, blocks[i].right_context, s3).main_outputs;
    CHECK(again.data == all[i].data);
  }
}

TEST_CASE("lookahead outputs differ from the next segment's main outputs") {
  std::mt19937_64 rng(43);
  EncoderConfig cfg;
  cfg.num_layers = 2;
  cfg.input_dim = 4;
  cfg.model_dim = 8;
  cfg.segment_size = 4;
  cfg.right_context = 1;
  auto w = std::make_shared<EncoderWeights>(build_encoder_weights(cfg, 1234));
  EmformerEncoder enc(w);

  const Matrix feats = testing::random_matrix(rng, 8, 4);
  const auto blocks = segment_stream(feats, 4, 1);
  EncoderState state = enc.make_state();
  const BlockOutput first = enc.encode_block(blocks[0].block, blocks[0].right_context, state);
  const BlockOutput second = enc.encode_block(blocks[1].block, blocks[1].right_context, state);
  // Frame 4 appears twice: provisionally as segment 0's lookahead, then
  // finally as segment 1's first main row, with different context.
  REQUIRE(first.lookahead_outputs.rows == 1);
  bool all_equal = true;
  for (std::size_t d = 0; d < 8; ++d) {
    all_equal = all_equal &&
                first.lookahead_outputs.at(0, d) == second.main_outputs.at(0, d);
  }
  CHECK_FALSE(all_equal);
}

TEST_CASE("state cannot cross encoders") {
  EncoderConfig cfg;
  cfg.input_dim = 4;
  cfg.model_dim = 8;
  auto w1 = std::make_shared<EncoderWeights>(build_encoder_weights(cfg, 1));
  auto w2 = std::make_shared<EncoderWeights>(build_encoder_weights(cfg, 2));
  EmformerEncoder a(w1), b(w2);
  EncoderState state = a.make_state();
  const Matrix block = iota_features(4, 4);
  CHECK_THROWS_AS(b.encode_block(block, Matrix(0, 4), state), std::invalid_argument);
}

TEST_CASE("layer sharing ties parameters and shrinks the count") {
  EncoderConfig cfg;
  cfg.num_layers = 20;
  cfg.input_dim = 4;
  cfg.model_dim = 8;
  cfg.ffn_dim = 8;
  cfg.segment_size = 4;
  cfg.right_context = 1;
  cfg.shared_layer_range = std::make_pair(2, 14);
  auto shared = std::make_shared<EncoderWeights>(build_encoder_weights(cfg, 7));

  CHECK(shared->distinct_layer_blocks() == 8);
  for (int i = 1; i < 14; ++i) CHECK(shared->layers[i] == shared->layers[1]);
  CHECK(shared->layers[0] != shared->layers[1]);
  CHECK(shared->layers[14] != shared->layers[13]);

  EncoderConfig dense_cfg = cfg;
  dense_cfg.shared_layer_range.reset();
  auto dense = std::make_shared<EncoderWeights>(build_encoder_weights(dense_cfg, 7));
  CHECK(dense->distinct_layer_blocks() == 20);
  CHECK(shared->layer_param_count() * 20 == dense->layer_param_count() * 8);

  // Mutating the shared block changes the forward output.
  EmformerEncoder enc(shared);
  const Matrix feats = iota_features(8, 4);
  const Matrix before = enc.encode_offline(feats);
  shared->layers[5]->wq.at(0, 0) += 0.25f;
  const Matrix after = enc.encode_offline(feats);
  CHECK(testing::max_abs_diff(before, after) > 0.0);

  EncoderConfig bad = cfg;
  bad.shared_layer_range = std::make_pair(2, 21);
  CHECK_THROWS_AS(build_encoder_weights(bad, 7), std::invalid_argument);
}

TEST_CASE("cascade buffers fast segments and flushes to the slow encoder") {
  CascadeConfig cc;
  cc.fast.num_layers = 1;
  cc.fast.input_dim = 4;
  cc.fast.model_dim = 8;
  cc.fast.segment_size = 4;
  cc.fast.right_context = 1;
  cc.slow = cc.fast;
  cc.slow.input_dim = 8;
  cc.slow.segment_size = 8;
  cc.slow_segment_multiple = 2;
  const CascadeWeights weights = build_cascade(cc, 17);

  const Matrix feats = iota_features(16, 4);
  const auto blocks = segment_stream(feats, 4, 1);
  CascadeSession session(weights);

  auto r0 = session.feed(blocks[0].block, blocks[0].right_context, false);
  CHECK_FALSE(r0.slow.has_value());
  auto r1 = session.feed(blocks[1].block, blocks[1].right_context, false);
  REQUIRE(r1.slow.has_value());
  CHECK(r1.slow_start_frame == 0);
  CHECK(r1.slow->main_outputs.rows == 8);
  CHECK(r1.slow->lookahead_outputs.rows == 1);  // fed the fast lookahead
  auto r2 = session.feed(blocks[2].block, blocks[2].right_context, false);
  CHECK_FALSE(r2.slow.has_value());
  auto r3 = session.feed(blocks[3].block, blocks[3].right_context, true);
  REQUIRE(r3.slow.has_value());
  CHECK(r3.slow_start_frame == 8);
  CHECK(r3.slow->lookahead_outputs.rows == 0);  // stream end: no lookahead
}

TEST_CASE("degenerate cascade with multiple 1 flushes every segment") {
  CascadeConfig cc;
  cc.fast.num_layers = 1;
  cc.fast.input_dim = 4;
  cc.fast.model_dim = 8;
  cc.fast.segment_size = 4;
  cc.fast.right_context = 0;
  cc.slow = cc.fast;
  cc.slow.input_dim = 8;
  cc.slow_segment_multiple = 1;
  CascadeSession session(build_cascade(cc, 3));
  const Matrix feats = iota_features(8, 4);
  for (const auto& b : segment_stream(feats, 4, 0)) {
    auto r = session.feed(b.block, b.right_context, false);
    CHECK(r.slow.has_value());
  }
}

TEST_CASE("partial final slow block matches the offline slow pass") {
  // Stream ends mid-buffer; the slow encoder sees the truncated input with
  // no lookahead, which is exactly the offline pass on that input.
  CascadeConfig cc;
  cc.fast.num_layers = 1;
  cc.fast.input_dim = 4;
  cc.fast.model_dim = 8;
  cc.fast.segment_size = 4;
  cc.fast.right_context = 1;
  cc.slow = cc.fast;
  cc.slow.input_dim = 8;
  cc.slow.segment_size = 8;
  cc.slow_segment_multiple = 2;
  const CascadeWeights weights = build_cascade(cc, 23);

  const Matrix feats = iota_features(6, 4);  // less than one slow segment
  CascadeSession session(weights);
  const auto blocks = segment_stream(feats, 4, 1);
  Matrix fast_mains(0, 8);
  std::optional<BlockOutput> slow_out;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    auto r = session.feed(blocks[i].block, blocks[i].right_context, i + 1 == blocks.size());
    fast_mains.append_rows(r.fast.main_outputs);
    if (r.slow.has_value()) slow_out = r.slow;
  }
  REQUIRE(slow_out.has_value());
  EmformerEncoder slow_enc(weights.slow);
  CHECK(testing::max_abs_diff(slow_out->main_outputs, slow_enc.encode_offline(fast_mains)) <=
        1e-5);
}

TEST_CASE("encoder config validation names the field") {
  EncoderConfig cfg;
  cfg.num_heads = 3;  // does not divide model_dim = 8
  CHECK_THROWS_WITH_AS(cfg.validate(), "EncoderConfig.num_heads: must divide model_dim",
                       std::invalid_argument);
  cfg = EncoderConfig{};
  cfg.segment_size = 0;
  CHECK_THROWS_WITH_AS(cfg.validate(), "EncoderConfig.segment_size: must be >= 1",
                       std::invalid_argument);
  cfg = EncoderConfig{};
  cfg.right_context = -1;
  CHECK_THROWS_WITH_AS(cfg.validate(), "EncoderConfig.right_context: must be >= 0",
                       std::invalid_argument);
  cfg = EncoderConfig{};
  cfg.num_layers = 0;
  CHECK_THROWS_WITH_AS(cfg.validate(), "EncoderConfig.num_layers: must be >= 1",
                       std::invalid_argument);
}

TEST_CASE("cascade config validation names the field") {
  CascadeConfig cc;
  cc.fast.segment_size = 4;
  cc.slow = cc.fast;
  cc.slow.input_dim = cc.fast.model_dim;
  cc.slow.segment_size = 6;  // not fast * multiple
  cc.slow_segment_multiple = 2;
  CHECK_THROWS_WITH_AS(cc.validate(),
                       "CascadeConfig.slow.segment_size: must equal fast.segment_size * "
                       "slow_segment_multiple",
                       std::invalid_argument);
}

TEST_CASE("checkpoint round trip preserves bits and sharing") {
  CascadeConfig cc;
  cc.fast.num_layers = 3;
  cc.fast.input_dim = 4;
  cc.fast.model_dim = 8;
  cc.fast.segment_size = 4;
  cc.fast.right_context = 1;
  cc.fast.shared_layer_range = std::make_pair(1, 2);
  cc.slow = cc.fast;
  cc.slow.shared_layer_range.reset();
  cc.slow.input_dim = 8;
  cc.slow.segment_size = 8;
  cc.slow_segment_multiple = 2;

  Vocabulary vocab;
  vocab.tokens = {"<b>", "\xe2\x96\x81x", "\xe2\x96\x81y"};
  vocab.blank_id = 0;
  const Checkpoint ckpt = init_checkpoint(cc, PredictorConfig{2, 8, 8}, JoinerConfig{8, 8, 8, 0},
                                          vocab, 99);

  const std::string path = (std::filesystem::temp_directory_path() / "fastslow_ckpt_test.json").string();
  save_checkpoint(path, ckpt);
  const Checkpoint loaded = load_checkpoint(path);

  CHECK(loaded.cascade.fast->layers[0] == loaded.cascade.fast->layers[1]);
  CHECK(loaded.cascade.fast->layers[1] != loaded.cascade.fast->layers[2]);
  CHECK(loaded.cascade.fast->layers[0]->wq.data == ckpt.cascade.fast->layers[0]->wq.data);
  CHECK(loaded.cascade.slow->input_w.data == ckpt.cascade.slow->input_w.data);
  CHECK(loaded.predictor->embed.data == ckpt.predictor->embed.data);
  CHECK(loaded.joiner->out_w.data == ckpt.joiner->out_w.data);
  CHECK(loaded.vocab.tokens == ckpt.vocab.tokens);

  // Same weights, same outputs.
  EmformerEncoder a(ckpt.cascade.fast), b(loaded.cascade.fast);
  const Matrix feats = iota_features(9, 4);
  CHECK(a.encode_offline(feats).data == b.encode_offline(feats).data);
  std::filesystem::remove(path);
}
