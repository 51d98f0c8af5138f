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

#ifndef FASTSLOW_TRANSDUCER_H_
#define FASTSLOW_TRANSDUCER_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fastslow/matrix.h"

namespace fastslow {

// Word-piece inventory. The blank symbol is one of the tokens; the joint
// distribution therefore has exactly tokens.size() classes.
struct Vocabulary {
  std::vector<std::string> tokens;
  int blank_id = 0;

  int size() const { return static_cast<int>(tokens.size()); }
  void validate() const;
};

// Start-of-sequence sentinel accepted by predictor_step.
inline constexpr int kSosToken = -1;

struct PredictorConfig {
  int num_layers = 2;
  int embed_dim = 16;
  int hidden_dim = 16;  // also the predictor output dim
  void validate() const;
};

// A small stack of GRU cells over a token embedding. The embedding table
// has one extra row used for the start-of-sequence sentinel.
struct PredictorWeights {
  PredictorConfig config;
  int vocab_size = 0;
  Matrix embed;  // (vocab_size + 1) x embed_dim; last row = SOS
  struct Layer {
    Matrix wz, uz;
    std::vector<float> bz;
    Matrix wr, ur;
    std::vector<float> br;
    Matrix wh, uh;
    std::vector<float> bh;
  };
  std::vector<Layer> layers;

  std::size_t param_count() const;
};

struct PredictorState {
  std::vector<std::vector<float>> hidden;  // one vector per layer
  int tokens_consumed = 0;
};

PredictorWeights build_predictor_weights(const PredictorConfig& cfg, int vocab_size,
                                         std::uint64_t seed);
PredictorState predictor_initial_state(const PredictorWeights& w);

// Consumes one token (or kSosToken) and returns the output embedding plus
// the advanced state. Deterministic; throws on out-of-range token ids.
std::pair<std::vector<float>, PredictorState> predictor_step(
    const PredictorWeights& w, int token, const PredictorState& state);

struct JoinerConfig {
  int enc_dim = 8;
  int pred_dim = 16;
  int joint_dim = 16;
  int num_classes = 0;  // vocabulary size including blank
  void validate() const;
};

struct JoinerWeights {
  JoinerConfig config;
  Matrix enc_w;  // enc_dim x joint_dim
  std::vector<float> enc_b;
  Matrix pred_w;  // pred_dim x joint_dim
  std::vector<float> pred_b;
  Matrix out_w;  // joint_dim x num_classes
  std::vector<float> out_b;

  std::size_t param_count() const;
};

JoinerWeights build_joiner_weights(const JoinerConfig& cfg, std::uint64_t seed);

// log softmax(out_w' * tanh(enc_w' e + pred_w' p + b) + out_b); always a
// normalized log distribution over num_classes.
std::vector<float> joiner_log_probs(const JoinerWeights& w, std::span<const float> enc,
                                    std::span<const float> pred);

// Alignment lattice of joint log-probabilities for one utterance: entry
// (t, u, k) is the log-probability of emitting class k at frame t after u
// target tokens. All loss arithmetic is double precision.
struct LossLattice {
  int num_frames = 0;   // T
  int num_classes = 0;  // includes blank
  int blank_id = 0;
  std::vector<int> target;      // U non-blank token ids
  std::vector<double> log_probs;  // T * (U+1) * num_classes

  int target_len() const { return static_cast<int>(target.size()); }
  std::size_t index(int t, int u, int k) const {
    return (static_cast<std::size_t>(t) * (target.size() + 1) + u) * num_classes + k;
  }
  double at(int t, int u, int k) const { return log_probs[index(t, u, k)]; }
  double& at(int t, int u, int k) { return log_probs[index(t, u, k)]; }

  void validate() const;  // shape, NaN, target ids
};

struct LossResult {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d log_probs, same layout as the lattice
};

// -log of the total probability of the target over all monotone
// blank/label paths, with analytic gradients from the forward-backward
// recursion.
LossResult transducer_loss(const LossLattice& lattice);

// loss_slow + lambda * loss_fast; lambda must lie strictly inside (0, 1).
double combined_loss(double loss_fast, double loss_slow, double lambda);

inline constexpr long kUnlimitedSlack = 1L << 40;

// Per-token reference frames with symmetric slack. Token u may only be
// emitted at frames within [alignment[u] - left_slack, alignment[u] +
// right_slack].
struct PathRestriction {
  std::vector<long> token_alignment;
  long left_slack = kUnlimitedSlack;
  long right_slack = kUnlimitedSlack;

  void validate(int target_len) const;
};

// Same dynamic program with label emissions outside the alignment window
// forced to -inf. Throws std::runtime_error("infeasible restriction") when
// no path survives.
LossResult restricted_loss(const LossLattice& lattice, const PathRestriction& restriction);

// Low-latency emission regularization. Where g is the standard loss
// gradient, the returned gradient scales every label-emission entry by
// (1 + fe_lambda) and leaves blank entries untouched. The reported loss is
// the matching first-order objective
//
//   L_fe(x) = L(x) + fe_lambda * R(x),  R(x) = -sum_{t,u} c(t,u) lp(t,u,y_u)
//
// with c(t,u) the label-transition occupancies frozen at the evaluation
// point, so that grad L_fe is exactly the reweighted gradient above.
// fe_lambda = 0 reproduces transducer_loss bit for bit.
LossResult fastemit_loss(const LossLattice& lattice, double fe_lambda);

// Occupancy of each label transition under the standard loss (equals minus
// the label entries of the gradient). Exposed for the fastemit objective.
std::vector<double> label_occupancies(const LossLattice& lattice);

}  // namespace fastslow

#endif  // FASTSLOW_TRANSDUCER_H_
