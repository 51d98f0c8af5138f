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

#ifndef FASTSLOW_ORACLES_H_
#define FASTSLOW_ORACLES_H_

#include <functional>
#include <optional>
#include <vector>

#include "fastslow/decoder.h"
#include "fastslow/transducer.h"

// Independent reference computations kept deliberately naive. They verify
// the dynamic-programming and search implementations and are embedded into
// generated fixtures; none of them share code with the paths they check.
namespace fastslow::oracle {

// -log of the target probability by direct enumeration of every monotone
// blank/label path. Exponential in T+U; meant for T <= 4, U <= 3.
double enumeration_loss(const LossLattice& lattice,
                        const PathRestriction* restriction = nullptr);

// Max relative error between `result.grad` and central finite differences
// of `loss_fn` over every lattice coordinate. Relative error uses a
// denominator floor so exact zeros compare absolutely.
double max_grad_rel_error(const LossLattice& lattice,
                          const std::function<double(const LossLattice&)>& loss_fn,
                          const std::vector<double>& analytic_grad, double h = 1e-5,
                          double denom_floor = 1e-4);

struct BestSequence {
  std::vector<int> tokens;
  double log_prob = 0.0;        // path-sum log-probability
  double norm_score = 0.0;      // log_prob / max(1, len)
};

// Argmax of length-normalized path-sum probability over every token
// sequence reachable with at most `max_symbols_per_frame` emissions per
// frame, scored on the model's fast or slow table. Ties prefer shorter
// sequences, then smaller token ids.
BestSequence exhaustive_best_sequence(const TableModel& model, bool slow_table,
                                      int total_frames, int max_len,
                                      int max_symbols_per_frame);

// Path-sum log-probability of one fixed sequence under the run cap.
double sequence_log_prob(const TableModel& model, bool slow_table, int total_frames,
                         const std::vector<int>& tokens, int max_symbols_per_frame);

}  // namespace fastslow::oracle

#endif  // FASTSLOW_ORACLES_H_
