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

#include "fastslow/oracles.h"

#include <cmath>
#include <limits>
#include <map>

namespace fastslow::oracle {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

// Walks every path explicitly: at node (t, u) either emit blank and move to
// frame t+1, or emit target[u]. A path is complete after the final blank at
// (T-1, U).
void enumerate_paths(const LossLattice& lat, const PathRestriction* restriction,
                     int t, int u, double acc, double& total) {
  const int T = lat.num_frames;
  const int U = lat.target_len();
  if (t == T - 1 && u == U) {
    total = log_add(total, acc + lat.at(t, u, lat.blank_id));
    // The exit blank ends this path; label emissions at (T-1, U) do not
    // exist because the target is exhausted.
  }
  if (t < T - 1) {
    enumerate_paths(lat, restriction, t + 1, u, acc + lat.at(t, u, lat.blank_id), total);
  }
  if (u < U) {
    bool allowed = true;
    if (restriction != nullptr) {
      const long ref = restriction->token_alignment[u];
      allowed = t >= ref - restriction->left_slack && t <= ref + restriction->right_slack;
    }
    if (allowed) {
      enumerate_paths(lat, restriction, t, u + 1, acc + lat.at(t, u, lat.target[u]), total);
    }
  }
}

}  // namespace

double enumeration_loss(const LossLattice& lattice, const PathRestriction* restriction) {
  lattice.validate();
  if (restriction != nullptr) restriction->validate(lattice.target_len());
  double total = kNegInf;
  enumerate_paths(lattice, restriction, 0, 0, 0.0, total);
  return -total;
}

double max_grad_rel_error(const LossLattice& lattice,
                          const std::function<double(const LossLattice&)>& loss_fn,
                          const std::vector<double>& analytic_grad, double h,
                          double denom_floor) {
  LossLattice work = lattice;
  double worst = 0.0;
  for (std::size_t i = 0; i < lattice.log_probs.size(); ++i) {
    const double orig = lattice.log_probs[i];
    if (orig == kNegInf) continue;  // blocked entries are not differentiable knobs
    work.log_probs[i] = orig + h;
    const double up = loss_fn(work);
    work.log_probs[i] = orig - h;
    const double down = loss_fn(work);
    work.log_probs[i] = orig;
    const double fd = (up - down) / (2.0 * h);
    const double g = analytic_grad[i];
    const double denom = std::max({std::abs(fd), std::abs(g), denom_floor});
    worst = std::max(worst, std::abs(fd - g) / denom);
  }
  return worst;
}

namespace {

// Path sum for one sequence with at most `cap` labels emitted per frame.
// State: (frames consumed, tokens emitted, labels since last blank).
double seq_sum(const TableModel& model, bool slow, int total_frames,
               const std::vector<int>& tokens, int cap, int t, int u, int run,
               std::map<std::tuple<int, int, int>, double>& memo) {
  if (t == total_frames) return u == static_cast<int>(tokens.size()) ? 0.0 : kNegInf;
  const auto key = std::make_tuple(t, u, run);
  auto it = memo.find(key);
  if (it != memo.end()) return it->second;

  const auto lp = model.slice(slow, t, u);
  double total = lp[model.blank_id()] +
                 seq_sum(model, slow, total_frames, tokens, cap, t + 1, u, 0, memo);
  if (u < static_cast<int>(tokens.size()) && run < cap) {
    total = log_add(total, lp[tokens[u]] + seq_sum(model, slow, total_frames, tokens,
                                                   cap, t, u + 1, run + 1, memo));
  }
  memo[key] = total;
  return total;
}

void all_sequences(int num_classes, int blank, int max_len, std::vector<int>& cur,
                   std::vector<std::vector<int>>& out) {
  out.push_back(cur);
  if (static_cast<int>(cur.size()) == max_len) return;
  for (int k = 0; k < num_classes; ++k) {
    if (k == blank) continue;
    cur.push_back(k);
    all_sequences(num_classes, blank, max_len, cur, out);
    cur.pop_back();
  }
}

}  // namespace

double sequence_log_prob(const TableModel& model, bool slow_table, int total_frames,
                         const std::vector<int>& tokens, int max_symbols_per_frame) {
  std::map<std::tuple<int, int, int>, double> memo;
  return seq_sum(model, slow_table, total_frames, tokens, max_symbols_per_frame, 0, 0,
                 0, memo);
}

BestSequence exhaustive_best_sequence(const TableModel& model, bool slow_table,
                                      int total_frames, int max_len,
                                      int max_symbols_per_frame) {
  std::vector<std::vector<int>> candidates;
  std::vector<int> cur;
  all_sequences(model.num_classes(), model.blank_id(), max_len, cur, candidates);

  BestSequence best;
  best.log_prob = kNegInf;
  best.norm_score = kNegInf;
  for (const auto& seq : candidates) {
    const double lp =
        sequence_log_prob(model, slow_table, total_frames, seq, max_symbols_per_frame);
    if (lp == kNegInf) continue;
    const double norm = lp / static_cast<double>(std::max<std::size_t>(1, seq.size()));
    const bool better =
        norm > best.norm_score ||
        (norm == best.norm_score &&
         (seq.size() < best.tokens.size() ||
          (seq.size() == best.tokens.size() && seq < best.tokens)));
    if (better) {
      best.tokens = seq;
      best.log_prob = lp;
      best.norm_score = norm;
    }
  }
  return best;
}

}  // namespace fastslow::oracle
