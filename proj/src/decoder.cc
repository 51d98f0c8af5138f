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

#include "fastslow/decoder.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>

namespace fastslow {
namespace {

double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

// Score-descending with fully deterministic ties: shorter sequence first,
// then smaller token ids.
bool better_hyp(double lp_a, const std::vector<int>& a, double lp_b,
                const std::vector<int>& b) {
  if (lp_a != lp_b) return lp_a > lp_b;
  if (a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

std::atomic<std::uint64_t> g_space_counter{1};

}  // namespace

NeuralModel::NeuralModel(Vocabulary vocab,
                         std::shared_ptr<const PredictorWeights> predictor,
                         std::shared_ptr<const JoinerWeights> joiner)
    : vocab_(std::move(vocab)), predictor_(std::move(predictor)), joiner_(std::move(joiner)) {
  vocab_.validate();
  if (joiner_->config.num_classes != vocab_.size()) {
    throw std::invalid_argument("NeuralModel: joiner classes != vocabulary size");
  }
}

DecoderModel::PredictorOutput NeuralModel::predictor_start() const {
  auto [emb, state] = predictor_step(*predictor_, kSosToken, predictor_initial_state(*predictor_));
  return {std::move(emb), std::move(state)};
}

DecoderModel::PredictorOutput NeuralModel::predictor_extend(const PredictorOutput& parent,
                                                            int token) const {
  auto [emb, state] = predictor_step(*predictor_, token, parent.state);
  return {std::move(emb), std::move(state)};
}

std::vector<float> NeuralModel::joint(std::span<const float> enc_row,
                                      const PredictorOutput& pred, int) const {
  return joiner_log_probs(*joiner_, enc_row, pred.embedding);
}

TableModel::TableModel(Vocabulary vocab, Table fast, Table slow)
    : vocab_(std::move(vocab)), fast_(std::move(fast)), slow_(std::move(slow)) {
  vocab_.validate();
  for (const Table* t : {&fast_, &slow_}) {
    const std::size_t expect = static_cast<std::size_t>(t->num_frames) *
                               (t->max_prefix + 1) * vocab_.size();
    if (t->log_probs.size() != expect) {
      throw std::invalid_argument("TableModel: table size mismatch");
    }
  }
  if (fast_.num_frames != slow_.num_frames || fast_.max_prefix != slow_.max_prefix) {
    throw std::invalid_argument("TableModel: fast/slow table shape mismatch");
  }
}

std::span<const float> TableModel::slice(bool slow, int frame, int prefix_len) const {
  const Table& t = slow ? slow_ : fast_;
  if (frame < 0 || frame >= t.num_frames) {
    throw std::out_of_range("TableModel: frame out of range");
  }
  const int u = std::min(prefix_len, t.max_prefix);
  const std::size_t off =
      (static_cast<std::size_t>(frame) * (t.max_prefix + 1) + u) * vocab_.size();
  return {t.log_probs.data() + off, static_cast<std::size_t>(vocab_.size())};
}

std::vector<float> TableModel::joint(std::span<const float> enc_row,
                                     const PredictorOutput&, int prefix_len) const {
  if (enc_row.size() != 2) throw std::invalid_argument("TableModel: expected (frame, source) rows");
  const int frame = static_cast<int>(std::lround(enc_row[0]));
  const bool slow = enc_row[1] != 0.0f;
  auto s = slice(slow, frame, prefix_len);
  return {s.begin(), s.end()};
}

Matrix TableModel::encoder_rows(long begin, long end, bool slow) {
  Matrix m(static_cast<std::size_t>(end - begin), 2);
  for (long t = begin; t < end; ++t) {
    m.at(t - begin, 0) = static_cast<float>(t);
    m.at(t - begin, 1) = slow ? 1.0f : 0.0f;
  }
  return m;
}

SearchSpace::SearchSpace(const DecoderModel& model)
    : model_(model), id_(g_space_counter.fetch_add(1)) {
  root_ = std::make_unique<PrefixNode>();
  root_->space_id = id_;
  root_->pred = model_.predictor_start();
  predictor_evals_ = 1;  // the root prefix counts
}

const PrefixNode* SearchSpace::extend(const PrefixNode* node, int token) {
  if (node == nullptr || node->space_id != id_) {
    throw std::invalid_argument("SearchSpace: handle belongs to a different search space");
  }
  if (token < 0 || token >= model_.num_classes() || token == model_.blank_id()) {
    throw std::invalid_argument("SearchSpace: cannot extend by blank or invalid token");
  }
  auto* mutable_node = const_cast<PrefixNode*>(node);
  auto it = mutable_node->children.find(token);
  if (it != mutable_node->children.end()) {
    ++cache_hits_;
    return it->second.get();
  }
  auto child = std::make_unique<PrefixNode>();
  child->parent = node;
  child->token = token;
  child->depth = node->depth + 1;
  child->space_id = id_;
  child->pred = model_.predictor_extend(node->pred, token);
  ++predictor_evals_;
  const PrefixNode* raw = child.get();
  mutable_node->children.emplace(token, std::move(child));
  return raw;
}

namespace {

struct Cand {
  double log_prob = -std::numeric_limits<double>::infinity();
  // Largest single merged-in contribution; the emission stamps follow it.
  double best_contrib = -std::numeric_limits<double>::infinity();
  const PrefixNode* node = nullptr;  // set once the prefix is materialized
  // Extension candidates carry (parent, token) until they survive pruning;
  // only then is the predictor run for them.
  const PrefixNode* parent = nullptr;
  int last_token = kSosToken;
  std::vector<long> stamps;
};

using CandMap = std::map<std::vector<int>, Cand>;

void merge_into(CandMap& dst, const std::vector<int>& seq, const Cand& incoming) {
  auto [it, inserted] = dst.try_emplace(seq);
  Cand& c = it->second;
  if (inserted) {
    c = incoming;
    return;
  }
  // Same sequence reached along another path: path-sum merge. The stamps
  // track the dominant path, so a stray low-probability duplicate cannot
  // backdate when a token was surfaced. The trie position is identical by
  // construction.
  c.log_prob = log_add(c.log_prob, incoming.log_prob);
  if (incoming.best_contrib > c.best_contrib) {
    c.best_contrib = incoming.best_contrib;
    c.stamps = incoming.stamps;
  }
}

// Keeps the `beam_size` best entries of `m`.
void prune(CandMap& m, int beam_size) {
  if (static_cast<int>(m.size()) <= beam_size) return;
  std::vector<const std::vector<int>*> order;
  order.reserve(m.size());
  for (const auto& [seq, c] : m) order.push_back(&seq);
  std::sort(order.begin(), order.end(), [&](const auto* a, const auto* b) {
    return better_hyp(m.at(*a).log_prob, *a, m.at(*b).log_prob, *b);
  });
  CandMap kept;
  for (int i = 0; i < beam_size; ++i) kept.emplace(*order[i], std::move(m.at(*order[i])));
  m = std::move(kept);
}

}  // namespace

BeamSet beam_search(const Matrix& enc_outputs, const BeamSet& beam_in, int beam_size,
                    SearchSpace& space, const DecoderModel& model, long start_frame,
                    int max_symbols, DecodeCounters& counters) {
  if (beam_size < 1) throw std::invalid_argument("beam_search: beam_size must be >= 1");
  if (enc_outputs.rows == 0) return beam_in;
  if (!beam_in.empty() && beam_in.space_id != space.id()) {
    throw std::invalid_argument("beam_search: beam handles belong to a different search space");
  }

  const int blank = model.blank_id();
  const int classes = model.num_classes();

  CandMap beam;
  if (beam_in.empty()) {
    Cand root;
    root.log_prob = 0.0;
    root.best_contrib = 0.0;
    root.node = space.root();
    beam.emplace(std::vector<int>{}, std::move(root));
  } else {
    for (const Hypothesis& h : beam_in.hyps) {
      Cand c;
      c.log_prob = h.log_prob;
      c.best_contrib = h.log_prob;
      c.node = h.node;
      c.stamps = h.token_emit_frames;
      beam.emplace(h.tokens, std::move(c));
    }
  }

  for (std::size_t fi = 0; fi < enc_outputs.rows; ++fi) {
    const long frame = start_frame + static_cast<long>(fi);
    const auto enc_row = enc_outputs.row_span(fi);

    // Joint distributions computed once per prefix per frame.
    std::map<const PrefixNode*, std::vector<float>> joints;
    auto joint_of = [&](const Cand& c, int depth) -> const std::vector<float>& {
      auto it = joints.find(c.node);
      if (it == joints.end()) {
        ++counters.joiner_evals;
        it = joints.emplace(c.node, model.joint(enc_row, c.node->pred, depth)).first;
      }
      return it->second;
    };

    // Emissions expand breadth-first by symbol count; every expansion layer
    // is blank-closed into the next frame's beam. Duplicate sequences merge
    // by log-sum-exp wherever they meet.
    CandMap b_next;
    CandMap layer = std::move(beam);
    for (int s = 0; s <= max_symbols; ++s) {
      for (const auto& [seq, c] : layer) {
        const auto& lp = joint_of(c, static_cast<int>(seq.size()));
        Cand closed;
        closed.log_prob = c.log_prob + lp[blank];
        closed.best_contrib = closed.log_prob;
        closed.node = c.node;
        closed.stamps = c.stamps;
        merge_into(b_next, seq, closed);
      }
      if (s == max_symbols) break;
      CandMap extended;
      for (const auto& [seq, c] : layer) {
        const auto& lp = joint_of(c, static_cast<int>(seq.size()));
        std::vector<int> child_seq = seq;
        child_seq.push_back(0);
        Cand child;
        child.parent = c.node;
        child.stamps = c.stamps;
        child.stamps.push_back(frame);
        for (int k = 0; k < classes; ++k) {
          if (k == blank) continue;
          child_seq.back() = k;
          child.last_token = k;
          child.log_prob = c.log_prob + lp[k];
          child.best_contrib = child.log_prob;
          merge_into(extended, child_seq, child);
        }
      }
      if (extended.empty()) break;
      prune(extended, beam_size);
      // Predictor runs only for the survivors.
      for (auto& [seq, c] : extended) {
        c.node = space.extend(c.parent, c.last_token);
      }
      layer = std::move(extended);
    }
    prune(b_next, beam_size);
    beam = std::move(b_next);
  }

  BeamSet out;
  out.beam_size = beam_size;
  out.space_id = space.id();
  out.hyps.reserve(beam.size());
  for (auto& [seq, c] : beam) {
    Hypothesis h;
    h.tokens = seq;
    h.log_prob = c.log_prob;
    h.node = c.node;
    h.token_emit_frames = std::move(c.stamps);
    out.hyps.push_back(std::move(h));
  }
  std::sort(out.hyps.begin(), out.hyps.end(), [](const Hypothesis& a, const Hypothesis& b) {
    return better_hyp(a.log_prob, a.tokens, b.log_prob, b.tokens);
  });
  return out;
}

BeamSet merge_beams(const BeamSet& fast, const BeamSet& slow, int fast_beam_size) {
  if (fast.space_id != 0 && slow.space_id != 0 && fast.space_id != slow.space_id) {
    throw std::invalid_argument("merge_beams: beams from different search spaces");
  }
  BeamSet out = slow;
  out.beam_size = fast_beam_size;
  if (static_cast<int>(out.hyps.size()) > fast_beam_size) {
    out.hyps.resize(fast_beam_size);
  }
  return out;
}

const Hypothesis& best_hypothesis(const BeamSet& beam) {
  if (beam.empty()) throw std::invalid_argument("best_hypothesis: empty beam");
  const Hypothesis* best = &beam.hyps[0];
  auto norm = [](const Hypothesis& h) {
    return h.log_prob / static_cast<double>(std::max<std::size_t>(1, h.tokens.size()));
  };
  for (const Hypothesis& h : beam.hyps) {
    const double a = norm(h);
    const double b = norm(*best);
    if (a > b || (a == b && better_hyp(0.0, h.tokens, 0.0, best->tokens))) {
      best = &h;
    }
  }
  return *best;
}

void DecodeConfig::validate() const {
  if (fast_segment < 1) throw std::invalid_argument("DecodeConfig.fast_segment: must be >= 1");
  if (slow_segment < 1 || slow_segment % fast_segment != 0) {
    throw std::invalid_argument(
        "DecodeConfig.slow_segment: must be a positive multiple of fast_segment");
  }
  if (fast_beam < 1) throw std::invalid_argument("DecodeConfig.fast_beam: must be >= 1");
  if (slow_beam < 1) throw std::invalid_argument("DecodeConfig.slow_beam: must be >= 1");
  if (max_symbols_per_frame < 1) {
    throw std::invalid_argument("DecodeConfig.max_symbols_per_frame: must be >= 1");
  }
}

NeuralCascadeStream::NeuralCascadeStream(CascadeWeights weights,
                                         const Matrix& encoder_features)
    : session_(std::move(weights)) {
  const EncoderConfig& fast_cfg = session_.weights().fast->config;
  blocks_ = segment_stream(encoder_features, fast_cfg.segment_size, fast_cfg.right_context);
  blocks_total_ = encoder_features.rows;
}

Matrix NeuralCascadeStream::fast_block(long begin, long end) {
  if (next_block_ >= blocks_.size() || blocks_[next_block_].start_frame != begin) {
    throw std::logic_error("NeuralCascadeStream: fast blocks must be consumed in order");
  }
  StreamBlock& blk = blocks_[next_block_];
  if (begin + static_cast<long>(blk.block.rows) != end) {
    throw std::logic_error("NeuralCascadeStream: fast block range mismatch");
  }
  const bool last = next_block_ + 1 == blocks_.size();
  auto result = session_.feed(blk.block, blk.right_context, last);
  ++next_block_;
  if (result.slow.has_value()) {
    pending_slow_ = std::move(result.slow->main_outputs);
    pending_slow_begin_ = result.slow_start_frame;
    have_pending_slow_ = true;
  }
  return std::move(result.fast.main_outputs);
}

Matrix NeuralCascadeStream::slow_block(long begin, long end) {
  if (!have_pending_slow_ || pending_slow_begin_ != begin ||
      begin + static_cast<long>(pending_slow_.rows) != end) {
    throw std::logic_error("NeuralCascadeStream: slow block range mismatch");
  }
  have_pending_slow_ = false;
  return std::move(pending_slow_);
}

namespace {

// Slow hypotheses surface at the boundary; tokens the fast pass already
// showed on its 1-best path keep their earlier emission frames.
void restamp_after_slow(BeamSet& slow, const Hypothesis& fast_best, long boundary) {
  for (Hypothesis& h : slow.hyps) {
    bool prefix_match = true;
    for (std::size_t i = 0; i < h.tokens.size(); ++i) {
      prefix_match = prefix_match && i < fast_best.tokens.size() &&
                     fast_best.tokens[i] == h.tokens[i];
      h.token_emit_frames[i] =
          prefix_match ? fast_best.token_emit_frames[i] : boundary;
    }
  }
}

BeamSet reroot(const BeamSet& beam, SearchSpace& target, int beam_size) {
  BeamSet out;
  out.beam_size = beam_size;
  out.space_id = target.id();
  for (const Hypothesis& h : beam.hyps) {
    if (static_cast<int>(out.hyps.size()) == beam_size) break;
    Hypothesis copy = h;
    const PrefixNode* node = target.root();
    for (int tok : copy.tokens) node = target.extend(node, tok);
    copy.node = node;
    out.hyps.push_back(std::move(copy));
  }
  return out;
}

}  // namespace

DecodeResult parallel_decode(CascadeStream& stream, const DecoderModel& model,
                             const DecodeConfig& config) {
  config.validate();
  const long total = stream.total_frames();
  if (total <= 0) throw std::invalid_argument("parallel_decode: empty stream");

  // One shared prefix store by default; the diagnostic mode gives each
  // pass its own, which forces re-evaluation of prefixes at every merge.
  SearchSpace shared_space(model);
  std::optional<SearchSpace> iso_fast, iso_slow;
  SearchSpace* fast_space = &shared_space;
  SearchSpace* slow_space = &shared_space;
  if (!config.shared_search_space) {
    iso_fast.emplace(model);
    iso_slow.emplace(model);
    fast_space = &*iso_fast;
    slow_space = &*iso_slow;
  }

  DecodeResult result;
  BeamSet b_fast;
  b_fast.beam_size = config.fast_beam;
  b_fast.space_id = fast_space->id();
  BeamSet b_slow;
  b_slow.beam_size = config.slow_beam;
  b_slow.space_id = slow_space->id();

  long slow_begin = 0;
  for (long t0 = 0; t0 < total; ) {
    const long t1 = std::min(total, t0 + config.fast_segment);
    Matrix fast_rows = stream.fast_block(t0, t1);
    const long joints_before = result.counters.joiner_evals;
    b_fast = beam_search(fast_rows, b_fast, config.fast_beam, *fast_space, model, t0,
                         config.max_symbols_per_frame, result.counters);
    result.fast_pass_counters.joiner_evals +=
        result.counters.joiner_evals - joints_before;
    result.timeline.push_back({t1, false, best_hypothesis(b_fast).tokens});

    if (t1 % config.slow_segment == 0 || t1 == total) {
      Matrix slow_rows = stream.slow_block(slow_begin, t1);
      b_slow = beam_search(slow_rows, b_slow, config.slow_beam, *slow_space, model,
                           slow_begin, config.max_symbols_per_frame, result.counters);
      result.fast_final = best_hypothesis(b_fast);
      restamp_after_slow(b_slow, result.fast_final, t1);
      result.timeline.push_back({t1, true, best_hypothesis(b_slow).tokens});
      if (config.shared_search_space) {
        b_fast = merge_beams(b_fast, b_slow, config.fast_beam);
      } else {
        b_fast = reroot(b_slow, *fast_space, config.fast_beam);
      }
      slow_begin = t1;
    }
    t0 = t1;
  }

  result.final = best_hypothesis(b_slow);
  result.counters.predictor_evals = fast_space->predictor_evals();
  if (!config.shared_search_space) {
    result.counters.predictor_evals += slow_space->predictor_evals();
  }
  return result;
}

std::string tokens_to_text(const DecoderModel& model, std::span<const int> tokens) {
  std::string raw;
  for (int t : tokens) raw += model.token_text(t);
  // "\xe2\x96\x81" is the word-piece space marker.
  std::string out;
  std::size_t i = 0;
  while (i < raw.size()) {
    if (raw.compare(i, 3, "\xe2\x96\x81") == 0) {
      if (!out.empty()) out += ' ';
      i += 3;
    } else {
      out += raw[i];
      ++i;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

}  // namespace fastslow
