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

#include "fastslow/transducer.h"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "fastslow/kernels.h"
#include "fastslow/numerics.h"

namespace fastslow {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

class WeightRng {
 public:
  explicit WeightRng(std::uint64_t seed) : gen_(seed) {}
  float uniform(float lo, float hi) {
    const double u = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    return static_cast<float>(lo + u * (static_cast<double>(hi) - lo));
  }
  void fill(Matrix& m, float s) {
    for (float& v : m.data) v = uniform(-s, s);
  }
  void fill(std::vector<float>& v, float s) {
    for (float& x : v) x = uniform(-s, s);
  }

 private:
  std::mt19937_64 gen_;
};

inline float sigmoid(float x) { return 1.0f / (1.0f + std::exp(-x)); }

// xw' + uh' + b for one GRU gate.
std::vector<float> gate(const Matrix& wx, const Matrix& uh,
                        std::span<const float> x, std::span<const float> h,
                        std::span<const float> b) {
  std::vector<float> out(b.begin(), b.end());
  kernels::matmul_acc(1, x.size(), out.size(), x.data(), wx.data.data(), out.data());
  kernels::matmul_acc(1, h.size(), out.size(), h.data(), uh.data.data(), out.data());
  return out;
}

}  // namespace

void Vocabulary::validate() const {
  if (tokens.empty()) throw std::invalid_argument("Vocabulary.tokens: must be nonempty");
  if (blank_id < 0 || blank_id >= size()) {
    throw std::invalid_argument("Vocabulary.blank_id: out of range");
  }
}

void PredictorConfig::validate() const {
  if (num_layers < 1) throw std::invalid_argument("PredictorConfig.num_layers: must be >= 1");
  if (embed_dim < 1) throw std::invalid_argument("PredictorConfig.embed_dim: must be >= 1");
  if (hidden_dim < 1) throw std::invalid_argument("PredictorConfig.hidden_dim: must be >= 1");
}

std::size_t PredictorWeights::param_count() const {
  std::size_t n = embed.data.size();
  for (const auto& l : layers) {
    n += l.wz.data.size() + l.uz.data.size() + l.bz.size() + l.wr.data.size() +
         l.ur.data.size() + l.br.size() + l.wh.data.size() + l.uh.data.size() +
         l.bh.size();
  }
  return n;
}

PredictorWeights build_predictor_weights(const PredictorConfig& cfg, int vocab_size,
                                         std::uint64_t seed) {
  cfg.validate();
  if (vocab_size < 1) throw std::invalid_argument("predictor: vocab_size must be >= 1");
  WeightRng rng(seed);
  PredictorWeights w;
  w.config = cfg;
  w.vocab_size = vocab_size;
  w.embed = Matrix(vocab_size + 1, cfg.embed_dim);
  rng.fill(w.embed, 0.5f);
  w.layers.resize(cfg.num_layers);
  for (int i = 0; i < cfg.num_layers; ++i) {
    const int in_dim = i == 0 ? cfg.embed_dim : cfg.hidden_dim;
    const float si = 1.0f / std::sqrt(static_cast<float>(in_dim));
    const float sh = 1.0f / std::sqrt(static_cast<float>(cfg.hidden_dim));
    auto& l = w.layers[i];
    l.wz = Matrix(in_dim, cfg.hidden_dim);
    l.uz = Matrix(cfg.hidden_dim, cfg.hidden_dim);
    l.wr = Matrix(in_dim, cfg.hidden_dim);
    l.ur = Matrix(cfg.hidden_dim, cfg.hidden_dim);
    l.wh = Matrix(in_dim, cfg.hidden_dim);
    l.uh = Matrix(cfg.hidden_dim, cfg.hidden_dim);
    rng.fill(l.wz, si);
    rng.fill(l.uz, sh);
    rng.fill(l.wr, si);
    rng.fill(l.ur, sh);
    rng.fill(l.wh, si);
    rng.fill(l.uh, sh);
    l.bz.assign(cfg.hidden_dim, 0.0f);
    l.br.assign(cfg.hidden_dim, 0.0f);
    l.bh.assign(cfg.hidden_dim, 0.0f);
  }
  return w;
}

PredictorState predictor_initial_state(const PredictorWeights& w) {
  PredictorState s;
  s.hidden.assign(w.config.num_layers,
                  std::vector<float>(w.config.hidden_dim, 0.0f));
  return s;
}

std::pair<std::vector<float>, PredictorState> predictor_step(
    const PredictorWeights& w, int token, const PredictorState& state) {
  if (token != kSosToken && (token < 0 || token >= w.vocab_size)) {
    throw std::invalid_argument("predictor_step: invalid token id " + std::to_string(token));
  }
  if (state.hidden.size() != w.layers.size()) {
    throw std::invalid_argument("predictor_step: state layer count mismatch");
  }
  const int row = token == kSosToken ? w.vocab_size : token;
  std::vector<float> x(w.embed.row(row), w.embed.row(row) + w.config.embed_dim);

  PredictorState next = state;
  next.tokens_consumed = state.tokens_consumed + 1;
  for (std::size_t i = 0; i < w.layers.size(); ++i) {
    const auto& l = w.layers[i];
    const std::vector<float>& h = state.hidden[i];
    std::vector<float> z = gate(l.wz, l.uz, x, h, l.bz);
    std::vector<float> r = gate(l.wr, l.ur, x, h, l.br);
    for (float& v : z) v = sigmoid(v);
    for (float& v : r) v = sigmoid(v);
    std::vector<float> rh(h.size());
    for (std::size_t j = 0; j < h.size(); ++j) rh[j] = r[j] * h[j];
    std::vector<float> c = gate(l.wh, l.uh, x, rh, l.bh);
    for (float& v : c) v = std::tanh(v);
    std::vector<float>& hn = next.hidden[i];
    for (std::size_t j = 0; j < h.size(); ++j) {
      hn[j] = (1.0f - z[j]) * h[j] + z[j] * c[j];
    }
    x = hn;
  }
  return {std::move(x), std::move(next)};
}

void JoinerConfig::validate() const {
  if (enc_dim < 1) throw std::invalid_argument("JoinerConfig.enc_dim: must be >= 1");
  if (pred_dim < 1) throw std::invalid_argument("JoinerConfig.pred_dim: must be >= 1");
  if (joint_dim < 1) throw std::invalid_argument("JoinerConfig.joint_dim: must be >= 1");
  if (num_classes < 2) throw std::invalid_argument("JoinerConfig.num_classes: must be >= 2");
}

std::size_t JoinerWeights::param_count() const {
  return enc_w.data.size() + enc_b.size() + pred_w.data.size() + pred_b.size() +
         out_w.data.size() + out_b.size();
}

JoinerWeights build_joiner_weights(const JoinerConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  WeightRng rng(seed);
  JoinerWeights w;
  w.config = cfg;
  w.enc_w = Matrix(cfg.enc_dim, cfg.joint_dim);
  w.pred_w = Matrix(cfg.pred_dim, cfg.joint_dim);
  w.out_w = Matrix(cfg.joint_dim, cfg.num_classes);
  rng.fill(w.enc_w, 1.0f / std::sqrt(static_cast<float>(cfg.enc_dim)));
  rng.fill(w.pred_w, 1.0f / std::sqrt(static_cast<float>(cfg.pred_dim)));
  rng.fill(w.out_w, 1.0f / std::sqrt(static_cast<float>(cfg.joint_dim)));
  w.enc_b.assign(cfg.joint_dim, 0.0f);
  w.pred_b.assign(cfg.joint_dim, 0.0f);
  w.out_b.assign(cfg.num_classes, 0.0f);
  return w;
}

std::vector<float> joiner_log_probs(const JoinerWeights& w, std::span<const float> enc,
                                    std::span<const float> pred) {
  const JoinerConfig& cfg = w.config;
  if (enc.size() != static_cast<std::size_t>(cfg.enc_dim) ||
      pred.size() != static_cast<std::size_t>(cfg.pred_dim)) {
    throw std::invalid_argument("joiner: input dimension mismatch");
  }
  std::vector<float> joint(w.enc_b.begin(), w.enc_b.end());
  kernels::matmul_acc(1, enc.size(), joint.size(), enc.data(), w.enc_w.data.data(),
                      joint.data());
  kernels::matmul_acc(1, pred.size(), joint.size(), pred.data(), w.pred_w.data.data(),
                      joint.data());
  for (std::size_t i = 0; i < joint.size(); ++i) {
    joint[i] = std::tanh(joint[i] + w.pred_b[i]);
  }
  std::vector<float> logits(w.out_b.begin(), w.out_b.end());
  kernels::matmul_acc(1, joint.size(), logits.size(), joint.data(), w.out_w.data.data(),
                      logits.data());
  return num::log_softmax(std::span<const float>(logits));
}

void LossLattice::validate() const {
  if (num_frames < 1) throw std::invalid_argument("LossLattice: num_frames must be >= 1");
  if (num_classes < 1) throw std::invalid_argument("LossLattice: num_classes must be >= 1");
  if (blank_id < 0 || blank_id >= num_classes) {
    throw std::invalid_argument("LossLattice: blank_id out of range");
  }
  const std::size_t expect = static_cast<std::size_t>(num_frames) *
                             (target.size() + 1) * static_cast<std::size_t>(num_classes);
  if (log_probs.size() != expect) {
    throw std::invalid_argument("LossLattice: log_probs size mismatch");
  }
  for (int tok : target) {
    if (tok < 0 || tok >= num_classes || tok == blank_id) {
      throw std::invalid_argument("LossLattice: invalid target token");
    }
  }
  for (double v : log_probs) {
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
      throw std::invalid_argument("LossLattice: NaN log-probability");
    }
  }
}

namespace {

// Forward-backward over the (T, U+1) lattice. `label_lp(t, u)` supplies the
// log-probability of emitting target[u] at (t, u); restrictions plug in
// here. Returns loss and gradient.
template <typename LabelFn>
LossResult lattice_loss(const LossLattice& lat, LabelFn label_lp) {
  const int T = lat.num_frames;
  const int U = lat.target_len();
  const auto idx = [U](int t, int u) { return static_cast<std::size_t>(t) * (U + 1) + u; };

  std::vector<double> alpha(static_cast<std::size_t>(T) * (U + 1), kNegInf);
  alpha[idx(0, 0)] = 0.0;
  for (int t = 0; t < T; ++t) {
    for (int u = 0; u <= U; ++u) {
      double a = alpha[idx(t, u)];
      if (t > 0) {
        // blank move from (t-1, u)
        a = log_add(a, alpha[idx(t - 1, u)] + lat.at(t - 1, u, lat.blank_id));
      }
      if (u > 0) {
        a = log_add(a, alpha[idx(t, u - 1)] + label_lp(t, u - 1));
      }
      alpha[idx(t, u)] = a;
    }
  }
  const double log_p = alpha[idx(T - 1, U)] + lat.at(T - 1, U, lat.blank_id);

  std::vector<double> beta(static_cast<std::size_t>(T) * (U + 1), kNegInf);
  beta[idx(T - 1, U)] = lat.at(T - 1, U, lat.blank_id);
  for (int t = T - 1; t >= 0; --t) {
    for (int u = U; u >= 0; --u) {
      if (t == T - 1 && u == U) continue;
      double b = kNegInf;
      if (t + 1 < T) b = log_add(b, lat.at(t, u, lat.blank_id) + beta[idx(t + 1, u)]);
      if (u < U) b = log_add(b, label_lp(t, u) + beta[idx(t, u + 1)]);
      beta[idx(t, u)] = b;
    }
  }

  LossResult result;
  result.loss = -log_p;
  result.grad.assign(lat.log_probs.size(), 0.0);
  if (log_p == kNegInf) return result;  // caller decides how to report

  for (int t = 0; t < T; ++t) {
    for (int u = 0; u <= U; ++u) {
      const double a = alpha[idx(t, u)];
      if (a == kNegInf) continue;
      // blank transition (t,u) -> (t+1,u), or the terminal exit
      double blank_next = kNegInf;
      if (t + 1 < T) {
        blank_next = beta[idx(t + 1, u)];
      } else if (u == U) {
        blank_next = 0.0;
      }
      if (blank_next != kNegInf) {
        const double occ = std::exp(a + lat.at(t, u, lat.blank_id) + blank_next - log_p);
        result.grad[lat.index(t, u, lat.blank_id)] -= occ;
      }
      if (u < U) {
        const double lp = label_lp(t, u);
        if (lp != kNegInf && beta[idx(t, u + 1)] != kNegInf) {
          const double occ = std::exp(a + lp + beta[idx(t, u + 1)] - log_p);
          result.grad[lat.index(t, u, lat.target[u])] -= occ;
        }
      }
    }
  }
  return result;
}

}  // namespace

LossResult transducer_loss(const LossLattice& lattice) {
  lattice.validate();
  return lattice_loss(lattice,
                      [&](int t, int u) { return lattice.at(t, u, lattice.target[u]); });
}

double combined_loss(double loss_fast, double loss_slow, double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0)) {
    throw std::invalid_argument("combined_loss: lambda must satisfy 0 < lambda < 1");
  }
  return loss_slow + lambda * loss_fast;
}

void PathRestriction::validate(int target_len) const {
  if (static_cast<int>(token_alignment.size()) != target_len) {
    throw std::invalid_argument("PathRestriction: alignment length must equal target length");
  }
  for (std::size_t i = 1; i < token_alignment.size(); ++i) {
    if (token_alignment[i] < token_alignment[i - 1]) {
      throw std::invalid_argument("PathRestriction: alignment must be nondecreasing");
    }
  }
  if (left_slack < 0 || right_slack < 0) {
    throw std::invalid_argument("PathRestriction: slacks must be >= 0");
  }
}

LossResult restricted_loss(const LossLattice& lattice, const PathRestriction& restriction) {
  lattice.validate();
  restriction.validate(lattice.target_len());
  auto label_lp = [&](int t, int u) {
    const long ref = restriction.token_alignment[u];
    if (t < ref - restriction.left_slack || t > ref + restriction.right_slack) {
      return kNegInf;
    }
    return lattice.at(t, u, lattice.target[u]);
  };
  LossResult result = lattice_loss(lattice, label_lp);
  if (std::isinf(result.loss)) throw std::runtime_error("infeasible restriction");
  return result;
}

std::vector<double> label_occupancies(const LossLattice& lattice) {
  LossResult std_loss = transducer_loss(lattice);
  const int U = lattice.target_len();
  std::vector<double> occ(static_cast<std::size_t>(lattice.num_frames) * (U + 1), 0.0);
  for (int t = 0; t < lattice.num_frames; ++t) {
    for (int u = 0; u < U; ++u) {
      occ[static_cast<std::size_t>(t) * (U + 1) + u] =
          -std_loss.grad[lattice.index(t, u, lattice.target[u])];
    }
  }
  return occ;
}

LossResult fastemit_loss(const LossLattice& lattice, double fe_lambda) {
  if (fe_lambda < 0.0) {
    throw std::invalid_argument("fastemit_loss: fe_lambda must be >= 0");
  }
  LossResult result = transducer_loss(lattice);
  const int U = lattice.target_len();
  double reg = 0.0;
  for (int t = 0; t < lattice.num_frames; ++t) {
    for (int u = 0; u < U; ++u) {
      const std::size_t gi = lattice.index(t, u, lattice.target[u]);
      const double occ = -result.grad[gi];
      // occ == 0 with a -inf log-prob would make 0 * inf; skip dead entries.
      if (occ != 0.0) reg -= occ * lattice.at(t, u, lattice.target[u]);
      result.grad[gi] *= 1.0 + fe_lambda;
    }
  }
  result.loss += fe_lambda * reg;
  return result;
}

}  // namespace fastslow
