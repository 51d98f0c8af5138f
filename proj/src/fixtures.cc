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

#include "fastslow/fixtures.h"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <stdexcept>

#include "json.hpp"

#include "fastslow/harness.h"
#include "fastslow/numerics.h"
#include "fastslow/oracles.h"

namespace fastslow {
namespace {

using nlohmann::json;

json load_json(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(std::string(what) + ": cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string(what) + ": '" + path + "' is not valid JSON: " +
                             e.what());
  }
}

void write_json(const std::string& path, const json& doc, const char* what) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(std::string(what) + ": cannot open '" + path + "'");
  out << doc.dump();
  out << "\n";
  if (!out) throw std::runtime_error(std::string(what) + ": write failed for '" + path + "'");
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + u * (hi - lo);
}

std::vector<double> random_log_dist(std::mt19937_64& rng, int n, double spread) {
  std::vector<double> logits(n);
  for (double& v : logits) v = uniform(rng, -spread, spread);
  return num::log_softmax(std::span<const double>(logits));
}

Vocabulary piece_vocab(int num_pieces) {
  Vocabulary v;
  v.tokens.push_back("<b>");
  for (int i = 0; i < num_pieces; ++i) {
    v.tokens.push_back(std::string("\xe2\x96\x81") + static_cast<char>('a' + i % 26));
  }
  v.blank_id = 0;
  return v;
}

TableModel::Table table_from_dists(int num_frames, int max_prefix, int classes,
                                   const std::function<std::vector<double>(int, int)>& dist) {
  TableModel::Table t;
  t.num_frames = num_frames;
  t.max_prefix = max_prefix;
  t.log_probs.reserve(static_cast<std::size_t>(num_frames) * (max_prefix + 1) * classes);
  for (int f = 0; f < num_frames; ++f) {
    for (int u = 0; u <= max_prefix; ++u) {
      for (double v : dist(f, u)) t.log_probs.push_back(static_cast<float>(v));
    }
  }
  return t;
}

}  // namespace

LatticeFixture load_lattice_fixture(const std::string& path) {
  const json doc = load_json(path, "lattice fixture");
  LatticeFixture fx;
  LossLattice& lat = fx.lattice;
  lat.num_frames = doc.at("T").get<int>();
  const int u = doc.at("U").get<int>();
  const int v = doc.at("V").get<int>();
  lat.num_classes = v + 1;
  lat.blank_id = 0;
  lat.target = doc.at("target").get<std::vector<int>>();
  if (static_cast<int>(lat.target.size()) != u) {
    throw std::runtime_error("lattice fixture '" + path + "': target length != U");
  }
  lat.log_probs = doc.at("log_probs").get<std::vector<double>>();
  lat.validate();
  if (doc.contains("oracle_loss")) fx.oracle_loss = doc.at("oracle_loss").get<double>();
  if (doc.contains("alignment_frames")) {
    fx.alignment_frames = doc.at("alignment_frames").get<std::vector<long>>();
  }
  return fx;
}

void save_lattice_fixture(const std::string& path, const LatticeFixture& fixture) {
  const LossLattice& lat = fixture.lattice;
  json doc = {{"T", lat.num_frames},
              {"U", lat.target_len()},
              {"V", lat.num_classes - 1},
              {"target", lat.target},
              {"log_probs", lat.log_probs}};
  if (fixture.oracle_loss.has_value()) doc["oracle_loss"] = *fixture.oracle_loss;
  if (fixture.alignment_frames.has_value()) {
    doc["alignment_frames"] = *fixture.alignment_frames;
  }
  write_json(path, doc, "lattice fixture");
}

TableFixture load_table_fixture(const std::string& path) {
  const json doc = load_json(path, "table fixture");
  TableFixture fx;
  fx.vocab.tokens = doc.at("vocab").get<std::vector<std::string>>();
  fx.vocab.blank_id = doc.at("blank_id").get<int>();
  fx.vocab.validate();
  for (auto [name, table] : {std::pair{"fast_log_probs", &fx.fast},
                             std::pair{"slow_log_probs", &fx.slow}}) {
    table->num_frames = doc.at("T").get<int>();
    table->max_prefix = doc.at("max_prefix").get<int>();
    table->log_probs = doc.at(name).get<std::vector<float>>();
  }
  return fx;
}

void save_table_fixture(const std::string& path, const TableFixture& fixture) {
  json doc = {{"T", fixture.fast.num_frames},
              {"max_prefix", fixture.fast.max_prefix},
              {"vocab", fixture.vocab.tokens},
              {"blank_id", fixture.vocab.blank_id},
              {"fast_log_probs", fixture.fast.log_probs},
              {"slow_log_probs", fixture.slow.log_probs}};
  write_json(path, doc, "table fixture");
}

LossLattice random_lattice(std::mt19937_64& rng, int max_t, int max_u, int max_v) {
  LossLattice lat;
  lat.num_frames = 1 + static_cast<int>(rng() % max_t);
  const int u = static_cast<int>(rng() % (max_u + 1));
  const int v = 1 + static_cast<int>(rng() % max_v);
  lat.num_classes = v + 1;
  lat.blank_id = 0;
  lat.target.resize(u);
  for (int& tok : lat.target) tok = 1 + static_cast<int>(rng() % v);
  lat.log_probs.reserve(static_cast<std::size_t>(lat.num_frames) * (u + 1) * lat.num_classes);
  for (int t = 0; t < lat.num_frames; ++t) {
    for (int uu = 0; uu <= u; ++uu) {
      for (double x : random_log_dist(rng, lat.num_classes, 2.0)) {
        lat.log_probs.push_back(x);
      }
    }
  }
  return lat;
}

TableFixture random_table_fixture(std::mt19937_64& rng, int num_frames, int max_prefix,
                                  int num_pieces, bool identical) {
  TableFixture fx;
  fx.vocab = piece_vocab(num_pieces);
  const int classes = fx.vocab.size();
  auto gen = [&](int, int) { return random_log_dist(rng, classes, 2.0); };
  fx.fast = table_from_dists(num_frames, max_prefix, classes, gen);
  fx.slow = identical ? fx.fast : table_from_dists(num_frames, max_prefix, classes, gen);
  return fx;
}

TableFixture correction_fixture(int num_frames, const std::vector<int>& fast_tokens,
                                const std::vector<long>& emit_frames, int flip_position,
                                int flip_token, int num_pieces) {
  if (fast_tokens.size() != emit_frames.size()) {
    throw std::invalid_argument("correction_fixture: tokens/frames length mismatch");
  }
  if (flip_position < 0 || flip_position >= static_cast<int>(fast_tokens.size())) {
    throw std::invalid_argument("correction_fixture: flip_position out of range");
  }
  TableFixture fx;
  fx.vocab = piece_vocab(num_pieces);
  const int classes = fx.vocab.size();
  std::vector<int> slow_tokens = fast_tokens;
  slow_tokens[flip_position] = flip_token;

  // Near-delta distributions: logit 20 on the scripted emission, 0
  // elsewhere, pushed through log-softmax so every slice normalizes.
  auto scripted = [&](const std::vector<int>& tokens) {
    return [&, tokens](int frame, int prefix) {
      std::vector<double> logits(classes, 0.0);
      int emit = fx.vocab.blank_id;
      if (prefix < static_cast<int>(tokens.size()) && emit_frames[prefix] == frame) {
        emit = tokens[prefix];
      }
      logits[emit] = 20.0;
      return num::log_softmax(std::span<const double>(logits));
    };
  };
  const int max_prefix = static_cast<int>(fast_tokens.size());
  fx.fast = table_from_dists(num_frames, max_prefix, classes, scripted(fast_tokens));
  fx.slow = table_from_dists(num_frames, max_prefix, classes, scripted(slow_tokens));
  return fx;
}

void FixtureGenConfig::validate() const {
  if (out_dir.empty()) throw std::invalid_argument("gen-fixtures: out_dir must be set");
  if (lattice_count < 0 || table_count < 0) {
    throw std::invalid_argument("gen-fixtures: counts must be >= 0");
  }
  if (max_t < 1 || max_t > 4 || max_u < 0 || max_u > 3 || max_v < 1 || max_v > 3) {
    throw std::invalid_argument(
        "gen-fixtures: enumeration fixtures need 1 <= T <= 4, 0 <= U <= 3, 1 <= V <= 3");
  }
  if (table_frames < 1 || table_pieces < 1 || table_pieces > 26) {
    throw std::invalid_argument("gen-fixtures: table sizes out of range");
  }
}

void generate_fixtures(const FixtureGenConfig& cfg) {
  cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  std::mt19937_64 rng(cfg.seed);

  // Loss lattices with enumeration-oracle answers baked in.
  {
    std::ofstream manifest(fs::path(cfg.out_dir) / "lattices.jsonl", std::ios::trunc);
    for (int i = 0; i < cfg.lattice_count; ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "lattice_%03d.json", i);
      LatticeFixture fx;
      fx.lattice = random_lattice(rng, cfg.max_t, cfg.max_u, cfg.max_v);
      fx.oracle_loss = oracle::enumeration_loss(fx.lattice);
      std::vector<long> align(fx.lattice.target_len());
      for (long& a : align) a = static_cast<long>(rng() % fx.lattice.num_frames);
      std::sort(align.begin(), align.end());
      fx.alignment_frames = align;
      const std::string path = (fs::path(cfg.out_dir) / name).string();
      save_lattice_fixture(path, fx);
      manifest << json{{"id", std::string(name, std::strlen(name) - 5)}, {"path", path}}
               << "\n";
    }
  }

  // Decode corpus: identical fast/slow tables, references from the
  // exhaustive search oracle, synthetic word end times.
  std::vector<ManifestRecord> decode_manifest;
  for (int i = 0; i < cfg.table_count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "table_%03d.json", i);
    TableFixture fx = random_table_fixture(rng, cfg.table_frames, /*max_prefix=*/4,
                                           cfg.table_pieces, /*identical=*/true);
    const std::string path = (std::filesystem::path(cfg.out_dir) / name).string();
    save_table_fixture(path, fx);

    TableModel model(fx.vocab, fx.fast, fx.slow);
    const auto best = oracle::exhaustive_best_sequence(model, /*slow_table=*/true,
                                                       cfg.table_frames, /*max_len=*/4,
                                                       /*max_symbols_per_frame=*/10);
    ManifestRecord rec;
    rec.id = std::string(name, std::strlen(name) - 5);
    rec.features_path = path;
    rec.reference = tokens_to_text(model, best.tokens);
    const auto words = split_words(rec.reference);
    std::vector<double> ends;
    for (std::size_t w = 0; w < words.size(); ++w) {
      ends.push_back((w + 1) * cfg.table_frames * kFrameMs / (words.size() + 1));
    }
    rec.alignment_ms = ends;
    decode_manifest.push_back(std::move(rec));
  }
  save_manifest((fs::path(cfg.out_dir) / "manifest.jsonl").string(), decode_manifest);

  // One-token-flip fixture. The emissions sit in the final slow window so
  // the flip is still visible in the last pre-merge fast hypothesis.
  {
    TableFixture fx = correction_fixture(/*num_frames=*/16, /*fast_tokens=*/{1, 2},
                                         /*emit_frames=*/{9, 13}, /*flip_position=*/0,
                                         /*flip_token=*/3, /*num_pieces=*/3);
    const std::string path = (fs::path(cfg.out_dir) / "correction.json").string();
    save_table_fixture(path, fx);
    TableModel model(fx.vocab, fx.fast, fx.slow);
    ManifestRecord rec;
    rec.id = "correction";
    rec.features_path = path;
    const std::vector<int> corrected = {3, 2};
    rec.reference = tokens_to_text(model, corrected);
    rec.alignment_ms = std::vector<double>{9 * kFrameMs, 13 * kFrameMs};
    save_manifest((fs::path(cfg.out_dir) / "correction_manifest.jsonl").string(), {rec});
  }
}

}  // namespace fastslow
