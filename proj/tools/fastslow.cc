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

// Batch front-end: decode utterances, evaluate manifests, verify losses
// against their oracles, generate fixtures, and initialize random models.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "fastslow/checkpoint.h"
#include "fastslow/fixtures.h"
#include "fastslow/harness.h"
#include "fastslow/oracles.h"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUtteranceFailed = 1;
constexpr int kExitBadConfig = 2;

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

int cmd_decode(const std::string& config_path, const std::string& manifest_path,
               const std::string& id, const std::string& out_path) {
  const fastslow::RunConfig cfg = fastslow::load_run_config(config_path);
  const auto manifest = fastslow::load_manifest(manifest_path);
  if (manifest.empty()) throw std::runtime_error("manifest is empty");
  const fastslow::ManifestRecord* record = &manifest.front();
  if (!id.empty()) {
    record = nullptr;
    for (const auto& r : manifest) {
      if (r.id == id) record = &r;
    }
    if (record == nullptr) throw std::runtime_error("id '" + id + "' not in manifest");
  }
  const fastslow::DecodeRecord rec = fastslow::decode_utterance(cfg, *record);
  const std::string text = fastslow::decode_record_to_json(rec).dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
  } else {
    write_text(out_path, text);
  }
  return kExitOk;
}

int cmd_eval(const std::string& config_path, const std::string& manifest_path,
             const std::string& out_path, const std::string& records_path, int threads,
             bool no_timing) {
  const fastslow::RunConfig cfg = fastslow::load_run_config(config_path);
  const auto manifest = fastslow::load_manifest(manifest_path);
  const fastslow::RunOutput out = fastslow::run_manifest(cfg, manifest, threads);

  const std::string report =
      fastslow::report_to_json(out.report, /*include_timing=*/!no_timing).dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << report;
  } else {
    write_text(out_path, report);
  }
  if (!records_path.empty()) {
    std::string lines;
    for (const auto& rec : out.records) {
      lines += fastslow::decode_record_to_json(rec).dump() + "\n";
    }
    write_text(records_path, lines);
  }
  std::cerr << "eval: " << out.report.utterances << " utterances, "
            << out.report.failed_utterances << " failed, wer=" << out.report.wer
            << " cr=" << out.report.cr << "\n";
  return out.report.failed_utterances > 0 ? kExitUtteranceFailed : kExitOk;
}

int cmd_loss_check(const std::string& config_path, const std::string& manifest_path,
                   const std::string& out_path) {
  const fastslow::RunConfig cfg =
      config_path.empty() ? fastslow::RunConfig{} : fastslow::load_run_config(config_path);

  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot open fixtures manifest '" + manifest_path + "'");

  json results = json::array();
  int failures = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json j = json::parse(line);
    const std::string id = j.at("id").get<std::string>();
    const std::string path = j.at("path").get<std::string>();
    const fastslow::LatticeFixture fx = fastslow::load_lattice_fixture(path);

    json row = {{"id", id}};
    bool ok = true;

    const fastslow::LossResult loss = fastslow::transducer_loss(fx.lattice);
    const double oracle = fx.oracle_loss.has_value()
                              ? *fx.oracle_loss
                              : fastslow::oracle::enumeration_loss(fx.lattice);
    const double loss_diff = std::abs(loss.loss - oracle);
    row["loss"] = loss.loss;
    row["oracle_loss"] = oracle;
    row["loss_abs_diff"] = loss_diff;
    ok = ok && loss_diff <= 1e-8;

    const double grad_err = fastslow::oracle::max_grad_rel_error(
        fx.lattice, [](const fastslow::LossLattice& l) { return fastslow::transducer_loss(l).loss; },
        loss.grad);
    row["grad_max_rel_err"] = grad_err;
    ok = ok && grad_err <= 1e-4;

    if (fx.alignment_frames.has_value()) {
      fastslow::PathRestriction restriction;
      restriction.token_alignment = *fx.alignment_frames;
      restriction.left_slack = cfg.loss.left_slack_frames;
      restriction.right_slack = cfg.loss.right_slack_frames;
      try {
        const fastslow::LossResult res = fastslow::restricted_loss(fx.lattice, restriction);
        const double r_oracle = fastslow::oracle::enumeration_loss(fx.lattice, &restriction);
        row["restricted_abs_diff"] = std::abs(res.loss - r_oracle);
        ok = ok && std::abs(res.loss - r_oracle) <= 1e-8;
      } catch (const std::runtime_error&) {
        row["restricted_abs_diff"] = "infeasible";
      }
    }

    const fastslow::LossResult fe = fastslow::fastemit_loss(fx.lattice, cfg.loss.fe_lambda);
    const auto occ = fastslow::label_occupancies(fx.lattice);
    const double fe_lambda = cfg.loss.fe_lambda;
    auto fe_objective = [&occ, fe_lambda](const fastslow::LossLattice& l) {
      double obj = fastslow::transducer_loss(l).loss;
      for (int t = 0; t < l.num_frames; ++t) {
        for (int u = 0; u < l.target_len(); ++u) {
          const double c = occ[static_cast<std::size_t>(t) * (l.target_len() + 1) + u];
          if (c != 0.0) obj -= fe_lambda * c * l.at(t, u, l.target[u]);
        }
      }
      return obj;
    };
    const double fe_err = fastslow::oracle::max_grad_rel_error(fx.lattice, fe_objective, fe.grad);
    row["fastemit_grad_max_rel_err"] = fe_err;
    ok = ok && fe_err <= 1e-4;

    row["ok"] = ok;
    if (!ok) ++failures;
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << id << "\n";
    results.push_back(std::move(row));
  }

  const json report = {{"fixtures", results}, {"failures", failures}};
  if (!out_path.empty()) write_text(out_path, report.dump(2) + "\n");
  std::cout << "loss-check: " << results.size() << " fixtures, " << failures
            << " failures\n";
  return failures == 0 ? kExitOk : kExitUtteranceFailed;
}

int cmd_gen_fixtures(std::uint64_t seed, const std::string& out_dir, int lattices,
                     int tables, int max_t, int max_u, int max_v) {
  fastslow::FixtureGenConfig cfg;
  cfg.seed = seed;
  cfg.out_dir = out_dir;
  cfg.lattice_count = lattices;
  cfg.table_count = tables;
  cfg.max_t = max_t;
  cfg.max_u = max_u;
  cfg.max_v = max_v;
  fastslow::generate_fixtures(cfg);
  std::cout << "gen-fixtures: wrote " << lattices << " lattices and " << tables
            << " table fixtures to " << out_dir << "\n";
  return kExitOk;
}

int cmd_init_model(const std::string& config_path, std::optional<std::uint64_t> seed,
                   const std::string& out_path) {
  const fastslow::RunConfig cfg = fastslow::load_run_config(config_path);
  if (cfg.vocab_tokens.empty()) {
    throw std::invalid_argument("init.vocab.tokens: required for init-model");
  }
  fastslow::Vocabulary vocab;
  vocab.tokens = cfg.vocab_tokens;
  vocab.blank_id = cfg.blank_id;
  const fastslow::Checkpoint ckpt = fastslow::init_checkpoint(
      cfg.cascade, cfg.predictor, cfg.joiner, vocab, seed.value_or(cfg.seed));
  fastslow::save_checkpoint(out_path, ckpt);
  std::cout << "init-model: wrote " << out_path << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming fast-slow transducer decoding toolkit"};
  app.require_subcommand(1);

  std::string config_path, manifest_path, out_path, records_path, id, fixtures_dir;
  int threads = 1;
  bool no_timing = false;
  std::uint64_t seed = 1;
  bool seed_set = false;
  int lattices = 32, tables = 8, max_t = 4, max_u = 3, max_v = 3;

  auto* decode = app.add_subcommand("decode", "decode one utterance to a JSON record");
  decode->add_option("--config", config_path)->required();
  decode->add_option("--manifest", manifest_path)->required();
  decode->add_option("--id", id, "utterance id (default: first record)");
  decode->add_option("--out", out_path, "output path (default: stdout)");

  auto* eval = app.add_subcommand("eval", "decode a manifest and report metrics");
  eval->add_option("--config", config_path)->required();
  eval->add_option("--manifest", manifest_path)->required();
  eval->add_option("--out", out_path, "metrics report path (default: stdout)");
  eval->add_option("--records", records_path, "per-utterance decode records (jsonl)");
  eval->add_option("--threads", threads, "decode worker count");
  eval->add_flag("--no-timing", no_timing,
                 "omit wall-clock fields so reports are byte-reproducible");

  auto* loss_check = app.add_subcommand("loss-check", "verify losses against oracles");
  loss_check->add_option("--config", config_path);
  loss_check->add_option("--manifest", manifest_path, "lattice fixtures manifest (jsonl)")
      ->required();
  loss_check->add_option("--out", out_path, "verification report path");

  auto* gen = app.add_subcommand("gen-fixtures", "write oracle-backed test fixtures");
  gen->add_option("--seed", seed);
  gen->add_option("--out", fixtures_dir)->required();
  gen->add_option("--lattices", lattices, "lattice fixture count");
  gen->add_option("--tables", tables, "table fixture count");
  gen->add_option("--max-t", max_t);
  gen->add_option("--max-u", max_u);
  gen->add_option("--max-v", max_v);

  auto* init = app.add_subcommand("init-model", "random checkpoint from config");
  init->add_option("--config", config_path)->required();
  init->add_option("--seed", seed)->each([&](const std::string&) { seed_set = true; });
  init->add_option("--out", out_path)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (decode->parsed()) return cmd_decode(config_path, manifest_path, id, out_path);
    if (eval->parsed()) {
      return cmd_eval(config_path, manifest_path, out_path, records_path, threads, no_timing);
    }
    if (loss_check->parsed()) return cmd_loss_check(config_path, manifest_path, out_path);
    if (gen->parsed()) {
      return cmd_gen_fixtures(seed, fixtures_dir, lattices, tables, max_t, max_u, max_v);
    }
    if (init->parsed()) {
      return cmd_init_model(config_path,
                            seed_set ? std::optional<std::uint64_t>(seed) : std::nullopt,
                            out_path);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitBadConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUtteranceFailed;
  }
  return kExitOk;
}
