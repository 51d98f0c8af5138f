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

#include "fastslow/harness.h"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <stdexcept>
#include <thread>

#include "fastslow/checkpoint.h"
#include "fastslow/features.h"
#include "fastslow/fixtures.h"

namespace fastslow {
namespace {

using nlohmann::json;

EncoderConfig encoder_cfg_from_json(const json& j) {
  EncoderConfig c;
  c.num_layers = j.value("num_layers", c.num_layers);
  c.input_dim = j.value("input_dim", c.input_dim);
  c.model_dim = j.value("model_dim", c.model_dim);
  c.num_heads = j.value("num_heads", c.num_heads);
  c.ffn_dim = j.value("ffn_dim", c.ffn_dim);
  c.segment_size = j.value("segment_size", c.segment_size);
  c.right_context = j.value("right_context", c.right_context);
  c.max_history = j.value("max_history", c.max_history);
  if (j.contains("shared_layer_range")) {
    const auto& r = j.at("shared_layer_range");
    c.shared_layer_range = std::make_pair(r.at(0).get<int>(), r.at(1).get<int>());
  }
  return c;
}

}  // namespace

void LossConfig::validate() const {
  if (!(lambda > 0.0 && lambda < 1.0)) {
    throw std::invalid_argument("loss.lambda: must satisfy 0 < lambda < 1, got " +
                                std::to_string(lambda));
  }
  if (fe_lambda < 0.0) {
    throw std::invalid_argument("loss.fe_lambda: must be >= 0, got " +
                                std::to_string(fe_lambda));
  }
  if (left_slack_frames < 0 || right_slack_frames < 0) {
    throw std::invalid_argument("loss.slack_frames: must be >= 0");
  }
  if (fastemit_scope != "both" && fastemit_scope != "fast") {
    throw std::invalid_argument("loss.fastemit_scope: must be \"both\" or \"fast\", got \"" +
                                fastemit_scope + "\"");
  }
}

void RunConfig::validate() const {
  if (model_kind != "checkpoint" && model_kind != "table") {
    throw std::invalid_argument("model.kind: must be \"checkpoint\" or \"table\", got \"" +
                                model_kind + "\"");
  }
  if (model_kind == "checkpoint" && checkpoint_path.empty()) {
    throw std::invalid_argument("model.path: required when model.kind is \"checkpoint\"");
  }
  if (time_reduction_stride < 1) {
    throw std::invalid_argument("time_reduction_stride: must be >= 1");
  }
  decode.validate();
  loss.validate();
}

RunConfig run_config_from_json(const json& j) {
  RunConfig cfg;
  if (j.contains("model")) {
    cfg.model_kind = j.at("model").value("kind", cfg.model_kind);
    cfg.checkpoint_path = j.at("model").value("path", cfg.checkpoint_path);
  }
  cfg.time_reduction_stride = j.value("time_reduction_stride", cfg.time_reduction_stride);
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("decode")) {
    const json& d = j.at("decode");
    cfg.decode.fast_segment = d.value("fast_segment", cfg.decode.fast_segment);
    cfg.decode.slow_segment = d.value("slow_segment", cfg.decode.slow_segment);
    cfg.decode.fast_beam = d.value("fast_beam", cfg.decode.fast_beam);
    cfg.decode.slow_beam = d.value("slow_beam", cfg.decode.slow_beam);
    cfg.decode.max_symbols_per_frame =
        d.value("max_symbols_per_frame", cfg.decode.max_symbols_per_frame);
    cfg.decode.shared_search_space =
        d.value("shared_search_space", cfg.decode.shared_search_space);
  }
  if (j.contains("loss")) {
    const json& l = j.at("loss");
    cfg.loss.lambda = l.value("lambda", cfg.loss.lambda);
    cfg.loss.fe_lambda = l.value("fe_lambda", cfg.loss.fe_lambda);
    cfg.loss.left_slack_frames = l.value("left_slack_frames", cfg.loss.left_slack_frames);
    cfg.loss.right_slack_frames = l.value("right_slack_frames", cfg.loss.right_slack_frames);
    cfg.loss.fastemit_scope = l.value("fastemit_scope", cfg.loss.fastemit_scope);
  }
  if (j.contains("init")) {
    const json& init = j.at("init");
    if (init.contains("cascade")) {
      const json& c = init.at("cascade");
      if (c.contains("fast")) cfg.cascade.fast = encoder_cfg_from_json(c.at("fast"));
      if (c.contains("slow")) cfg.cascade.slow = encoder_cfg_from_json(c.at("slow"));
      cfg.cascade.slow_segment_multiple =
          c.value("slow_segment_multiple", cfg.cascade.slow_segment_multiple);
    }
    if (init.contains("predictor")) {
      const json& p = init.at("predictor");
      cfg.predictor.num_layers = p.value("num_layers", cfg.predictor.num_layers);
      cfg.predictor.embed_dim = p.value("embed_dim", cfg.predictor.embed_dim);
      cfg.predictor.hidden_dim = p.value("hidden_dim", cfg.predictor.hidden_dim);
    }
    if (init.contains("joiner")) {
      cfg.joiner.joint_dim = init.at("joiner").value("joint_dim", cfg.joiner.joint_dim);
    }
    if (init.contains("vocab")) {
      cfg.vocab_tokens = init.at("vocab").at("tokens").get<std::vector<std::string>>();
      cfg.blank_id = init.at("vocab").value("blank_id", 0);
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config: '" + path + "' is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

json run_config_to_json(const RunConfig& cfg) {
  json j;
  j["model"] = {{"kind", cfg.model_kind}, {"path", cfg.checkpoint_path}};
  j["time_reduction_stride"] = cfg.time_reduction_stride;
  j["seed"] = cfg.seed;
  j["decode"] = {{"fast_segment", cfg.decode.fast_segment},
                 {"slow_segment", cfg.decode.slow_segment},
                 {"fast_beam", cfg.decode.fast_beam},
                 {"slow_beam", cfg.decode.slow_beam},
                 {"max_symbols_per_frame", cfg.decode.max_symbols_per_frame},
                 {"shared_search_space", cfg.decode.shared_search_space}};
  j["loss"] = {{"lambda", cfg.loss.lambda},
               {"fe_lambda", cfg.loss.fe_lambda},
               {"left_slack_frames", cfg.loss.left_slack_frames},
               {"right_slack_frames", cfg.loss.right_slack_frames},
               {"fastemit_scope", cfg.loss.fastemit_scope}};
  return j;
}

std::vector<ManifestRecord> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("manifest: cannot open '" + path + "'");
  std::vector<ManifestRecord> records;
  std::set<std::string> ids;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error("manifest: '" + path + "' line " + std::to_string(line_no) +
                               " is not valid JSON: " + e.what());
    }
    ManifestRecord rec;
    rec.id = j.at("id").get<std::string>();
    rec.features_path = j.at("features").get<std::string>();
    rec.reference = j.value("reference", "");
    if (j.contains("alignment_ms")) {
      rec.alignment_ms = j.at("alignment_ms").get<std::vector<double>>();
    }
    if (!ids.insert(rec.id).second) {
      throw std::runtime_error("manifest: duplicate id '" + rec.id + "'");
    }
    if (!std::filesystem::exists(rec.features_path)) {
      throw std::runtime_error("manifest: features file '" + rec.features_path +
                               "' for id '" + rec.id + "' does not exist");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void save_manifest(const std::string& path, const std::vector<ManifestRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("manifest: cannot open '" + path + "' for writing");
  for (const ManifestRecord& rec : records) {
    json j = {{"id", rec.id}, {"features", rec.features_path}, {"reference", rec.reference}};
    if (rec.alignment_ms.has_value()) j["alignment_ms"] = *rec.alignment_ms;
    out << j.dump() << "\n";
  }
}

json decode_record_to_json(const DecodeRecord& record) {
  json tokens = json::array();
  for (const auto& t : record.tokens) {
    tokens.push_back({{"piece", t.piece}, {"emit_frame", t.emit_frame}, {"emit_ms", t.emit_ms}});
  }
  json timeline = json::array();
  for (const auto& item : record.timeline) {
    timeline.push_back(
        {{"audio_ms", item.audio_ms}, {"source", item.source}, {"text", item.text}});
  }
  return {{"id", record.id},
          {"final_text", record.final_text},
          {"fast_final_text", record.fast_final_text},
          {"tokens", tokens},
          {"timeline", timeline},
          {"counters",
           {{"predictor_evals", record.predictor_evals},
            {"joiner_evals", record.joiner_evals}}}};
}

namespace {

struct LoadedModel {
  std::optional<Checkpoint> ckpt;
  std::shared_ptr<NeuralModel> neural;
};

LoadedModel load_model(const RunConfig& cfg) {
  LoadedModel lm;
  if (cfg.model_kind != "checkpoint") return lm;
  lm.ckpt = load_checkpoint(cfg.checkpoint_path);
  if (cfg.decode.fast_segment != lm.ckpt->cascade_cfg.fast.segment_size ||
      cfg.decode.slow_segment != lm.ckpt->cascade_cfg.slow.segment_size) {
    throw std::invalid_argument(
        "decode.fast_segment/slow_segment: must match the checkpoint's encoder "
        "segment sizes");
  }
  lm.neural = std::make_shared<NeuralModel>(lm.ckpt->vocab, lm.ckpt->predictor,
                                            lm.ckpt->joiner);
  return lm;
}

DecodeRecord decode_one(const RunConfig& cfg, const LoadedModel& lm,
                        const ManifestRecord& record) {
  DecodeRecord out;
  out.id = record.id;

  const auto t0 = std::chrono::steady_clock::now();
  DecodeResult result;
  std::unique_ptr<TableModel> table_model;
  const DecoderModel* model = nullptr;
  double frame_ms = kFrameMs;

  if (cfg.model_kind == "table") {
    TableFixture fx = load_table_fixture(record.features_path);
    table_model = std::make_unique<TableModel>(fx.vocab, std::move(fx.fast),
                                               std::move(fx.slow));
    model = table_model.get();
    TableCascadeStream stream(table_model->fast_table().num_frames);
    out.audio_ms = stream.total_frames() * kFrameMs;
    result = parallel_decode(stream, *model, cfg.decode);
  } else {
    FeatureMatrix feats = load_features(record.features_path);
    const Matrix reduced = time_reduction(feats.features, cfg.time_reduction_stride);
    frame_ms = feats.frame_shift_ms * cfg.time_reduction_stride;
    out.audio_ms = feats.duration_ms();
    model = lm.neural.get();
    NeuralCascadeStream stream(lm.ckpt->cascade, reduced);
    result = parallel_decode(stream, *model, cfg.decode);
  }
  out.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t0)
                    .count();

  out.final_text = tokens_to_text(*model, result.final.tokens);
  out.fast_final_text = tokens_to_text(*model, result.fast_final.tokens);
  for (std::size_t i = 0; i < result.final.tokens.size(); ++i) {
    DecodeRecord::Token tok;
    tok.piece = model->token_text(result.final.tokens[i]);
    tok.emit_frame = result.final.token_emit_frames[i];
    tok.emit_ms = tok.emit_frame * frame_ms;
    out.tokens.push_back(std::move(tok));
  }
  for (const TimelineEntry& e : result.timeline) {
    DecodeRecord::TimelineItem item;
    item.audio_ms = e.audio_frame * frame_ms;
    item.source = e.from_slow ? "slow" : "fast";
    item.text = tokens_to_text(*model, e.best_tokens);
    out.timeline.push_back(std::move(item));
  }
  out.predictor_evals = result.counters.predictor_evals;
  out.joiner_evals = result.counters.joiner_evals;
  return out;
}

// Word boundaries follow the word-piece marker, the same split
// tokens_to_text produces; a word's emission time is its last piece's.
std::pair<std::vector<std::string>, std::vector<double>> word_emit_times(
    const std::vector<DecodeRecord::Token>& tokens) {
  std::vector<std::string> words;
  std::vector<double> times;
  std::string cur;
  double cur_time = 0.0;
  auto flush = [&]() {
    if (!cur.empty()) {
      words.push_back(cur);
      times.push_back(cur_time);
      cur.clear();
      cur_time = 0.0;
    }
  };
  for (const auto& tok : tokens) {
    const std::string& p = tok.piece;
    std::size_t i = 0;
    while (i < p.size()) {
      if (p.compare(i, 3, "\xe2\x96\x81") == 0) {
        flush();
        i += 3;
      } else {
        cur += p[i];
        cur_time = std::max(cur_time, tok.emit_ms);
        ++i;
      }
    }
    if (!cur.empty()) cur_time = std::max(cur_time, tok.emit_ms);
  }
  flush();
  return {std::move(words), std::move(times)};
}

UtteranceMetrics score_utterance(const ManifestRecord& record, const DecodeRecord& dec) {
  UtteranceMetrics m;
  m.id = record.id;
  m.audio_ms = dec.audio_ms;
  m.wall_ms = dec.wall_ms;
  m.predictor_evals = dec.predictor_evals;
  m.joiner_evals = dec.joiner_evals;

  const auto ref = split_words(record.reference);
  const auto hyp = split_words(dec.final_text);
  const auto hyp_fast = split_words(dec.fast_final_text);
  const WerResult wer = word_error_rate(ref, hyp);
  const WerResult wer_fast = word_error_rate(ref, hyp_fast);
  m.wer = wer.rate;
  m.wer_fast = wer_fast.rate;
  m.ref_words = static_cast<long>(ref.size());
  m.errors = wer.distance;
  m.errors_fast = wer_fast.distance;

  if (record.alignment_ms.has_value() &&
      record.alignment_ms->size() == ref.size()) {
    m.has_alignment = true;
    AlignmentTimes align{*record.alignment_ms};
    auto [words, times] = word_emit_times(dec.tokens);
    m.delays_ms = emission_delays(ref, align, words, times).delays_ms;
  }
  return m;
}

}  // namespace

DecodeRecord decode_utterance(const RunConfig& cfg, const ManifestRecord& record) {
  cfg.validate();
  const LoadedModel lm = load_model(cfg);
  return decode_one(cfg, lm, record);
}

RunOutput run_manifest(const RunConfig& cfg, const std::vector<ManifestRecord>& manifest,
                       int threads) {
  cfg.validate();
  if (threads < 1) throw std::invalid_argument("threads: must be >= 1");
  const LoadedModel lm = load_model(cfg);

  std::vector<UtteranceMetrics> metrics(manifest.size());
  std::vector<DecodeRecord> records(manifest.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= manifest.size()) return;
      try {
        records[i] = decode_one(cfg, lm, manifest[i]);
        metrics[i] = score_utterance(manifest[i], records[i]);
      } catch (const std::exception& e) {
        metrics[i] = UtteranceMetrics{};
        metrics[i].id = manifest[i].id;
        metrics[i].failed = true;
        metrics[i].error = e.what();
        records[i] = DecodeRecord{};
        records[i].id = manifest[i].id;
      }
    }
  };
  if (threads == 1 || manifest.size() <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  RunOutput out;
  out.report = aggregate_metrics(std::move(metrics));
  out.records = std::move(records);
  return out;
}

json report_to_json(const MetricsReport& report, bool include_timing) {
  json summary = {{"wer", report.wer},
                  {"wer_fast", report.wer_fast},
                  {"cr", report.cr},
                  {"ed_avg_ms", report.ed_avg_ms},
                  {"ed_p99_ms", report.ed_p99_ms},
                  {"utterances", report.utterances},
                  {"failed_utterances", report.failed_utterances},
                  {"utterances_without_alignment", report.utterances_without_alignment}};
  if (include_timing) summary["rtf"] = report.rtf;

  json rows = json::array();
  for (const UtteranceMetrics& u : report.per_utterance) {
    json row = {{"id", u.id},
                {"wer", u.wer},
                {"wer_fast", u.wer_fast},
                {"ref_words", u.ref_words},
                {"errors", u.errors},
                {"errors_fast", u.errors_fast},
                {"audio_ms", u.audio_ms},
                {"delays_ms", u.delays_ms},
                {"has_alignment", u.has_alignment},
                {"failed", u.failed},
                {"counters",
                 {{"predictor_evals", u.predictor_evals}, {"joiner_evals", u.joiner_evals}}}};
    if (u.failed) row["error"] = u.error;
    if (include_timing) {
      row["wall_ms"] = u.wall_ms;
      row["rtf"] = u.audio_ms > 0 ? u.wall_ms / u.audio_ms : 0.0;
    }
    rows.push_back(std::move(row));
  }
  return {{"summary", summary}, {"per_utterance", rows}};
}

}  // namespace fastslow
