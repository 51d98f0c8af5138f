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

#ifndef FASTSLOW_HARNESS_H_
#define FASTSLOW_HARNESS_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "fastslow/decoder.h"
#include "fastslow/metrics.h"
#include "fastslow/transducer.h"

namespace fastslow {

struct LossConfig {
  double lambda = 0.5;       // cascade loss weight, 0 < lambda < 1
  double fe_lambda = 0.0;    // fast-emit strength
  long left_slack_frames = kUnlimitedSlack;
  long right_slack_frames = kUnlimitedSlack;
  std::string fastemit_scope = "both";  // "both" | "fast"

  void validate() const;
};

struct RunConfig {
  std::string model_kind = "checkpoint";  // "checkpoint" | "table"
  std::string checkpoint_path;
  int time_reduction_stride = 4;
  DecodeConfig decode;
  LossConfig loss;
  std::uint64_t seed = 1;

  // Used by init-model (and embedded into checkpoints it writes).
  CascadeConfig cascade;
  PredictorConfig predictor;
  JoinerConfig joiner;
  std::vector<std::string> vocab_tokens;
  int blank_id = 0;

  void validate() const;
};

RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);
nlohmann::json run_config_to_json(const RunConfig& cfg);

struct ManifestRecord {
  std::string id;
  std::string features_path;  // FTRS file or table fixture, per model_kind
  std::string reference;
  std::optional<std::vector<double>> alignment_ms;  // per reference word
};

// Line-delimited JSON. Ids must be unique; referenced files must exist.
std::vector<ManifestRecord> load_manifest(const std::string& path);
void save_manifest(const std::string& path, const std::vector<ManifestRecord>& records);

struct DecodeRecord {
  std::string id;
  std::string final_text;
  std::string fast_final_text;
  struct Token {
    std::string piece;
    long emit_frame = 0;
    double emit_ms = 0.0;
  };
  std::vector<Token> tokens;
  struct TimelineItem {
    double audio_ms = 0.0;
    std::string source;  // "fast" | "slow"
    std::string text;
  };
  std::vector<TimelineItem> timeline;
  long predictor_evals = 0;
  long joiner_evals = 0;
  double audio_ms = 0.0;
  double wall_ms = 0.0;
};

nlohmann::json decode_record_to_json(const DecodeRecord& record);

// Encoder frames carry 40 ms each under the default 10 ms shift and
// stride-4 time reduction; table fixtures use the same convention.
inline constexpr double kFrameMs = 40.0;

// Decodes one utterance with the model named by the config.
DecodeRecord decode_utterance(const RunConfig& cfg, const ManifestRecord& record);

struct RunOutput {
  MetricsReport report;
  std::vector<DecodeRecord> records;
};

// Decodes every utterance (optionally on `threads` workers), scores it,
// and aggregates. Results are independent of the worker count.
RunOutput run_manifest(const RunConfig& cfg, const std::vector<ManifestRecord>& manifest,
                       int threads = 1);

nlohmann::json report_to_json(const MetricsReport& report, bool include_timing);

}  // namespace fastslow

#endif  // FASTSLOW_HARNESS_H_
