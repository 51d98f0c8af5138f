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

#ifndef FASTSLOW_METRICS_H_
#define FASTSLOW_METRICS_H_

#include <optional>
#include <string>
#include <vector>

namespace fastslow {

std::vector<std::string> split_words(const std::string& text);

enum class EditOp { kMatch, kSubstitute, kDelete, kInsert };

struct WerAlignment {
  EditOp op;
  int ref_index = -1;  // -1 for insertions
  int hyp_index = -1;  // -1 for deletions
};

struct WerResult {
  long distance = 0;
  long substitutions = 0;
  long deletions = 0;
  long insertions = 0;
  std::size_t ref_len = 0;
  double rate = 0.0;  // distance / max(1, ref_len)
  bool empty_reference = false;
  std::vector<WerAlignment> alignment;  // deterministic traceback
};

// Unit-cost Levenshtein with a deterministic traceback; on ties the
// preference order is substitute/match, then delete, then insert.
WerResult word_error_rate(const std::vector<std::string>& reference,
                          const std::vector<std::string>& hypothesis);

// Per-reference-token speech end times in milliseconds.
struct AlignmentTimes {
  std::vector<double> end_ms;
  void validate() const;
};

struct DelayStats {
  std::vector<double> delays_ms;  // one per correctly recognized word
  double avg_ms = 0.0;
};

// delay(word) = hypothesis emission time - reference end time, measured
// only over words the WER traceback matched exactly.
DelayStats emission_delays(const std::vector<std::string>& reference,
                           const AlignmentTimes& alignment,
                           const std::vector<std::string>& hypothesis,
                           const std::vector<double>& hyp_word_emit_ms);

// Nearest-rank percentile of the pooled corpus-level delay list.
double percentile_nearest_rank(std::vector<double> values, double pct);

// WER(fast output) - WER(final output), exactly.
double correction_rate(double wer_fast, double wer_slow);

// wall / audio; audio_ms must be positive.
double real_time_factor(double wall_clock_ms, double audio_ms);

struct UtteranceMetrics {
  std::string id;
  double wer = 0.0;
  double wer_fast = 0.0;
  long ref_words = 0;
  long errors = 0;
  long errors_fast = 0;
  std::vector<double> delays_ms;
  double audio_ms = 0.0;
  double wall_ms = 0.0;
  bool failed = false;
  std::string error;
  bool has_alignment = false;
  long predictor_evals = 0;
  long joiner_evals = 0;
};

struct MetricsReport {
  double wer = 0.0;       // pooled: total errors / total reference words
  double wer_fast = 0.0;  // same, on the fast-pass outputs
  double cr = 0.0;        // wer_fast - wer
  double ed_avg_ms = 0.0;
  double ed_p99_ms = 0.0;
  double rtf = 0.0;  // pooled: total wall / total audio
  long utterances = 0;
  long failed_utterances = 0;
  long utterances_without_alignment = 0;
  std::vector<UtteranceMetrics> per_utterance;
};

// Pools the per-utterance rows; delays pool across the corpus, WER pools
// by error and word counts, RTF by total time.
MetricsReport aggregate_metrics(std::vector<UtteranceMetrics> rows);

}  // namespace fastslow

#endif  // FASTSLOW_METRICS_H_
