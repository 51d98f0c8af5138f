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

#include "fastslow/metrics.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace fastslow {

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::istringstream ss(text);
  std::string w;
  while (ss >> w) words.push_back(w);
  return words;
}

WerResult word_error_rate(const std::vector<std::string>& reference,
                          const std::vector<std::string>& hypothesis) {
  const std::size_t n = reference.size();
  const std::size_t m = hypothesis.size();
  // dp[i][j] = edit distance between reference[0,i) and hypothesis[0,j)
  std::vector<std::vector<long>> dp(n + 1, std::vector<long>(m + 1, 0));
  for (std::size_t i = 0; i <= n; ++i) dp[i][0] = static_cast<long>(i);
  for (std::size_t j = 0; j <= m; ++j) dp[0][j] = static_cast<long>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const long sub = dp[i - 1][j - 1] + (reference[i - 1] == hypothesis[j - 1] ? 0 : 1);
      const long del = dp[i - 1][j] + 1;
      const long ins = dp[i][j - 1] + 1;
      dp[i][j] = std::min({sub, del, ins});
    }
  }

  WerResult r;
  r.distance = dp[n][m];
  r.ref_len = n;
  r.empty_reference = n == 0;
  r.rate = static_cast<double>(r.distance) / static_cast<double>(std::max<std::size_t>(1, n));

  // Traceback, preferring substitute/match, then delete, then insert.
  std::size_t i = n, j = m;
  std::vector<WerAlignment> rev;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 &&
        dp[i][j] == dp[i - 1][j - 1] + (reference[i - 1] == hypothesis[j - 1] ? 0 : 1)) {
      const bool match = reference[i - 1] == hypothesis[j - 1];
      rev.push_back({match ? EditOp::kMatch : EditOp::kSubstitute,
                     static_cast<int>(i - 1), static_cast<int>(j - 1)});
      if (!match) ++r.substitutions;
      --i;
      --j;
    } else if (i > 0 && dp[i][j] == dp[i - 1][j] + 1) {
      rev.push_back({EditOp::kDelete, static_cast<int>(i - 1), -1});
      ++r.deletions;
      --i;
    } else {
      rev.push_back({EditOp::kInsert, -1, static_cast<int>(j - 1)});
      ++r.insertions;
      --j;
    }
  }
  r.alignment.assign(rev.rbegin(), rev.rend());
  return r;
}

void AlignmentTimes::validate() const {
  for (std::size_t i = 1; i < end_ms.size(); ++i) {
    if (end_ms[i] < end_ms[i - 1]) {
      throw std::invalid_argument("AlignmentTimes: end times must be nondecreasing");
    }
  }
}

DelayStats emission_delays(const std::vector<std::string>& reference,
                           const AlignmentTimes& alignment,
                           const std::vector<std::string>& hypothesis,
                           const std::vector<double>& hyp_word_emit_ms) {
  if (alignment.end_ms.size() != reference.size()) {
    throw std::invalid_argument("emission_delays: alignment length != reference length");
  }
  if (hyp_word_emit_ms.size() != hypothesis.size()) {
    throw std::invalid_argument("emission_delays: emit times length != hypothesis length");
  }
  alignment.validate();

  DelayStats stats;
  const WerResult wer = word_error_rate(reference, hypothesis);
  for (const WerAlignment& a : wer.alignment) {
    if (a.op != EditOp::kMatch) continue;
    stats.delays_ms.push_back(hyp_word_emit_ms[a.hyp_index] - alignment.end_ms[a.ref_index]);
  }
  if (!stats.delays_ms.empty()) {
    double total = 0.0;
    for (double d : stats.delays_ms) total += d;
    stats.avg_ms = total / static_cast<double>(stats.delays_ms.size());
  }
  return stats;
}

double percentile_nearest_rank(std::vector<double> values, double pct) {
  if (values.empty()) return 0.0;
  if (pct <= 0.0 || pct > 100.0) {
    throw std::invalid_argument("percentile: pct must lie in (0, 100]");
  }
  std::sort(values.begin(), values.end());
  const std::size_t rank = static_cast<std::size_t>(
      std::ceil(pct / 100.0 * static_cast<double>(values.size())));
  return values[std::max<std::size_t>(1, rank) - 1];
}

double correction_rate(double wer_fast, double wer_slow) {
  return wer_fast - wer_slow;
}

double real_time_factor(double wall_clock_ms, double audio_ms) {
  if (audio_ms <= 0.0) throw std::invalid_argument("real_time_factor: audio_ms must be > 0");
  return wall_clock_ms / audio_ms;
}

MetricsReport aggregate_metrics(std::vector<UtteranceMetrics> rows) {
  MetricsReport report;
  report.utterances = static_cast<long>(rows.size());
  long ref_words = 0, errors = 0, errors_fast = 0;
  double wall = 0.0, audio = 0.0;
  std::vector<double> pooled_delays;
  for (const UtteranceMetrics& u : rows) {
    if (u.failed) {
      ++report.failed_utterances;
      continue;
    }
    ref_words += std::max<long>(1, u.ref_words);  // empty references count as 1
    errors += u.errors;
    errors_fast += u.errors_fast;
    wall += u.wall_ms;
    audio += u.audio_ms;
    if (!u.has_alignment) ++report.utterances_without_alignment;
    pooled_delays.insert(pooled_delays.end(), u.delays_ms.begin(), u.delays_ms.end());
  }
  if (ref_words > 0) {
    report.wer = static_cast<double>(errors) / static_cast<double>(ref_words);
    report.wer_fast = static_cast<double>(errors_fast) / static_cast<double>(ref_words);
  }
  report.cr = correction_rate(report.wer_fast, report.wer);
  if (!pooled_delays.empty()) {
    double total = 0.0;
    for (double d : pooled_delays) total += d;
    report.ed_avg_ms = total / static_cast<double>(pooled_delays.size());
    report.ed_p99_ms = percentile_nearest_rank(pooled_delays, 99.0);
  }
  if (audio > 0.0) report.rtf = wall / audio;
  report.per_utterance = std::move(rows);
  return report;
}

}  // namespace fastslow
