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

#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "fastslow/metrics.h"
#include "testing/test_util.h"

using namespace fastslow;

namespace {

std::vector<std::string> random_words(std::mt19937_64& rng, std::size_t max_len) {
  const std::vector<std::string> pool = {"a", "b", "c", "d", "e"};
  std::vector<std::string> out(rng() % (max_len + 1));
  for (auto& w : out) w = pool[rng() % pool.size()];
  return out;
}

}  // namespace

TEST_CASE("word_error_rate on the worked examples") {
  const std::vector<std::string> abc = {"a", "b", "c"};
  CHECK(word_error_rate(abc, abc).rate == 0.0);
  CHECK(word_error_rate(abc, abc).distance == 0);

  const WerResult sub = word_error_rate(abc, {"a", "x", "c"});
  CHECK(sub.rate == doctest::Approx(1.0 / 3.0));
  CHECK(sub.substitutions == 1);
  CHECK(sub.insertions == 0);
  CHECK(sub.deletions == 0);

  const WerResult del = word_error_rate({"a"}, {});
  CHECK(del.rate == 1.0);
  CHECK(del.deletions == 1);

  const WerResult ins = word_error_rate({}, {"a", "b"});
  CHECK(ins.empty_reference);
  CHECK(ins.rate == 2.0);  // insertions / max(1, 0)
  CHECK(ins.insertions == 2);
}

TEST_CASE("word_error_rate matches the DP oracle on random pairs") {
  std::mt19937_64 rng(97);
  for (int trial = 0; trial < 300; ++trial) {
    const auto ref = random_words(rng, 8);
    const auto hyp = random_words(rng, 8);
    const WerResult r = word_error_rate(ref, hyp);
    CHECK(r.distance == testing::edit_distance_oracle(ref, hyp));
    CHECK(r.substitutions + r.deletions + r.insertions == r.distance);
    // Edit-distance symmetry: rate scales with the reference length.
    const WerResult rev = word_error_rate(hyp, ref);
    CHECK(r.distance == rev.distance);
  }
}

TEST_CASE("edit distance satisfies the triangle inequality") {
  std::mt19937_64 rng(98);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = random_words(rng, 6);
    const auto b = random_words(rng, 6);
    const auto c = random_words(rng, 6);
    const long ab = word_error_rate(a, b).distance;
    const long bc = word_error_rate(b, c).distance;
    const long ac = word_error_rate(a, c).distance;
    CHECK(ac <= ab + bc);
  }
}

TEST_CASE("traceback prefers substitution over deletion over insertion") {
  // "a b" -> "x": distance 2, resolvable as sub+del (preferred) or del+sub.
  const WerResult r = word_error_rate({"a", "b"}, {"x"});
  CHECK(r.distance == 2);
  CHECK(r.substitutions == 1);
  CHECK(r.deletions == 1);
  CHECK(r.insertions == 0);
  // Deterministic across calls.
  const WerResult r2 = word_error_rate({"a", "b"}, {"x"});
  CHECK(r.alignment.size() == r2.alignment.size());
  for (std::size_t i = 0; i < r.alignment.size(); ++i) {
    CHECK(r.alignment[i].op == r2.alignment[i].op);
  }
}

TEST_CASE("emission delays measure matched words only") {
  const std::vector<std::string> ref = {"hello", "world"};
  AlignmentTimes align{{1200.0, 2000.0}};

  // Token ends at 1200 ms and surfaces at 1500 ms: delay 300 ms.
  const DelayStats d1 = emission_delays(ref, align, {"hello", "world"}, {1500.0, 2600.0});
  REQUIRE(d1.delays_ms.size() == 2);
  CHECK(d1.delays_ms[0] == doctest::Approx(300.0));
  CHECK(d1.delays_ms[1] == doctest::Approx(600.0));
  CHECK(d1.avg_ms == doctest::Approx(450.0));

  // A substituted word contributes no delay.
  const DelayStats d2 = emission_delays(ref, align, {"hello", "mars"}, {1500.0, 2600.0});
  CHECK(d2.delays_ms.size() == 1);

  AlignmentTimes bad{{2000.0, 1200.0}};
  CHECK_THROWS_AS(emission_delays(ref, bad, {"hello"}, {1.0}), std::invalid_argument);
}

TEST_CASE("nearest-rank p99 is the 99th order statistic of 100 values") {
  std::vector<double> values;
  for (int i = 100; i >= 1; --i) values.push_back(i * 10.0);
  CHECK(percentile_nearest_rank(values, 99.0) == doctest::Approx(990.0));
  CHECK(percentile_nearest_rank(values, 100.0) == doctest::Approx(1000.0));
  CHECK(percentile_nearest_rank(values, 50.0) == doctest::Approx(500.0));
  CHECK(percentile_nearest_rank({5.0}, 99.0) == doctest::Approx(5.0));
  CHECK_THROWS_AS(percentile_nearest_rank({1.0}, 0.0), std::invalid_argument);
}

TEST_CASE("correction rate is an exact subtraction") {
  CHECK(correction_rate(0.0896, 0.0715) == doctest::Approx(0.0181).epsilon(1e-12));
  CHECK(correction_rate(0.25, 0.25) == 0.0);
  CHECK(correction_rate(0.10, 0.20) == doctest::Approx(-0.10));  // negative is reported as-is
}

TEST_CASE("real time factor definition and pooling") {
  CHECK(real_time_factor(500.0, 1000.0) == doctest::Approx(0.5));
  CHECK_THROWS_AS(real_time_factor(1.0, 0.0), std::invalid_argument);

  // Pooled RTF is total wall over total audio, not the mean of ratios.
  UtteranceMetrics u1, u2;
  u1.id = "a";
  u1.wall_ms = 100.0;
  u1.audio_ms = 1000.0;  // 0.1
  u2.id = "b";
  u2.wall_ms = 900.0;
  u2.audio_ms = 1000.0;  // 0.9
  const MetricsReport rep = aggregate_metrics({u1, u2});
  CHECK(rep.rtf == doctest::Approx(0.5));  // (100+900)/(1000+1000)

  // Pooled WER weights utterances by reference words.
  UtteranceMetrics v1, v2;
  v1.id = "a";
  v1.ref_words = 9;
  v1.errors = 0;
  v1.audio_ms = 1.0;
  v2.id = "b";
  v2.ref_words = 1;
  v2.errors = 1;
  v2.audio_ms = 1.0;
  CHECK(aggregate_metrics({v1, v2}).wer == doctest::Approx(0.1));
}

TEST_CASE("split_words tolerates extra whitespace") {
  CHECK(split_words("  a  b\tc ") == std::vector<std::string>{"a", "b", "c"});
  CHECK(split_words("").empty());
}
