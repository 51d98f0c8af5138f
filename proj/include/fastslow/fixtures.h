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

#ifndef FASTSLOW_FIXTURES_H_
#define FASTSLOW_FIXTURES_H_

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fastslow/decoder.h"
#include "fastslow/transducer.h"

namespace fastslow {

// Lattice fixture JSON: {"T", "U", "V", "log_probs", "target"} where V is
// the non-blank vocabulary size (classes = V + 1, blank id 0), plus
// embedded reference answers from the enumeration oracle.
struct LatticeFixture {
  LossLattice lattice;
  std::optional<double> oracle_loss;
  std::optional<std::vector<long>> alignment_frames;  // for path restrictions
};

LatticeFixture load_lattice_fixture(const std::string& path);
void save_lattice_fixture(const std::string& path, const LatticeFixture& fixture);

// Table-model fixture JSON for decode runs; fast and slow tables share the
// (T, max_prefix, classes) shape.
struct TableFixture {
  Vocabulary vocab;
  TableModel::Table fast;
  TableModel::Table slow;
};

TableFixture load_table_fixture(const std::string& path);
void save_table_fixture(const std::string& path, const TableFixture& fixture);

// Random generation, all deterministic in the generator state.

// Uniformly random normalized lattice; target drawn over non-blank ids.
LossLattice random_lattice(std::mt19937_64& rng, int max_t, int max_u, int max_v);

// Random normalized tables over a small word-piece vocabulary. When
// `identical` is set the slow table equals the fast table.
TableFixture random_table_fixture(std::mt19937_64& rng, int num_frames, int max_prefix,
                                  int num_pieces, bool identical);

// Near-deterministic fixture where the fast table spells one token
// sequence and the slow table flips the token at `flip_position`.
TableFixture correction_fixture(int num_frames, const std::vector<int>& fast_tokens,
                                const std::vector<long>& emit_frames, int flip_position,
                                int flip_token, int num_pieces);

struct FixtureGenConfig {
  std::uint64_t seed = 1;
  std::string out_dir;
  int lattice_count = 32;
  int max_t = 4;   // enumeration stays tractable up to 4
  int max_u = 3;
  int max_v = 3;
  int table_count = 8;
  int table_frames = 12;
  int table_pieces = 3;

  void validate() const;
};

// Writes lattice fixtures (with embedded oracle losses), a table-model
// decode corpus with references from the exhaustive search oracle, a
// correction fixture, and the manifests tying them together.
void generate_fixtures(const FixtureGenConfig& cfg);

}  // namespace fastslow

#endif  // FASTSLOW_FIXTURES_H_
