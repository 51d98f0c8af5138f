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

#ifndef FASTSLOW_CHECKPOINT_H_
#define FASTSLOW_CHECKPOINT_H_

#include <cstdint>
#include <memory>
#include <string>

#include "fastslow/encoder.h"
#include "fastslow/transducer.h"

namespace fastslow {

// Everything needed to decode: the cascade, the shared predictor and
// joiner, and the vocabulary.
struct Checkpoint {
  CascadeConfig cascade_cfg;
  PredictorConfig predictor_cfg;
  JoinerConfig joiner_cfg;
  Vocabulary vocab;
  CascadeWeights cascade;
  std::shared_ptr<const PredictorWeights> predictor;
  std::shared_ptr<const JoinerWeights> joiner;
};

// Deterministic random model from configs and a seed.
Checkpoint init_checkpoint(const CascadeConfig& cascade, const PredictorConfig& predictor,
                           const JoinerConfig& joiner, const Vocabulary& vocab,
                           std::uint64_t seed);

// Versioned JSON document: {"version":1, "config":{...}, "weights":
// {"<path>": {"shape":[...], "data":[...]}}} with canonical weight paths
// such as "fast.layer0.attn.q" or "predictor.layer1.wh". A shared layer
// block is stored once, under the first layer index of its range; loading
// re-ties the aliases from the config.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace fastslow

#endif  // FASTSLOW_CHECKPOINT_H_
