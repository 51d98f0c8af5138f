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

#ifndef FASTSLOW_FEATURES_H_
#define FASTSLOW_FEATURES_H_

#include <string>

#include "fastslow/matrix.h"

namespace fastslow {

// Acoustic features plus the frame shift they were extracted at.
struct FeatureMatrix {
  Matrix features;
  float frame_shift_ms = 10.0f;

  double duration_ms() const { return features.rows * static_cast<double>(frame_shift_ms); }
};

// Binary layout: magic "FTRS", u32 version (=1), u32 frames, u32 dims,
// f32 frame_shift_ms, then frames*dims little-endian f32, row-major.
// Malformed files raise std::runtime_error naming the offending byte offset.
FeatureMatrix load_features(const std::string& path);
void save_features(const std::string& path, const FeatureMatrix& features);

}  // namespace fastslow

#endif  // FASTSLOW_FEATURES_H_
