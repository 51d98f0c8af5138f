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

#include "fastslow/features.h"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace fastslow {
namespace {

constexpr char kMagic[4] = {'F', 'T', 'R', 'S'};
constexpr std::uint32_t kVersion = 1;

[[noreturn]] void fail(const std::string& path, std::size_t offset, const std::string& what) {
  throw std::runtime_error("feature file '" + path + "': " + what + " at byte " +
                           std::to_string(offset));
}

// The on-disk layout is little-endian; this reader assumes a little-endian
// host, which covers every platform this project targets.
template <typename T>
T read_pod(const std::vector<char>& buf, std::size_t& off, const std::string& path,
           const char* what) {
  if (off + sizeof(T) > buf.size()) fail(path, off, std::string("truncated ") + what);
  T v;
  std::memcpy(&v, buf.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

}  // namespace

FeatureMatrix load_features(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("feature file '" + path + "': cannot open");
  std::vector<char> buf((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());

  std::size_t off = 0;
  if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0) {
    fail(path, 0, "bad magic (want \"FTRS\")");
  }
  off = 4;
  const auto version = read_pod<std::uint32_t>(buf, off, path, "version");
  if (version != kVersion) fail(path, 4, "unsupported version " + std::to_string(version));
  const auto frames = read_pod<std::uint32_t>(buf, off, path, "frame count");
  const auto dims = read_pod<std::uint32_t>(buf, off, path, "dim count");
  const auto shift = read_pod<float>(buf, off, path, "frame shift");

  const std::size_t want = static_cast<std::size_t>(frames) * dims * sizeof(float);
  if (buf.size() - off != want) {
    fail(path, off,
         "payload size mismatch (want " + std::to_string(want) + " bytes, have " +
             std::to_string(buf.size() - off) + ")");
  }

  FeatureMatrix out;
  out.frame_shift_ms = shift;
  out.features = Matrix(frames, dims);
  std::memcpy(out.features.data.data(), buf.data() + off, want);
  return out;
}

void save_features(const std::string& path, const FeatureMatrix& features) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("feature file '" + path + "': cannot open for writing");
  out.write(kMagic, 4);
  auto put = [&out](const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  };
  const std::uint32_t version = kVersion;
  const std::uint32_t frames = static_cast<std::uint32_t>(features.features.rows);
  const std::uint32_t dims = static_cast<std::uint32_t>(features.features.cols);
  put(&version, 4);
  put(&frames, 4);
  put(&dims, 4);
  put(&features.frame_shift_ms, 4);
  put(features.features.data.data(), features.features.data.size() * sizeof(float));
  if (!out) throw std::runtime_error("feature file '" + path + "': write failed");
}

}  // namespace fastslow
