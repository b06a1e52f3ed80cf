// src/avw/util.h
//
// Copyright 2026 The avwhisper Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef AVWHISPER_UTIL_H_
#define AVWHISPER_UTIL_H_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace avw {

enum class ErrorCode {
  kInvalidArg = 1,
  kIo = 2,
  kParse = 3,
  kValidation = 4,
  kNotFound = 5,
  kInternal = 6,
};

/// Exception carrying a coarse error category; the message is the contract
/// with the user (error text is asserted in tests, keep it stable).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void Throw(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

/// Deterministic RNG: xoshiro256++ seeded through splitmix64. All sampling
/// (bounded ints, shuffles, normals) is implemented here rather than with
/// std:: distributions, whose output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t NextU64();
  /// Uniform double in [0, 1).
  double Uniform();
  double Uniform(double lo, double hi);
  /// Unbiased integer in [0, n); n must be > 0.
  std::uint64_t Below(std::uint64_t n);
  /// Integer in [lo, hi] inclusive.
  int RangeInt(int lo, int hi);
  /// Standard normal via Box-Muller (cached second draw).
  double Normal();

  template <typename T>
  void Shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(Below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Independent substream derived from (seed, tag); used so that e.g. each
  /// epoch or each utterance draws from its own deterministic stream.
  static Rng Derive(std::uint64_t seed, std::uint64_t tag);

 private:
  std::uint64_t state_[4];
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

/// FNV-1a 64-bit over raw bytes; used for content checksums of tensors,
/// feature blobs and checkpoints.
class Fnv64 {
 public:
  void Update(const void* data, std::size_t n);
  std::uint64_t digest() const { return hash_; }

 private:
  std::uint64_t hash_ = 14695981039346656037ULL;
};

std::uint64_t Fnv64Bytes(const void* data, std::size_t n);

// UTF-8 <-> code points. DecodeUtf8 throws ErrorCode::kParse on malformed
// input, reporting the byte offset.
std::vector<char32_t> DecodeUtf8(std::string_view s);
std::string EncodeUtf8(const std::vector<char32_t>& cps);
std::string EncodeUtf8(char32_t cp);

/// True for the whitespace code points stripped by the zh text normalizer
/// (ASCII whitespace, NBSP, the Unicode space block, ideographic space).
bool IsUnicodeSpace(char32_t cp);

std::string FormatDouble(double v, int decimals);

}  // namespace avw

#endif  // AVWHISPER_UTIL_H_
