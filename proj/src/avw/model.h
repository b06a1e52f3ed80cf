// src/avw/model.h
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
//
// Encoder-decoder recognizer with the three structural pieces this project
// is about:
//   * one encoder shared by whisper and normal speech (conv front with 2x
//     temporal downsampling + pre-LN transformer layers);
//   * a residual Linear->ReLU->Linear projection applied to whisper
//     embeddings only, zero-initialized to the identity;
//   * per-decoder-block gated visual cross-attention + gated feed-forward
//     (tanh-gated residuals, gates zero-initialized so the fused model
//     starts exactly equal to the audio-only model).
//
// Stage partition: every parameter created at model construction is labeled
// stage 1; the fusion ("gate.*") parameters added for stage 2 are labeled
// stage 2 and are the only ones stage-2 training updates. The visual
// embedder is a frozen stand-in for a pretrained visual encoder: it carries
// the stage-1 label but has no gradient path in stage 1 (no video there).

#ifndef AVWHISPER_MODEL_H_
#define AVWHISPER_MODEL_H_

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "avw/corpus.h"
#include "avw/io.h"
#include "avw/tape.h"

namespace avw::model {

using nn::Mat;
using nn::Param;
using nn::Tape;

// Special token ids (fixed positions at the front of every vocabulary).
inline constexpr int kPadId = 0;
inline constexpr int kSotId = 1;
inline constexpr int kEotId = 2;
inline constexpr int kLangZhId = 3;
inline constexpr int kLangEnId = 4;
inline constexpr int kNumSpecials = 5;

inline constexpr int kVisualPoolSize = 24;  // 96x96 crops average-pool to 24x24

struct ModelConfig {
  int d_model = 64;
  int n_heads = 4;
  int enc_layers = 2;
  int dec_layers = 2;
  int ffn_mult = 4;
  int max_text_len = 128;
  int visual_dim = 64;
  int n_mels = 80;
  std::vector<std::string> vocab;  // specials first, then character tokens

  void Validate() const;
};

/// Character vocabulary = specials + the sorted code points of `texts`.
std::vector<std::string> BuildVocab(const std::vector<std::string>& texts);

int LanguageTokenId(corpus::Language lang);

class ParamStore {
 public:
  Param* Create(const std::string& name, int stage, int rows, int cols);
  Param* Get(const std::string& name) const;
  bool Has(const std::string& name) const;
  const std::vector<Param*>& All() const { return order_; }
  std::vector<Param*> OfStage(int stage) const;
  void ZeroGrads();

 private:
  std::vector<std::unique_ptr<Param>> owned_;
  std::vector<Param*> order_;
  std::unordered_map<std::string, Param*> index_;
};

struct VisualFeatures {
  Mat frames;  // video_time x visual_dim; all-zero when absent
  bool present = false;
};

struct Model {
  ModelConfig config;
  int stage = 1;  // 2 once fusion parameters exist
  std::uint64_t seed = 0;
  ParamStore params;

  // Token <-> text helpers.
  std::vector<int> EncodeText(const std::string& utf8) const;
  std::string DecodeTokens(const std::vector<int>& ids) const;
};

/// Fresh stage-1 model: encoder, decoder, projection layer, visual
/// embedder. Projection W2/b2 start at zero (identity residual), W1 is
/// He-normal.
std::unique_ptr<Model> CreateModel(const ModelConfig& config,
                                   std::uint64_t seed);

/// Adds the stage-2 fusion parameters (gated cross-attention + gated FFN
/// per decoder block, gate scalars alpha/beta at zero). Idempotent error if
/// the model already has them.
void AddFusionParams(Model& model, std::uint64_t seed);

// --- graph builders (used by training; all return tape node ids) ---------

/// mel node (T x n_mels) -> audio embedding node (ceil(T/2) x d_model).
/// Throws if T < 2.
int BuildEncoder(Tape& tape, const Model& m, int mel_node);

/// Residual projection refinement, shape preserving.
int BuildProjection(Tape& tape, const Model& m, int emb_node);

/// Token prefix -> per-position logits over the vocabulary. `fusion` adds
/// the gated visual path (requires stage-2 parameters). The prefix must be
/// [SOT, LANG, ...] and at most max_text_len long.
int BuildDecoder(Tape& tape, const Model& m, int enc_node, const Mat& visual,
                 const std::vector<int>& tokens, bool fusion,
                 double logit_scale = 1.0);

// --- forward-only conveniences --------------------------------------------

Mat EncodeAudio(const Model& m, const Mat& mel);
Mat ProjectWhisper(const Model& m, const Mat& emb);
Mat DecodeLogits(const Model& m, const Mat& enc, const VisualFeatures& visual,
                 const std::vector<int>& tokens, bool fusion,
                 double logit_scale = 1.0);

/// Per-frame embedding of 96x96 lip crops (average-pooled to 24x24, pixel
/// values scaled to [0,1], then one linear map). Frozen parameters.
VisualFeatures EmbedVisual(const Model& m, const io::FrameStack& crops);
/// The "video inputs are set to zero" case: one all-zero feature row.
VisualFeatures AbsentVisual(const Model& m);

struct Transcription {
  std::vector<int> token_ids;  // includes SOT/LANG prefix and final EOT if hit
  std::string text;            // concatenated non-special tokens
};

/// Greedy argmax decoding from [SOT, LANG] until EOT or max_text_len. The
/// projection layer is applied iff speech_type is whisper; the visual path
/// is used iff `fusion` (stage-2 models).
Transcription GreedyTranscribe(const Model& m, const Mat& mel,
                               const VisualFeatures& visual,
                               corpus::SpeechType speech_type,
                               corpus::Language language, bool fusion,
                               double logit_scale = 1.0);

/// Lowest index wins ties.
int ArgmaxRow(const Mat& mat, Eigen::Index row);

// --- checkpoints -----------------------------------------------------------

void SaveCheckpoint(const Model& m, const std::string& path);
std::unique_ptr<Model> LoadCheckpoint(const std::string& path);

/// FNV-1a over the named parameter values (creation order); `stage` of 0
/// hashes everything, otherwise only that partition.
std::uint64_t ParamChecksum(const Model& m, int stage = 0);

}  // namespace avw::model

#endif  // AVWHISPER_MODEL_H_
