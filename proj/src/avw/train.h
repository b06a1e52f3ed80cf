// src/avw/train.h
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
// Two-stage training. Stage 1 optimizes L = L_w + L_n (mean token cross
// entropy per branch) through the shared encoder, updating every stage-1
// parameter; the whisper branch runs through the projection layer. Stage 2
// enables the gated visual path and updates only the stage-2 (fusion)
// parameters; records without video use zero visual features.
//
// Unpaired utterances contribute their single branch. Each batch member is
// processed through its own subgraph of one tape, so no audio padding is
// needed; PAD targets are masked out of the loss either way.

#ifndef AVWHISPER_TRAIN_H_
#define AVWHISPER_TRAIN_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "avw/corpus.h"
#include "avw/model.h"
#include "avw/tape.h"

namespace avw::train {

using nn::Mat;
using nn::Param;
using nn::Tape;

enum class BranchFilter { kBoth, kWhisperOnly, kNormalOnly };

struct TrainConfig {
  int stage = 1;
  int epochs = 2;  // stage-2 default is 4; the CLI fills these in
  int batch_pairs = 8;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  double grad_clip = 1.0;  // global norm; <= 0 disables
  int warmup_steps = 0;
  BranchFilter branches = BranchFilter::kBoth;  // ablation knob
};

struct LossBreakdown {
  double l_w = 0.0;
  double l_n = 0.0;
  double l_total = 0.0;
};

struct UttTensors {
  Mat mel;
  std::vector<int> tokens;   // [SOT, LANG, chars...]
  std::vector<int> targets;  // [LANG, chars..., EOT]
  model::VisualFeatures visual;
  corpus::SpeechType speech_type = corpus::SpeechType::kNormal;
};

struct BatchItem {
  std::optional<UttTensors> whisper;
  std::optional<UttTensors> normal;
};

/// Features (from `feats_dir` cache or the WAV) and token tensors for one
/// record; lip-crop features are attached when `crops_dir` is nonempty and
/// the record has video, otherwise the zero visual features.
UttTensors MakeUttTensors(const model::Model& m,
                          const corpus::UtteranceRecord& rec,
                          const std::string& feats_dir,
                          const std::string& crops_dir);

struct BatchGraph {
  int l_w = -1;
  int l_n = -1;
  int l_total = -1;
  int tokens_w = 0;
  int tokens_n = 0;
};

/// Builds the Eq.-3 style objective on `tape`: per-branch mean token cross
/// entropy (whisper branch through the projection layer), summed into
/// l_total. With stage 2 the gated visual path is enabled.
BatchGraph BuildBatchLoss(Tape& tape, const model::Model& m,
                          const std::vector<BatchItem>& batch, int stage,
                          BranchFilter branches = BranchFilter::kBoth);

/// Forward-only evaluation of the batch objective.
LossBreakdown BatchLoss(const model::Model& m,
                        const std::vector<BatchItem>& batch, int stage);

struct StepLog {
  int step = 0;
  LossBreakdown loss;
};

using StepCallback = std::function<void(const StepLog&)>;

/// Adam with global-norm gradient clipping over a fixed parameter set.
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<Param*> params, double lr, double grad_clip,
                int warmup_steps);
  void Step();
  int step_count() const { return t_; }

 private:
  std::vector<Param*> params_;
  double lr_;
  double clip_;
  int warmup_;
  int t_ = 0;
};

/// Batch schedule: pairs first, then unpaired whisper, then normal records
/// not referenced by any pair; shuffled per epoch from (seed, epoch).
std::vector<BatchItem> AssembleItems(const model::Model& m,
                                     const corpus::PairedManifest& manifest,
                                     const std::string& feats_dir,
                                     const std::string& crops_dir);

std::vector<StepLog> TrainStage1(model::Model& m,
                                 const corpus::PairedManifest& manifest,
                                 const TrainConfig& cfg,
                                 const std::string& feats_dir,
                                 const StepCallback& on_step = nullptr);

std::vector<StepLog> TrainStage2(model::Model& m,
                                 const corpus::PairedManifest& manifest,
                                 const TrainConfig& cfg,
                                 const std::string& feats_dir,
                                 const std::string& crops_dir,
                                 const StepCallback& on_step = nullptr);

}  // namespace avw::train

#endif  // AVWHISPER_TRAIN_H_
