// src/avw/train.cc
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

#include "avw/train.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <unordered_map>
#include <unordered_set>

#include "avw/features.h"
#include "avw/util.h"

namespace avw::train {

namespace fs = std::filesystem;

UttTensors MakeUttTensors(const model::Model& m,
                          const corpus::UtteranceRecord& rec,
                          const std::string& feats_dir,
                          const std::string& crops_dir) {
  UttTensors t;
  t.speech_type = rec.speech_type;
  t.mel = features::MelFromBlobOrWav(feats_dir, rec.utt_id, rec.audio_path,
                                     m.config.n_mels);
  const std::vector<int> chars = m.EncodeText(rec.text);
  t.tokens = {model::kSotId, model::LanguageTokenId(rec.language)};
  t.tokens.insert(t.tokens.end(), chars.begin(), chars.end());
  if (static_cast<int>(t.tokens.size()) + 1 > m.config.max_text_len)
    Throw(ErrorCode::kValidation,
          "transcript of \"" + rec.utt_id + "\" exceeds max_text_len");
  t.targets.assign(t.tokens.begin() + 1, t.tokens.end());
  t.targets.push_back(model::kEotId);
  if (!crops_dir.empty() && rec.has_video()) {
    const fs::path crop_path = fs::path(crops_dir) / (rec.utt_id + ".crop");
    if (!fs::exists(crop_path))
      Throw(ErrorCode::kNotFound,
            "no lip crops for \"" + rec.utt_id + "\" in " + crops_dir);
    t.visual = model::EmbedVisual(m, io::ReadFrameStack(crop_path.string()));
  } else {
    t.visual = model::AbsentVisual(m);
  }
  return t;
}

namespace {

// CE sum node + token count for one utterance.
struct UttLoss {
  int sum_node = -1;
  int count = 0;
};

UttLoss BuildUttLoss(Tape& tape, const model::Model& m, const UttTensors& u,
                     bool fusion) {
  int enc = BuildEncoder(tape, m, tape.Leaf(u.mel));
  if (u.speech_type == corpus::SpeechType::kWhisper)
    enc = BuildProjection(tape, m, enc);
  const int logits =
      BuildDecoder(tape, m, enc, u.visual.frames, u.tokens, fusion);
  UttLoss out;
  out.sum_node =
      tape.CrossEntropyRows(logits, u.targets, model::kPadId, &out.count);
  return out;
}

}  // namespace

BatchGraph BuildBatchLoss(Tape& tape, const model::Model& m,
                          const std::vector<BatchItem>& batch, int stage,
                          BranchFilter branches) {
  if (batch.empty()) Throw(ErrorCode::kInvalidArg, "empty batch");
  if (stage != 1 && stage != 2)
    Throw(ErrorCode::kInvalidArg, "stage must be 1 or 2");
  const bool fusion = stage == 2;

  BatchGraph g;
  int sum_w = -1, sum_n = -1;
  for (const BatchItem& item : batch) {
    if (!item.whisper && !item.normal)
      Throw(ErrorCode::kInvalidArg, "batch item with no members");
    if (item.whisper && branches != BranchFilter::kNormalOnly) {
      const UttLoss l = BuildUttLoss(tape, m, *item.whisper, fusion);
      sum_w = sum_w < 0 ? l.sum_node : tape.Add(sum_w, l.sum_node);
      g.tokens_w += l.count;
    }
    if (item.normal && branches != BranchFilter::kWhisperOnly) {
      const UttLoss l = BuildUttLoss(tape, m, *item.normal, fusion);
      sum_n = sum_n < 0 ? l.sum_node : tape.Add(sum_n, l.sum_node);
      g.tokens_n += l.count;
    }
  }
  g.l_w = g.tokens_w > 0 ? tape.Scale(sum_w, 1.0 / g.tokens_w) : tape.Zero11();
  g.l_n = g.tokens_n > 0 ? tape.Scale(sum_n, 1.0 / g.tokens_n) : tape.Zero11();
  g.l_total = tape.Add(g.l_w, g.l_n);
  return g;
}

LossBreakdown BatchLoss(const model::Model& m,
                        const std::vector<BatchItem>& batch, int stage) {
  Tape tape;
  const BatchGraph g = BuildBatchLoss(tape, m, batch, stage);
  return {tape.value(g.l_w)(0, 0), tape.value(g.l_n)(0, 0),
          tape.value(g.l_total)(0, 0)};
}

AdamOptimizer::AdamOptimizer(std::vector<Param*> params, double lr,
                             double grad_clip, int warmup_steps)
    : params_(std::move(params)), lr_(lr), clip_(grad_clip),
      warmup_(warmup_steps) {
  if (lr_ <= 0.0) Throw(ErrorCode::kInvalidArg, "learning rate must be > 0");
  for (Param* p : params_) {
    p->adam_m.setZero(p->value.rows(), p->value.cols());
    p->adam_v.setZero(p->value.rows(), p->value.cols());
  }
}

void AdamOptimizer::Step() {
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  ++t_;
  if (clip_ > 0.0) {
    double sq = 0.0;
    for (Param* p : params_)
      if (p->grad.size() > 0) sq += p->grad.squaredNorm();
    const double norm = std::sqrt(sq);
    if (norm > clip_) {
      const double scale = clip_ / norm;
      for (Param* p : params_)
        if (p->grad.size() > 0) p->grad *= scale;
    }
  }
  double lr = lr_;
  if (warmup_ > 0 && t_ < warmup_) lr *= static_cast<double>(t_) / warmup_;
  const double bias_corr =
      std::sqrt(1.0 - std::pow(kBeta2, t_)) / (1.0 - std::pow(kBeta1, t_));
  for (Param* p : params_) {
    if (p->grad.size() == 0) p->ZeroGrad();
    p->adam_m = kBeta1 * p->adam_m + (1.0 - kBeta1) * p->grad;
    p->adam_v =
        kBeta2 * p->adam_v.array() + (1.0 - kBeta2) * p->grad.array().square();
    p->value.array() -= lr * bias_corr * p->adam_m.array() /
                        (p->adam_v.array().sqrt() + kEps);
  }
}

std::vector<BatchItem> AssembleItems(const model::Model& m,
                                     const corpus::PairedManifest& manifest,
                                     const std::string& feats_dir,
                                     const std::string& crops_dir) {
  std::unordered_map<std::string, const corpus::UtteranceRecord*> by_id;
  for (const auto& r : manifest.records) by_id[r.utt_id] = &r;
  auto tensors = [&](const std::string& id) {
    auto it = by_id.find(id);
    if (it == by_id.end())
      Throw(ErrorCode::kValidation, "manifest references missing utt " + id);
    return MakeUttTensors(m, *it->second, feats_dir, crops_dir);
  };

  std::vector<BatchItem> items;
  std::unordered_set<std::string> referenced_normals;
  for (const auto& p : manifest.pairs) {
    BatchItem item;
    item.whisper = tensors(p.whisper);
    item.normal = tensors(p.normal);
    items.push_back(std::move(item));
    referenced_normals.insert(p.normal);
  }
  for (const auto& id : manifest.unpaired) {
    BatchItem item;
    item.whisper = tensors(id);
    items.push_back(std::move(item));
  }
  for (const auto& r : manifest.records) {
    if (r.speech_type != corpus::SpeechType::kNormal) continue;
    if (referenced_normals.count(r.utt_id)) continue;
    BatchItem item;
    item.normal = tensors(r.utt_id);
    items.push_back(std::move(item));
  }
  return items;
}

namespace {

std::vector<StepLog> RunTraining(model::Model& m,
                                 std::vector<BatchItem> items,
                                 const TrainConfig& cfg, int stage,
                                 const StepCallback& on_step) {
  if (items.empty()) Throw(ErrorCode::kValidation, "empty training set");
  if (cfg.epochs < 1) Throw(ErrorCode::kInvalidArg, "epochs must be >= 1");
  if (cfg.batch_pairs < 1)
    Throw(ErrorCode::kInvalidArg, "batch_pairs must be >= 1");

  AdamOptimizer opt(m.params.OfStage(stage), cfg.lr, cfg.grad_clip,
                    cfg.warmup_steps);
  std::vector<StepLog> curve;
  std::vector<int> order(items.size());
  for (std::size_t i = 0; i < items.size(); ++i)
    order[i] = static_cast<int>(i);

  int step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng = Rng::Derive(cfg.seed, 0xe90c4ULL + static_cast<std::uint64_t>(epoch));
    rng.Shuffle(order);
    for (std::size_t at = 0; at < order.size();
         at += static_cast<std::size_t>(cfg.batch_pairs)) {
      std::vector<BatchItem> batch;
      for (std::size_t i = at;
           i < std::min(order.size(),
                        at + static_cast<std::size_t>(cfg.batch_pairs));
           ++i)
        batch.push_back(items[static_cast<std::size_t>(order[i])]);

      m.params.ZeroGrads();
      Tape tape;
      const BatchGraph g =
          BuildBatchLoss(tape, m, batch, stage, cfg.branches);
      tape.Backward(g.l_total);
      opt.Step();

      StepLog log;
      log.step = ++step;
      log.loss = {tape.value(g.l_w)(0, 0), tape.value(g.l_n)(0, 0),
                  tape.value(g.l_total)(0, 0)};
      if (on_step) on_step(log);
      curve.push_back(log);
    }
  }
  return curve;
}

}  // namespace

std::vector<StepLog> TrainStage1(model::Model& m,
                                 const corpus::PairedManifest& manifest,
                                 const TrainConfig& cfg,
                                 const std::string& feats_dir,
                                 const StepCallback& on_step) {
  if (cfg.stage != 1) Throw(ErrorCode::kInvalidArg, "TrainStage1 wants stage=1");
  // No video flows in stage 1; crops are never read.
  auto items = AssembleItems(m, manifest, feats_dir, "");
  return RunTraining(m, std::move(items), cfg, 1, on_step);
}

std::vector<StepLog> TrainStage2(model::Model& m,
                                 const corpus::PairedManifest& manifest,
                                 const TrainConfig& cfg,
                                 const std::string& feats_dir,
                                 const std::string& crops_dir,
                                 const StepCallback& on_step) {
  if (cfg.stage != 2) Throw(ErrorCode::kInvalidArg, "TrainStage2 wants stage=2");
  if (m.stage != 2)
    Throw(ErrorCode::kValidation,
          "stage-2 training needs a model with fusion parameters (load a "
          "stage-1 checkpoint and add gates first)");
  auto items = AssembleItems(m, manifest, feats_dir, crops_dir);
  return RunTraining(m, std::move(items), cfg, 2, on_step);
}

}  // namespace avw::train
