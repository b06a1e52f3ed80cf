// src/avw/capi.cc
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

#include "avwhisper/avwhisper.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <unordered_map>

#include "avw/corpus.h"
#include "avw/eval.h"
#include "avw/features.h"
#include "avw/io.h"
#include "avw/lipgeom.h"
#include "avw/model.h"
#include "avw/synth.h"
#include "avw/train.h"
#include "avw/util.h"

namespace fs = std::filesystem;

struct avw_manifest {
  avw::corpus::PairedManifest m;
};

struct avw_model {
  std::unique_ptr<avw::model::Model> m;
};

namespace {

thread_local std::string g_last_error;

avw_status StatusOf(avw::ErrorCode code) {
  switch (code) {
    case avw::ErrorCode::kInvalidArg: return AVW_ERR_INVALID_ARG;
    case avw::ErrorCode::kIo: return AVW_ERR_IO;
    case avw::ErrorCode::kParse: return AVW_ERR_PARSE;
    case avw::ErrorCode::kValidation: return AVW_ERR_VALIDATION;
    case avw::ErrorCode::kNotFound: return AVW_ERR_NOT_FOUND;
    default: return AVW_ERR_INTERNAL;
  }
}

template <typename Fn>
avw_status Guard(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return AVW_OK;
  } catch (const avw::Error& e) {
    g_last_error = e.what();
    return StatusOf(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return AVW_ERR_INTERNAL;
  }
}

char* DupString(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void RequireArg(bool ok, const char* what) {
  if (!ok) avw::Throw(avw::ErrorCode::kInvalidArg, what);
}

std::string OrEmpty(const char* s) { return s ? std::string(s) : std::string(); }

// Hypotheses file: one "utt_id<TAB>text" line per utterance.
std::unordered_map<std::string, std::string> LoadHyps(const std::string& path) {
  std::ifstream in(path);
  if (!in) avw::Throw(avw::ErrorCode::kIo, "cannot open hypotheses: " + path);
  std::unordered_map<std::string, std::string> hyps;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      avw::Throw(avw::ErrorCode::kParse,
                 path + ":" + std::to_string(line_no) +
                     ": expected utt_id<TAB>text");
    hyps[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return hyps;
}

avw::model::VisualFeatures VisualFor(const avw::model::Model& m,
                                     const avw::corpus::UtteranceRecord& rec,
                                     const std::string& crops_dir) {
  if (m.stage == 2 && !crops_dir.empty() && rec.has_video()) {
    const fs::path crop = fs::path(crops_dir) / (rec.utt_id + ".crop");
    if (fs::exists(crop))
      return avw::model::EmbedVisual(m, avw::io::ReadFrameStack(crop.string()));
  }
  return avw::model::AbsentVisual(m);
}

}  // namespace

extern "C" {

const char* avw_version(void) { return "0.1.0"; }

const char* avw_last_error(void) { return g_last_error.c_str(); }

void avw_string_free(char* s) { std::free(s); }

avw_status avw_manifest_load(const char* path, avw_manifest** out) {
  return Guard([&] {
    RequireArg(path && out, "avw_manifest_load: null argument");
    auto handle = std::make_unique<avw_manifest>();
    handle->m = avw::corpus::LoadManifest(path);
    *out = handle.release();
  });
}

avw_status avw_manifest_save(const avw_manifest* m, const char* path) {
  return Guard([&] {
    RequireArg(m && path, "avw_manifest_save: null argument");
    avw::corpus::SaveManifest(m->m, path);
  });
}

void avw_manifest_free(avw_manifest* m) { delete m; }

avw_status avw_manifest_prepare_dir(const char* dir, avw_manifest** out) {
  return Guard([&] {
    RequireArg(dir && out, "avw_manifest_prepare_dir: null argument");
    auto handle = std::make_unique<avw_manifest>();
    handle->m = avw::corpus::PrepareFromDir(dir);
    *out = handle.release();
  });
}

avw_status avw_manifest_pair(const avw_manifest* m, avw_manifest** out) {
  return Guard([&] {
    RequireArg(m && out, "avw_manifest_pair: null argument");
    auto handle = std::make_unique<avw_manifest>();
    handle->m = avw::corpus::PairUtterances(m->m);
    *out = handle.release();
  });
}

avw_status avw_manifest_counts(const avw_manifest* m, int64_t* out_records,
                               int64_t* out_pairs, int64_t* out_unpaired) {
  return Guard([&] {
    RequireArg(m != nullptr, "avw_manifest_counts: null manifest");
    if (out_records) *out_records = static_cast<int64_t>(m->m.records.size());
    if (out_pairs) *out_pairs = static_cast<int64_t>(m->m.pairs.size());
    if (out_unpaired)
      *out_unpaired = static_cast<int64_t>(m->m.unpaired.size());
  });
}

avw_status avw_manifest_stats_render(const avw_manifest* m, char** out_table) {
  return Guard([&] {
    RequireArg(m && out_table, "avw_manifest_stats_render: null argument");
    *out_table = DupString(avw::corpus::RenderStats(avw::corpus::ComputeStats(m->m)));
  });
}

avw_status avw_manifest_split(const avw_manifest* m, double train, double valid,
                              double test, uint64_t seed,
                              avw_manifest** out_train,
                              avw_manifest** out_valid,
                              avw_manifest** out_test) {
  return Guard([&] {
    RequireArg(m && out_train && out_valid && out_test,
               "avw_manifest_split: null argument");
    auto splits =
        avw::corpus::SplitBySpeaker(m->m, {train, valid, test}, seed);
    auto a = std::make_unique<avw_manifest>();
    auto b = std::make_unique<avw_manifest>();
    auto c = std::make_unique<avw_manifest>();
    a->m = std::move(splits[0]);
    b->m = std::move(splits[1]);
    c->m = std::move(splits[2]);
    *out_train = a.release();
    *out_valid = b.release();
    *out_test = c.release();
  });
}

avw_status avw_synth_corpus(const char* out_dir, int n_speakers, int n_utts,
                            uint64_t seed, avw_manifest** out) {
  return Guard([&] {
    RequireArg(out_dir != nullptr, "avw_synth_corpus: null out_dir");
    avw::synth::SynthOptions opts;
    opts.out_dir = out_dir;
    opts.n_speakers = n_speakers;
    opts.n_utts = n_utts;
    opts.seed = seed;
    auto manifest = avw::synth::MakeSyntheticCorpus(opts);
    if (out) {
      auto handle = std::make_unique<avw_manifest>();
      handle->m = std::move(manifest);
      *out = handle.release();
    }
  });
}

avw_status avw_sequence_similarity(const char* a_utf8, const char* b_utf8,
                                   double* out) {
  return Guard([&] {
    RequireArg(a_utf8 && b_utf8 && out, "avw_sequence_similarity: null argument");
    *out = avw::corpus::SequenceSimilarity(std::string(a_utf8),
                                           std::string(b_utf8));
  });
}

avw_status avw_crop_spec(double p1x, double p1y, double p2x, double p2y,
                         double p3x, double p3y, double* out_center_x,
                         double* out_center_y, double* out_width) {
  return Guard([&] {
    RequireArg(out_center_x && out_center_y && out_width,
               "avw_crop_spec: null output");
    const avw::lipgeom::LipCropSpec spec =
        avw::lipgeom::CropSpec({{p1x, p1y}, {p2x, p2y}, {p3x, p3y}});
    *out_center_x = spec.center.x;
    *out_center_y = spec.center.y;
    *out_width = spec.width;
  });
}

avw_status avw_crop_lips(const avw_manifest* m, const char* out_dir,
                         int smooth) {
  return Guard([&] {
    RequireArg(m && out_dir, "avw_crop_lips: null argument");
    avw::lipgeom::CropLips(m->m, out_dir, smooth != 0);
  });
}

avw_status avw_featurize(const avw_manifest* m, const char* out_dir,
                         int n_mels) {
  return Guard([&] {
    RequireArg(m && out_dir, "avw_featurize: null argument");
    avw::features::Featurize(m->m, out_dir,
                             n_mels > 0 ? n_mels : avw::features::kDefaultMels);
  });
}

avw_status avw_train(const avw_manifest* m, const avw_train_options* options,
                     const char* out_ckpt) {
  return Guard([&] {
    RequireArg(m && options && out_ckpt, "avw_train: null argument");
    const avw_train_options& o = *options;
    RequireArg(o.stage == 1 || o.stage == 2, "avw_train: stage must be 1 or 2");

    avw::train::TrainConfig cfg;
    cfg.stage = o.stage;
    cfg.epochs = o.epochs > 0 ? o.epochs : (o.stage == 1 ? 2 : 4);
    cfg.batch_pairs = o.batch_pairs > 0 ? o.batch_pairs : 8;
    cfg.lr = o.lr > 0 ? o.lr : 1e-3;
    cfg.seed = o.seed;
    cfg.grad_clip = o.grad_clip < 0 ? 1.0 : o.grad_clip;
    cfg.warmup_steps = o.warmup_steps > 0 ? o.warmup_steps : 0;

    std::unique_ptr<avw::model::Model> model;
    if (o.stage == 1) {
      avw::model::ModelConfig mc;
      if (o.d_model > 0) mc.d_model = o.d_model;
      if (o.n_heads > 0) mc.n_heads = o.n_heads;
      if (o.enc_layers > 0) mc.enc_layers = o.enc_layers;
      if (o.dec_layers > 0) mc.dec_layers = o.dec_layers;
      if (o.n_mels > 0) mc.n_mels = o.n_mels;
      std::vector<std::string> texts;
      for (const auto& r : m->m.records) texts.push_back(r.text);
      mc.vocab = avw::model::BuildVocab(texts);
      model = avw::model::CreateModel(mc, o.seed);
    } else {
      if (!o.init_ckpt || !*o.init_ckpt)
        avw::Throw(avw::ErrorCode::kInvalidArg,
                   "stage-2 training requires --init with the stage-1 "
                   "checkpoint to start from");
      model = avw::model::LoadCheckpoint(o.init_ckpt);
      if (model->stage == 1) avw::model::AddFusionParams(*model, o.seed);
    }

    std::ofstream log;
    if (o.log_path && *o.log_path) {
      log.open(o.log_path, std::ios::trunc);
      if (!log)
        avw::Throw(avw::ErrorCode::kIo,
                   std::string("cannot create step log: ") + o.log_path);
      log << "step\tL_w\tL_n\tL_total\n";
    }
    avw::train::StepCallback on_step = [&log](const avw::train::StepLog& s) {
      if (log.is_open())
        log << s.step << '\t' << s.loss.l_w << '\t' << s.loss.l_n << '\t'
            << s.loss.l_total << '\n';
    };

    if (o.stage == 1)
      avw::train::TrainStage1(*model, m->m, cfg, OrEmpty(o.feats_dir), on_step);
    else
      avw::train::TrainStage2(*model, m->m, cfg, OrEmpty(o.feats_dir),
                              OrEmpty(o.crops_dir), on_step);
    avw::model::SaveCheckpoint(*model, out_ckpt);
  });
}

avw_status avw_model_load(const char* path, avw_model** out) {
  return Guard([&] {
    RequireArg(path && out, "avw_model_load: null argument");
    auto handle = std::make_unique<avw_model>();
    handle->m = avw::model::LoadCheckpoint(path);
    *out = handle.release();
  });
}

void avw_model_free(avw_model* m) { delete m; }

avw_status avw_model_stage(const avw_model* m, int* out_stage) {
  return Guard([&] {
    RequireArg(m && out_stage, "avw_model_stage: null argument");
    *out_stage = m->m->stage;
  });
}

avw_status avw_transcribe(const avw_model* model, const char* wav_path,
                          const char* crops_path, const char* speech_type,
                          const char* language, char** out_text) {
  return Guard([&] {
    RequireArg(model && wav_path && speech_type && language && out_text,
               "avw_transcribe: null argument");
    const avw::model::Model& m = *model->m;
    const auto mel =
        avw::features::FeaturizeFile(wav_path, m.config.n_mels).frames;
    avw::model::VisualFeatures visual =
        crops_path && *crops_path
            ? avw::model::EmbedVisual(
                  m, avw::io::ReadFrameStack(crops_path))
            : avw::model::AbsentVisual(m);
    const auto result = avw::model::GreedyTranscribe(
        m, mel, visual, avw::corpus::SpeechTypeFromString(speech_type),
        avw::corpus::LanguageFromString(language), m.stage == 2);
    *out_text = DupString(result.text);
  });
}

avw_status avw_evaluate(const avw_manifest* m, const char* ckpt_path,
                        const avw_eval_options* options, double* out_aggregate,
                        char** out_summary) {
  return Guard([&] {
    RequireArg(m && options, "avw_evaluate: null argument");
    const avw_eval_options& o = *options;
    RequireArg(o.unit && o.language, "avw_evaluate: unit/language required");
    const std::string unit_str = o.unit;
    avw::eval::Unit unit;
    if (unit_str == "char")
      unit = avw::eval::Unit::kChar;
    else if (unit_str == "word")
      unit = avw::eval::Unit::kWord;
    else
      avw::Throw(avw::ErrorCode::kInvalidArg,
                 "unit must be \"char\" or \"word\"");
    const auto language = avw::corpus::LanguageFromString(o.language);

    std::unordered_map<std::string, std::string> hyps;
    std::unique_ptr<avw::model::Model> model;
    const bool use_hyps = o.hyps_path && *o.hyps_path;
    if (use_hyps) {
      hyps = LoadHyps(o.hyps_path);
    } else {
      RequireArg(ckpt_path != nullptr,
                 "avw_evaluate: a checkpoint (or --hyps) is required");
      model = avw::model::LoadCheckpoint(ckpt_path);
    }

    std::vector<avw::eval::RefHyp> items;
    for (const auto& rec : m->m.records) {
      avw::eval::RefHyp item;
      item.utt_id = rec.utt_id;
      item.speech_type = rec.speech_type;
      item.ref = rec.text;
      if (use_hyps) {
        auto it = hyps.find(rec.utt_id);
        if (it == hyps.end())
          avw::Throw(avw::ErrorCode::kNotFound,
                     "no hypothesis for utt \"" + rec.utt_id + "\"");
        item.hyp = it->second;
      } else {
        const auto mel = avw::features::MelFromBlobOrWav(
            OrEmpty(o.feats_dir), rec.utt_id, rec.audio_path,
            model->config.n_mels);
        const auto visual = VisualFor(*model, rec, OrEmpty(o.crops_dir));
        item.hyp = avw::model::GreedyTranscribe(
                       *model, mel, visual, rec.speech_type, rec.language,
                       model->stage == 2)
                       .text;
      }
      items.push_back(std::move(item));
    }
    const auto report = avw::eval::ScoreCorpus(items, language, unit);
    if (o.report_path && *o.report_path)
      avw::eval::WriteReport(report, o.report_path);
    if (out_aggregate) *out_aggregate = report.aggregate;
    if (out_summary) *out_summary = DupString(avw::eval::RenderSummary(report));
  });
}

avw_status avw_edit_ops(const char* ref_utf8, const char* hyp_utf8,
                        int64_t* out_sub, int64_t* out_del, int64_t* out_ins) {
  return Guard([&] {
    RequireArg(ref_utf8 && hyp_utf8, "avw_edit_ops: null argument");
    const auto ops = avw::eval::ComputeEditOps(
        avw::eval::Tokenize(ref_utf8, avw::eval::Unit::kChar),
        avw::eval::Tokenize(hyp_utf8, avw::eval::Unit::kChar));
    if (out_sub) *out_sub = ops.sub;
    if (out_del) *out_del = ops.del;
    if (out_ins) *out_ins = ops.ins;
  });
}

}  // extern "C"
