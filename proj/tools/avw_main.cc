// tools/avw_main.cc
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
// Command-line front end. Everything goes through the avwhisper C API; this
// file only parses arguments and prints results. Exit codes: 0 success,
// 1 validation/runtime failure, 2 usage error.

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "avwhisper/avwhisper.h"

namespace {

struct ManifestDeleter {
  void operator()(avw_manifest* m) const { avw_manifest_free(m); }
};
using ManifestPtr = std::unique_ptr<avw_manifest, ManifestDeleter>;

[[noreturn]] void Fail(avw_status status) {
  std::cerr << "error: " << avw_last_error() << " (status " << status << ")\n";
  std::exit(1);
}

void Check(avw_status status) {
  if (status != AVW_OK) Fail(status);
}

ManifestPtr LoadManifest(const std::string& path) {
  avw_manifest* m = nullptr;
  Check(avw_manifest_load(path.c_str(), &m));
  return ManifestPtr(m);
}

bool ParseRatios(const std::string& text, double out[3]) {
  double vals[3];
  int at = 0;
  std::size_t start = 0;
  while (at < 3) {
    const std::size_t colon = text.find(':', start);
    const std::string part = text.substr(start, colon - start);
    try {
      vals[at] = std::stod(part);
    } catch (...) {
      return false;
    }
    if (vals[at] <= 0) return false;
    ++at;
    if (colon == std::string::npos) break;
    start = colon + 1;
  }
  if (at != 3) return false;
  const double sum = vals[0] + vals[1] + vals[2];
  for (int i = 0; i < 3; ++i) out[i] = vals[i] / sum;
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"avwhisper: audio-visual whisper speech recognition toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value config file; flags override it");
  app.failure_message(CLI::FailureMessage::help);

  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "global RNG seed")->capture_default_str();

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  std::string synth_out, synth_manifest;
  int synth_speakers = 8, synth_utts = 20;
  synth->add_option("--out", synth_out, "output corpus directory")->required();
  synth->add_option("--speakers", synth_speakers, "number of speakers")
      ->capture_default_str();
  synth->add_option("--utts", synth_utts, "paired utterances per speaker")
      ->capture_default_str();
  synth->add_option("--manifest", synth_manifest,
                    "also save the manifest to this path");

  // prepare
  auto* prepare = app.add_subcommand("prepare", "build a manifest from a corpus directory");
  std::string prep_in, prep_out;
  prepare->add_option("--in", prep_in, "corpus directory")->required();
  prepare->add_option("--out", prep_out, "manifest output path")->required();

  // pair
  auto* pair = app.add_subcommand("pair", "pair whisper with normal utterances");
  std::string pair_manifest, pair_out;
  pair->add_option("--manifest", pair_manifest, "manifest path")->required();
  pair->add_option("--out", pair_out,
                   "output manifest (default: rewrite --manifest)");

  // stats
  auto* stats = app.add_subcommand("stats", "print corpus statistics");
  std::string stats_manifest;
  stats->add_option("--manifest", stats_manifest, "manifest path")->required();

  // split
  auto* split = app.add_subcommand("split", "speaker-disjoint train/valid/test split");
  std::string split_manifest, split_ratios = "4:1:1", split_prefix;
  split->add_option("--manifest", split_manifest, "manifest path")->required();
  split->add_option("--ratios", split_ratios, "train:valid:test ratios")
      ->capture_default_str();
  split->add_option("--out-prefix", split_prefix,
                    "output prefix (writes <prefix>.{train,valid,test}.jsonl)")
      ->required();

  // crop-lips
  auto* crop = app.add_subcommand("crop-lips", "extract 96x96 lip crops");
  std::string crop_manifest, crop_out;
  bool crop_no_smooth = false;
  crop->add_option("--manifest", crop_manifest, "manifest path")->required();
  crop->add_option("--out", crop_out, "crop output directory")->required();
  crop->add_flag("--no-smooth", crop_no_smooth,
                 "disable the 5-frame moving average of crop centers");

  // featurize
  auto* feat = app.add_subcommand("featurize", "extract log-mel features");
  std::string feat_manifest, feat_out;
  int feat_mels = 80;
  feat->add_option("--manifest", feat_manifest, "manifest path")->required();
  feat->add_option("--out", feat_out, "feature cache directory")->required();
  feat->add_option("--n-mels", feat_mels, "mel bins")->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "train stage 1 or stage 2");
  std::string train_manifest, train_init, train_out, train_feats, train_crops,
      train_log;
  int train_stage = 1, train_epochs = -1, train_batch = -1, train_warmup = -1;
  int train_mels = -1, train_dmodel = -1, train_heads = -1, train_enc = -1,
      train_dec = -1;
  double train_lr = -1.0, train_clip = -1.0;
  train->add_option("--stage", train_stage, "training stage")
      ->check(CLI::IsMember({1, 2}))
      ->required();
  train->add_option("--manifest", train_manifest, "training manifest")
      ->required();
  train->add_option("--init", train_init,
                    "initial checkpoint (required for stage 2)");
  train->add_option("--out", train_out, "checkpoint output path")->required();
  train->add_option("--epochs", train_epochs,
                    "epochs (default 2 for stage 1, 4 for stage 2)");
  train->add_option("--batch", train_batch, "pairs per batch (default 8)");
  train->add_option("--lr", train_lr, "learning rate (default 1e-3)");
  train->add_option("--clip", train_clip,
                    "gradient clip norm (default 1.0, 0 disables)");
  train->add_option("--warmup", train_warmup, "linear warmup steps");
  train->add_option("--feats", train_feats, "feature cache directory");
  train->add_option("--crops", train_crops, "lip crop directory (stage 2)");
  train->add_option("--log", train_log, "step log TSV path");
  train->add_option("--n-mels", train_mels, "mel bins for a fresh model");
  train->add_option("--d-model", train_dmodel, "model width (default 64)");
  train->add_option("--heads", train_heads, "attention heads (default 4)");
  train->add_option("--enc-layers", train_enc, "encoder layers (default 2)");
  train->add_option("--dec-layers", train_dec, "decoder layers (default 2)");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "transcribe and score a manifest");
  std::string eval_manifest, eval_ckpt, eval_unit = "char", eval_lang = "zh";
  std::string eval_report, eval_feats, eval_crops, eval_hyps;
  eval->add_option("--manifest", eval_manifest, "manifest path")->required();
  eval->add_option("--ckpt", eval_ckpt, "model checkpoint");
  eval->add_option("--unit", eval_unit, "char|word")
      ->check(CLI::IsMember({"char", "word"}))
      ->capture_default_str();
  eval->add_option("--language", eval_lang, "zh|en")
      ->check(CLI::IsMember({"zh", "en"}))
      ->capture_default_str();
  eval->add_option("--report", eval_report, "per-utterance report path");
  eval->add_option("--feats", eval_feats, "feature cache directory");
  eval->add_option("--crops", eval_crops, "lip crop directory");
  eval->add_option("--hyps", eval_hyps,
                   "score these hypotheses (TSV utt_id<TAB>text) instead of "
                   "decoding");

  // transcribe
  auto* tr = app.add_subcommand("transcribe", "transcribe one WAV file");
  std::string tr_ckpt, tr_wav, tr_crops, tr_type = "normal", tr_lang = "zh";
  tr->add_option("--ckpt", tr_ckpt, "model checkpoint")->required();
  tr->add_option("--wav", tr_wav, "input audio")->required();
  tr->add_option("--crops", tr_crops, "96x96 lip crop stack for this utterance");
  tr->add_option("--speech-type", tr_type, "whisper|normal")
      ->check(CLI::IsMember({"whisper", "normal"}))
      ->capture_default_str();
  tr->add_option("--language", tr_lang, "zh|en")
      ->check(CLI::IsMember({"zh", "en"}))
      ->capture_default_str();

  for (CLI::App* sub :
       {synth, prepare, pair, stats, split, crop, feat, train, eval, tr})
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (synth->parsed()) {
    avw_manifest* m = nullptr;
    Check(avw_synth_corpus(synth_out.c_str(), synth_speakers, synth_utts, seed,
                           &m));
    ManifestPtr holder(m);
    if (!synth_manifest.empty())
      Check(avw_manifest_save(m, synth_manifest.c_str()));
    int64_t records = 0;
    Check(avw_manifest_counts(m, &records, nullptr, nullptr));
    std::cout << "wrote synthetic corpus with " << records
              << " utterances to " << synth_out << '\n';
  } else if (prepare->parsed()) {
    avw_manifest* m = nullptr;
    Check(avw_manifest_prepare_dir(prep_in.c_str(), &m));
    ManifestPtr holder(m);
    Check(avw_manifest_save(m, prep_out.c_str()));
    int64_t records = 0;
    Check(avw_manifest_counts(m, &records, nullptr, nullptr));
    std::cout << "prepared manifest with " << records << " records to "
              << prep_out << '\n';
  } else if (pair->parsed()) {
    ManifestPtr m = LoadManifest(pair_manifest);
    avw_manifest* paired = nullptr;
    Check(avw_manifest_pair(m.get(), &paired));
    ManifestPtr holder(paired);
    const std::string out = pair_out.empty() ? pair_manifest : pair_out;
    Check(avw_manifest_save(paired, out.c_str()));
    int64_t pairs = 0, unpaired = 0;
    Check(avw_manifest_counts(paired, nullptr, &pairs, &unpaired));
    std::cout << "paired " << pairs << " utterances (" << unpaired
              << " left unpaired) -> " << out << '\n';
  } else if (stats->parsed()) {
    ManifestPtr m = LoadManifest(stats_manifest);
    char* table = nullptr;
    Check(avw_manifest_stats_render(m.get(), &table));
    std::cout << table;
    avw_string_free(table);
  } else if (split->parsed()) {
    double ratios[3];
    if (!ParseRatios(split_ratios, ratios)) {
      std::cerr << "error: --ratios wants three positive numbers like 4:1:1\n";
      return 2;
    }
    ManifestPtr m = LoadManifest(split_manifest);
    avw_manifest *a = nullptr, *b = nullptr, *c = nullptr;
    Check(avw_manifest_split(m.get(), ratios[0], ratios[1], ratios[2], seed,
                             &a, &b, &c));
    ManifestPtr ha(a), hb(b), hc(c);
    const char* names[3] = {"train", "valid", "test"};
    avw_manifest* outs[3] = {a, b, c};
    for (int i = 0; i < 3; ++i) {
      const std::string path = split_prefix + "." + names[i] + ".jsonl";
      Check(avw_manifest_save(outs[i], path.c_str()));
      int64_t records = 0;
      Check(avw_manifest_counts(outs[i], &records, nullptr, nullptr));
      std::cout << names[i] << ": " << records << " records -> " << path
                << '\n';
    }
  } else if (crop->parsed()) {
    ManifestPtr m = LoadManifest(crop_manifest);
    Check(avw_crop_lips(m.get(), crop_out.c_str(), crop_no_smooth ? 0 : 1));
    std::cout << "lip crops written to " << crop_out << '\n';
  } else if (feat->parsed()) {
    ManifestPtr m = LoadManifest(feat_manifest);
    Check(avw_featurize(m.get(), feat_out.c_str(), feat_mels));
    std::cout << "features written to " << feat_out << '\n';
  } else if (train->parsed()) {
    if (train_stage == 2 && train_init.empty()) {
      std::cerr << "error: train --stage 2 requires --init with the stage-1 "
                   "checkpoint to finetune from\n";
      return 1;
    }
    ManifestPtr m = LoadManifest(train_manifest);
    avw_train_options o{};
    o.stage = train_stage;
    o.epochs = train_epochs;
    o.batch_pairs = train_batch;
    o.lr = train_lr;
    o.seed = seed;
    o.grad_clip = train_clip;
    o.warmup_steps = train_warmup;
    o.n_mels = train_mels;
    o.d_model = train_dmodel;
    o.n_heads = train_heads;
    o.enc_layers = train_enc;
    o.dec_layers = train_dec;
    o.feats_dir = train_feats.empty() ? nullptr : train_feats.c_str();
    o.crops_dir = train_crops.empty() ? nullptr : train_crops.c_str();
    o.init_ckpt = train_init.empty() ? nullptr : train_init.c_str();
    o.log_path = train_log.empty() ? nullptr : train_log.c_str();
    Check(avw_train(m.get(), &o, train_out.c_str()));
    std::cout << "stage-" << train_stage << " checkpoint written to "
              << train_out << '\n';
  } else if (eval->parsed()) {
    ManifestPtr m = LoadManifest(eval_manifest);
    if (eval_ckpt.empty() && eval_hyps.empty()) {
      std::cerr << "error: evaluate needs --ckpt (or --hyps)\n";
      return 1;
    }
    avw_eval_options o{};
    o.unit = eval_unit.c_str();
    o.language = eval_lang.c_str();
    o.feats_dir = eval_feats.empty() ? nullptr : eval_feats.c_str();
    o.crops_dir = eval_crops.empty() ? nullptr : eval_crops.c_str();
    o.hyps_path = eval_hyps.empty() ? nullptr : eval_hyps.c_str();
    o.report_path = eval_report.empty() ? nullptr : eval_report.c_str();
    double aggregate = 0.0;
    char* summary = nullptr;
    Check(avw_evaluate(m.get(), eval_ckpt.empty() ? nullptr : eval_ckpt.c_str(),
                       &o, &aggregate, &summary));
    std::cout << summary;
    avw_string_free(summary);
  } else if (tr->parsed()) {
    avw_model* model = nullptr;
    Check(avw_model_load(tr_ckpt.c_str(), &model));
    char* text = nullptr;
    const avw_status st =
        avw_transcribe(model, tr_wav.c_str(),
                       tr_crops.empty() ? nullptr : tr_crops.c_str(),
                       tr_type.c_str(), tr_lang.c_str(), &text);
    if (st != AVW_OK) {
      avw_model_free(model);
      Fail(st);
    }
    std::cout << text << '\n';
    avw_string_free(text);
    avw_model_free(model);
  }
  return 0;
}
