// src/avw/eval.h
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
// CER/WER scoring. Rates are corpus level: sum(S+D+I) / sum(reference
// length), not the mean of per-utterance rates. Normalization: zh strips
// whitespace; en lowercases and strips ASCII punctuation. The char unit
// tokenizes to Unicode code points, the word unit splits on whitespace.

#ifndef AVWHISPER_EVAL_H_
#define AVWHISPER_EVAL_H_

#include <optional>
#include <string>
#include <vector>

#include "avw/corpus.h"

namespace avw::eval {

enum class Unit { kChar, kWord };

struct EditOps {
  int sub = 0;
  int del = 0;
  int ins = 0;
  int total() const { return sub + del + ins; }
};

/// Minimal-cost alignment under unit costs; ties in the backtrace prefer
/// substitution over deletion over insertion, so the reported split is
/// deterministic (the total is alignment-independent).
EditOps ComputeEditOps(const std::vector<std::string>& ref,
                       const std::vector<std::string>& hyp);

std::string NormalizeText(const std::string& text, corpus::Language language);
std::vector<std::string> Tokenize(const std::string& normalized, Unit unit);

struct UttScore {
  std::string utt_id;
  corpus::SpeechType speech_type = corpus::SpeechType::kNormal;
  EditOps ops;
  int ref_len = 0;
  std::optional<double> error_rate;  // empty for excluded (empty-ref) utts
};

struct EvalReport {
  std::vector<UttScore> per_utt;
  double aggregate = 0.0;
  std::optional<double> aggregate_whisper;
  std::optional<double> aggregate_normal;
  int excluded_empty_refs = 0;
  Unit unit = Unit::kChar;
  corpus::Language language = corpus::Language::kZh;
};

struct RefHyp {
  std::string utt_id;
  corpus::SpeechType speech_type = corpus::SpeechType::kNormal;
  std::string ref;
  std::string hyp;
};

/// unit=word is rejected for zh. Empty (after normalization) references are
/// excluded from every aggregate and counted in excluded_empty_refs.
EvalReport ScoreCorpus(const std::vector<RefHyp>& items,
                       corpus::Language language, Unit unit);

std::string RenderSummary(const EvalReport& report);
/// JSON lines: one object per utterance plus a final summary object.
void WriteReport(const EvalReport& report, const std::string& path);

}  // namespace avw::eval

#endif  // AVWHISPER_EVAL_H_
