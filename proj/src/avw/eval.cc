// src/avw/eval.cc
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

#include "avw/eval.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "avw/util.h"

namespace avw::eval {

using nlohmann::json;

EditOps ComputeEditOps(const std::vector<std::string>& ref,
                       const std::vector<std::string>& hyp) {
  const int nr = static_cast<int>(ref.size());
  const int nh = static_cast<int>(hyp.size());
  // d[i][j]: cost of aligning ref[0..i) with hyp[0..j).
  std::vector<std::vector<int>> d(static_cast<std::size_t>(nr) + 1,
                                  std::vector<int>(static_cast<std::size_t>(nh) + 1));
  for (int i = 0; i <= nr; ++i) d[static_cast<std::size_t>(i)][0] = i;
  for (int j = 0; j <= nh; ++j) d[0][static_cast<std::size_t>(j)] = j;
  for (int i = 1; i <= nr; ++i)
    for (int j = 1; j <= nh; ++j) {
      const int sub_cost =
          d[static_cast<std::size_t>(i) - 1][static_cast<std::size_t>(j) - 1] +
          (ref[static_cast<std::size_t>(i) - 1] == hyp[static_cast<std::size_t>(j) - 1] ? 0 : 1);
      const int del_cost =
          d[static_cast<std::size_t>(i) - 1][static_cast<std::size_t>(j)] + 1;
      const int ins_cost =
          d[static_cast<std::size_t>(i)][static_cast<std::size_t>(j) - 1] + 1;
      d[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          std::min(sub_cost, std::min(del_cost, ins_cost));
    }
  // Backtrace, preferring substitution/match, then deletion, then insertion.
  EditOps ops;
  int i = nr, j = nh;
  while (i > 0 || j > 0) {
    const int cur = d[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    if (i > 0 && j > 0) {
      const bool match = ref[static_cast<std::size_t>(i) - 1] ==
                         hyp[static_cast<std::size_t>(j) - 1];
      const int diag =
          d[static_cast<std::size_t>(i) - 1][static_cast<std::size_t>(j) - 1];
      if (cur == diag + (match ? 0 : 1)) {
        if (!match) ++ops.sub;
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 &&
        cur == d[static_cast<std::size_t>(i) - 1][static_cast<std::size_t>(j)] + 1) {
      ++ops.del;
      --i;
      continue;
    }
    ++ops.ins;
    --j;
  }
  return ops;
}

std::string NormalizeText(const std::string& text, corpus::Language language) {
  std::vector<char32_t> out;
  for (char32_t cp : DecodeUtf8(text)) {
    if (language == corpus::Language::kZh) {
      if (IsUnicodeSpace(cp)) continue;
      out.push_back(cp);
    } else {
      if (cp < 0x80 && std::ispunct(static_cast<int>(cp))) continue;
      if (cp >= 'A' && cp <= 'Z') cp = cp - 'A' + 'a';
      out.push_back(cp);
    }
  }
  return EncodeUtf8(out);
}

std::vector<std::string> Tokenize(const std::string& normalized, Unit unit) {
  std::vector<std::string> tokens;
  if (unit == Unit::kChar) {
    for (char32_t cp : DecodeUtf8(normalized)) tokens.push_back(EncodeUtf8(cp));
    return tokens;
  }
  std::string word;
  for (char32_t cp : DecodeUtf8(normalized)) {
    if (IsUnicodeSpace(cp)) {
      if (!word.empty()) tokens.push_back(std::move(word));
      word.clear();
    } else {
      word += EncodeUtf8(cp);
    }
  }
  if (!word.empty()) tokens.push_back(std::move(word));
  return tokens;
}

EvalReport ScoreCorpus(const std::vector<RefHyp>& items,
                       corpus::Language language, Unit unit) {
  if (language == corpus::Language::kZh && unit == Unit::kWord)
    Throw(ErrorCode::kInvalidArg,
          "word unit is not defined for zh; use the char unit");
  EvalReport report;
  report.unit = unit;
  report.language = language;
  long err_all = 0, len_all = 0;
  long err_w = 0, len_w = 0, err_n = 0, len_n = 0;
  bool any_w = false, any_n = false;
  for (const auto& item : items) {
    const auto ref = Tokenize(NormalizeText(item.ref, language), unit);
    const auto hyp = Tokenize(NormalizeText(item.hyp, language), unit);
    UttScore score;
    score.utt_id = item.utt_id;
    score.speech_type = item.speech_type;
    score.ref_len = static_cast<int>(ref.size());
    if (ref.empty()) {
      ++report.excluded_empty_refs;
      report.per_utt.push_back(score);
      continue;
    }
    score.ops = ComputeEditOps(ref, hyp);
    score.error_rate =
        static_cast<double>(score.ops.total()) / score.ref_len;
    err_all += score.ops.total();
    len_all += score.ref_len;
    if (item.speech_type == corpus::SpeechType::kWhisper) {
      any_w = true;
      err_w += score.ops.total();
      len_w += score.ref_len;
    } else {
      any_n = true;
      err_n += score.ops.total();
      len_n += score.ref_len;
    }
    report.per_utt.push_back(score);
  }
  report.aggregate =
      len_all > 0 ? static_cast<double>(err_all) / len_all : 0.0;
  if (any_w)
    report.aggregate_whisper = static_cast<double>(err_w) / len_w;
  if (any_n) report.aggregate_normal = static_cast<double>(err_n) / len_n;
  return report;
}

std::string RenderSummary(const EvalReport& report) {
  const char* metric = report.unit == Unit::kChar ? "CER" : "WER";
  long err = 0, len = 0;
  int scored = 0;
  for (const auto& u : report.per_utt) {
    if (!u.error_rate) continue;
    err += u.ops.total();
    len += u.ref_len;
    ++scored;
  }
  std::ostringstream out;
  out << "== evaluation summary ==\n";
  out << "language: " << corpus::ToString(report.language)
      << "  unit: " << (report.unit == Unit::kChar ? "char" : "word") << '\n';
  out << "utterances scored: " << scored;
  if (report.excluded_empty_refs > 0)
    out << "  (" << report.excluded_empty_refs
        << " excluded: empty reference)";
  out << '\n';
  out << "aggregate " << metric << ": " << FormatDouble(report.aggregate, 6)
      << "  (errors " << err << " / ref length " << len << ")\n";
  if (report.aggregate_whisper)
    out << "whisper " << metric << ": "
        << FormatDouble(*report.aggregate_whisper, 6) << '\n';
  if (report.aggregate_normal)
    out << "normal " << metric << ": "
        << FormatDouble(*report.aggregate_normal, 6) << '\n';
  return out.str();
}

void WriteReport(const EvalReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) Throw(ErrorCode::kIo, "cannot create report: " + path);
  for (const auto& u : report.per_utt) {
    json j;
    j["type"] = "utt";
    j["utt_id"] = u.utt_id;
    j["speech_type"] = corpus::ToString(u.speech_type);
    j["substitutions"] = u.ops.sub;
    j["deletions"] = u.ops.del;
    j["insertions"] = u.ops.ins;
    j["ref_len"] = u.ref_len;
    j["error_rate"] = u.error_rate ? json(*u.error_rate) : json(nullptr);
    out << j.dump() << '\n';
  }
  json s;
  s["type"] = "summary";
  s["unit"] = report.unit == Unit::kChar ? "char" : "word";
  s["language"] = corpus::ToString(report.language);
  s["aggregate"] = report.aggregate;
  s["aggregate_whisper"] =
      report.aggregate_whisper ? json(*report.aggregate_whisper) : json(nullptr);
  s["aggregate_normal"] =
      report.aggregate_normal ? json(*report.aggregate_normal) : json(nullptr);
  s["excluded_empty_refs"] = report.excluded_empty_refs;
  out << s.dump() << '\n';
  if (!out) Throw(ErrorCode::kIo, "failed writing report: " + path);
}

}  // namespace avw::eval
