// src/avw/corpus.h
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
// Utterance manifests: loading, validation, whisper<->normal pairing by
// textual similarity, speaker-disjoint splits, and corpus statistics.
//
// Manifest files are UTF-8 JSON lines. First line is a header object, then
// one object per record, then one per pair, then one per unpaired whisper id:
//   {"type":"header","format":"avw-manifest","version":1,"split":"train"}
//   {"type":"record","utt_id":...,"speaker_id":...,"speech_type":"whisper",
//    "text":...,"audio_path":...,"video_path":null,"landmarks_path":null,
//    "duration_s":1.5,"language":"zh"}
//   {"type":"pair","whisper":...,"normal":...,"similarity":0.75}
//   {"type":"unpaired","utt_id":...}

#ifndef AVWHISPER_CORPUS_H_
#define AVWHISPER_CORPUS_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace avw::corpus {

enum class SpeechType { kNormal, kWhisper };
enum class Language { kZh, kEn };
enum class Split { kTrain, kValid, kTest };

std::string ToString(SpeechType t);
std::string ToString(Language l);
std::string ToString(Split s);
SpeechType SpeechTypeFromString(const std::string& s);
Language LanguageFromString(const std::string& s);
Split SplitFromString(const std::string& s);

struct UtteranceRecord {
  std::string utt_id;
  std::string speaker_id;
  SpeechType speech_type = SpeechType::kNormal;
  std::string text;  // UTF-8 transcript
  std::string audio_path;
  std::optional<std::string> video_path;
  std::optional<std::string> landmarks_path;
  double duration_s = 0.0;
  Language language = Language::kZh;

  bool has_video() const { return video_path.has_value(); }
  bool operator==(const UtteranceRecord&) const = default;
};

struct UtterancePair {
  std::string whisper;
  std::string normal;
  double similarity = 0.0;
  bool operator==(const UtterancePair&) const = default;
};

struct PairedManifest {
  std::vector<UtteranceRecord> records;  // ordered by utt_id
  std::vector<UtterancePair> pairs;      // ordered by whisper utt_id
  std::vector<std::string> unpaired;     // whisper utt_ids, ordered
  Split split = Split::kTrain;

  const UtteranceRecord* Find(const std::string& utt_id) const;
  bool operator==(const PairedManifest&) const = default;
};

struct StatsRow {
  bool has_video = false;
  int num_speakers = 0;
  SpeechType speech_type = SpeechType::kNormal;
  double total_hours = 0.0;
  int num_utterances = 0;
};

struct CorpusStats {
  Split split = Split::kTrain;
  std::vector<StatsRow> rows;  // (video Yes N, Yes W, No N, No W), nonempty only
};

/// Ratcliff-Obershelp ratio over Unicode code points, 2*M/(|a|+|b|), with
/// M the total size of the recursive longest-matching-block decomposition
/// and junk filtering disabled (difflib SequenceMatcher semantics).
/// Both-empty inputs compare as identical: returns 1.0.
double SequenceSimilarity(const std::string& a_utf8, const std::string& b_utf8);
double SequenceSimilarity(const std::vector<char32_t>& a,
                          const std::vector<char32_t>& b);

PairedManifest LoadManifest(const std::string& path);
void SaveManifest(const PairedManifest& m, const std::string& path);

/// Validates every manifest invariant (unique ids, durations, video<->
/// landmarks, pair references/speakers/types, recomputed similarity,
/// whisper coverage by pairs+unpaired). Throws kValidation on the first
/// violation; `where` prefixes the message.
void ValidateManifest(const PairedManifest& m, const std::string& where);

/// For each whisper record, selects the same-speaker normal record with the
/// highest similarity (ties broken by smallest normal utt_id). Whisper
/// records of speakers without normal records are left unpaired.
PairedManifest PairUtterances(const PairedManifest& m);

CorpusStats ComputeStats(const PairedManifest& m);

/// Table-1 style rendering: columns Set, Video, Num of Spk, Type, Time (hrs),
/// Utterances; hours with 4 decimals.
std::string RenderStats(const CorpusStats& stats);

struct SplitRatios {
  double train = 0.0;
  double valid = 0.0;
  double test = 0.0;
};

/// Speaker-disjoint split. Speaker counts are apportioned by largest
/// remainder; assignment is a seeded shuffle of the sorted speaker list.
/// Throws if a split with positive ratio would receive zero speakers.
std::vector<PairedManifest> SplitBySpeaker(const PairedManifest& m,
                                           const SplitRatios& ratios,
                                           std::uint64_t seed);

/// Scans a raw corpus directory (an `utterances.tsv` plus the audio/video/
/// landmark files it references) and builds a validated manifest; durations
/// are read from the WAV headers. All whisper records start out unpaired.
PairedManifest PrepareFromDir(const std::string& dir);

}  // namespace avw::corpus

#endif  // AVWHISPER_CORPUS_H_
