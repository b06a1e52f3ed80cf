// src/avw/corpus.cc
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

#include "avw/corpus.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "avw/io.h"
#include "avw/util.h"

namespace avw::corpus {

namespace fs = std::filesystem;
using nlohmann::json;

std::string ToString(SpeechType t) {
  return t == SpeechType::kNormal ? "normal" : "whisper";
}
std::string ToString(Language l) { return l == Language::kZh ? "zh" : "en"; }
std::string ToString(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    default: return "test";
  }
}

SpeechType SpeechTypeFromString(const std::string& s) {
  if (s == "normal") return SpeechType::kNormal;
  if (s == "whisper") return SpeechType::kWhisper;
  Throw(ErrorCode::kParse, "unknown speech_type: \"" + s + "\"");
}
Language LanguageFromString(const std::string& s) {
  if (s == "zh") return Language::kZh;
  if (s == "en") return Language::kEn;
  Throw(ErrorCode::kParse, "unknown language: \"" + s + "\"");
}
Split SplitFromString(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "valid") return Split::kValid;
  if (s == "test") return Split::kTest;
  Throw(ErrorCode::kParse, "unknown split: \"" + s + "\"");
}

const UtteranceRecord* PairedManifest::Find(const std::string& utt_id) const {
  for (const auto& r : records)
    if (r.utt_id == utt_id) return &r;
  return nullptr;
}

// ---------------------------------------------------------------------------
// Ratcliff-Obershelp similarity (difflib semantics, junk disabled)
// ---------------------------------------------------------------------------

namespace {

struct MatchBlock {
  int a = 0, b = 0, size = 0;
};

// Longest matching block in a[alo,ahi) x b[blo,bhi). Ties resolve to the
// block starting earliest in a, then earliest in b, matching difflib's
// find_longest_match scan order.
MatchBlock FindLongestMatch(
    const std::vector<char32_t>& a, const std::vector<char32_t>& b,
    const std::unordered_map<char32_t, std::vector<int>>& b2j, int alo,
    int ahi, int blo, int bhi) {
  MatchBlock best{alo, blo, 0};
  std::vector<int> j2len(b.size() + 1, 0), newj2len(b.size() + 1, 0);
  for (int i = alo; i < ahi; ++i) {
    std::fill(newj2len.begin(), newj2len.end(), 0);
    auto it = b2j.find(a[i]);
    if (it != b2j.end()) {
      for (int j : it->second) {
        if (j < blo) continue;
        if (j >= bhi) break;
        const int k = (j > blo ? j2len[j - 1] : 0) + 1;
        newj2len[j] = k;
        if (k > best.size) best = {i - k + 1, j - k + 1, k};
      }
    }
    j2len.swap(newj2len);
  }
  return best;
}

int MatchedCount(const std::vector<char32_t>& a, const std::vector<char32_t>& b,
                 const std::unordered_map<char32_t, std::vector<int>>& b2j,
                 int alo, int ahi, int blo, int bhi) {
  const MatchBlock m = FindLongestMatch(a, b, b2j, alo, ahi, blo, bhi);
  if (m.size == 0) return 0;
  int total = m.size;
  if (alo < m.a && blo < m.b)
    total += MatchedCount(a, b, b2j, alo, m.a, blo, m.b);
  if (m.a + m.size < ahi && m.b + m.size < bhi)
    total += MatchedCount(a, b, b2j, m.a + m.size, ahi, m.b + m.size, bhi);
  return total;
}

}  // namespace

double SequenceSimilarity(const std::vector<char32_t>& a,
                          const std::vector<char32_t>& b) {
  if (a.empty() && b.empty()) return 1.0;  // identical (degenerate)
  if (a.empty() || b.empty()) return 0.0;
  std::unordered_map<char32_t, std::vector<int>> b2j;
  for (int j = 0; j < static_cast<int>(b.size()); ++j) b2j[b[j]].push_back(j);
  const int m = MatchedCount(a, b, b2j, 0, static_cast<int>(a.size()), 0,
                             static_cast<int>(b.size()));
  return 2.0 * m / static_cast<double>(a.size() + b.size());
}

double SequenceSimilarity(const std::string& a_utf8,
                          const std::string& b_utf8) {
  return SequenceSimilarity(DecodeUtf8(a_utf8), DecodeUtf8(b_utf8));
}

// ---------------------------------------------------------------------------
// Manifest I/O and validation
// ---------------------------------------------------------------------------

namespace {

std::optional<std::string> OptString(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<std::string>();
}

json RecordToJson(const UtteranceRecord& r) {
  json j;
  j["type"] = "record";
  j["utt_id"] = r.utt_id;
  j["speaker_id"] = r.speaker_id;
  j["speech_type"] = ToString(r.speech_type);
  j["text"] = r.text;
  j["audio_path"] = r.audio_path;
  j["video_path"] = r.video_path ? json(*r.video_path) : json(nullptr);
  j["landmarks_path"] =
      r.landmarks_path ? json(*r.landmarks_path) : json(nullptr);
  j["duration_s"] = r.duration_s;
  j["language"] = ToString(r.language);
  return j;
}

UtteranceRecord RecordFromJson(const json& j) {
  UtteranceRecord r;
  r.utt_id = j.at("utt_id").get<std::string>();
  r.speaker_id = j.at("speaker_id").get<std::string>();
  r.speech_type = SpeechTypeFromString(j.at("speech_type").get<std::string>());
  r.text = j.at("text").get<std::string>();
  r.audio_path = j.at("audio_path").get<std::string>();
  r.video_path = OptString(j, "video_path");
  r.landmarks_path = OptString(j, "landmarks_path");
  r.duration_s = j.at("duration_s").get<double>();
  r.language = LanguageFromString(j.at("language").get<std::string>());
  return r;
}

}  // namespace

void ValidateManifest(const PairedManifest& m, const std::string& where) {
  auto fail = [&where](const std::string& msg) {
    Throw(ErrorCode::kValidation, where + ": " + msg);
  };
  std::unordered_map<std::string, const UtteranceRecord*> by_id;
  for (const auto& r : m.records) {
    if (!by_id.emplace(r.utt_id, &r).second)
      fail("duplicate utt_id \"" + r.utt_id + "\"");
    if (!(r.duration_s > 0.0))
      fail("record \"" + r.utt_id + "\": duration_s must be > 0");
    if (r.video_path.has_value() != r.landmarks_path.has_value())
      fail("record \"" + r.utt_id +
           "\": video_path and landmarks_path must be present together");
  }
  std::set<std::string> paired_whispers;
  for (const auto& p : m.pairs) {
    auto wi = by_id.find(p.whisper);
    auto ni = by_id.find(p.normal);
    if (wi == by_id.end())
      fail("pair references missing utt_id \"" + p.whisper + "\"");
    if (ni == by_id.end())
      fail("pair references missing utt_id \"" + p.normal + "\"");
    const auto* w = wi->second;
    const auto* n = ni->second;
    if (w->speech_type != SpeechType::kWhisper)
      fail("pair whisper side \"" + p.whisper + "\" is not whisper speech");
    if (n->speech_type != SpeechType::kNormal)
      fail("pair normal side \"" + p.normal + "\" is not normal speech");
    if (w->speaker_id != n->speaker_id)
      fail("pair (" + p.whisper + ", " + p.normal + ") crosses speakers");
    if (!paired_whispers.insert(p.whisper).second)
      fail("whisper utt \"" + p.whisper + "\" appears in more than one pair");
    const double recomputed = SequenceSimilarity(w->text, n->text);
    if (std::abs(recomputed - p.similarity) > 1e-9)
      fail("pair (" + p.whisper + ", " + p.normal +
           "): stored similarity " + std::to_string(p.similarity) +
           " does not match recomputed " + std::to_string(recomputed));
  }
  std::set<std::string> covered = paired_whispers;
  for (const auto& id : m.unpaired) {
    auto it = by_id.find(id);
    if (it == by_id.end())
      fail("unpaired entry references missing utt_id \"" + id + "\"");
    if (it->second->speech_type != SpeechType::kWhisper)
      fail("unpaired entry \"" + id + "\" is not whisper speech");
    if (paired_whispers.count(id))
      fail("utt \"" + id + "\" is both paired and unpaired");
    covered.insert(id);
  }
  for (const auto& r : m.records)
    if (r.speech_type == SpeechType::kWhisper && !covered.count(r.utt_id))
      fail("whisper utt \"" + r.utt_id + "\" is neither paired nor unpaired");
}

PairedManifest LoadManifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) Throw(ErrorCode::kIo, "cannot open manifest: " + path);
  PairedManifest m;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      Throw(ErrorCode::kParse,
            path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    try {
      const std::string type = j.at("type").get<std::string>();
      if (type == "header") {
        if (j.at("format").get<std::string>() != "avw-manifest")
          Throw(ErrorCode::kParse, "not an avw-manifest file");
        m.split = SplitFromString(j.at("split").get<std::string>());
        have_header = true;
      } else if (type == "record") {
        m.records.push_back(RecordFromJson(j));
      } else if (type == "pair") {
        UtterancePair p;
        p.whisper = j.at("whisper").get<std::string>();
        p.normal = j.at("normal").get<std::string>();
        p.similarity = j.at("similarity").get<double>();
        m.pairs.push_back(p);
      } else if (type == "unpaired") {
        m.unpaired.push_back(j.at("utt_id").get<std::string>());
      } else {
        Throw(ErrorCode::kParse, "unknown line type \"" + type + "\"");
      }
    } catch (const json::exception& e) {
      Throw(ErrorCode::kParse,
            path + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kParse)
        Throw(ErrorCode::kParse,
              path + ":" + std::to_string(line_no) + ": " + e.what());
      throw;
    }
  }
  if (!have_header)
    Throw(ErrorCode::kParse, path + ": missing manifest header line");
  ValidateManifest(m, path);
  return m;
}

void SaveManifest(const PairedManifest& m, const std::string& path) {
  ValidateManifest(m, "manifest");
  std::ofstream out(path, std::ios::trunc);
  if (!out) Throw(ErrorCode::kIo, "cannot create manifest: " + path);
  json header;
  header["type"] = "header";
  header["format"] = "avw-manifest";
  header["version"] = 1;
  header["split"] = ToString(m.split);
  out << header.dump() << '\n';
  for (const auto& r : m.records) out << RecordToJson(r).dump() << '\n';
  for (const auto& p : m.pairs) {
    json j;
    j["type"] = "pair";
    j["whisper"] = p.whisper;
    j["normal"] = p.normal;
    j["similarity"] = p.similarity;
    out << j.dump() << '\n';
  }
  for (const auto& id : m.unpaired) {
    json j;
    j["type"] = "unpaired";
    j["utt_id"] = id;
    out << j.dump() << '\n';
  }
  if (!out) Throw(ErrorCode::kIo, "failed writing manifest: " + path);
}

// ---------------------------------------------------------------------------
// Pairing, stats, splits
// ---------------------------------------------------------------------------

PairedManifest PairUtterances(const PairedManifest& m) {
  PairedManifest out = m;
  out.pairs.clear();
  out.unpaired.clear();

  std::unordered_map<std::string, std::vector<const UtteranceRecord*>> normals;
  std::vector<const UtteranceRecord*> whispers;
  for (const auto& r : m.records) {
    if (r.speech_type == SpeechType::kNormal)
      normals[r.speaker_id].push_back(&r);
    else
      whispers.push_back(&r);
  }
  auto by_id = [](const UtteranceRecord* a, const UtteranceRecord* b) {
    return a->utt_id < b->utt_id;
  };
  for (auto& [spk, v] : normals) std::sort(v.begin(), v.end(), by_id);
  std::sort(whispers.begin(), whispers.end(), by_id);

  for (const auto* w : whispers) {
    auto it = normals.find(w->speaker_id);
    if (it == normals.end() || it->second.empty()) {
      out.unpaired.push_back(w->utt_id);
      continue;
    }
    const auto w_cps = DecodeUtf8(w->text);
    const UtteranceRecord* best = nullptr;
    double best_sim = -1.0;
    // Candidates are scanned in ascending utt_id; a strict improvement test
    // makes the smallest utt_id win ties.
    for (const auto* n : it->second) {
      const double sim = SequenceSimilarity(w_cps, DecodeUtf8(n->text));
      if (sim > best_sim) {
        best_sim = sim;
        best = n;
      }
    }
    out.pairs.push_back({w->utt_id, best->utt_id, best_sim});
  }
  return out;
}

CorpusStats ComputeStats(const PairedManifest& m) {
  CorpusStats stats;
  stats.split = m.split;
  const bool videos[] = {true, false};
  const SpeechType types[] = {SpeechType::kNormal, SpeechType::kWhisper};
  for (bool video : videos) {
    for (SpeechType type : types) {
      std::set<std::string> speakers;
      // Durations keyed by utt_id so the sum order is independent of the
      // record order in the manifest.
      std::map<std::string, double> durations;
      for (const auto& r : m.records) {
        if (r.has_video() != video || r.speech_type != type) continue;
        speakers.insert(r.speaker_id);
        durations[r.utt_id] = r.duration_s;
      }
      if (durations.empty()) continue;
      double seconds = 0.0;
      for (const auto& [id, d] : durations) seconds += d;
      StatsRow row;
      row.has_video = video;
      row.num_speakers = static_cast<int>(speakers.size());
      row.speech_type = type;
      row.total_hours = seconds / 3600.0;
      row.num_utterances = static_cast<int>(durations.size());
      stats.rows.push_back(row);
    }
  }
  return stats;
}

std::string RenderStats(const CorpusStats& stats) {
  std::string set_name = ToString(stats.split);
  set_name[0] = static_cast<char>(std::toupper(set_name[0]));
  std::ostringstream out;
  auto row = [&out](const std::string& set, const std::string& video,
                    const std::string& spk, const std::string& type,
                    const std::string& hours, const std::string& utts) {
    out << set;
    out << std::string(7 - set.size(), ' ') << video;
    out << std::string(7 - video.size(), ' ');
    out << std::string(10 - spk.size(), ' ') << spk << "  ";
    out << type << std::string(6 - type.size(), ' ');
    out << std::string(10 - hours.size(), ' ') << hours << "  ";
    out << std::string(10 - utts.size(), ' ') << utts << '\n';
  };
  row("Set", "Video", "Num of Spk", "Type", "Time (hrs)", "Utterances");
  for (const auto& r : stats.rows) {
    row(set_name, r.has_video ? "Yes" : "No", std::to_string(r.num_speakers),
        r.speech_type == SpeechType::kNormal ? "N" : "W",
        FormatDouble(r.total_hours, 4), std::to_string(r.num_utterances));
  }
  return out.str();
}

std::vector<PairedManifest> SplitBySpeaker(const PairedManifest& m,
                                           const SplitRatios& ratios,
                                           std::uint64_t seed) {
  const double r[3] = {ratios.train, ratios.valid, ratios.test};
  double sum = 0.0;
  for (double x : r) {
    if (x < 0.0)
      Throw(ErrorCode::kInvalidArg, "split ratios must be nonnegative");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-6)
    Throw(ErrorCode::kInvalidArg, "split ratios must sum to 1");

  std::set<std::string> speaker_set;
  for (const auto& rec : m.records) speaker_set.insert(rec.speaker_id);
  std::vector<std::string> speakers(speaker_set.begin(), speaker_set.end());
  const int n = static_cast<int>(speakers.size());

  // Largest-remainder apportionment of speaker counts.
  int sizes[3];
  double frac[3];
  int assigned = 0;
  for (int k = 0; k < 3; ++k) {
    const double quota = n * r[k];
    sizes[k] = static_cast<int>(std::floor(quota));
    frac[k] = quota - sizes[k];
    assigned += sizes[k];
  }
  int remaining = n - assigned;
  std::vector<int> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&frac](int a, int b) { return frac[a] > frac[b]; });
  for (int i = 0; i < remaining; ++i) sizes[order[i % 3]] += 1;
  for (int k = 0; k < 3; ++k)
    if (r[k] > 0.0 && sizes[k] == 0)
      Throw(ErrorCode::kValidation,
            "cannot split " + std::to_string(n) +
                " speaker(s) into 3 subsets with positive ratios");

  Rng rng = Rng::Derive(seed, 0x5a117ULL);
  rng.Shuffle(speakers);

  std::unordered_map<std::string, int> assignment;
  int cursor = 0;
  for (int k = 0; k < 3; ++k)
    for (int i = 0; i < sizes[k]; ++i) assignment[speakers[cursor++]] = k;

  std::vector<PairedManifest> out(3);
  out[0].split = Split::kTrain;
  out[1].split = Split::kValid;
  out[2].split = Split::kTest;
  std::unordered_map<std::string, int> record_split;
  for (const auto& rec : m.records) {
    const int k = assignment.at(rec.speaker_id);
    record_split[rec.utt_id] = k;
    out[k].records.push_back(rec);
  }
  // Pairs never cross speakers, so each pair lands wholly in one split.
  for (const auto& p : m.pairs) out[record_split.at(p.whisper)].pairs.push_back(p);
  for (const auto& id : m.unpaired) out[record_split.at(id)].unpaired.push_back(id);
  return out;
}

PairedManifest PrepareFromDir(const std::string& dir) {
  const fs::path root(dir);
  const fs::path tsv = root / "utterances.tsv";
  if (!fs::exists(tsv))
    Throw(ErrorCode::kNotFound, "missing " + tsv.string());
  std::ifstream in(tsv);
  if (!in) Throw(ErrorCode::kIo, "cannot open " + tsv.string());

  PairedManifest m;
  m.split = Split::kTrain;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (cols.size() != 8)
      Throw(ErrorCode::kParse, tsv.string() + ":" + std::to_string(line_no) +
                                   ": expected 8 tab-separated columns, got " +
                                   std::to_string(cols.size()));
    UtteranceRecord r;
    r.utt_id = cols[0];
    r.speaker_id = cols[1];
    r.speech_type = SpeechTypeFromString(cols[2]);
    r.language = LanguageFromString(cols[3]);
    r.text = cols[4];
    r.audio_path = (root / cols[5]).string();
    if (!cols[6].empty()) r.video_path = (root / cols[6]).string();
    if (!cols[7].empty()) r.landmarks_path = (root / cols[7]).string();
    if (!fs::exists(r.audio_path))
      Throw(ErrorCode::kNotFound, "record \"" + r.utt_id +
                                      "\": missing audio file " + r.audio_path);
    r.duration_s = io::WavDurationSeconds(r.audio_path);
    m.records.push_back(std::move(r));
  }
  std::sort(m.records.begin(), m.records.end(),
            [](const UtteranceRecord& a, const UtteranceRecord& b) {
              return a.utt_id < b.utt_id;
            });
  for (const auto& r : m.records)
    if (r.speech_type == SpeechType::kWhisper) m.unpaired.push_back(r.utt_id);
  ValidateManifest(m, dir);
  return m;
}

}  // namespace avw::corpus
