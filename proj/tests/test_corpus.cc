// tests/test_corpus.cc
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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "avw/util.h"
#include "testing.h"

using namespace avw;
using namespace avw::corpus;

namespace {

UtteranceRecord MakeRecord(const std::string& id, const std::string& spk,
                           SpeechType type, const std::string& text,
                           double duration = 1.0, bool video = false) {
  UtteranceRecord r;
  r.utt_id = id;
  r.speaker_id = spk;
  r.speech_type = type;
  r.text = text;
  r.audio_path = "audio/" + id + ".wav";
  if (video) {
    r.video_path = "video/" + id + ".frames";
    r.landmarks_path = "landmarks/" + id + ".txt";
  }
  r.duration_s = duration;
  r.language = Language::kZh;
  return r;
}

void SortRecords(PairedManifest& m) {
  std::sort(m.records.begin(), m.records.end(),
            [](const UtteranceRecord& a, const UtteranceRecord& b) {
              return a.utt_id < b.utt_id;
            });
}

std::string RandomString(Rng& rng, int max_len, int alphabet) {
  const int n = rng.RangeInt(0, max_len);
  std::string s;
  for (int i = 0; i < n; ++i)
    s.push_back(static_cast<char>('a' + rng.RangeInt(0, alphabet - 1)));
  return s;
}

}  // namespace

TEST_CASE("sequence similarity spec values") {
  CHECK(SequenceSimilarity("abcd", "abcd") == 1.0);
  CHECK(SequenceSimilarity("abcd", "bcde") == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(SequenceSimilarity("ab", "cd") == 0.0);
  CHECK(SequenceSimilarity("", "") == 1.0);
  CHECK(SequenceSimilarity("", "x") == 0.0);
}

TEST_CASE("sequence similarity matches the difflib reference table") {
  // Frozen output of Python difflib.SequenceMatcher(None, a, b,
  // autojunk=False).ratio() — including one asymmetric pair, which the
  // gestalt decomposition genuinely produces.
  struct Case {
    const char* a;
    const char* b;
    double ratio;
  };
  const Case cases[] = {
      {"acbbbaeaed", "a", 0.18181818181818182},
      {"", "b", 0},
      {"eae", "bedbdeca", 0.36363636363636365},
      {"bdccbbcaadac", "cecadeadaece", 0.58333333333333337},
      {"baabc", "abadcdcbc", 0.5714285714285714},
      {"caebe", "bbd", 0.25},
      {"ebcaba", "cdca", 0.40000000000000002},
      {"cbd", "ddbcbbeec", 0.33333333333333331},
      {"dedcbbedaaa", "bbdeadded", 0.29999999999999999},
      {"eaaeccac", "dbda", 0.16666666666666666},
      {"cebeaceebbc", "beeaecdaacc", 0.45454545454545453},
      {"bea", "", 0},
      {"d", "aebbdebceed", 0.16666666666666666},
      {"bcd", "cdedabba", 0.36363636363636365},
      {"eebeb", "", 0},
      {"", "a", 0},
      {"aca", "e", 0},
      {"dbe", "beed", 0.5714285714285714},
      {"ddb", "aadcdddaaadc", 0.26666666666666666},
      {"bbbedbdbcdba", "d", 0.15384615384615385},
      {"aaeaabbdddbd", "abdadcdc", 0.5},
      {"edbbcb", "aeeacaaedee", 0.23529411764705882},
      {"ebeeae", "a", 0.2857142857142857},
      {"eeeccb", "cbcdbcdcaa", 0.25},
      {"eaaebec", "bcabccbde", 0.125},
      {"eeaecabcaae", "bcce", 0.40000000000000002},
      {"cbc", "edcaadcaacb", 0.2857142857142857},
      {"bdedeaaabe", "acee", 0.2857142857142857},
      {"ba", "ccacbb", 0.25},
      {"cedebbbbda", "b", 0.18181818181818182},
      {"cabbbbdaacd", "accacbcdadc", 0.54545454545454541},
      {"accacbcdadc", "cabbbbdaacd", 0.27272727272727271},
  };
  for (const auto& c : cases) {
    CAPTURE(c.a);
    CAPTURE(c.b);
    CHECK(SequenceSimilarity(c.a, c.b) == doctest::Approx(c.ratio).epsilon(1e-12));
  }
}

TEST_CASE("sequence similarity works on code points, not bytes") {
  CHECK(SequenceSimilarity("你好", "你好") == 1.0);
  CHECK(SequenceSimilarity("你好吗", "你好") ==
        doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("sequence similarity properties: range and identity") {
  Rng rng(11);
  for (int trial = 0; trial < 3000; ++trial) {
    const std::string a = RandomString(rng, 12, 4);
    const std::string b = RandomString(rng, 12, 4);
    const double s = SequenceSimilarity(a, b);
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
    if (s == 1.0) CHECK(a == b);
    if (a == b) CHECK(s == 1.0);
    CHECK(SequenceSimilarity(a, b) == s);  // deterministic
  }
}

TEST_CASE("pair_utterances spec examples") {
  PairedManifest m;
  m.records.push_back(MakeRecord("n1", "s1", SpeechType::kNormal, "abc"));
  m.records.push_back(MakeRecord("n2", "s1", SpeechType::kNormal, "xyz"));
  m.records.push_back(MakeRecord("w1", "s1", SpeechType::kWhisper, "abc"));
  m.unpaired = {"w1"};
  SortRecords(m);

  PairedManifest paired = PairUtterances(m);
  REQUIRE(paired.pairs.size() == 1);
  CHECK(paired.pairs[0].whisper == "w1");
  CHECK(paired.pairs[0].normal == "n1");
  CHECK(paired.pairs[0].similarity == 1.0);
  CHECK(paired.unpaired.empty());

  SUBCASE("best candidate by similarity") {
    PairedManifest m2;
    m2.records.push_back(MakeRecord("na", "s1", SpeechType::kNormal, "bcde"));
    m2.records.push_back(MakeRecord("nb", "s1", SpeechType::kNormal, "zzzz"));
    m2.records.push_back(MakeRecord("w1", "s1", SpeechType::kWhisper, "abcd"));
    m2.unpaired = {"w1"};
    PairedManifest p2 = PairUtterances(m2);
    REQUIRE(p2.pairs.size() == 1);
    CHECK(p2.pairs[0].normal == "na");
    CHECK(p2.pairs[0].similarity == doctest::Approx(0.75).epsilon(1e-12));
  }

  SUBCASE("speaker without normals goes unpaired") {
    PairedManifest m3;
    m3.records.push_back(MakeRecord("w1", "s1", SpeechType::kWhisper, "abc"));
    m3.records.push_back(MakeRecord("w2", "s1", SpeechType::kWhisper, "def"));
    m3.unpaired = {"w1", "w2"};
    PairedManifest p3 = PairUtterances(m3);
    CHECK(p3.pairs.empty());
    CHECK(p3.unpaired == std::vector<std::string>{"w1", "w2"});
  }

  SUBCASE("ties break to the smallest normal utt_id") {
    PairedManifest m4;
    m4.records.push_back(MakeRecord("nz", "s1", SpeechType::kNormal, "abc"));
    m4.records.push_back(MakeRecord("na", "s1", SpeechType::kNormal, "abc"));
    m4.records.push_back(MakeRecord("w1", "s1", SpeechType::kWhisper, "abc"));
    m4.unpaired = {"w1"};
    SortRecords(m4);
    PairedManifest p4 = PairUtterances(m4);
    REQUIRE(p4.pairs.size() == 1);
    CHECK(p4.pairs[0].normal == "na");
  }
}

TEST_CASE("pairing equals exhaustive argmax on random corpora") {
  Rng rng(99);
  for (int trial = 0; trial < 60; ++trial) {
    PairedManifest m;
    const int n_speakers = rng.RangeInt(1, 10);
    int uid = 0;
    for (int s = 0; s < n_speakers; ++s) {
      const std::string spk = "s" + std::to_string(s);
      const int n_utts = rng.RangeInt(1, 10);
      for (int u = 0; u < n_utts; ++u) {
        const bool whisper = rng.Uniform() < 0.5;
        char id[16];
        std::snprintf(id, sizeof(id), "u%03d", uid++);
        m.records.push_back(MakeRecord(
            id, spk, whisper ? SpeechType::kWhisper : SpeechType::kNormal,
            RandomString(rng, 12, 3)));
      }
    }
    SortRecords(m);
    for (const auto& r : m.records)
      if (r.speech_type == SpeechType::kWhisper) m.unpaired.push_back(r.utt_id);

    const PairedManifest got = PairUtterances(m);

    // Exhaustive oracle over all same-speaker candidates.
    for (const auto& w : m.records) {
      if (w.speech_type != SpeechType::kWhisper) continue;
      const UtteranceRecord* best = nullptr;
      double best_sim = -1.0;
      for (const auto& n : m.records) {
        if (n.speech_type != SpeechType::kNormal || n.speaker_id != w.speaker_id)
          continue;
        const double sim = SequenceSimilarity(w.text, n.text);
        if (sim > best_sim || (sim == best_sim && best && n.utt_id < best->utt_id)) {
          best_sim = sim;
          best = &n;
        }
      }
      const auto it =
          std::find_if(got.pairs.begin(), got.pairs.end(),
                       [&](const UtterancePair& p) { return p.whisper == w.utt_id; });
      if (best == nullptr) {
        CHECK(it == got.pairs.end());
        CHECK(std::count(got.unpaired.begin(), got.unpaired.end(), w.utt_id) == 1);
      } else {
        REQUIRE(it != got.pairs.end());
        CHECK(it->normal == best->utt_id);
        CHECK(it->similarity == best_sim);
      }
    }
  }
}

TEST_CASE("manifest save/load round trip") {
  avwtest::TempDir tmp("manifest");
  PairedManifest m;
  m.split = Split::kValid;
  m.records.push_back(MakeRecord("n1", "s1", SpeechType::kNormal, "你好", 2.5, true));
  m.records.push_back(MakeRecord("w1", "s1", SpeechType::kWhisper, "你好", 2.25));
  m.pairs.push_back({"w1", "n1", 1.0});
  const std::string path = tmp.str("m.jsonl");
  SaveManifest(m, path);
  const PairedManifest loaded = LoadManifest(path);
  CHECK(loaded == m);
}

TEST_CASE("load_manifest spec examples and error paths") {
  avwtest::TempDir tmp("manifest_err");

  SUBCASE("minimal valid file") {
    PairedManifest m;
    m.records.push_back(MakeRecord("a", "s1", SpeechType::kNormal, "x"));
    m.records.push_back(MakeRecord("b", "s1", SpeechType::kNormal, "y"));
    m.records.push_back(MakeRecord("c", "s2", SpeechType::kNormal, "z"));
    const std::string path = tmp.str("ok.jsonl");
    SaveManifest(m, path);
    const PairedManifest loaded = LoadManifest(path);
    CHECK(loaded.records.size() == 3);
    CHECK(loaded.pairs.empty());
  }

  SUBCASE("duplicate utt_id names the offender") {
    PairedManifest m;
    m.records.push_back(MakeRecord("u1", "s1", SpeechType::kNormal, "x"));
    m.records.push_back(MakeRecord("u1", "s1", SpeechType::kNormal, "y"));
    CHECK_THROWS_WITH_AS(ValidateManifest(m, "test"),
                         doctest::Contains("\"u1\""), Error);
  }

  SUBCASE("dangling pair reference") {
    PairedManifest m;
    m.records.push_back(MakeRecord("n1", "s1", SpeechType::kNormal, "x"));
    m.pairs.push_back({"ghost", "n1", 1.0});
    CHECK_THROWS_WITH_AS(ValidateManifest(m, "test"),
                         doctest::Contains("ghost"), Error);
  }

  SUBCASE("parse error carries the line number") {
    const std::string path = tmp.str("bad.jsonl");
    std::ofstream out(path);
    out << R"({"type":"header","format":"avw-manifest","version":1,"split":"train"})" << "\n";
    out << "{not json}\n";
    out.close();
    CHECK_THROWS_WITH_AS(LoadManifest(path), doctest::Contains(":2"), Error);
  }

  SUBCASE("similarity must match recompute") {
    PairedManifest m;
    m.records.push_back(MakeRecord("n1", "s1", SpeechType::kNormal, "abc"));
    m.records.push_back(MakeRecord("w1", "s1", SpeechType::kWhisper, "abc"));
    m.pairs.push_back({"w1", "n1", 0.5});
    CHECK_THROWS_WITH_AS(ValidateManifest(m, "test"),
                         doctest::Contains("similarity"), Error);
  }

  SUBCASE("whisper coverage is enforced") {
    PairedManifest m;
    m.records.push_back(MakeRecord("w1", "s1", SpeechType::kWhisper, "abc"));
    CHECK_THROWS_WITH_AS(ValidateManifest(m, "test"),
                         doctest::Contains("neither paired nor unpaired"),
                         Error);
  }

  SUBCASE("video requires landmarks") {
    PairedManifest m;
    UtteranceRecord r = MakeRecord("n1", "s1", SpeechType::kNormal, "x");
    r.video_path = "v.frames";
    m.records.push_back(r);
    CHECK_THROWS_AS(ValidateManifest(m, "test"), Error);
  }
}

TEST_CASE("compute_stats groups, sums and renders") {
  PairedManifest m;
  m.records.push_back(MakeRecord("n1", "s1", SpeechType::kNormal, "a", 1.0));
  m.records.push_back(MakeRecord("n2", "s1", SpeechType::kNormal, "b", 2.0));
  m.records.push_back(MakeRecord("n3", "s2", SpeechType::kNormal, "c", 3.0));
  SortRecords(m);

  CorpusStats stats = ComputeStats(m);
  REQUIRE(stats.rows.size() == 1);
  CHECK_FALSE(stats.rows[0].has_video);
  CHECK(stats.rows[0].speech_type == SpeechType::kNormal);
  CHECK(stats.rows[0].num_speakers == 2);
  CHECK(stats.rows[0].num_utterances == 3);
  CHECK(stats.rows[0].total_hours == doctest::Approx(6.0 / 3600.0).epsilon(1e-12));

  SUBCASE("empty manifest gives empty stats") {
    CHECK(ComputeStats(PairedManifest{}).rows.empty());
  }

  SUBCASE("totals are permutation invariant") {
    PairedManifest shuffled = m;
    std::swap(shuffled.records[0], shuffled.records[2]);
    const CorpusStats s2 = ComputeStats(shuffled);
    CHECK(s2.rows[0].total_hours == stats.rows[0].total_hours);
  }

  SUBCASE("table-1 style rendering reproduces the published row shape") {
    // 10012 video/normal utterances summing to 14.8339 hours.
    PairedManifest big;
    const int count = 10012;
    const double total_s = 14.8339 * 3600.0;
    for (int i = 0; i < count; ++i) {
      char id[16];
      std::snprintf(id, sizeof(id), "n%05d", i);
      big.records.push_back(MakeRecord(id, "s" + std::to_string(i % 82),
                                       SpeechType::kNormal, "x",
                                       total_s / count, true));
    }
    const CorpusStats bs = ComputeStats(big);
    REQUIRE(bs.rows.size() == 1);
    CHECK(std::abs(bs.rows[0].total_hours - 14.8339) < 1e-9);
    const std::string table = RenderStats(bs);
    CHECK(table.find("Set") != std::string::npos);
    CHECK(table.find("Video") != std::string::npos);
    CHECK(table.find("Num of Spk") != std::string::npos);
    CHECK(table.find("Type") != std::string::npos);
    CHECK(table.find("Time (hrs)") != std::string::npos);
    CHECK(table.find("Utterances") != std::string::npos);
    CHECK(table.find("14.8339") != std::string::npos);
    CHECK(table.find("10012") != std::string::npos);
    CHECK(table.find("Yes") != std::string::npos);
  }
}

TEST_CASE("split_by_speaker partitions speakers deterministically") {
  PairedManifest m;
  for (int s = 0; s < 6; ++s)
    for (int u = 0; u < 3; ++u) {
      const std::string id = "s" + std::to_string(s) + "_u" + std::to_string(u);
      m.records.push_back(
          MakeRecord(id, "s" + std::to_string(s), SpeechType::kNormal, "x"));
    }
  SortRecords(m);

  const SplitRatios ratios{4.0 / 6, 1.0 / 6, 1.0 / 6};
  auto splits = SplitBySpeaker(m, ratios, 0);
  REQUIRE(splits.size() == 3);
  auto speakers_of = [](const PairedManifest& pm) {
    std::set<std::string> out;
    for (const auto& r : pm.records) out.insert(r.speaker_id);
    return out;
  };
  const auto a = speakers_of(splits[0]);
  const auto b = speakers_of(splits[1]);
  const auto c = speakers_of(splits[2]);
  CHECK(a.size() == 4);
  CHECK(b.size() == 1);
  CHECK(c.size() == 1);
  for (const auto& s : b) CHECK(a.count(s) == 0);
  for (const auto& s : c) {
    CHECK(a.count(s) == 0);
    CHECK(b.count(s) == 0);
  }
  CHECK(splits[0].split == Split::kTrain);
  CHECK(splits[1].split == Split::kValid);
  CHECK(splits[2].split == Split::kTest);

  SUBCASE("same seed, same partition") {
    auto again = SplitBySpeaker(m, ratios, 0);
    CHECK(again[0].records == splits[0].records);
    CHECK(again[1].records == splits[1].records);
    CHECK(again[2].records == splits[2].records);
  }

  SUBCASE("one speaker cannot fill three positive splits") {
    PairedManifest one;
    one.records.push_back(MakeRecord("u0", "solo", SpeechType::kNormal, "x"));
    CHECK_THROWS_AS(
        SplitBySpeaker(one, {1.0 / 3, 1.0 / 3, 1.0 / 3}, 0), Error);
  }

  SUBCASE("ratios must sum to one") {
    CHECK_THROWS_AS(SplitBySpeaker(m, {0.5, 0.2, 0.2}, 0), Error);
  }

  SUBCASE("pairs stay within their split") {
    PairedManifest pm = m;
    // add whispers and pair them
    for (int s = 0; s < 6; ++s) {
      const std::string id = "s" + std::to_string(s) + "_w";
      pm.records.push_back(
          MakeRecord(id, "s" + std::to_string(s), SpeechType::kWhisper, "x"));
    }
    SortRecords(pm);
    for (const auto& r : pm.records)
      if (r.speech_type == SpeechType::kWhisper) pm.unpaired.push_back(r.utt_id);
    pm = PairUtterances(pm);
    auto sp = SplitBySpeaker(pm, ratios, 1);
    int total_pairs = 0;
    for (const auto& part : sp) {
      total_pairs += static_cast<int>(part.pairs.size());
      ValidateManifest(part, "split");
    }
    CHECK(total_pairs == static_cast<int>(pm.pairs.size()));
  }
}
