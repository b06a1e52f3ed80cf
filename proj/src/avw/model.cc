// src/avw/model.cc
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

#include "avw/model.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include <json.hpp>

#include "avw/util.h"

namespace avw::model {

using nlohmann::json;

namespace {

const char* kSpecialTokens[kNumSpecials] = {"<pad>", "<sot>", "<eot>", "<zh>",
                                            "<en>"};

}  // namespace

void ModelConfig::Validate() const {
  if (d_model <= 0 || n_heads <= 0 || d_model % n_heads != 0)
    Throw(ErrorCode::kValidation, "d_model must be divisible by n_heads");
  if (enc_layers < 1 || dec_layers < 1 || ffn_mult < 1)
    Throw(ErrorCode::kValidation, "layer counts and ffn_mult must be >= 1");
  if (max_text_len < 4)
    Throw(ErrorCode::kValidation, "max_text_len must be at least 4");
  if (visual_dim <= 0 || n_mels <= 0)
    Throw(ErrorCode::kValidation, "visual_dim and n_mels must be positive");
  if (vocab.size() < kNumSpecials)
    Throw(ErrorCode::kValidation, "vocabulary missing special tokens");
  for (int i = 0; i < kNumSpecials; ++i)
    if (vocab[static_cast<std::size_t>(i)] != kSpecialTokens[i])
      Throw(ErrorCode::kValidation,
            "vocabulary slot " + std::to_string(i) + " must be " +
                kSpecialTokens[i]);
}

std::vector<std::string> BuildVocab(const std::vector<std::string>& texts) {
  std::set<char32_t> chars;
  for (const auto& t : texts)
    for (char32_t cp : DecodeUtf8(t)) chars.insert(cp);
  std::vector<std::string> vocab;
  for (const char* s : kSpecialTokens) vocab.emplace_back(s);
  for (char32_t cp : chars) vocab.push_back(EncodeUtf8(cp));
  return vocab;
}

int LanguageTokenId(corpus::Language lang) {
  return lang == corpus::Language::kZh ? kLangZhId : kLangEnId;
}

// ---------------------------------------------------------------------------
// ParamStore
// ---------------------------------------------------------------------------

Param* ParamStore::Create(const std::string& name, int stage, int rows,
                          int cols) {
  if (index_.count(name))
    Throw(ErrorCode::kInternal, "duplicate parameter name: " + name);
  auto p = std::make_unique<Param>();
  p->name = name;
  p->stage = stage;
  p->value = Mat::Zero(rows, cols);
  Param* raw = p.get();
  owned_.push_back(std::move(p));
  order_.push_back(raw);
  index_[name] = raw;
  return raw;
}

Param* ParamStore::Get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end())
    Throw(ErrorCode::kInternal, "unknown parameter: " + name);
  return it->second;
}

bool ParamStore::Has(const std::string& name) const {
  return index_.count(name) != 0;
}

std::vector<Param*> ParamStore::OfStage(int stage) const {
  std::vector<Param*> out;
  for (Param* p : order_)
    if (p->stage == stage) out.push_back(p);
  return out;
}

void ParamStore::ZeroGrads() {
  for (Param* p : order_) p->ZeroGrad();
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

namespace {

void FillHeNormal(Mat& m, Rng& rng) {
  const double std = std::sqrt(2.0 / static_cast<double>(m.rows()));
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = std * rng.Normal();
}

void FillNormal(Mat& m, Rng& rng, double std) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = std * rng.Normal();
}

/// x @ W + b linear layer; weights He-normal unless `zero_init`.
void CreateLinear(ParamStore& ps, Rng& rng, const std::string& prefix,
                  int stage, int in, int out, bool zero_init = false) {
  Param* w = ps.Create(prefix + ".w", stage, in, out);
  ps.Create(prefix + ".b", stage, 1, out);
  if (!zero_init) FillHeNormal(w->value, rng);
}

void CreateLayerNorm(ParamStore& ps, const std::string& prefix, int stage,
                     int dim) {
  Param* g = ps.Create(prefix + ".g", stage, 1, dim);
  ps.Create(prefix + ".b", stage, 1, dim);
  g->value.setOnes();
}

// Residual-branch output projections start at zero: every attention and
// feed-forward block is a no-op at initialization and the optimizer grows
// the branches it needs. This cuts the from-scratch convergence time of
// the toy models considerably.
void CreateAttention(ParamStore& ps, Rng& rng, const std::string& prefix,
                     int stage, int q_dim, int kv_dim) {
  CreateLinear(ps, rng, prefix + ".q", stage, q_dim, q_dim);
  CreateLinear(ps, rng, prefix + ".k", stage, kv_dim, q_dim);
  CreateLinear(ps, rng, prefix + ".v", stage, kv_dim, q_dim);
  CreateLinear(ps, rng, prefix + ".o", stage, q_dim, q_dim,
               /*zero_init=*/true);
}

void CreateFfn(ParamStore& ps, Rng& rng, const std::string& prefix, int stage,
               int dim, int mult) {
  CreateLinear(ps, rng, prefix + ".1", stage, dim, dim * mult);
  CreateLinear(ps, rng, prefix + ".2", stage, dim * mult, dim,
               /*zero_init=*/true);
}

Mat SinusoidalPositions(int length, int dim) {
  Mat pe(length, dim);
  for (int pos = 0; pos < length; ++pos)
    for (int i = 0; i < dim; ++i) {
      const double angle =
          pos * std::exp(-(i / 2 * 2) * std::log(10000.0) / dim);
      pe(pos, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  return pe;
}

struct AttnRef {
  Param *wq, *bq, *wk, *bk, *wv, *bv, *wo, *bo;
};

AttnRef GetAttn(const ParamStore& ps, const std::string& prefix) {
  return {ps.Get(prefix + ".q.w"), ps.Get(prefix + ".q.b"),
          ps.Get(prefix + ".k.w"), ps.Get(prefix + ".k.b"),
          ps.Get(prefix + ".v.w"), ps.Get(prefix + ".v.b"),
          ps.Get(prefix + ".o.w"), ps.Get(prefix + ".o.b")};
}

int BuildLinear(Tape& t, const ParamStore& ps, const std::string& prefix,
                int x) {
  return t.AddRowBroadcast(t.Matmul(x, t.LeafParam(ps.Get(prefix + ".w"))),
                           t.LeafParam(ps.Get(prefix + ".b")));
}

int BuildLayerNorm(Tape& t, const ParamStore& ps, const std::string& prefix,
                   int x) {
  return t.LayerNorm(x, t.LeafParam(ps.Get(prefix + ".g")),
                     t.LeafParam(ps.Get(prefix + ".b")));
}

int BuildMha(Tape& t, const Model& m, int q_in, int kv_in,
             const std::string& prefix, bool causal) {
  const AttnRef a = GetAttn(m.params, prefix);
  const int d = m.config.d_model;
  const int heads = m.config.n_heads;
  const int dh = d / heads;
  const int q = t.AddRowBroadcast(t.Matmul(q_in, t.LeafParam(a.wq)),
                                  t.LeafParam(a.bq));
  const int k = t.AddRowBroadcast(t.Matmul(kv_in, t.LeafParam(a.wk)),
                                  t.LeafParam(a.bk));
  const int v = t.AddRowBroadcast(t.Matmul(kv_in, t.LeafParam(a.wv)),
                                  t.LeafParam(a.bv));
  std::vector<int> heads_out;
  heads_out.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    const int qh = t.Cols(q, h * dh, dh);
    const int kh = t.Cols(k, h * dh, dh);
    const int vh = t.Cols(v, h * dh, dh);
    const int scores = t.Scale(t.MatmulNT(qh, kh), 1.0 / std::sqrt(dh));
    const int attn = t.SoftmaxRows(scores, causal);
    heads_out.push_back(t.Matmul(attn, vh));
  }
  const int concat = t.HCat(heads_out);
  return t.AddRowBroadcast(t.Matmul(concat, t.LeafParam(a.wo)),
                           t.LeafParam(a.bo));
}

int BuildFfn(Tape& t, const ParamStore& ps, const std::string& prefix, int x) {
  return BuildLinear(t, ps, prefix + ".2",
                     t.Gelu(BuildLinear(t, ps, prefix + ".1", x)));
}

void ValidatePrefix(const Model& m, const std::vector<int>& tokens) {
  if (static_cast<int>(tokens.size()) > m.config.max_text_len)
    Throw(ErrorCode::kValidation, "prefix longer than max_text_len");
  if (tokens.size() < 2 || tokens[0] != kSotId ||
      (tokens[1] != kLangZhId && tokens[1] != kLangEnId))
    Throw(ErrorCode::kValidation,
          "prefix must start with SOT followed by a language token");
  const int vocab = static_cast<int>(m.config.vocab.size());
  for (int id : tokens)
    if (id < 0 || id >= vocab)
      Throw(ErrorCode::kValidation, "token id out of vocab");
}

}  // namespace

std::unique_ptr<Model> CreateModel(const ModelConfig& config,
                                   std::uint64_t seed) {
  config.Validate();
  auto m = std::make_unique<Model>();
  m->config = config;
  m->stage = 1;
  m->seed = seed;
  Rng rng = Rng::Derive(seed, 0x1417u);
  ParamStore& ps = m->params;
  const int d = config.d_model;

  CreateLinear(ps, rng, "enc.conv1", 1, 3 * config.n_mels, d);
  CreateLinear(ps, rng, "enc.conv2", 1, 3 * d, d);
  for (int l = 0; l < config.enc_layers; ++l) {
    const std::string p = "enc." + std::to_string(l);
    CreateLayerNorm(ps, p + ".ln1", 1, d);
    CreateAttention(ps, rng, p + ".self", 1, d, d);
    CreateLayerNorm(ps, p + ".ln2", 1, d);
    CreateFfn(ps, rng, p + ".ffn", 1, d, config.ffn_mult);
  }
  CreateLayerNorm(ps, "enc.ln_post", 1, d);

  // Projection layer: identity at init (final linear zeroed).
  Param* w1 = ps.Create("proj.w1", 1, d, d);
  FillHeNormal(w1->value, rng);
  ps.Create("proj.b1", 1, 1, d);
  ps.Create("proj.w2", 1, d, d);
  ps.Create("proj.b2", 1, 1, d);

  Param* tok = ps.Create("dec.tok_emb", 1,
                         static_cast<int>(config.vocab.size()), d);
  FillNormal(tok->value, rng, 0.02);
  Param* pos = ps.Create("dec.pos_emb", 1, config.max_text_len, d);
  FillNormal(pos->value, rng, 0.02);
  for (int l = 0; l < config.dec_layers; ++l) {
    const std::string p = "dec." + std::to_string(l);
    CreateLayerNorm(ps, p + ".ln1", 1, d);
    CreateAttention(ps, rng, p + ".self", 1, d, d);
    CreateLayerNorm(ps, p + ".ln2", 1, d);
    CreateAttention(ps, rng, p + ".cross", 1, d, d);
    CreateLayerNorm(ps, p + ".ln3", 1, d);
    CreateFfn(ps, rng, p + ".ffn", 1, d, config.ffn_mult);
  }
  CreateLayerNorm(ps, "dec.ln_post", 1, d);

  // Frozen visual embedder (stand-in for a pretrained visual encoder).
  Param* vw = ps.Create("vis.w", 1, kVisualPoolSize * kVisualPoolSize,
                        config.visual_dim);
  FillHeNormal(vw->value, rng);
  ps.Create("vis.b", 1, 1, config.visual_dim);
  return m;
}

void AddFusionParams(Model& model, std::uint64_t seed) {
  if (model.stage != 1 || model.params.Has("gate.0.alpha"))
    Throw(ErrorCode::kValidation, "model already has fusion parameters");
  Rng rng = Rng::Derive(seed, 0x9a7e2u);
  ParamStore& ps = model.params;
  const int d = model.config.d_model;
  for (int l = 0; l < model.config.dec_layers; ++l) {
    const std::string p = "gate." + std::to_string(l);
    CreateLayerNorm(ps, p + ".ln_attn", 2, d);
    CreateAttention(ps, rng, p + ".attn", 2, d, model.config.visual_dim);
    ps.Create(p + ".alpha", 2, 1, 1);
    CreateLayerNorm(ps, p + ".ln_ffn", 2, d);
    CreateFfn(ps, rng, p + ".ffn", 2, d, model.config.ffn_mult);
    ps.Create(p + ".beta", 2, 1, 1);
  }
  model.stage = 2;
}

// ---------------------------------------------------------------------------
// Graph builders
// ---------------------------------------------------------------------------

int BuildEncoder(Tape& t, const Model& m, int mel_node) {
  const Mat& mel = t.value(mel_node);
  if (mel.rows() < 2)
    Throw(ErrorCode::kValidation,
          "encoder needs at least 2 spectrogram frames");
  if (mel.cols() != m.config.n_mels)
    Throw(ErrorCode::kValidation, "mel bin count does not match model config");
  int x = t.Gelu(BuildLinear(t, m.params, "enc.conv1",
                             t.Unfold1d(mel_node, 3, 1, 1)));
  x = t.Gelu(BuildLinear(t, m.params, "enc.conv2", t.Unfold1d(x, 3, 2, 1)));
  x = t.Add(x, t.Leaf(SinusoidalPositions(static_cast<int>(t.value(x).rows()),
                                          m.config.d_model)));
  for (int l = 0; l < m.config.enc_layers; ++l) {
    const std::string p = "enc." + std::to_string(l);
    const int h = BuildLayerNorm(t, m.params, p + ".ln1", x);
    x = t.Add(x, BuildMha(t, m, h, h, p + ".self", /*causal=*/false));
    x = t.Add(x, BuildFfn(t, m.params, p + ".ffn",
                          BuildLayerNorm(t, m.params, p + ".ln2", x)));
  }
  return BuildLayerNorm(t, m.params, "enc.ln_post", x);
}

int BuildProjection(Tape& t, const Model& m, int emb_node) {
  const ParamStore& ps = m.params;
  const int hidden = t.Relu(
      t.AddRowBroadcast(t.Matmul(emb_node, t.LeafParam(ps.Get("proj.w1"))),
                        t.LeafParam(ps.Get("proj.b1"))));
  const int branch =
      t.AddRowBroadcast(t.Matmul(hidden, t.LeafParam(ps.Get("proj.w2"))),
                        t.LeafParam(ps.Get("proj.b2")));
  return t.Add(emb_node, branch);
}

int BuildDecoder(Tape& t, const Model& m, int enc_node, const Mat& visual,
                 const std::vector<int>& tokens, bool fusion,
                 double logit_scale) {
  ValidatePrefix(m, tokens);
  if (fusion && m.stage < 2)
    Throw(ErrorCode::kValidation,
          "fusion requested but model has no stage-2 parameters");
  if (fusion && visual.cols() != m.config.visual_dim)
    Throw(ErrorCode::kValidation, "visual feature dim mismatch");
  const ParamStore& ps = m.params;
  const int tok_table = t.LeafParam(ps.Get("dec.tok_emb"));
  std::vector<int> positions(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i)
    positions[i] = static_cast<int>(i);
  int x = t.Add(t.Rows(tok_table, tokens),
                t.Rows(t.LeafParam(ps.Get("dec.pos_emb")), positions));
  int visual_node = -1;
  if (fusion) visual_node = t.Leaf(visual);
  for (int l = 0; l < m.config.dec_layers; ++l) {
    const std::string p = "dec." + std::to_string(l);
    const std::string g = "gate." + std::to_string(l);
    if (fusion) {
      // Gated visual cross-attention and gated FFN at the head of the block;
      // tanh(0) gates make this an exact no-op at initialization.
      const int ga =
          BuildMha(t, m, BuildLayerNorm(t, ps, g + ".ln_attn", x), visual_node,
                   g + ".attn", /*causal=*/false);
      x = t.Add(x, t.ScaleByScalarNode(
                       ga, t.Tanh(t.LeafParam(ps.Get(g + ".alpha")))));
      const int gf = BuildFfn(t, ps, g + ".ffn",
                              BuildLayerNorm(t, ps, g + ".ln_ffn", x));
      x = t.Add(x, t.ScaleByScalarNode(
                       gf, t.Tanh(t.LeafParam(ps.Get(g + ".beta")))));
    }
    const int h = BuildLayerNorm(t, ps, p + ".ln1", x);
    x = t.Add(x, BuildMha(t, m, h, h, p + ".self", /*causal=*/true));
    x = t.Add(x, BuildMha(t, m, BuildLayerNorm(t, ps, p + ".ln2", x), enc_node,
                          p + ".cross", /*causal=*/false));
    x = t.Add(x, BuildFfn(t, ps, p + ".ffn",
                          BuildLayerNorm(t, ps, p + ".ln3", x)));
  }
  x = BuildLayerNorm(t, ps, "dec.ln_post", x);
  if (logit_scale != 1.0) x = t.Scale(x, logit_scale);
  return t.MatmulNT(x, tok_table);
}

// ---------------------------------------------------------------------------
// Forward-only conveniences
// ---------------------------------------------------------------------------

Mat EncodeAudio(const Model& m, const Mat& mel) {
  Tape t;
  return t.value(BuildEncoder(t, m, t.Leaf(mel)));
}

Mat ProjectWhisper(const Model& m, const Mat& emb) {
  Tape t;
  return t.value(BuildProjection(t, m, t.Leaf(emb)));
}

Mat DecodeLogits(const Model& m, const Mat& enc, const VisualFeatures& visual,
                 const std::vector<int>& tokens, bool fusion,
                 double logit_scale) {
  Tape t;
  return t.value(BuildDecoder(t, m, t.Leaf(enc), visual.frames, tokens, fusion,
                              logit_scale));
}

VisualFeatures EmbedVisual(const Model& m, const io::FrameStack& crops) {
  if (crops.height != 96 || crops.width != 96)
    Throw(ErrorCode::kValidation,
          "visual embedder expects 96x96 crops, got " +
              std::to_string(crops.height) + "x" + std::to_string(crops.width));
  const Mat& w = m.params.Get("vis.w")->value;
  const Mat& b = m.params.Get("vis.b")->value;
  const int pool = 96 / kVisualPoolSize;
  VisualFeatures out;
  out.present = true;
  out.frames.resize(crops.n_frames, m.config.visual_dim);
  Eigen::RowVectorXd pooled(kVisualPoolSize * kVisualPoolSize);
  for (int f = 0; f < crops.n_frames; ++f) {
    for (int pr = 0; pr < kVisualPoolSize; ++pr)
      for (int pc = 0; pc < kVisualPoolSize; ++pc) {
        double acc = 0.0;
        for (int r = 0; r < pool; ++r)
          for (int c = 0; c < pool; ++c)
            acc += crops.At(f, pr * pool + r, pc * pool + c);
        pooled(pr * kVisualPoolSize + pc) = acc / (pool * pool * 255.0);
      }
    out.frames.row(f) = pooled * w + b.row(0);
  }
  return out;
}

VisualFeatures AbsentVisual(const Model& m) {
  VisualFeatures out;
  out.present = false;
  out.frames = Mat::Zero(1, m.config.visual_dim);
  return out;
}

int ArgmaxRow(const Mat& mat, Eigen::Index row) {
  int best = 0;
  double best_v = mat(row, 0);
  for (Eigen::Index c = 1; c < mat.cols(); ++c)
    if (mat(row, c) > best_v) {
      best_v = mat(row, c);
      best = static_cast<int>(c);
    }
  return best;
}

Transcription GreedyTranscribe(const Model& m, const Mat& mel,
                               const VisualFeatures& visual,
                               corpus::SpeechType speech_type,
                               corpus::Language language, bool fusion,
                               double logit_scale) {
  Mat enc = EncodeAudio(m, mel);
  if (speech_type == corpus::SpeechType::kWhisper)
    enc = ProjectWhisper(m, enc);
  Transcription out;
  out.token_ids = {kSotId, LanguageTokenId(language)};
  while (static_cast<int>(out.token_ids.size()) < m.config.max_text_len) {
    const Mat logits =
        DecodeLogits(m, enc, visual, out.token_ids, fusion, logit_scale);
    const int next = ArgmaxRow(logits, logits.rows() - 1);
    out.token_ids.push_back(next);
    if (next == kEotId) break;
  }
  out.text = m.DecodeTokens(out.token_ids);
  return out;
}

// ---------------------------------------------------------------------------
// Token helpers
// ---------------------------------------------------------------------------

std::vector<int> Model::EncodeText(const std::string& utf8) const {
  std::unordered_map<std::string, int> lookup;
  for (std::size_t i = kNumSpecials; i < config.vocab.size(); ++i)
    lookup[config.vocab[i]] = static_cast<int>(i);
  std::vector<int> ids;
  for (char32_t cp : DecodeUtf8(utf8)) {
    const std::string key = EncodeUtf8(cp);
    auto it = lookup.find(key);
    if (it == lookup.end())
      Throw(ErrorCode::kValidation,
            "character \"" + key + "\" not in model vocabulary");
    ids.push_back(it->second);
  }
  return ids;
}

std::string Model::DecodeTokens(const std::vector<int>& ids) const {
  std::string out;
  for (int id : ids) {
    if (id < kNumSpecials) continue;
    if (id >= static_cast<int>(config.vocab.size()))
      Throw(ErrorCode::kValidation, "token id out of vocab");
    out += config.vocab[static_cast<std::size_t>(id)];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

json ConfigToJson(const ModelConfig& c) {
  json j;
  j["d_model"] = c.d_model;
  j["n_heads"] = c.n_heads;
  j["enc_layers"] = c.enc_layers;
  j["dec_layers"] = c.dec_layers;
  j["ffn_mult"] = c.ffn_mult;
  j["max_text_len"] = c.max_text_len;
  j["visual_dim"] = c.visual_dim;
  j["n_mels"] = c.n_mels;
  j["vocab"] = c.vocab;
  return j;
}

ModelConfig ConfigFromJson(const json& j) {
  ModelConfig c;
  c.d_model = j.at("d_model").get<int>();
  c.n_heads = j.at("n_heads").get<int>();
  c.enc_layers = j.at("enc_layers").get<int>();
  c.dec_layers = j.at("dec_layers").get<int>();
  c.ffn_mult = j.at("ffn_mult").get<int>();
  c.max_text_len = j.at("max_text_len").get<int>();
  c.visual_dim = j.at("visual_dim").get<int>();
  c.n_mels = j.at("n_mels").get<int>();
  c.vocab = j.at("vocab").get<std::vector<std::string>>();
  return c;
}

template <typename T>
void WritePod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T ReadPod(std::istream& in, const std::string& path) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) Throw(ErrorCode::kIo, "unexpected end of checkpoint: " + path);
  return v;
}

}  // namespace

void SaveCheckpoint(const Model& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Throw(ErrorCode::kIo, "cannot create checkpoint: " + path);
  out.write("AVWC", 4);
  WritePod<std::uint32_t>(out, 1);
  WritePod<std::uint32_t>(out, static_cast<std::uint32_t>(m.stage));
  WritePod<std::uint64_t>(out, m.seed);
  const std::string cfg = ConfigToJson(m.config).dump();
  WritePod<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.size()));
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  WritePod<std::uint32_t>(out,
                          static_cast<std::uint32_t>(m.params.All().size()));
  Fnv64 hash;
  for (const Param* p : m.params.All()) {
    WritePod<std::uint32_t>(out, static_cast<std::uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    WritePod<std::uint32_t>(out, static_cast<std::uint32_t>(p->stage));
    WritePod<std::uint64_t>(out, static_cast<std::uint64_t>(p->value.rows()));
    WritePod<std::uint64_t>(out, static_cast<std::uint64_t>(p->value.cols()));
    for (Eigen::Index c = 0; c < p->value.cols(); ++c)
      for (Eigen::Index r = 0; r < p->value.rows(); ++r) {
        const double v = p->value(r, c);
        hash.Update(&v, sizeof(v));
        WritePod<double>(out, v);
      }
  }
  WritePod<std::uint64_t>(out, hash.digest());
  if (!out) Throw(ErrorCode::kIo, "failed writing checkpoint: " + path);
}

std::unique_ptr<Model> LoadCheckpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Throw(ErrorCode::kIo, "cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "AVWC", 4) != 0)
    Throw(ErrorCode::kParse, "not an avwhisper checkpoint: " + path);
  const auto version = ReadPod<std::uint32_t>(in, path);
  if (version != 1)
    Throw(ErrorCode::kParse, "unsupported checkpoint version: " + path);
  const auto stage = ReadPod<std::uint32_t>(in, path);
  const auto seed = ReadPod<std::uint64_t>(in, path);
  const auto cfg_len = ReadPod<std::uint32_t>(in, path);
  std::string cfg_str(cfg_len, '\0');
  in.read(cfg_str.data(), cfg_len);
  if (!in) Throw(ErrorCode::kIo, "unexpected end of checkpoint: " + path);
  ModelConfig config;
  try {
    config = ConfigFromJson(json::parse(cfg_str));
  } catch (const json::exception& e) {
    Throw(ErrorCode::kParse, path + ": bad config block: " + e.what());
  }

  auto m = CreateModel(config, seed);
  if (stage == 2) AddFusionParams(*m, seed);

  const auto n_params = ReadPod<std::uint32_t>(in, path);
  if (n_params != m->params.All().size())
    Throw(ErrorCode::kValidation,
          path + ": checkpoint/config mismatch: expected " +
              std::to_string(m->params.All().size()) + " tensors, found " +
              std::to_string(n_params));
  Fnv64 hash;
  for (std::uint32_t i = 0; i < n_params; ++i) {
    const auto name_len = ReadPod<std::uint32_t>(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto p_stage = ReadPod<std::uint32_t>(in, path);
    const auto rows = ReadPod<std::uint64_t>(in, path);
    const auto cols = ReadPod<std::uint64_t>(in, path);
    if (!m->params.Has(name))
      Throw(ErrorCode::kValidation,
            path + ": checkpoint/config mismatch: unexpected tensor \"" +
                name + "\"");
    Param* p = m->params.Get(name);
    if (static_cast<Eigen::Index>(rows) != p->value.rows() ||
        static_cast<Eigen::Index>(cols) != p->value.cols() ||
        static_cast<int>(p_stage) != p->stage)
      Throw(ErrorCode::kValidation,
            path + ": checkpoint/config mismatch for tensor \"" + name + "\"");
    for (std::uint64_t c = 0; c < cols; ++c)
      for (std::uint64_t r = 0; r < rows; ++r) {
        const double v = ReadPod<double>(in, path);
        hash.Update(&v, sizeof(v));
        p->value(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
      }
  }
  const auto checksum = ReadPod<std::uint64_t>(in, path);
  if (checksum != hash.digest())
    Throw(ErrorCode::kValidation, "checkpoint checksum mismatch: " + path);
  return m;
}

std::uint64_t ParamChecksum(const Model& m, int stage) {
  Fnv64 hash;
  for (const Param* p : m.params.All()) {
    if (stage != 0 && p->stage != stage) continue;
    hash.Update(p->name.data(), p->name.size());
    for (Eigen::Index c = 0; c < p->value.cols(); ++c)
      for (Eigen::Index r = 0; r < p->value.rows(); ++r) {
        const double v = p->value(r, c);
        hash.Update(&v, sizeof(v));
      }
  }
  return hash.digest();
}

}  // namespace avw::model
