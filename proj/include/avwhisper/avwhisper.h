/* include/avwhisper/avwhisper.h
 *
 * Copyright 2026 The avwhisper Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *  http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 * C API of the avwhisper shared library: opaque handles plus status codes.
 * Every function returns AVW_OK on success; on failure the thread-local
 * message from avw_last_error() describes what went wrong. Strings returned
 * through char** are heap-allocated and must be released with
 * avw_string_free().
 */

#ifndef AVWHISPER_AVWHISPER_H_
#define AVWHISPER_AVWHISPER_H_

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#ifndef AVW_API
#define AVW_API __attribute__((visibility("default")))
#endif

typedef enum avw_status {
  AVW_OK = 0,
  AVW_ERR_INVALID_ARG = 1,
  AVW_ERR_IO = 2,
  AVW_ERR_PARSE = 3,
  AVW_ERR_VALIDATION = 4,
  AVW_ERR_NOT_FOUND = 5,
  AVW_ERR_INTERNAL = 6
} avw_status;

typedef struct avw_manifest avw_manifest; /* utterance corpus manifest */
typedef struct avw_model avw_model;       /* loaded recognizer checkpoint */

AVW_API const char* avw_version(void);
/* Message of the most recent failure on this thread ("" if none). */
AVW_API const char* avw_last_error(void);
AVW_API void avw_string_free(char* s);

/* --- manifests ---------------------------------------------------------- */

AVW_API avw_status avw_manifest_load(const char* path, avw_manifest** out);
AVW_API avw_status avw_manifest_save(const avw_manifest* m, const char* path);
AVW_API void avw_manifest_free(avw_manifest* m);

/* Scans a raw corpus directory (utterances.tsv + audio/video/landmarks). */
AVW_API avw_status avw_manifest_prepare_dir(const char* dir,
                                            avw_manifest** out);

/* Whisper->normal pairing by textual similarity (returns a new manifest). */
AVW_API avw_status avw_manifest_pair(const avw_manifest* m,
                                     avw_manifest** out);

AVW_API avw_status avw_manifest_counts(const avw_manifest* m,
                                       int64_t* out_records,
                                       int64_t* out_pairs,
                                       int64_t* out_unpaired);

/* Table-1 style statistics rendering. */
AVW_API avw_status avw_manifest_stats_render(const avw_manifest* m,
                                             char** out_table);

/* Speaker-disjoint split; ratios must sum to 1 (within 1e-6). */
AVW_API avw_status avw_manifest_split(const avw_manifest* m, double train,
                                      double valid, double test, uint64_t seed,
                                      avw_manifest** out_train,
                                      avw_manifest** out_valid,
                                      avw_manifest** out_test);

/* Deterministic synthetic whisper/normal corpus with rendered lip videos. */
AVW_API avw_status avw_synth_corpus(const char* out_dir, int n_speakers,
                                    int n_utts, uint64_t seed,
                                    avw_manifest** out);

/* Ratcliff-Obershelp ratio over Unicode code points, junk disabled. */
AVW_API avw_status avw_sequence_similarity(const char* a_utf8,
                                           const char* b_utf8, double* out);

/* --- lip geometry -------------------------------------------------------- */

/* Mouth-centered square crop window from nose (p1) and mouth corner (p2,
 * p3) landmarks. Fails with AVW_ERR_VALIDATION on degenerate geometry. */
AVW_API avw_status avw_crop_spec(double p1x, double p1y, double p2x,
                                 double p2y, double p3x, double p3y,
                                 double* out_center_x, double* out_center_y,
                                 double* out_width);

/* Writes <out_dir>/<utt_id>.crop 96x96 stacks for every video record. */
AVW_API avw_status avw_crop_lips(const avw_manifest* m, const char* out_dir,
                                 int smooth);

/* --- features ------------------------------------------------------------ */

/* Writes <out_dir>/<utt_id>.mel log-mel blobs for every record. */
AVW_API avw_status avw_featurize(const avw_manifest* m, const char* out_dir,
                                 int n_mels);

/* --- training ------------------------------------------------------------ */

typedef struct avw_train_options {
  int stage;        /* 1 or 2 */
  int epochs;       /* <= 0 selects the stage default (2 / 4) */
  int batch_pairs;  /* <= 0 selects 8 */
  double lr;        /* <= 0 selects 1e-3 */
  uint64_t seed;
  double grad_clip;    /* < 0 selects 1.0; 0 disables clipping */
  int warmup_steps;    /* < 0 selects 0 */
  int n_mels;          /* <= 0 selects 80 (stage-1 model creation) */
  int d_model;         /* <= 0 selects 64 */
  int n_heads;         /* <= 0 selects 4 */
  int enc_layers;      /* <= 0 selects 2 */
  int dec_layers;      /* <= 0 selects 2 */
  const char* feats_dir; /* NULL: compute features from the WAVs */
  const char* crops_dir; /* stage 2 only; NULL: zero visual features */
  const char* init_ckpt; /* required for stage 2 */
  const char* log_path;  /* NULL: no step log; else TSV step log */
} avw_train_options;

AVW_API avw_status avw_train(const avw_manifest* m,
                             const avw_train_options* options,
                             const char* out_ckpt);

/* --- models and evaluation ----------------------------------------------- */

AVW_API avw_status avw_model_load(const char* path, avw_model** out);
AVW_API void avw_model_free(avw_model* m);
AVW_API avw_status avw_model_stage(const avw_model* m, int* out_stage);

/* Greedy transcription of one WAV. speech_type: "whisper" | "normal"
 * (whisper routes through the projection layer); language: "zh" | "en".
 * crops_path may be NULL (zero visual features). */
AVW_API avw_status avw_transcribe(const avw_model* model, const char* wav_path,
                                  const char* crops_path,
                                  const char* speech_type,
                                  const char* language, char** out_text);

typedef struct avw_eval_options {
  const char* unit;      /* "char" | "word" (word is rejected for zh) */
  const char* language;  /* "zh" | "en" */
  const char* feats_dir; /* NULL: compute features from the WAVs */
  const char* crops_dir; /* NULL: zero visual features */
  const char* hyps_path; /* NULL: decode with the model; else TSV utt\thyp */
  const char* report_path; /* NULL: no per-utterance report file */
} avw_eval_options;

/* Scores the manifest. ckpt_path may be NULL when hyps_path is given.
 * Fails with AVW_ERR_NOT_FOUND if a record has no hypothesis. */
AVW_API avw_status avw_evaluate(const avw_manifest* m, const char* ckpt_path,
                                const avw_eval_options* options,
                                double* out_aggregate, char** out_summary);

/* Levenshtein S/D/I counts between two strings (char unit, raw text). */
AVW_API avw_status avw_edit_ops(const char* ref_utf8, const char* hyp_utf8,
                                int64_t* out_sub, int64_t* out_del,
                                int64_t* out_ins);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* AVWHISPER_AVWHISPER_H_ */
