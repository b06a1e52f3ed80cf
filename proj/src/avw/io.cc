// src/avw/io.cc
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

#include "avw/io.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "avw/util.h"

namespace avw::io {

namespace {

void ReadExact(std::istream& in, void* buf, std::size_t n,
               const std::string& path) {
  in.read(static_cast<char*>(buf), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n)
    Throw(ErrorCode::kIo, "unexpected end of file: " + path);
}

template <typename T>
T ReadPod(std::istream& in, const std::string& path) {
  T v;
  ReadExact(in, &v, sizeof(T), path);
  return v;
}

template <typename T>
void WritePod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

std::ifstream OpenIn(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Throw(ErrorCode::kIo, "cannot open file: " + path);
  return in;
}

std::ofstream OpenOut(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Throw(ErrorCode::kIo, "cannot create file: " + path);
  return out;
}

struct WavHeader {
  int sample_rate = 0;
  int channels = 0;
  int bits = 0;
  int format = 0;  // 1 = PCM, 3 = IEEE float
  std::streampos data_pos;
  std::uint32_t data_bytes = 0;
};

WavHeader ParseWavHeader(std::istream& in, const std::string& path) {
  char riff[4], wave[4];
  ReadExact(in, riff, 4, path);
  ReadPod<std::uint32_t>(in, path);
  ReadExact(in, wave, 4, path);
  if (std::memcmp(riff, "RIFF", 4) != 0 || std::memcmp(wave, "WAVE", 4) != 0)
    Throw(ErrorCode::kParse, "not a RIFF/WAVE file: " + path);
  WavHeader h;
  bool have_fmt = false;
  while (in) {
    char id[4];
    in.read(id, 4);
    if (in.gcount() != 4) break;
    auto size = ReadPod<std::uint32_t>(in, path);
    if (std::memcmp(id, "fmt ", 4) == 0) {
      h.format = ReadPod<std::uint16_t>(in, path);
      h.channels = ReadPod<std::uint16_t>(in, path);
      h.sample_rate = static_cast<int>(ReadPod<std::uint32_t>(in, path));
      ReadPod<std::uint32_t>(in, path);  // byte rate
      ReadPod<std::uint16_t>(in, path);  // block align
      h.bits = ReadPod<std::uint16_t>(in, path);
      if (size > 16) in.seekg(size - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      h.data_pos = in.tellg();
      h.data_bytes = size;
      in.seekg(size + (size & 1), std::ios::cur);
    } else {
      in.seekg(size + (size & 1), std::ios::cur);
    }
  }
  if (!have_fmt || h.data_bytes == 0)
    Throw(ErrorCode::kParse, "WAVE file missing fmt/data chunk: " + path);
  if (h.channels != 1)
    Throw(ErrorCode::kValidation, "only mono WAVE supported: " + path);
  return h;
}

}  // namespace

Wave ReadWav(const std::string& path) {
  auto in = OpenIn(path);
  WavHeader h = ParseWavHeader(in, path);
  in.clear();
  in.seekg(h.data_pos);
  Wave w;
  w.sample_rate = h.sample_rate;
  if (h.format == 1 && h.bits == 16) {
    const std::size_t n = h.data_bytes / 2;
    std::vector<std::int16_t> raw(n);
    ReadExact(in, raw.data(), n * 2, path);
    w.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) w.samples[i] = raw[i] / 32768.0;
  } else if (h.format == 3 && h.bits == 32) {
    const std::size_t n = h.data_bytes / 4;
    std::vector<float> raw(n);
    ReadExact(in, raw.data(), n * 4, path);
    w.samples.assign(raw.begin(), raw.end());
  } else {
    Throw(ErrorCode::kValidation,
          "unsupported WAVE encoding (want PCM16 or float32): " + path);
  }
  return w;
}

void WriteWavPcm16(const std::string& path, const std::vector<double>& samples,
                   int sample_rate) {
  auto out = OpenOut(path);
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  out.write("RIFF", 4);
  WritePod<std::uint32_t>(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  WritePod<std::uint32_t>(out, 16);
  WritePod<std::uint16_t>(out, 1);  // PCM
  WritePod<std::uint16_t>(out, 1);  // mono
  WritePod<std::uint32_t>(out, static_cast<std::uint32_t>(sample_rate));
  WritePod<std::uint32_t>(out, static_cast<std::uint32_t>(sample_rate * 2));
  WritePod<std::uint16_t>(out, 2);
  WritePod<std::uint16_t>(out, 16);
  out.write("data", 4);
  WritePod<std::uint32_t>(out, data_bytes);
  for (double s : samples) {
    double c = s < -1.0 ? -1.0 : (s > 1.0 ? 1.0 : s);
    auto v = static_cast<std::int16_t>(std::lrint(c * 32767.0));
    WritePod<std::int16_t>(out, v);
  }
  if (!out) Throw(ErrorCode::kIo, "failed writing " + path);
}

double WavDurationSeconds(const std::string& path) {
  auto in = OpenIn(path);
  WavHeader h = ParseWavHeader(in, path);
  const int bytes_per_sample = h.bits / 8;
  return static_cast<double>(h.data_bytes / bytes_per_sample) / h.sample_rate;
}

FrameStack ReadFrameStack(const std::string& path) {
  auto in = OpenIn(path);
  char magic[4];
  ReadExact(in, magic, 4, path);
  if (std::memcmp(magic, "AVWF", 4) != 0)
    Throw(ErrorCode::kParse, "bad frame stack magic: " + path);
  auto version = ReadPod<std::uint32_t>(in, path);
  if (version != 1)
    Throw(ErrorCode::kParse, "unsupported frame stack version: " + path);
  FrameStack s;
  s.n_frames = static_cast<int>(ReadPod<std::uint32_t>(in, path));
  s.height = static_cast<int>(ReadPod<std::uint32_t>(in, path));
  s.width = static_cast<int>(ReadPod<std::uint32_t>(in, path));
  auto dtype = ReadPod<std::uint32_t>(in, path);
  auto checksum = ReadPod<std::uint64_t>(in, path);
  const std::size_t count =
      static_cast<std::size_t>(s.n_frames) * s.height * s.width;
  s.data.resize(count);
  if (dtype == static_cast<std::uint32_t>(FrameDtype::kU8)) {
    std::vector<std::uint8_t> raw(count);
    ReadExact(in, raw.data(), count, path);
    if (Fnv64Bytes(raw.data(), count) != checksum)
      Throw(ErrorCode::kValidation, "frame stack checksum mismatch: " + path);
    for (std::size_t i = 0; i < count; ++i) s.data[i] = raw[i];
  } else if (dtype == static_cast<std::uint32_t>(FrameDtype::kF32)) {
    std::vector<float> raw(count);
    ReadExact(in, raw.data(), count * 4, path);
    if (Fnv64Bytes(raw.data(), count * 4) != checksum)
      Throw(ErrorCode::kValidation, "frame stack checksum mismatch: " + path);
    for (std::size_t i = 0; i < count; ++i) s.data[i] = raw[i];
  } else {
    Throw(ErrorCode::kParse, "unknown frame stack dtype: " + path);
  }
  return s;
}

void WriteFrameStack(const std::string& path, const FrameStack& stack,
                     FrameDtype dtype) {
  const std::size_t count =
      static_cast<std::size_t>(stack.n_frames) * stack.height * stack.width;
  if (stack.data.size() != count)
    Throw(ErrorCode::kInvalidArg, "frame stack shape/data mismatch");
  auto out = OpenOut(path);
  out.write("AVWF", 4);
  WritePod<std::uint32_t>(out, 1);
  WritePod<std::uint32_t>(out, static_cast<std::uint32_t>(stack.n_frames));
  WritePod<std::uint32_t>(out, static_cast<std::uint32_t>(stack.height));
  WritePod<std::uint32_t>(out, static_cast<std::uint32_t>(stack.width));
  WritePod<std::uint32_t>(out, static_cast<std::uint32_t>(dtype));
  if (dtype == FrameDtype::kU8) {
    std::vector<std::uint8_t> raw(count);
    for (std::size_t i = 0; i < count; ++i) {
      double v = std::lrint(stack.data[i]);
      raw[i] = static_cast<std::uint8_t>(v < 0 ? 0 : (v > 255 ? 255 : v));
    }
    WritePod<std::uint64_t>(out, Fnv64Bytes(raw.data(), count));
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(count));
  } else {
    std::vector<float> raw(count);
    for (std::size_t i = 0; i < count; ++i)
      raw[i] = static_cast<float>(stack.data[i]);
    WritePod<std::uint64_t>(out, Fnv64Bytes(raw.data(), count * 4));
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(count * 4));
  }
  if (!out) Throw(ErrorCode::kIo, "failed writing " + path);
}

MelBlob ReadMelBlob(const std::string& path) {
  auto in = OpenIn(path);
  char magic[4];
  ReadExact(in, magic, 4, path);
  if (std::memcmp(magic, "AVWM", 4) != 0)
    Throw(ErrorCode::kParse, "bad feature cache magic: " + path);
  auto version = ReadPod<std::uint32_t>(in, path);
  if (version != 1)
    Throw(ErrorCode::kParse, "unsupported feature cache version: " + path);
  MelBlob b;
  b.time = static_cast<int>(ReadPod<std::uint32_t>(in, path));
  b.n_mels = static_cast<int>(ReadPod<std::uint32_t>(in, path));
  auto dtype = ReadPod<std::uint32_t>(in, path);
  if (dtype != 2) Throw(ErrorCode::kParse, "unknown feature dtype: " + path);
  auto checksum = ReadPod<std::uint64_t>(in, path);
  const std::size_t count = static_cast<std::size_t>(b.time) * b.n_mels;
  b.data.resize(count);
  ReadExact(in, b.data.data(), count * 8, path);
  if (Fnv64Bytes(b.data.data(), count * 8) != checksum)
    Throw(ErrorCode::kValidation, "feature cache checksum mismatch: " + path);
  return b;
}

void WriteMelBlob(const std::string& path, const MelBlob& blob) {
  const std::size_t count = static_cast<std::size_t>(blob.time) * blob.n_mels;
  if (blob.data.size() != count)
    Throw(ErrorCode::kInvalidArg, "feature blob shape/data mismatch");
  auto out = OpenOut(path);
  out.write("AVWM", 4);
  WritePod<std::uint32_t>(out, 1);
  WritePod<std::uint32_t>(out, static_cast<std::uint32_t>(blob.time));
  WritePod<std::uint32_t>(out, static_cast<std::uint32_t>(blob.n_mels));
  WritePod<std::uint32_t>(out, 2);
  WritePod<std::uint64_t>(out, Fnv64Bytes(blob.data.data(), count * 8));
  out.write(reinterpret_cast<const char*>(blob.data.data()),
            static_cast<std::streamsize>(count * 8));
  if (!out) Throw(ErrorCode::kIo, "failed writing " + path);
}

std::vector<FrameLandmarks> ReadLandmarks(const std::string& path) {
  auto in = OpenIn(path);
  std::vector<FrameLandmarks> out;
  std::string line;
  int line_no = 0;
  int prev_index = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    FrameLandmarks lm;
    if (!(ss >> lm.frame_index >> lm.p1x >> lm.p1y >> lm.p2x >> lm.p2y >>
          lm.p3x >> lm.p3y))
      Throw(ErrorCode::kParse, path + ":" + std::to_string(line_no) +
                                   ": expected frame_index and 6 reals");
    if (lm.frame_index < 0)
      Throw(ErrorCode::kValidation, path + ":" + std::to_string(line_no) +
                                        ": negative frame index");
    if (lm.frame_index <= prev_index)
      Throw(ErrorCode::kValidation, path + ":" + std::to_string(line_no) +
                                        ": frame indices must increase");
    for (double v : {lm.p1x, lm.p1y, lm.p2x, lm.p2y, lm.p3x, lm.p3y})
      if (!std::isfinite(v))
        Throw(ErrorCode::kValidation, path + ":" + std::to_string(line_no) +
                                          ": non-finite landmark coordinate");
    prev_index = lm.frame_index;
    out.push_back(lm);
  }
  return out;
}

void WriteLandmarks(const std::string& path,
                    const std::vector<FrameLandmarks>& frames) {
  auto out = OpenOut(path);
  for (const auto& lm : frames) {
    out << lm.frame_index << ' ' << FormatDouble(lm.p1x, 4) << ' '
        << FormatDouble(lm.p1y, 4) << ' ' << FormatDouble(lm.p2x, 4) << ' '
        << FormatDouble(lm.p2y, 4) << ' ' << FormatDouble(lm.p3x, 4) << ' '
        << FormatDouble(lm.p3y, 4) << '\n';
  }
  if (!out) Throw(ErrorCode::kIo, "failed writing " + path);
}

std::string ReadTextFile(const std::string& path) {
  auto in = OpenIn(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteTextFile(const std::string& path, const std::string& content) {
  auto out = OpenOut(path);
  out << content;
  if (!out) Throw(ErrorCode::kIo, "failed writing " + path);
}

}  // namespace avw::io
