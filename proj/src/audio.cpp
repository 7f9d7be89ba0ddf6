// Copyright 2026 The s2t Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "s2t/audio.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>

#include "s2t/binary_io.hpp"
#include "s2t/errors.hpp"

namespace s2t::audio {

namespace {

std::uint32_t le32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

std::uint16_t le16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Filter j spans boundaries [j, j+2] with its peak at j+1.
std::vector<double> mel_boundaries_hz(int sample_rate) {
  const double top = hz_to_mel(sample_rate / 2.0);
  std::vector<double> hz(kMelFilters + 2);
  for (std::size_t i = 0; i < hz.size(); ++i) {
    hz[i] = mel_to_hz(top * static_cast<double>(i) / static_cast<double>(kMelFilters + 1));
  }
  return hz;
}

// Weights [filter][bin] for a one-sided spectrum of fft_size/2+1 bins.
std::vector<std::vector<double>> mel_filterbank(int sample_rate, std::size_t fft_size) {
  const auto edges = mel_boundaries_hz(sample_rate);
  const std::size_t bins = fft_size / 2 + 1;
  std::vector<std::vector<double>> bank(kMelFilters, std::vector<double>(bins, 0.0));
  for (std::size_t j = 0; j < kMelFilters; ++j) {
    const double lo = edges[j];
    const double mid = edges[j + 1];
    const double hi = edges[j + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / static_cast<double>(fft_size);
      if (f > lo && f <= mid) {
        bank[j][k] = (f - lo) / (mid - lo);
      } else if (f > mid && f < hi) {
        bank[j][k] = (hi - f) / (hi - mid);
      }
    }
  }
  return bank;
}

class RealFft {
 public:
  explicit RealFft(std::size_t n)
      : n_(n),
        in_(static_cast<double*>(fftw_malloc(sizeof(double) * n))),
        out_(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)))) {
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::vector<double> power(std::span<const double> frame) {
    std::fill(in_, in_ + n_, 0.0);
    std::copy(frame.begin(), frame.end(), in_);
    fftw_execute(plan_);
    std::vector<double> p(n_ / 2 + 1);
    for (std::size_t k = 0; k < p.size(); ++k) p[k] = out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1];
    return p;
  }

 private:
  std::size_t n_;
  double* in_;
  fftw_complex* out_;
  fftw_plan plan_;
};

std::vector<double> log_mel_from_power(const std::vector<std::vector<double>>& bank,
                                       const std::vector<double>& power) {
  std::vector<double> out(kMelFilters);
  for (std::size_t j = 0; j < kMelFilters; ++j) {
    double e = 0.0;
    for (std::size_t k = 0; k < power.size(); ++k) e += bank[j][k] * power[k];
    out[j] = std::log(std::max(kLogFloor, e));
  }
  return out;
}

// Orthonormal DCT-II, first kMfccCount coefficients.
void dct_ii(std::span<const double> x, std::span<double> out) {
  const auto n = static_cast<double>(x.size());
  for (std::size_t k = 0; k < kMfccCount; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      acc += x[i] * std::cos(std::numbers::pi * static_cast<double>(k) *
                             (2.0 * static_cast<double>(i) + 1.0) / (2.0 * n));
    }
    out[k] = acc * (k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n));
  }
}

}  // namespace

bool is_supported_rate(int sample_rate) {
  switch (sample_rate) {
    case 8000:
    case 16000:
    case 22050:
    case 44100:
    case 48000:
      return true;
    default:
      return false;
  }
}

AudioBuffer parse_pcm_wav(std::span<const std::uint8_t> b) {
  if (b.size() < 12 || std::memcmp(b.data(), "RIFF", 4) != 0 || std::memcmp(b.data() + 8, "WAVE", 4) != 0) {
    throw DataError("malformed WAV header: missing RIFF/WAVE signature");
  }
  std::size_t pos = 12;
  bool have_fmt = false;
  int channels = 0;
  int rate = 0;
  std::span<const std::uint8_t> data;
  bool have_data = false;
  while (pos + 8 <= b.size()) {
    const std::uint32_t size = le32(b, pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > b.size()) throw DataError("malformed WAV header: chunk exceeds file size");
    if (std::memcmp(b.data() + pos, "fmt ", 4) == 0) {
      if (size < 16) throw DataError("malformed WAV header: short fmt chunk");
      const std::uint16_t format = le16(b, body);
      channels = le16(b, body + 2);
      rate = static_cast<int>(le32(b, body + 4));
      const std::uint16_t bits = le16(b, body + 14);
      if (format != 1) throw DataError("unsupported WAV encoding: format tag " + std::to_string(format) + " is not PCM");
      if (bits != 16) throw DataError("unsupported WAV encoding: " + std::to_string(bits) + "-bit samples");
      if (channels < 1 || channels > 2) throw DataError("unsupported WAV channel count " + std::to_string(channels));
      have_fmt = true;
    } else if (std::memcmp(b.data() + pos, "data", 4) == 0) {
      data = b.subspan(body, size);
      have_data = true;
    }
    pos = body + size + (size & 1u);
  }
  if (!have_fmt) throw DataError("malformed WAV header: no fmt chunk");
  if (!have_data) throw DataError("malformed WAV header: no data chunk");
  if (!is_supported_rate(rate)) throw DataError("unsupported WAV sample rate " + std::to_string(rate));
  const std::size_t frame_bytes = 2u * static_cast<std::size_t>(channels);
  const std::size_t count = data.size() / frame_bytes;
  if (count == 0) throw DataError("empty WAV data chunk");

  AudioBuffer audio;
  audio.sample_rate = rate;
  audio.samples.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    double acc = 0.0;
    for (int c = 0; c < channels; ++c) {
      const auto raw = static_cast<std::int16_t>(le16(data, i * frame_bytes + 2u * static_cast<std::size_t>(c)));
      acc += static_cast<double>(raw) / 32768.0;
    }
    audio.samples[i] = acc / channels;
  }
  return audio;
}

AudioBuffer load_pcm_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return parse_pcm_wav(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_pcm_wav(const std::filesystem::path& path, std::span<const std::int16_t> samples,
                   int sample_rate, int channels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  out.write("RIFF", 4);
  io::write_pod<std::uint32_t>(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  io::write_pod<std::uint32_t>(out, 16);
  io::write_pod<std::uint16_t>(out, 1);
  io::write_pod<std::uint16_t>(out, static_cast<std::uint16_t>(channels));
  io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(sample_rate));
  io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(sample_rate * channels * 2));
  io::write_pod<std::uint16_t>(out, static_cast<std::uint16_t>(channels * 2));
  io::write_pod<std::uint16_t>(out, 16);
  out.write("data", 4);
  io::write_pod<std::uint32_t>(out, data_bytes);
  for (auto s : samples) io::write_pod<std::int16_t>(out, s);
}

std::size_t frame_count(std::size_t samples, std::size_t window, std::size_t hop) {
  if (window == 0 || hop == 0 || samples < window) return 0;
  return (samples - window) / hop + 1;
}

std::size_t ms_to_samples(double ms, int sample_rate) {
  return static_cast<std::size_t>(std::lround(ms * sample_rate / 1000.0));
}

std::vector<Frame> frame_and_window(const AudioBuffer& audio, double window_ms, double hop_ms) {
  if (!(hop_ms > 0.0) || window_ms < hop_ms) {
    throw std::invalid_argument("frame_and_window: need window >= hop > 0");
  }
  const std::size_t window = ms_to_samples(window_ms, audio.sample_rate);
  const std::size_t hop = ms_to_samples(hop_ms, audio.sample_rate);
  const std::size_t count = frame_count(audio.samples.size(), window, hop);

  std::vector<double> hamming(window);
  for (std::size_t i = 0; i < window; ++i) {
    hamming[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                        static_cast<double>(window - 1));
  }

  std::vector<Frame> frames(count);
  for (std::size_t f = 0; f < count; ++f) {
    const double* src = audio.samples.data() + f * hop;
    Frame& frame = frames[f];
    frame.raw.assign(src, src + window);
    frame.windowed.resize(window);
    // Pre-emphasis stays inside the frame so frames depend only on their own samples.
    for (std::size_t i = window; i-- > 1;) {
      frame.windowed[i] = (src[i] - kPreemphasis * src[i - 1]) * hamming[i];
    }
    frame.windowed[0] = (src[0] - kPreemphasis * src[0]) * hamming[0];
  }
  return frames;
}

std::vector<double> mel_center_frequencies(int sample_rate) {
  const auto edges = mel_boundaries_hz(sample_rate);
  return {edges.begin() + 1, edges.end() - 1};
}

std::vector<double> log_mel_energies(std::span<const double> windowed, int sample_rate) {
  const std::size_t fft_size = next_pow2(windowed.size());
  RealFft fft(fft_size);
  return log_mel_from_power(mel_filterbank(sample_rate, fft_size), fft.power(windowed));
}

FeatureSequence mfcc_with_energy(std::span<const Frame> frames, int sample_rate) {
  FeatureSequence seq;
  seq.dim = kFeatureDim;
  seq.frames = frames.size();
  if (frames.empty()) return seq;
  seq.values.resize(frames.size() * kFeatureDim);

  const std::size_t fft_size = next_pow2(frames.front().windowed.size());
  RealFft fft(fft_size);
  const auto bank = mel_filterbank(sample_rate, fft_size);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const auto log_mel = log_mel_from_power(bank, fft.power(frames[t].windowed));
    auto row = seq.row(t);
    dct_ii(log_mel, row.first(kMfccCount));
    double energy = 0.0;
    for (double s : frames[t].raw) energy += s * s;
    row[kMfccCount] = std::log(std::max(kLogFloor, energy));
  }
  return seq;
}

FeatureSequence extract_features(const AudioBuffer& audio) {
  const auto frames = frame_and_window(audio);
  return mfcc_with_energy(frames, audio.sample_rate);
}

FeatureStats compute_feature_stats(std::span<const FeatureSequence> corpus) {
  if (corpus.empty()) throw DataError("feature statistics need a nonempty corpus");
  const std::size_t dim = corpus.front().dim;
  std::vector<double> sum(dim, 0.0);
  std::size_t count = 0;
  for (const auto& seq : corpus) {
    if (seq.dim != dim) throw DataError("feature dimension mismatch in corpus");
    for (std::size_t t = 0; t < seq.frames; ++t) {
      auto r = seq.row(t);
      for (std::size_t d = 0; d < dim; ++d) sum[d] += r[d];
    }
    count += seq.frames;
  }
  if (count == 0) throw DataError("feature statistics need at least one frame");
  FeatureStats stats;
  stats.mean.resize(dim);
  for (std::size_t d = 0; d < dim; ++d) stats.mean[d] = sum[d] / static_cast<double>(count);
  std::vector<double> sq(dim, 0.0);
  for (const auto& seq : corpus) {
    for (std::size_t t = 0; t < seq.frames; ++t) {
      auto r = seq.row(t);
      for (std::size_t d = 0; d < dim; ++d) {
        const double c = r[d] - stats.mean[d];
        sq[d] += c * c;
      }
    }
  }
  stats.stddev.resize(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    stats.stddev[d] = std::max(kStddevFloor, std::sqrt(sq[d] / static_cast<double>(count)));
  }
  return stats;
}

FeatureSequence normalize_features(const FeatureSequence& seq, const FeatureStats& stats) {
  if (stats.mean.size() != seq.dim || stats.stddev.size() != seq.dim) {
    throw DataError("normalize_features: statistics have " + std::to_string(stats.mean.size()) +
                    " dimensions, features have " + std::to_string(seq.dim));
  }
  FeatureSequence out = seq;
  for (std::size_t t = 0; t < out.frames; ++t) {
    auto r = out.row(t);
    for (std::size_t d = 0; d < out.dim; ++d) {
      r[d] = (r[d] - stats.mean[d]) / std::max(kStddevFloor, stats.stddev[d]);
    }
  }
  return out;
}

namespace {
constexpr char kFeatureMagic[8] = {'S', '2', 'T', 'F', 'E', 'A', 'T', '1'};
}

void write_feature_archive(const std::filesystem::path& path, std::span<const FeatureRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  const std::uint32_t dim = records.empty() ? static_cast<std::uint32_t>(kFeatureDim)
                                            : static_cast<std::uint32_t>(records.front().features.dim);
  out.write(kFeatureMagic, sizeof(kFeatureMagic));
  io::write_pod(out, dim);
  for (const auto& rec : records) {
    if (rec.features.dim != dim) throw DataError("feature archive records must share a dimension");
    io::write_string(out, rec.id);
    io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(rec.features.frames));
    for (double v : rec.features.values) io::write_pod<float>(out, static_cast<float>(v));
  }
  if (!out) throw DataError("error writing " + path.string());
}

std::vector<FeatureRecord> read_feature_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kFeatureMagic, sizeof(magic)) != 0) {
    throw DataError(path.string() + ": not a feature archive (bad magic)");
  }
  const auto dim = io::read_pod<std::uint32_t>(in, "feature dimension");
  if (dim == 0) throw DataError(path.string() + ": zero feature dimension");
  std::vector<FeatureRecord> records;
  while (in.peek() != std::char_traits<char>::eof()) {
    FeatureRecord rec;
    rec.id = io::read_string(in, "utterance id");
    const auto frames = io::read_pod<std::uint32_t>(in, "frame count");
    rec.features.dim = dim;
    rec.features.frames = frames;
    rec.features.values.resize(static_cast<std::size_t>(frames) * dim);
    for (auto& v : rec.features.values) v = io::read_pod<float>(in, "feature values");
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace s2t::audio
