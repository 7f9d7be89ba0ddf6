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

// Speech front end: 16-bit PCM WAV input, 40 ms / 10 ms framing, and
// 40 MFCCs plus log frame energy per frame.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace s2t::audio {

inline constexpr std::size_t kMfccCount = 40;
inline constexpr std::size_t kMelFilters = 40;
inline constexpr std::size_t kFeatureDim = kMfccCount + 1;
inline constexpr double kLogFloor = 1e-10;
inline constexpr double kPreemphasis = 0.97;

struct AudioBuffer {
  std::vector<double> samples;  // in [-1, 1]
  int sample_rate = 16000;
};

bool is_supported_rate(int sample_rate);

/// Parses a RIFF/WAVE file holding 16-bit PCM. Stereo is averaged to mono.
AudioBuffer parse_pcm_wav(std::span<const std::uint8_t> bytes);
AudioBuffer load_pcm_wav(const std::filesystem::path& path);

/// Writes interleaved 16-bit samples as a PCM WAV file.
void write_pcm_wav(const std::filesystem::path& path, std::span<const std::int16_t> samples,
                   int sample_rate, int channels = 1);

struct Frame {
  std::vector<double> raw;       // samples as read
  std::vector<double> windowed;  // pre-emphasized, Hamming weighted
};

std::size_t frame_count(std::size_t samples, std::size_t window, std::size_t hop);
std::size_t ms_to_samples(double ms, int sample_rate);

/// Frame i covers samples [i*hop, i*hop + window); partial frames are dropped.
std::vector<Frame> frame_and_window(const AudioBuffer& audio, double window_ms = 40.0,
                                    double hop_ms = 10.0);

/// T x dim feature matrix, row major.
struct FeatureSequence {
  std::size_t dim = kFeatureDim;
  std::size_t frames = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t t) const { return {values.data() + t * dim, dim}; }
  std::span<double> row(std::size_t t) { return {values.data() + t * dim, dim}; }
};

/// Center frequencies (Hz) of the triangular Mel filters for a sample rate.
std::vector<double> mel_center_frequencies(int sample_rate);

/// Log Mel filterbank energies of one windowed frame (floored at 1e-10).
std::vector<double> log_mel_energies(std::span<const double> windowed, int sample_rate);

FeatureSequence mfcc_with_energy(std::span<const Frame> frames, int sample_rate);

/// Convenience: framing followed by MFCC extraction with default settings.
FeatureSequence extract_features(const AudioBuffer& audio);

struct FeatureStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

inline constexpr double kStddevFloor = 1e-8;

/// Corpus-level per-dimension mean and (floored) population stddev.
FeatureStats compute_feature_stats(std::span<const FeatureSequence> corpus);
FeatureSequence normalize_features(const FeatureSequence& seq, const FeatureStats& stats);

struct FeatureRecord {
  std::string id;
  FeatureSequence features;
};

/// Archive layout: "S2TFEAT1", uint32 dim, then per record uint32 id length,
/// id bytes, uint32 T, T*dim float32 values (all little endian).
void write_feature_archive(const std::filesystem::path& path, std::span<const FeatureRecord> records);
std::vector<FeatureRecord> read_feature_archive(const std::filesystem::path& path);

}  // namespace s2t::audio
