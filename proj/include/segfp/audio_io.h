#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace segfp {

inline constexpr int kCanonicalRate = 8000;

// Mono audio. Samples are clamped to [-1, 1] on ingestion.
struct AudioClip {
  std::vector<float> samples;
  int sample_rate = kCanonicalRate;

  std::size_t size() const { return samples.size(); }
  double duration_seconds() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }
};

// Reads RIFF/WAVE with PCM-16 or float-32 data, mono or stereo. Stereo is
// averaged to mono; the file's sample rate is kept.
AudioClip load_wav(const std::filesystem::path& path);

// Writes a mono float-32 WAV (format code 3) atomically.
void save_wav(const AudioClip& clip, const std::filesystem::path& path);

// Linear-interpolation resampler. Output length is round(n * target / source).
AudioClip resample(const AudioClip& clip, int target_rate);

// Throws SampleRateMismatch unless clip.sample_rate == expected.
void require_rate(const AudioClip& clip, int expected);

}  // namespace segfp
