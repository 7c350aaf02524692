#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "segfp/audio_io.h"

namespace segfp {

struct SegmentationParams {
  double window_w = 1.0;  // seconds
  double hop_h = 0.5;     // seconds
  std::optional<double> query_len_l;

  // Throws InvalidParams unless W, h > 0, W*f and h*f are whole sample
  // counts, and L >= W when L is set.
  void validate(int sample_rate = kCanonicalRate) const;
  std::size_t window_samples(int sample_rate = kCanonicalRate) const;
  std::size_t hop_samples(int sample_rate = kCanonicalRate) const;
};

struct Segment {
  std::vector<float> samples;  // exactly W*f samples
  std::uint32_t track_id = 0;
  std::uint32_t index = 0;
  double start_time = 0.0;  // index * h
};

// S = floor((L - W) / h) + 1, evaluated on a microsecond grid.
std::size_t segment_count(double query_len_l, double window_w, double hop_h);

// T = floor(W*f / stft_hop) + 1.
std::size_t num_stft_frames(double window_w, int sample_rate, std::size_t stft_hop);

// Segment i covers samples [i*h*f, i*h*f + W*f). A tail shorter than W is
// dropped. Throws ClipTooShort when the clip is shorter than W.
std::vector<Segment> slice_segments(const AudioClip& clip, const SegmentationParams& params,
                                    std::uint32_t track_id = 0);

}  // namespace segfp
