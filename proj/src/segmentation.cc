#include "segfp/segmentation.h"

#include <cmath>
#include <string>

#include "segfp/error.h"
#include "segfp/util.h"

namespace segfp {
namespace {

std::size_t whole_samples(double seconds, int rate, const char* what) {
  const double exact = seconds * rate;
  const double rounded = std::round(exact);
  if (std::abs(exact - rounded) > 1e-6) {
    throw Error(ErrorCode::kInvalidParams,
                std::string(what) + " of " + format_seconds(seconds) + " s is not a whole number of samples");
  }
  return static_cast<std::size_t>(rounded);
}

}  // namespace

void SegmentationParams::validate(int sample_rate) const {
  if (!(window_w > 0.0) || !(hop_h > 0.0)) {
    throw Error(ErrorCode::kInvalidParams, "window and hop must be positive");
  }
  whole_samples(window_w, sample_rate, "window");
  whole_samples(hop_h, sample_rate, "hop");
  if (query_len_l && to_micros(*query_len_l) < to_micros(window_w)) {
    throw Error(ErrorCode::kInvalidParams, "query length shorter than window");
  }
}

std::size_t SegmentationParams::window_samples(int sample_rate) const {
  return whole_samples(window_w, sample_rate, "window");
}

std::size_t SegmentationParams::hop_samples(int sample_rate) const {
  return whole_samples(hop_h, sample_rate, "hop");
}

std::size_t segment_count(double query_len_l, double window_w, double hop_h) {
  const std::int64_t l = to_micros(query_len_l);
  const std::int64_t w = to_micros(window_w);
  const std::int64_t h = to_micros(hop_h);
  if (w <= 0 || h <= 0) throw Error(ErrorCode::kInvalidParams, "window and hop must be positive");
  if (l < w) {
    throw Error(ErrorCode::kInvalidParams, "query length " + format_seconds(query_len_l) +
                                               " s is shorter than window " + format_seconds(window_w) + " s");
  }
  return static_cast<std::size_t>((l - w) / h) + 1;
}

std::size_t num_stft_frames(double window_w, int sample_rate, std::size_t stft_hop) {
  if (!(window_w > 0.0) || sample_rate <= 0 || stft_hop == 0) {
    throw Error(ErrorCode::kInvalidParams, "num_stft_frames arguments must be positive");
  }
  const auto n = static_cast<std::size_t>(std::llround(window_w * sample_rate));
  return n / stft_hop + 1;
}

std::vector<Segment> slice_segments(const AudioClip& clip, const SegmentationParams& params,
                                    std::uint32_t track_id) {
  require_rate(clip, kCanonicalRate);
  params.validate(clip.sample_rate);
  const std::size_t win = params.window_samples(clip.sample_rate);
  const std::size_t hop = params.hop_samples(clip.sample_rate);
  if (clip.size() < win) {
    throw Error(ErrorCode::kClipTooShort, "clip of " + std::to_string(clip.size()) +
                                              " samples is shorter than the " + std::to_string(win) +
                                              "-sample window");
  }
  const std::size_t count = (clip.size() - win) / hop + 1;
  std::vector<Segment> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto first = clip.samples.begin() + static_cast<std::ptrdiff_t>(i * hop);
    out[i].samples.assign(first, first + static_cast<std::ptrdiff_t>(win));
    out[i].track_id = track_id;
    out[i].index = static_cast<std::uint32_t>(i);
    out[i].start_time = static_cast<double>(i) * params.hop_h;
  }
  return out;
}

}  // namespace segfp
