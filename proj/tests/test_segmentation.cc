#include <gtest/gtest.h>

#include <random>

#include "segfp/error.h"
#include "segfp/segmentation.h"
#include "segfp/util.h"

using namespace segfp;

namespace {

// Count start positions t = 0, h, 2h, ... with t + W <= L on the integer grid.
std::size_t enumerate_starts(std::int64_t l, std::int64_t w, std::int64_t h) {
  std::size_t n = 0;
  for (std::int64_t t = 0; t + w <= l; t += h) ++n;
  return n;
}

AudioClip ramp(std::size_t n) {
  AudioClip c;
  for (std::size_t i = 0; i < n; ++i) c.samples.push_back(static_cast<float>(i % 1000) / 1000.0f);
  return c;
}

}  // namespace

TEST(Segmentation, WorkedExample) { EXPECT_EQ(segment_count(3, 1, 0.5), 5u); }

TEST(Segmentation, LEqualsW) {
  EXPECT_EQ(segment_count(1, 1, 0.5), 1u);
  EXPECT_EQ(segment_count(2, 2, 0.25), 1u);
  EXPECT_EQ(segment_count(0.5, 0.5, 3), 1u);
}

TEST(Segmentation, TenSecondsHalfWindow) {
  EXPECT_EQ(segment_count(10, 0.5, 0.5), 20u);
  EXPECT_EQ(segment_count(10, 0.5, 0.5), enumerate_starts(10000, 500, 500));
}

TEST(Segmentation, LShorterThanWIsRejected) {
  try {
    segment_count(0.5, 1, 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidParams);
  }
}

TEST(Segmentation, RandomizedAgreesWithEnumeration) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> w_ms(1, 40), h_ms(1, 40), extra(0, 200);
  for (int i = 0; i < 1000; ++i) {
    const std::int64_t w = w_ms(rng) * 50, h = h_ms(rng) * 50, l = w + extra(rng) * 50;
    EXPECT_EQ(segment_count(l / 1000.0, w / 1000.0, h / 1000.0), enumerate_starts(l, w, h))
        << l << " " << w << " " << h;
  }
}

TEST(Segmentation, FrameCounts) {
  EXPECT_EQ(num_stft_frames(0.5, 8000, 256), 16u);
  EXPECT_EQ(num_stft_frames(1, 8000, 256), 32u);
  EXPECT_EQ(num_stft_frames(2, 8000, 256), 63u);
}

TEST(Segmentation, ThirtySecondClip) {
  const AudioClip c = ramp(30 * 8000);
  const auto segs = slice_segments(c, {1.0, 0.5}, 7);
  ASSERT_EQ(segs.size(), 59u);
  EXPECT_EQ(segs[3].start_time, 1.5);
  for (std::size_t i = 0; i < segs.size(); ++i) {
    EXPECT_EQ(segs[i].index, i);
    EXPECT_EQ(segs[i].track_id, 7u);
    ASSERT_EQ(segs[i].samples.size(), 8000u);
    EXPECT_EQ(segs[i].samples.front(), c.samples[i * 4000]);
    EXPECT_EQ(segs[i].samples.back(), c.samples[i * 4000 + 7999]);
  }
}

TEST(Segmentation, SegmentThreeStartsAtSample12000) {
  AudioClip c;
  for (int i = 0; i < 40000; ++i) c.samples.push_back(static_cast<float>(i) / 40000.0f);
  const auto segs = slice_segments(c, {1.0, 0.5});
  EXPECT_EQ(segs[3].samples[0], c.samples[12000]);
}

TEST(Segmentation, ExactWindowGivesWholeClip) {
  const AudioClip c = ramp(4000);
  const auto segs = slice_segments(c, {0.5, 0.5});
  ASSERT_EQ(segs.size(), 1u);
  EXPECT_EQ(segs[0].samples, c.samples);
}

TEST(Segmentation, TailIsDropped) {
  const AudioClip c = ramp(8000 + 3999);
  EXPECT_EQ(slice_segments(c, {1.0, 0.5}).size(), 1u);
}

TEST(Segmentation, NoOverlapTilesPrefix) {
  const AudioClip c = ramp(8000 * 5 + 123);
  const auto segs = slice_segments(c, {0.5, 0.5});
  std::vector<float> joined;
  for (const auto& s : segs) joined.insert(joined.end(), s.samples.begin(), s.samples.end());
  EXPECT_EQ(joined, std::vector<float>(c.samples.begin(), c.samples.begin() + 8000 * 5));
}

TEST(Segmentation, CountMatchesSlicing) {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> len(4000, 40000);
  const double ws[] = {0.5, 1, 2}, hs[] = {0.25, 0.5, 1};
  for (int i = 0; i < 30; ++i) {
    const double w = ws[i % 3], h = hs[(i / 3) % 3];
    const AudioClip c = ramp(static_cast<std::size_t>(len(rng)));
    if (c.duration_seconds() < w) continue;
    EXPECT_EQ(slice_segments(c, {w, h}).size(), segment_count(c.duration_seconds(), w, h));
  }
}

TEST(Segmentation, Errors) {
  const AudioClip c = ramp(3000);
  try {
    slice_segments(c, {0.5, 0.5});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kClipTooShort);
  }
  AudioClip wrong = ramp(16000);
  wrong.sample_rate = 16000;
  EXPECT_THROW(slice_segments(wrong, {0.5, 0.5}), Error);
  EXPECT_THROW((SegmentationParams{0.0, 0.5}.validate()), Error);
  EXPECT_THROW((SegmentationParams{1.0, 0.00001}.validate()), Error);
  EXPECT_THROW((SegmentationParams{1.0, 0.5, 0.5}.validate()), Error);
  EXPECT_NO_THROW((SegmentationParams{1.0, 0.5, 3.0}.validate()));
}
