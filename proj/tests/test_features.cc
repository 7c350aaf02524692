#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "segfp/error.h"
#include "segfp/features.h"
#include "test_support.h"

using namespace segfp;

namespace {

Segment sine_segment(double hz, double seconds, double amp = 0.5) {
  Segment s;
  const auto n = static_cast<std::size_t>(seconds * 8000);
  for (std::size_t i = 0; i < n; ++i) {
    s.samples.push_back(static_cast<float>(amp * std::sin(2 * std::numbers::pi * hz * static_cast<double>(i) / 8000.0)));
  }
  return s;
}

Segment noise_segment(double seconds, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-0.5f, 0.5f);
  Segment s;
  s.samples.resize(static_cast<std::size_t>(seconds * 8000));
  for (float& v : s.samples) v = u(rng);
  return s;
}

}  // namespace

TEST(Features, StftShape) {
  const Matrix p = stft_power(Segment{std::vector<float>(8000, 0.1f)}, FeatureConfig{});
  EXPECT_EQ(p.rows, 513u);
  EXPECT_EQ(p.cols, 32u);
}

TEST(Features, StftOfSilenceIsZero) {
  const Matrix p = stft_power(Segment{std::vector<float>(4000, 0.0f)}, FeatureConfig{});
  for (double v : p.data) EXPECT_EQ(v, 0.0);
}

TEST(Features, SinePeakBin) {
  const Matrix p = stft_power(sine_segment(1000, 1), FeatureConfig{});
  std::size_t best = 0;
  double best_v = -1;
  for (std::size_t r = 0; r < p.rows; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < p.cols; ++c) s += p(r, c);
    if (s > best_v) best_v = s, best = r;
  }
  EXPECT_EQ(best, 128u);
}

TEST(Features, StftMatchesDirectDft) {
  const Segment s = noise_segment(0.5, 3);
  const Matrix got = stft_power(s, FeatureConfig{});
  const Matrix want = oracle::oracle_stft_power(s.samples, 1024, 256);
  ASSERT_EQ(got.rows, want.rows);
  ASSERT_EQ(got.cols, want.cols);
  double peak = 0;
  for (double v : want.data) peak = std::max(peak, v);
  for (std::size_t i = 0; i < got.data.size(); ++i) EXPECT_NEAR(got.data[i], want.data[i], 1e-9 * peak);
}

TEST(Features, MelScaleRoundTrip) {
  for (double hz : {0.0, 300.0, 1000.0, 4000.0}) EXPECT_NEAR(mel_to_hz(hz_to_mel(hz)), hz, 1e-9);
  EXPECT_NEAR(hz_to_mel(700.0), 2595.0 * std::log10(2.0), 1e-12);
}

TEST(Features, TwoFilterCentersFromClosedForm) {
  FeatureConfig c;
  c.mel_bins = 2;
  const auto centers = mel_center_frequencies(c);
  ASSERT_EQ(centers.size(), 2u);
  const double lo = 2595.0 * std::log10(1.0 + 300.0 / 700.0);
  const double hi = 2595.0 * std::log10(1.0 + 4000.0 / 700.0);
  for (int i = 0; i < 2; ++i) {
    const double m = lo + (hi - lo) * (i + 1) / 3.0;
    EXPECT_NEAR(centers[i], 700.0 * (std::pow(10.0, m / 2595.0) - 1.0), 1e-9);
  }
}

TEST(Features, FilterbankRows) {
  for (std::size_t bins : {2u, 64u, 256u}) {
    FeatureConfig c;
    c.mel_bins = bins;
    const Matrix fb = mel_filterbank(c);
    ASSERT_EQ(fb.rows, bins);
    ASSERT_EQ(fb.cols, 513u);
    for (std::size_t r = 0; r < fb.rows; ++r) {
      double sum = 0, peak = 0;
      for (double v : fb.row(r)) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
        sum += v;
        peak = std::max(peak, v);
      }
      EXPECT_GT(sum, 0.0) << "row " << r;
      EXPECT_EQ(peak, 1.0) << "row " << r;
    }
  }
}

TEST(Features, FilterPeaksAtCenterBin) {
  FeatureConfig c;
  c.mel_bins = 16;
  const Matrix fb = mel_filterbank(c);
  const auto centers = mel_center_frequencies(c);
  const double bin_hz = 8000.0 / 1024.0;
  for (std::size_t r = 0; r < fb.rows; ++r) {
    std::size_t arg = 0;
    for (std::size_t k = 1; k < fb.cols; ++k)
      if (fb(r, k) > fb(r, arg)) arg = k;
    EXPECT_LE(std::abs(static_cast<double>(arg) * bin_hz - centers[r]), bin_hz);
  }
}

TEST(Features, InvalidBand) {
  FeatureConfig c;
  c.fmin = 4000;
  c.fmax = 300;
  try {
    mel_filterbank(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidBand);
  }
  c.fmin = 0;
  c.fmax = 5000;
  EXPECT_THROW(c.validate(), Error);
  FeatureConfig h;
  h.stft_hop = 2048;
  EXPECT_THROW(h.validate(), Error);
}

TEST(Features, MelShapes) {
  FeatureConfig c;
  EXPECT_EQ(mel_spectrogram(noise_segment(0.5, 1), c).values.rows, 256u);
  EXPECT_EQ(mel_spectrogram(noise_segment(0.5, 1), c).values.cols, 16u);
  EXPECT_EQ(mel_spectrogram(noise_segment(1, 1), c).values.cols, 32u);
  EXPECT_EQ(mel_spectrogram(noise_segment(2, 1), c).values.cols, 63u);
}

TEST(Features, SilenceHitsFloor) {
  const auto m = mel_spectrogram(Segment{std::vector<float>(8000, 0.0f)}, FeatureConfig{});
  for (double v : m.values.data) EXPECT_EQ(v, std::log(1e-10));
}

TEST(Features, DoublingAmplitudeAddsLogFour) {
  const Segment a = noise_segment(1, 4);
  Segment b = a;
  for (float& v : b.samples) v *= 2.0f;
  FeatureExtractor fx{FeatureConfig{}};
  const auto ma = fx.extract(a), mb = fx.extract(b);
  const double floor = std::log(1e-10);
  for (std::size_t i = 0; i < ma.values.data.size(); ++i) {
    if (ma.values.data[i] > floor + 1.0) EXPECT_NEAR(mb.values.data[i] - ma.values.data[i], std::log(4.0), 1e-6);
    EXPECT_GE(ma.values.data[i], floor);
  }
}

TEST(Features, ExtractorMatchesFreeFunctionAndIsDeterministic) {
  const Segment s = noise_segment(1, 8);
  FeatureExtractor fx{FeatureConfig{}};
  const auto a = fx.extract(s), b = fx.extract(s), c = mel_spectrogram(s, FeatureConfig{});
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.values, c.values);
  EXPECT_EQ(a.window_w, 1.0);
}

TEST(Features, LouderSignalHasMoreMelEnergy) {
  const Segment s = noise_segment(1, 6);
  FeatureConfig cfg;
  const Matrix fb = mel_filterbank(cfg);
  auto energy = [&](const Segment& seg) {
    const Matrix p = stft_power(seg, cfg);
    double e = 0;
    for (std::size_t r = 0; r < fb.rows; ++r)
      for (std::size_t k = 0; k < fb.cols; ++k)
        for (std::size_t t = 0; t < p.cols; ++t) e += fb(r, k) * p(k, t);
    return e;
  };
  double prev = energy(s);
  for (float g : {1.1f, 1.5f, 1.9f}) {
    Segment louder = s;
    for (float& v : louder.samples) v *= g;
    const double e = energy(louder);
    EXPECT_GE(e, prev);
    prev = e;
  }
}
