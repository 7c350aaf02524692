#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "segfp/encoder.h"
#include "segfp/error.h"
#include "segfp/util.h"
#include "test_support.h"

using namespace segfp;
using segfp::oracle::random_matrix;

namespace {

EncoderConfig small_config(std::uint64_t seed) {
  EncoderConfig c;
  c.mel_bins = 16;
  c.adapter_t0 = 8;
  c.fingerprint_dim = 6;
  c.num_blocks = 4;
  c.base_channels = 3;
  c.time_strides = {2, 2, 2, 1};
  c.freq_strides = {2, 2, 2, 2};
  c.adapter_inputs = {5, 8, 11};
  c.seed = seed;
  return c;
}

double norm(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST(Encoder, ConfigValidation) {
  EXPECT_NO_THROW(EncoderConfig{}.validate());
  EncoderConfig c;
  c.freq_strides = {2, 2, 2, 2, 2, 2, 2, 1};
  EXPECT_THROW(c.validate(), Error);
  c = EncoderConfig{};
  c.time_strides = {2, 2, 2, 2, 1, 1, 1, 1};
  EXPECT_THROW(c.validate(), Error);
  c = EncoderConfig{};
  c.fingerprint_dim = 0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Encoder, ChannelSchedule) {
  EncoderConfig c;
  const std::size_t want[] = {16, 16, 32, 32, 64, 64, 128, 128};
  for (std::size_t k = 0; k < 8; ++k) EXPECT_EQ(c.block_channels(k), want[k]);
  c.num_blocks = 10;
  EXPECT_EQ(c.block_channels(9), 128u);
}

TEST(Encoder, InitDeterminism) {
  EXPECT_EQ(init_weights(small_config(1)), init_weights(small_config(1)));
  EXPECT_FALSE(init_weights(small_config(1)) == init_weights(small_config(2)));
}

TEST(Encoder, InitBounds) {
  const EncoderWeights w = init_weights(EncoderConfig{});
  w.for_each_tensor([&](const std::string& name, const std::vector<std::size_t>& dims, std::span<const double> t) {
    const bool is_weight = name.ends_with(".weight");
    if (!is_weight) {
      const double want = name.ends_with(".gain") ? 1.0 : 0.0;
      for (double v : t) EXPECT_EQ(v, want) << name;
      return;
    }
    // Adapter and projection are (fan_in x out); convolutions are (out x in x k).
    const std::size_t fan_in = dims.size() == 3 ? dims[1] * dims[2] : dims[0];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    double peak = 0;
    for (double v : t) {
      EXPECT_LE(std::abs(v), bound) << name;
      peak = std::max(peak, std::abs(v));
    }
    EXPECT_GT(peak, 0.5 * bound) << name;
  });
}

TEST(Encoder, AdapterShapes) {
  std::mt19937_64 rng(1);
  const EncoderWeights w = init_weights(EncoderConfig{});
  EXPECT_EQ(adapter_forward(random_matrix(256, 16, rng), w).cols, 32u);
  EXPECT_EQ(adapter_forward(random_matrix(256, 63, rng), w).cols, 32u);
  EXPECT_EQ(adapter_forward(random_matrix(256, 63, rng), w).rows, 256u);
  try {
    adapter_forward(random_matrix(256, 20, rng), w);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNoAdapterForT);
  }
}

TEST(Encoder, IdentityAdapterIsElu) {
  std::mt19937_64 rng(2);
  EncoderWeights w = init_weights(EncoderConfig{});
  AdapterWeights& a = w.adapters.at(32);
  std::fill(a.weight.data.begin(), a.weight.data.end(), 0.0);
  for (std::size_t i = 0; i < 32; ++i) a.weight(i, i) = 1.0;
  const Matrix x = random_matrix(256, 32, rng);
  const Matrix y = adapter_forward(x, w);
  for (std::size_t i = 0; i < x.data.size(); ++i) EXPECT_NEAR(y.data[i], oracle::oracle_elu(x.data[i]), 1e-15);
}

TEST(Encoder, MatchesNestedLoopOracle) {
  EncoderConfig c;
  c.mel_bins = 4;
  c.adapter_t0 = 4;
  c.num_blocks = 2;
  c.fingerprint_dim = 3;
  c.base_channels = 2;
  c.time_strides = {2, 2};
  c.freq_strides = {2, 2};
  c.adapter_inputs = {4};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    c.seed = seed;
    std::mt19937_64 rng(seed);
    EncoderWeights w = init_weights(c);
    oracle::jitter_weights(w, rng, 0.2);
    const Matrix x = random_matrix(4, 4, rng);
    const auto got = encode(x, w).values;
    const auto want = oracle::oracle_encode(x, w);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(got[j], want[j], 1e-12);
  }
  // A deeper config with uneven sizes (odd frame count, stride 1 blocks).
  std::mt19937_64 rng(11);
  EncoderWeights w = init_weights(small_config(3));
  oracle::jitter_weights(w, rng, 0.1);
  for (std::size_t t : {5u, 8u, 11u}) {
    const Matrix x = random_matrix(16, t, rng);
    const auto got = encode(x, w).values;
    const auto want = oracle::oracle_encode(x, w);
    for (std::size_t j = 0; j < got.size(); ++j) EXPECT_NEAR(got[j], want[j], 1e-12);
  }
}

TEST(Encoder, UnitNormAndDeterministic) {
  std::mt19937_64 rng(3);
  const EncoderWeights w = init_weights(small_config(4));
  for (int i = 0; i < 50; ++i) {
    const Matrix x = random_matrix(16, w.config.adapter_inputs[i % 3], rng, 3.0);
    const auto a = encode(x, w).values;
    EXPECT_NEAR(norm(a), 1.0, 1e-5);
    EXPECT_EQ(a, encode(x, w).values);
  }
}

TEST(Encoder, BatchMatchesSequential) {
  std::mt19937_64 rng(4);
  const EncoderWeights w = init_weights(oracle::tiny_encoder_config(4));
  auto mels = oracle::random_tiny_mels(w.config, 64, rng);
  const auto batch = encode_batch(mels, w);
  ASSERT_EQ(batch.size(), 64u);
  for (std::size_t i = 0; i < mels.size(); ++i) EXPECT_EQ(batch[i].values, encode(mels[i], w).values);
  const auto one = encode_batch(std::span(mels).first(1), w);
  EXPECT_EQ(one[0].values, encode(mels[0], w).values);
  std::reverse(mels.begin(), mels.end());
  const auto rev = encode_batch(mels, w);
  for (std::size_t i = 0; i < 64; ++i) EXPECT_EQ(rev[i].values, batch[63 - i].values);
}

TEST(Encoder, ProjectionScaleInvariance) {
  std::mt19937_64 rng(5);
  const EncoderWeights w = init_weights(small_config(5));
  EncoderWeights scaled = w;
  for (double& v : scaled.projection.data) v *= 3.7;
  for (double& v : scaled.projection_bias) v *= 3.7;
  const Matrix x = random_matrix(16, 8, rng);
  const auto a = encode(x, w).values, b = encode(x, scaled).values;
  for (std::size_t j = 0; j < a.size(); ++j) EXPECT_NEAR(a[j], b[j], 1e-6);
}

TEST(Encoder, ZeroUpstreamGivesZeroGradient) {
  std::mt19937_64 rng(6);
  const EncoderWeights w = init_weights(oracle::tiny_encoder_config(6));
  const auto mels = oracle::random_tiny_mels(w.config, 3, rng);
  const std::vector<std::vector<double>> up(3, std::vector<double>(4, 0.0));
  EXPECT_EQ(forward_backward(mels, w, up), zeros_like(w));
}

TEST(Encoder, NormalizationGradientIsOrthogonal) {
  std::mt19937_64 rng(7);
  const EncoderWeights w = init_weights(oracle::tiny_encoder_config(7));
  for (int i = 0; i < 10; ++i) {
    auto mels = oracle::random_tiny_mels(w.config, 1, rng);
    std::vector<std::vector<double>> up{oracle::random_unit(4, rng)};
    const EncoderWeights g = forward_backward(mels, w, up);
    // With one item, d/d(projection bias) is the gradient at the
    // unnormalised embedding.
    EXPECT_NEAR(dot(g.projection_bias, encode(mels[0], w).values), 0.0, 1e-6);
  }
}

TEST(Encoder, GradientsMatchFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed + 100);
    EncoderWeights w = init_weights(oracle::tiny_encoder_config(seed));
    oracle::jitter_weights(w, rng, 0.1);
    const auto mels = oracle::random_tiny_mels(w.config, 4, rng);
    std::vector<std::vector<double>> up;
    for (int i = 0; i < 4; ++i) up.push_back(oracle::random_unit(4, rng));
    const EncoderWeights g = forward_backward(mels, w, up);
    auto f = [&](const EncoderWeights& ww) {
      double s = 0;
      for (std::size_t i = 0; i < mels.size(); ++i) s += dot(up[i], encode(mels[i], ww).values);
      return s;
    };
    const auto r = oracle::compare_with_finite_differences(w, g, f, 1e-4);
    EXPECT_LE(r.max_rel_error, 1e-3) << "seed " << seed << ": " << r.worst;
  }
}

TEST(Encoder, GradientThreadIndependence) {
  std::mt19937_64 rng(8);
  const EncoderWeights w = init_weights(small_config(8));
  std::vector<MelSpectrogram> mels(12);
  std::vector<std::vector<double>> up;
  for (std::size_t i = 0; i < mels.size(); ++i) {
    mels[i].values = random_matrix(16, w.config.adapter_inputs[i % 3], rng);
    up.push_back(oracle::random_unit(6, rng));
  }
  set_max_threads(1);
  const EncoderWeights a = forward_backward(mels, w, up);
  set_max_threads(4);
  const EncoderWeights b = forward_backward(mels, w, up);
  set_max_threads(0);
  EXPECT_EQ(a, b);
}

TEST(Encoder, RejectsWrongMelBins) {
  std::mt19937_64 rng(9);
  const EncoderWeights w = init_weights(small_config(9));
  EXPECT_THROW(encode(random_matrix(8, 8, rng), w), Error);
}

TEST(Encoder, FramesForWindow) {
  FeatureConfig f;
  EXPECT_EQ(frames_for_window(0.5, f), 16u);
  EXPECT_EQ(frames_for_window(1, f), 32u);
  EXPECT_EQ(frames_for_window(2, f), 63u);
}
