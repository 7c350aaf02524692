#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <numbers>

#include "segfp/audio_io.h"
#include "segfp/error.h"
#include "segfp/util.h"

using namespace segfp;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "segfp_audio_tests";
  fs::create_directories(dir);
  return dir / name;
}

// Minimal RIFF writer for arbitrary format codes / bit depths.
std::string make_wav(std::uint16_t format, std::uint16_t channels, std::uint32_t rate, std::uint16_t bits,
                     const std::string& data) {
  ByteWriter w;
  w.bytes("RIFF");
  w.u32(static_cast<std::uint32_t>(36 + data.size()));
  w.bytes("WAVE");
  w.bytes("fmt ");
  w.u32(16);
  w.u16(format);
  w.u16(channels);
  w.u32(rate);
  w.u32(rate * channels * bits / 8);
  w.u16(static_cast<std::uint16_t>(channels * bits / 8));
  w.u16(bits);
  w.bytes("data");
  w.u32(static_cast<std::uint32_t>(data.size()));
  w.bytes(data);
  return w.str();
}

std::string pcm16(std::initializer_list<std::int16_t> v) {
  ByteWriter w;
  for (auto s : v) w.u16(static_cast<std::uint16_t>(s));
  return w.str();
}

ErrorCode load_error(const std::string& bytes, const std::string& name) {
  const fs::path p = temp_path(name);
  write_file_atomic(p, bytes);
  try {
    load_wav(p);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kIoError;
}

}  // namespace

TEST(AudioIo, Pcm16Scaling) {
  const fs::path p = temp_path("pcm16.wav");
  write_file_atomic(p, make_wav(1, 1, 8000, 16, pcm16({16384, -32768, 0})));
  const AudioClip c = load_wav(p);
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c.sample_rate, 8000);
  EXPECT_EQ(c.samples[0], 0.5f);
  EXPECT_EQ(c.samples[1], -1.0f);
  EXPECT_EQ(c.samples[2], 0.0f);
}

TEST(AudioIo, StereoIsAveraged) {
  ByteWriter d;
  for (int i = 0; i < 4; ++i) {
    d.f32(0.4f);
    d.f32(-0.4f);
  }
  const fs::path p = temp_path("stereo.wav");
  write_file_atomic(p, make_wav(3, 2, 16000, 32, d.str()));
  const AudioClip c = load_wav(p);
  ASSERT_EQ(c.size(), 4u);
  EXPECT_EQ(c.sample_rate, 16000);
  for (float s : c.samples) EXPECT_EQ(s, 0.0f);
}

TEST(AudioIo, FloatRoundTripIsBitExact) {
  AudioClip c;
  c.sample_rate = 11025;
  for (int i = 0; i < 1000; ++i) c.samples.push_back(static_cast<float>(std::sin(i * 0.37) * 0.9));
  const fs::path p = temp_path("roundtrip.wav");
  save_wav(c, p);
  const AudioClip back = load_wav(p);
  EXPECT_EQ(back.sample_rate, c.sample_rate);
  EXPECT_EQ(back.samples, c.samples);
}

TEST(AudioIo, SilenceRoundTrip) {
  AudioClip c;
  c.samples.assign(8000, 0.0f);
  const fs::path p = temp_path("silence.wav");
  save_wav(c, p);
  const AudioClip back = load_wav(p);
  ASSERT_EQ(back.size(), 8000u);
  for (float s : back.samples) EXPECT_EQ(s, 0.0f);
}

TEST(AudioIo, FloatSamplesAreClamped) {
  ByteWriter d;
  d.f32(1.5f);
  d.f32(-3.0f);
  const fs::path p = temp_path("clamp.wav");
  write_file_atomic(p, make_wav(3, 1, 8000, 32, d.str()));
  const AudioClip c = load_wav(p);
  EXPECT_EQ(c.samples[0], 1.0f);
  EXPECT_EQ(c.samples[1], -1.0f);
}

TEST(AudioIo, Errors) {
  EXPECT_EQ(load_error("RIFX1234WAVE", "bad_magic.wav"), ErrorCode::kMalformedWav);
  std::string truncated = make_wav(1, 1, 8000, 16, pcm16({1, 2, 3}));
  truncated.resize(30);
  EXPECT_EQ(load_error(truncated, "truncated.wav"), ErrorCode::kMalformedWav);
  EXPECT_EQ(load_error(make_wav(85, 1, 8000, 16, pcm16({1, 2})), "mp3.wav"), ErrorCode::kUnsupportedEncoding);
  EXPECT_EQ(load_error(make_wav(1, 1, 8000, 24, "abcdef"), "pcm24.wav"), ErrorCode::kUnsupportedEncoding);
  EXPECT_EQ(load_error(make_wav(1, 1, 8000, 16, ""), "empty.wav"), ErrorCode::kEmptyAudio);
  try {
    load_wav(temp_path("does_not_exist.wav"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIoError);
  }
}

TEST(AudioIo, ResampleConstant) {
  AudioClip c;
  c.sample_rate = 44100;
  c.samples.assign(4410, 0.3f);
  const AudioClip r = resample(c, 8000);
  EXPECT_EQ(r.sample_rate, 8000);
  EXPECT_EQ(r.size(), 800u);
  for (float s : r.samples) EXPECT_EQ(s, 0.3f);
}

TEST(AudioIo, ResampleLength) {
  AudioClip c;
  c.sample_rate = 16000;
  c.samples.assign(16000, 0.0f);
  EXPECT_EQ(resample(c, 8000).size(), 8000u);
}

TEST(AudioIo, ResampleSineMatchesAnalytic) {
  AudioClip c;
  c.sample_rate = 16000;
  for (int i = 0; i < 16000; ++i) {
    c.samples.push_back(static_cast<float>(std::sin(2 * std::numbers::pi * 440.0 * i / 16000.0)));
  }
  const AudioClip r = resample(c, 8000);
  double max_err = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double want = std::sin(2 * std::numbers::pi * 440.0 * static_cast<double>(i) / 8000.0);
    max_err = std::max(max_err, std::abs(want - r.samples[i]));
  }
  EXPECT_LT(max_err, 0.01);
}

TEST(AudioIo, ResampleUpDownRoundTrip) {
  AudioClip c;
  for (int i = 0; i < 8000; ++i) {
    c.samples.push_back(static_cast<float>(0.5 * std::sin(2 * std::numbers::pi * 700.0 * i / 8000.0) +
                                           0.3 * std::sin(2 * std::numbers::pi * 1500.0 * i / 8000.0)));
  }
  const AudioClip back = resample(resample(c, 16000), 8000);
  ASSERT_EQ(back.size(), c.size());
  double max_err = 0.0;
  for (std::size_t i = 0; i + 1 < c.size(); ++i) max_err = std::max(max_err, double(std::abs(back.samples[i] - c.samples[i])));
  EXPECT_LT(max_err, 0.02);
}

TEST(AudioIo, RequireRate) {
  AudioClip c;
  c.sample_rate = 16000;
  c.samples.assign(10, 0.f);
  EXPECT_NO_THROW(require_rate(c, 16000));
  try {
    require_rate(c, 8000);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSampleRateMismatch);
  }
}
