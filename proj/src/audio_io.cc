#include "segfp/audio_io.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "segfp/error.h"
#include "segfp/util.h"

namespace segfp {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

[[noreturn]] void malformed(const std::string& what) { throw Error(ErrorCode::kMalformedWav, what); }

float clamp_unit(float v) { return std::clamp(v, -1.0f, 1.0f); }

}  // namespace

AudioClip load_wav(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  ByteReader in(data, [&](const std::string& m) { malformed(path.string() + ": " + m); });

  if (in.bytes(4) != "RIFF") malformed("missing RIFF tag");
  in.u32();
  if (in.bytes(4) != "WAVE") malformed("missing WAVE tag");

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::string payload;
  bool have_data = false;

  while (in.remaining() >= 8 && !have_data) {
    std::string id = in.bytes(4);
    std::uint32_t size = in.u32();
    if (size > in.remaining()) malformed("chunk '" + id + "' exceeds file size");
    std::string body = in.bytes(size);
    if (size % 2 == 1 && in.remaining() > 0) in.u8();

    if (id == "fmt ") {
      if (size < 16) malformed("fmt chunk too short");
      ByteReader fmt(body, [&](const std::string& m) { malformed(m); });
      format = fmt.u16();
      channels = fmt.u16();
      rate = fmt.u32();
      fmt.u32();  // byte rate
      fmt.u16();  // block align
      bits = fmt.u16();
      if (format == kFormatExtensible) {
        if (size < 40) malformed("extensible fmt chunk too short");
        fmt.u16();  // cbSize
        fmt.u16();  // valid bits
        fmt.u32();  // channel mask
        format = fmt.u16();  // first two bytes of the subformat GUID
      }
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) malformed("data chunk before fmt chunk");
      payload = std::move(body);
      have_data = true;
    }
  }
  if (!have_fmt) malformed("no fmt chunk");
  if (!have_data) malformed("no data chunk");

  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool float32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !float32) {
    throw Error(ErrorCode::kUnsupportedEncoding,
                "format " + std::to_string(format) + " with " + std::to_string(bits) + " bits");
  }
  if (channels != 1 && channels != 2) {
    throw Error(ErrorCode::kUnsupportedEncoding, std::to_string(channels) + " channels");
  }
  if (rate == 0) malformed("zero sample rate");

  const std::size_t frame_bytes = static_cast<std::size_t>(channels) * (bits / 8);
  const std::size_t frames = payload.size() / frame_bytes;
  if (frames == 0) throw Error(ErrorCode::kEmptyAudio, path.string());

  ByteReader pcm(payload, [&](const std::string& m) { malformed(m); });
  auto next = [&]() -> float {
    if (pcm16) return static_cast<float>(static_cast<std::int16_t>(pcm.u16())) / 32768.0f;
    return pcm.f32();
  };

  AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  clip.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    if (channels == 1) {
      clip.samples[i] = clamp_unit(next());
    } else {
      float l = next();
      float r = next();
      clip.samples[i] = clamp_unit((l + r) * 0.5f);
    }
  }
  return clip;
}

void save_wav(const AudioClip& clip, const std::filesystem::path& path) {
  if (clip.samples.empty()) throw Error(ErrorCode::kEmptyAudio, "refusing to write empty clip");
  const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 4);
  ByteWriter out;
  out.bytes("RIFF");
  out.u32(4 + (8 + 16) + (8 + data_bytes));
  out.bytes("WAVE");
  out.bytes("fmt ");
  out.u32(16);
  out.u16(kFormatFloat);
  out.u16(1);
  out.u32(static_cast<std::uint32_t>(clip.sample_rate));
  out.u32(static_cast<std::uint32_t>(clip.sample_rate) * 4);
  out.u16(4);
  out.u16(32);
  out.bytes("data");
  out.u32(data_bytes);
  for (float s : clip.samples) out.f32(s);
  write_file_atomic(path, out.str());
}

AudioClip resample(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0) throw Error(ErrorCode::kInvalidParams, "target rate must be positive");
  if (clip.sample_rate <= 0) throw Error(ErrorCode::kInvalidParams, "source rate must be positive");
  AudioClip out;
  out.sample_rate = target_rate;
  if (clip.sample_rate == target_rate) {
    out.samples = clip.samples;
    return out;
  }
  const std::size_t n = clip.samples.size();
  const auto n_out = static_cast<std::size_t>(std::llround(
      static_cast<double>(n) * target_rate / static_cast<double>(clip.sample_rate)));
  out.samples.resize(n_out);
  const double step = static_cast<double>(clip.sample_rate) / target_rate;
  for (std::size_t i = 0; i < n_out; ++i) {
    const double pos = static_cast<double>(i) * step;
    auto lo = static_cast<std::size_t>(pos);
    if (lo >= n - 1) {
      out.samples[i] = clip.samples[n - 1];
      continue;
    }
    const double frac = pos - static_cast<double>(lo);
    const double a = clip.samples[lo];
    const double b = clip.samples[lo + 1];
    out.samples[i] = static_cast<float>(a + (b - a) * frac);
  }
  return out;
}

void require_rate(const AudioClip& clip, int expected) {
  if (clip.sample_rate != expected) {
    throw Error(ErrorCode::kSampleRateMismatch, "clip is " + std::to_string(clip.sample_rate) +
                                                    " Hz, expected " + std::to_string(expected));
  }
}

}  // namespace segfp
