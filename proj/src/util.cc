#include "segfp/util.h"

#include <atomic>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "segfp/error.h"

namespace segfp {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedWav: return "MalformedWav";
    case ErrorCode::kUnsupportedEncoding: return "UnsupportedEncoding";
    case ErrorCode::kEmptyAudio: return "EmptyAudio";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kInvalidParams: return "InvalidParams";
    case ErrorCode::kClipTooShort: return "ClipTooShort";
    case ErrorCode::kSampleRateMismatch: return "SampleRateMismatch";
    case ErrorCode::kInvalidBand: return "InvalidBand";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kNoAdapterForT: return "NoAdapterForT";
    case ErrorCode::kPoolEmpty: return "PoolEmpty";
    case ErrorCode::kNonUnitInput: return "NonUnitInput";
    case ErrorCode::kDivergenceDetected: return "DivergenceDetected";
    case ErrorCode::kCorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::kInvalidInput: return "InvalidInput";
    case ErrorCode::kEmptyDb: return "EmptyDb";
    case ErrorCode::kCorruptDb: return "CorruptDb";
    case ErrorCode::kIncompatibleW: return "IncompatibleW";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kEmptyQuerySet: return "EmptyQuerySet";
    case ErrorCode::kUnknownQuestion: return "UnknownQuestion";
    case ErrorCode::kNoDurationFound: return "NoDurationFound";
    case ErrorCode::kInsufficientReport: return "InsufficientReport";
    case ErrorCode::kTransportError: return "TransportError";
    case ErrorCode::kMissingReplayFile: return "MissingReplayFile";
    case ErrorCode::kConfigError: return "ConfigError";
  }
  return "Unknown";
}

namespace {
std::atomic<int> g_max_threads{0};
}

void set_max_threads(int threads) { g_max_threads = threads < 0 ? 0 : threads; }

int max_threads() {
  int t = g_max_threads.load();
  if (t > 0) return t;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(max_threads()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto work = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = n;
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::mt19937_64 make_rng(std::initializer_list<std::uint64_t> words) {
  std::vector<std::uint32_t> seeds;
  for (std::uint64_t w : words) {
    seeds.push_back(static_cast<std::uint32_t>(w));
    seeds.push_back(static_cast<std::uint32_t>(w >> 32));
  }
  std::seed_seq seq(seeds.begin(), seeds.end());
  return std::mt19937_64(seq);
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot open " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::kIoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIoError, "rename to " + path.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::int64_t to_micros(double seconds) { return std::llround(seconds * 1e6); }

std::string format_seconds(double seconds) {
  char buf[64];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, seconds);
    if (std::strtod(buf, nullptr) == seconds) break;
  }
  return buf;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void ByteWriter::u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
void ByteWriter::u16(std::uint16_t v) {
  for (int i = 0; i < 2; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
void ByteWriter::f64(double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}
void ByteWriter::bytes(std::string_view s) { buf_.append(s); }

ByteReader::ByteReader(std::string_view data, std::function<void(const std::string&)> on_error)
    : data_(data), on_error_(std::move(on_error)) {}

const char* ByteReader::take(std::size_t n) {
  if (n > remaining()) {
    on_error_("unexpected end of data at byte " + std::to_string(pos_));
    throw std::logic_error("ByteReader error handler returned");
  }
  const char* p = data_.data() + pos_;
  pos_ += n;
  return p;
}

std::uint8_t ByteReader::u8() { return static_cast<std::uint8_t>(*take(1)); }
std::uint16_t ByteReader::u16() {
  const auto* p = reinterpret_cast<const unsigned char*>(take(2));
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
std::uint32_t ByteReader::u32() {
  const auto* p = reinterpret_cast<const unsigned char*>(take(4));
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
float ByteReader::f32() { return std::bit_cast<float>(u32()); }
double ByteReader::f64() {
  const auto* p = reinterpret_cast<const unsigned char*>(take(8));
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}
std::string ByteReader::bytes(std::size_t n) { return std::string(take(n), n); }

}  // namespace segfp
