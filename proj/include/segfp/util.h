#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace segfp {

// Caps the fan-out of parallel_for. 0 means hardware_concurrency.
void set_max_threads(int threads);
int max_threads();

// Runs fn(i) for i in [0, n). Each index must write only its own output slot;
// results are then independent of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

// Deterministic generator for a named stream, e.g. (seed, split, ordinal).
std::mt19937_64 make_rng(std::initializer_list<std::uint64_t> words);

// Writes to "<path>.tmp" and renames over path.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

// Seconds expressed as whole microseconds; all window/hop arithmetic is done
// on this grid so 0.5 s steps never accumulate rounding drift.
std::int64_t to_micros(double seconds);

// Shortest round-trip decimal form of a value, e.g. 0.5 -> "0.5", 2.0 -> "2".
std::string format_seconds(double seconds);

double dot(std::span<const double> a, std::span<const double> b);

// Little-endian binary writer/reader used by the checkpoint and DB formats.
class ByteWriter {
 public:
  void u8(std::uint8_t v);
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void f32(float v);
  void f64(double v);
  void bytes(std::string_view s);
  const std::string& str() const { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  // on_error builds the exception thrown for truncated input.
  ByteReader(std::string_view data, std::function<void(const std::string&)> on_error);

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  float f32();
  double f64();
  std::string bytes(std::size_t n);
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  const char* take(std::size_t n);

  std::string_view data_;
  std::size_t pos_ = 0;
  std::function<void(const std::string&)> on_error_;
};

}  // namespace segfp
