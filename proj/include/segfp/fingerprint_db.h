#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "segfp/audio_io.h"
#include "segfp/encoder.h"
#include "segfp/features.h"
#include "segfp/segmentation.h"

namespace segfp {

struct SegmentKey {
  std::uint32_t track_id = 0;
  std::uint32_t segment_index = 0;

  auto operator<=>(const SegmentKey&) const = default;
};

struct TrackInfo {
  std::uint32_t id = 0;
  std::string name;
  std::uint32_t segment_count = 0;
  bool is_reference = false;

  bool operator==(const TrackInfo&) const = default;
};

struct DbHeader {
  double window_w = 1.0;
  double hop_h = 0.5;
  std::uint32_t sample_rate = kCanonicalRate;
  std::uint32_t dim = 0;

  bool operator==(const DbHeader&) const = default;
};

// Row r of `matrix` (dim floats) is the fingerprint of keys[r]. Rows are
// grouped by track in track-table order, segment index ascending.
struct FingerprintDB {
  DbHeader header;
  std::vector<TrackInfo> tracks;
  std::vector<SegmentKey> keys;
  std::vector<float> matrix;

  std::size_t rows() const { return keys.size(); }
  std::span<const float> row(std::size_t r) const {
    return {matrix.data() + r * header.dim, header.dim};
  }
  const TrackInfo* find_track(std::uint32_t id) const;

  bool operator==(const FingerprintDB&) const = default;
};

struct DbTrackInput {
  std::uint32_t track_id = 0;
  std::string name;
  const AudioClip* clip = nullptr;
  bool is_reference = false;
};

struct SearchHit {
  SegmentKey key;
  double score = 0.0;

  bool operator==(const SearchHit&) const = default;
};

FingerprintDB build_db(std::span<const DbTrackInput> tracks, const EncoderWeights& weights,
                       const FeatureConfig& features, const SegmentationParams& params);

// Inner-product score of a stored row against a query, accumulated in double
// over single-precision values in index order.
double score_row(std::span<const float> row, std::span<const float> query);

// Top-k rows by score, descending; equal scores ordered by key ascending.
std::vector<SearchHit> search(const FingerprintDB& db, std::span<const double> query, std::size_t k);

// One result list per query; queries fan out across threads.
std::vector<std::vector<SearchHit>> search_batch(const FingerprintDB& db,
                                                 std::span<const Fingerprint> queries, std::size_t k);

// Throws IncompatibleW when the database was built for another window.
void check_window(const FingerprintDB& db, double window_w);

std::string serialize_db(const FingerprintDB& db);
FingerprintDB deserialize_db(std::string_view bytes);
void save_db(const FingerprintDB& db, const std::filesystem::path& path);
FingerprintDB load_db(const std::filesystem::path& path);

}  // namespace segfp
