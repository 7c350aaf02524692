#include "segfp/fingerprint_db.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "segfp/error.h"
#include "segfp/util.h"

namespace segfp {
namespace {

constexpr std::uint16_t kDbVersion = 1;
constexpr char kDbMagic[] = "NFPD";
constexpr double kRowNormTolerance = 1e-4;

bool better(const SearchHit& a, const SearchHit& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.key < b.key;
}

std::vector<float> to_float(std::span<const double> v) {
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
  return out;
}

}  // namespace

const TrackInfo* FingerprintDB::find_track(std::uint32_t id) const {
  for (const auto& t : tracks) {
    if (t.id == id) return &t;
  }
  return nullptr;
}

FingerprintDB build_db(std::span<const DbTrackInput> tracks, const EncoderWeights& weights,
                       const FeatureConfig& features, const SegmentationParams& params) {
  if (tracks.empty()) throw Error(ErrorCode::kInvalidInput, "no tracks to index");
  params.validate(features.sample_rate);
  check_window(FingerprintDB{DbHeader{weights.config.window_w}}, params.window_w);
  std::set<std::uint32_t> ids;
  for (const auto& t : tracks) {
    if (!t.clip) throw Error(ErrorCode::kInvalidInput, "track " + t.name + " has no audio");
    if (!ids.insert(t.track_id).second) {
      throw Error(ErrorCode::kInvalidInput, "duplicate track id " + std::to_string(t.track_id));
    }
  }

  FingerprintDB db;
  db.header = {params.window_w, params.hop_h, static_cast<std::uint32_t>(features.sample_rate),
               static_cast<std::uint32_t>(weights.config.fingerprint_dim)};
  const FeatureExtractor extractor(features);
  for (const auto& t : tracks) {
    const auto segments = slice_segments(*t.clip, params, t.track_id);
    std::vector<Fingerprint> fps(segments.size());
    parallel_for(segments.size(), [&](std::size_t i) { fps[i] = encode(extractor.extract(segments[i]), weights); });
    db.tracks.push_back({t.track_id, t.name, static_cast<std::uint32_t>(segments.size()), t.is_reference});
    for (std::size_t i = 0; i < segments.size(); ++i) {
      db.keys.push_back({t.track_id, static_cast<std::uint32_t>(i)});
      const auto row = to_float(fps[i].values);
      db.matrix.insert(db.matrix.end(), row.begin(), row.end());
    }
  }
  return db;
}

double score_row(std::span<const float> row, std::span<const float> query) {
  double s = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) s += static_cast<double>(row[i]) * static_cast<double>(query[i]);
  return s;
}

std::vector<SearchHit> search(const FingerprintDB& db, std::span<const double> query, std::size_t k) {
  if (db.rows() == 0) throw Error(ErrorCode::kEmptyDb, "database has no rows");
  if (k == 0) throw Error(ErrorCode::kInvalidInput, "k must be at least 1");
  if (query.size() != db.header.dim) {
    throw Error(ErrorCode::kInvalidInput, "query dimension " + std::to_string(query.size()) +
                                              " != database dimension " + std::to_string(db.header.dim));
  }
  const auto q = to_float(query);
  const std::size_t keep = std::min(k, db.rows());
  // Heap whose front is the worst retained hit.
  std::vector<SearchHit> heap;
  heap.reserve(keep + 1);
  for (std::size_t r = 0; r < db.rows(); ++r) {
    SearchHit hit{db.keys[r], score_row(db.row(r), q)};
    if (heap.size() < keep) {
      heap.push_back(hit);
      std::push_heap(heap.begin(), heap.end(), better);
    } else if (better(hit, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), better);
      heap.back() = hit;
      std::push_heap(heap.begin(), heap.end(), better);
    }
  }
  std::sort(heap.begin(), heap.end(), better);
  return heap;
}

std::vector<std::vector<SearchHit>> search_batch(const FingerprintDB& db,
                                                 std::span<const Fingerprint> queries, std::size_t k) {
  std::vector<std::vector<SearchHit>> out(queries.size());
  parallel_for(queries.size(), [&](std::size_t i) { out[i] = search(db, queries[i].values, k); });
  return out;
}

void check_window(const FingerprintDB& db, double window_w) {
  if (to_micros(db.header.window_w) != to_micros(window_w)) {
    throw Error(ErrorCode::kIncompatibleW, "database built for W=" + format_seconds(db.header.window_w) +
                                               " s, pipeline uses W=" + format_seconds(window_w) + " s");
  }
}

std::string serialize_db(const FingerprintDB& db) {
  ByteWriter out;
  out.bytes(std::string_view(kDbMagic, 4));
  out.u16(kDbVersion);
  out.u32(db.header.sample_rate);
  out.u32(db.header.dim);
  out.u32(static_cast<std::uint32_t>(to_micros(db.header.window_w)));
  out.u32(static_cast<std::uint32_t>(to_micros(db.header.hop_h)));
  out.u32(static_cast<std::uint32_t>(db.tracks.size()));
  for (const auto& t : db.tracks) {
    out.u32(t.id);
    out.u16(static_cast<std::uint16_t>(t.name.size()));
    out.bytes(t.name);
    out.u32(t.segment_count);
    out.u8(t.is_reference ? 1 : 0);
  }
  for (float v : db.matrix) out.f32(v);
  return out.str();
}

FingerprintDB deserialize_db(std::string_view bytes) {
  auto corrupt = [](const std::string& m) { throw Error(ErrorCode::kCorruptDb, m); };
  ByteReader in(bytes, corrupt);
  if (in.bytes(4) != std::string_view(kDbMagic, 4)) corrupt("bad magic");
  const std::uint16_t version = in.u16();
  if (version != kDbVersion) corrupt("unsupported version " + std::to_string(version));
  FingerprintDB db;
  db.header.sample_rate = in.u32();
  db.header.dim = in.u32();
  db.header.window_w = static_cast<double>(in.u32()) / 1e6;
  db.header.hop_h = static_cast<double>(in.u32()) / 1e6;
  if (db.header.dim == 0 || db.header.sample_rate == 0) corrupt("zero dimension or sample rate");
  if (db.header.window_w <= 0.0 || db.header.hop_h <= 0.0) corrupt("non-positive window or hop");
  const std::uint32_t n_tracks = in.u32();
  std::set<std::uint32_t> ids;
  for (std::uint32_t i = 0; i < n_tracks; ++i) {
    TrackInfo t;
    t.id = in.u32();
    t.name = in.bytes(in.u16());
    t.segment_count = in.u32();
    const std::uint8_t flag = in.u8();
    if (flag > 1) corrupt("bad reference flag");
    t.is_reference = flag == 1;
    if (!ids.insert(t.id).second) corrupt("duplicate track id");
    for (std::uint32_t s = 0; s < t.segment_count; ++s) db.keys.push_back({t.id, s});
    db.tracks.push_back(std::move(t));
  }
  const std::size_t values = db.keys.size() * db.header.dim;
  if (in.remaining() != values * 4) corrupt("matrix size does not match the track table");
  db.matrix.resize(values);
  for (float& v : db.matrix) v = in.f32();
  for (std::size_t r = 0; r < db.rows(); ++r) {
    const auto row = db.row(r);
    const double n = std::sqrt(score_row(row, row));
    if (!(std::abs(n - 1.0) <= kRowNormTolerance)) corrupt("row " + std::to_string(r) + " is not unit norm");
  }
  return db;
}

void save_db(const FingerprintDB& db, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_db(db));
}

FingerprintDB load_db(const std::filesystem::path& path) { return deserialize_db(read_file(path)); }

}  // namespace segfp
