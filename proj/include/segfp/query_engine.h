#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "segfp/audio_io.h"
#include "segfp/encoder.h"
#include "segfp/features.h"
#include "segfp/fingerprint_db.h"

namespace segfp {

struct QuerySpec {
  double query_len_l = 1.0;    // seconds
  double source_offset = 0.0;  // seconds into the query clip
  std::size_t k_nn = 20;       // neighbours retrieved per query segment
  std::size_t top_m = 10;      // ranked candidates retained

  void validate() const;
};

struct Candidate {
  std::uint32_t track_id = 0;
  std::int64_t start_index = 0;  // database segment aligned with query segment 0
  double vote_weight = 0.0;

  bool operator==(const Candidate&) const = default;
};

struct QueryResult {
  std::vector<Candidate> candidates;  // weight descending, ties by (track, start)
  std::vector<std::vector<SearchHit>> per_segment_hits;
};

// The L-second excerpt starting at spec.source_offset. Throws OutOfRange
// when the clip is too short.
AudioClip derive_query_clip(const AudioClip& clip, const QuerySpec& spec);

// Weighted offset voting: a hit (t, j, s) from query segment i adds s to
// candidate (t, j - i) when s > 0. Each candidate's votes are summed in
// ascending order so the total does not depend on hit order.
std::vector<Candidate> vote(std::span<const std::vector<SearchHit>> per_segment_hits, std::size_t top_m);

QueryResult run_query(const AudioClip& clip, const QuerySpec& spec, const FingerprintDB& db,
                      const EncoderWeights& weights, const FeatureConfig& features);

std::vector<std::pair<std::uint32_t, std::int64_t>> top_k_predictions(const QueryResult& result, std::size_t k);

}  // namespace segfp
