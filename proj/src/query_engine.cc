#include "segfp/query_engine.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "segfp/error.h"
#include "segfp/segmentation.h"
#include "segfp/util.h"

namespace segfp {

void QuerySpec::validate() const {
  if (!(query_len_l > 0.0)) throw Error(ErrorCode::kInvalidParams, "query length must be positive");
  if (!(source_offset >= 0.0)) throw Error(ErrorCode::kInvalidParams, "source offset must be >= 0");
  if (k_nn == 0) throw Error(ErrorCode::kInvalidParams, "k_nn must be at least 1");
  if (top_m == 0) throw Error(ErrorCode::kInvalidParams, "top_m must be at least 1");
}

AudioClip derive_query_clip(const AudioClip& clip, const QuerySpec& spec) {
  spec.validate();
  const auto offset = static_cast<std::size_t>(std::llround(spec.source_offset * clip.sample_rate));
  const auto length = static_cast<std::size_t>(std::llround(spec.query_len_l * clip.sample_rate));
  if (offset + length > clip.size()) {
    throw Error(ErrorCode::kOutOfRange, "excerpt [" + format_seconds(spec.source_offset) + ", " +
                                            format_seconds(spec.source_offset + spec.query_len_l) +
                                            ") s exceeds clip of " + format_seconds(clip.duration_seconds()) +
                                            " s");
  }
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples.assign(clip.samples.begin() + static_cast<std::ptrdiff_t>(offset),
                     clip.samples.begin() + static_cast<std::ptrdiff_t>(offset + length));
  return out;
}

std::vector<Candidate> vote(std::span<const std::vector<SearchHit>> per_segment_hits, std::size_t top_m) {
  std::map<std::pair<std::uint32_t, std::int64_t>, std::vector<double>> ballots;
  for (std::size_t i = 0; i < per_segment_hits.size(); ++i) {
    for (const SearchHit& hit : per_segment_hits[i]) {
      if (!(hit.score > 0.0)) continue;
      const std::int64_t start = static_cast<std::int64_t>(hit.key.segment_index) - static_cast<std::int64_t>(i);
      ballots[{hit.key.track_id, start}].push_back(hit.score);
    }
  }
  std::vector<Candidate> out;
  out.reserve(ballots.size());
  for (auto& [key, weights] : ballots) {
    std::sort(weights.begin(), weights.end());
    double total = 0.0;
    for (double w : weights) total += w;
    out.push_back({key.first, key.second, total});
  }
  std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
    if (a.vote_weight != b.vote_weight) return a.vote_weight > b.vote_weight;
    if (a.track_id != b.track_id) return a.track_id < b.track_id;
    return a.start_index < b.start_index;
  });
  if (out.size() > top_m) out.resize(top_m);
  return out;
}

QueryResult run_query(const AudioClip& clip, const QuerySpec& spec, const FingerprintDB& db,
                      const EncoderWeights& weights, const FeatureConfig& features) {
  require_rate(clip, features.sample_rate);
  check_window(db, weights.config.window_w);
  if (db.header.sample_rate != static_cast<std::uint32_t>(features.sample_rate)) {
    throw Error(ErrorCode::kSampleRateMismatch, "database sample rate differs from the feature config");
  }
  const AudioClip excerpt = derive_query_clip(clip, spec);
  SegmentationParams params{db.header.window_w, db.header.hop_h, spec.query_len_l};
  const auto segments = slice_segments(excerpt, params);

  const FeatureExtractor extractor(features);
  std::vector<Fingerprint> fps(segments.size());
  parallel_for(segments.size(), [&](std::size_t i) { fps[i] = encode(extractor.extract(segments[i]), weights); });

  QueryResult result;
  result.per_segment_hits = search_batch(db, fps, spec.k_nn);
  result.candidates = vote(result.per_segment_hits, spec.top_m);
  return result;
}

std::vector<std::pair<std::uint32_t, std::int64_t>> top_k_predictions(const QueryResult& result, std::size_t k) {
  std::vector<std::pair<std::uint32_t, std::int64_t>> out;
  for (std::size_t i = 0; i < std::min(k, result.candidates.size()); ++i) {
    out.emplace_back(result.candidates[i].track_id, result.candidates[i].start_index);
  }
  return out;
}

}  // namespace segfp
