#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "segfp/audio_io.h"
#include "segfp/encoder.h"
#include "segfp/features.h"
#include "segfp/fingerprint_db.h"
#include "segfp/query_engine.h"
#include "segfp/training.h"

namespace segfp {

// Synthetic stand-in for a music collection: each clip is a mix of
// harmonic voices playing tempo-quantised note sequences over a quiet noise
// floor. Splits come from distinct generator streams.
struct CorpusSpec {
  std::size_t n_train = 20;
  std::size_t n_ref = 40;
  std::size_t n_dist = 20;
  double clip_len_s = 30.0;
  std::size_t min_voices = 3;
  std::size_t max_voices = 8;
  std::size_t max_harmonics = 5;
  double tempo_bpm_min = 80.0;
  double tempo_bpm_max = 160.0;
  double noise_floor = 0.01;
  std::uint64_t master_seed = 1;

  void validate() const;
  bool operator==(const CorpusSpec&) const = default;
};

struct CorpusTrack {
  std::uint32_t id = 0;
  std::string name;
  AudioClip clip;
};

struct Corpus {
  std::vector<CorpusTrack> train;
  std::vector<CorpusTrack> ref;
  std::vector<CorpusTrack> dist;
};

enum class CorpusSplit : std::uint64_t { kTrain = 1, kRef = 2, kDist = 3 };

AudioClip synthesize_track(const CorpusSpec& spec, CorpusSplit split, std::size_t ordinal);
Corpus generate_corpus(const CorpusSpec& spec);

struct QuerySetSpec {
  std::size_t queries_per_track = 2;
  double query_len_s = 10.0;   // length of each derived query (>= max L)
  double max_jitter_s = 0.2;   // |true offset - snapped offset| bound, <= h/2
  bool distort = true;
  AugmentConfig augment{.snr_db_min = 0.0, .snr_db_max = 10.0, .offset_range_s = 0.0,
                        .ir_lengths = {1, 200, 400, 800}, .cutoff_hz_min = 0.0, .cutoff_hz_max = 0.0,
                        .rng_seed = 7};
  std::size_t noise_pool_size = 8;
  std::uint64_t noise_seed = 1001;  // must differ from the training noise seed
  std::uint64_t seed = 11;

  void validate(double hop_h) const;
  bool operator==(const QuerySetSpec&) const = default;
};

struct QueryTruth {
  std::uint32_t track_id = 0;
  std::int64_t start_index = 0;  // snapped offset / h
  double jitter_s = 0.0;         // actual start minus snapped start
};

struct Query {
  AudioClip clip;
  QueryTruth truth;
};

// Queries cut from reference tracks at hop-aligned offsets plus jitter, then
// passed through the held-out distortion chain.
std::vector<Query> derive_query_set(std::span<const CorpusTrack> ref, const QuerySetSpec& spec, double hop_h);

enum class HitMode { kExact, kNear };

bool score_query(const QueryResult& result, const QueryTruth& truth, std::size_t k, HitMode mode);

struct HitCell {
  double window_w = 0.0;
  double query_len_l = 0.0;
  double top1_exact = 0.0;
  double top3_exact = 0.0;
  double top10_exact = 0.0;
  double top1_near = 0.0;
  std::size_t n_queries = 0;

  bool operator==(const HitCell&) const = default;
};

// Cells exist only for L >= W; they are ordered by (W, L).
struct HitReport {
  std::vector<HitCell> cells;

  std::vector<double> window_values() const;
  std::vector<double> query_lengths() const;
  const HitCell* find(double window_w, double query_len_l) const;
  void merge(const HitReport& other);
  // Throws InvalidInput when K-monotonicity or exact <= near is violated.
  void check_invariants() const;
};

struct HitFlags {
  bool top1 = false, top3 = false, top10 = false, near1 = false;
};

// Hit rates from per-query flags; throws EmptyQuerySet when empty.
HitCell aggregate_hits(std::span<const HitFlags> flags, double window_w, double query_len_l);

struct EvalOptions {
  std::size_t k_nn = 20;
  std::size_t top_m = 10;
};

HitReport evaluate(const FingerprintDB& db, const EncoderWeights& weights, const FeatureConfig& features,
                   std::span<const Query> queries, std::span<const double> l_values,
                   const EvalOptions& options = {});

enum class HitMetric { kTop1Exact, kTop3Exact, kTop10Exact, kTop1Near };
double metric_value(const HitCell& cell, HitMetric metric);
const char* metric_label(HitMetric metric);

// Per-W count of query lengths where that W has the best rate for the
// metric; a tie splits the win. Only lengths with at least two W are counted.
std::map<double, double> win_counts(const HitReport& report, HitMetric metric);
std::size_t contested_lengths(const HitReport& report);

// W with the most Top-1-exact wins (smaller W on ties). Throws
// InsufficientReport with fewer than two segment lengths.
double best_window(const HitReport& report);

std::string format_report_csv(const HitReport& report);
HitReport parse_report_csv(std::string_view csv);
std::string format_report_markdown(const HitReport& report);
std::string format_report_svg(const HitReport& report);

}  // namespace segfp
