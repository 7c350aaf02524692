#include "segfp/eval_harness.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "segfp/error.h"
#include "segfp/segmentation.h"
#include "segfp/util.h"

namespace segfp {
namespace {

constexpr std::uint64_t kQueryStream = 0x7175657279ULL;
constexpr std::array<int, 7> kMajorScale{0, 2, 4, 5, 7, 9, 11};

double midi_to_hz(double m) { return 440.0 * std::pow(2.0, (m - 69.0) / 12.0); }

std::string track_name(const char* split, std::size_t ordinal) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s/%04zu", split, ordinal);
  return buf;
}

}  // namespace

void CorpusSpec::validate() const {
  if (!(clip_len_s > 0.0)) throw Error(ErrorCode::kInvalidConfig, "clip_len_s must be positive");
  if (min_voices == 0 || min_voices > max_voices) throw Error(ErrorCode::kInvalidConfig, "need 1 <= min_voices <= max_voices");
  if (max_harmonics == 0) throw Error(ErrorCode::kInvalidConfig, "max_harmonics must be positive");
  if (!(tempo_bpm_min > 0.0) || tempo_bpm_min > tempo_bpm_max) {
    throw Error(ErrorCode::kInvalidConfig, "need 0 < tempo_bpm_min <= tempo_bpm_max");
  }
  if (!(noise_floor >= 0.0)) throw Error(ErrorCode::kInvalidConfig, "noise_floor must be >= 0");
}

AudioClip synthesize_track(const CorpusSpec& spec, CorpusSplit split, std::size_t ordinal) {
  auto rng = make_rng({spec.master_seed, static_cast<std::uint64_t>(split), ordinal});
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto pick = [&](std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(unit(rng) * static_cast<double>(hi - lo + 1)) % (hi - lo + 1);
  };

  const double rate = kCanonicalRate;
  const auto n = static_cast<std::size_t>(std::llround(spec.clip_len_s * rate));
  std::vector<double> mix(n, 0.0);

  const double beat = 60.0 / (spec.tempo_bpm_min + unit(rng) * (spec.tempo_bpm_max - spec.tempo_bpm_min));
  const int key = static_cast<int>(pick(0, 11));
  const std::size_t voices = pick(spec.min_voices, spec.max_voices);
  static constexpr std::array<double, 5> kBeats{0.5, 1.0, 1.0, 2.0, 0.25};

  for (std::size_t v = 0; v < voices; ++v) {
    const int octave_base = 48 + 12 * static_cast<int>(pick(0, 2));
    const std::size_t harmonics = pick(1, spec.max_harmonics);
    const double rolloff = 0.6 + unit(rng);
    const double gain = 0.3 + 0.7 * unit(rng);
    double t = 0.0;
    while (t < spec.clip_len_s) {
      const double dur = kBeats[pick(0, kBeats.size() - 1)] * beat;
      const bool rest = unit(rng) < 0.2;
      const int degree = static_cast<int>(pick(0, kMajorScale.size() - 1));
      const double f0 = midi_to_hz(octave_base + key + kMajorScale[degree]);
      if (!rest) {
        const auto first = static_cast<std::size_t>(t * rate);
        const auto last = std::min(n, static_cast<std::size_t>((t + dur) * rate));
        const double attack = 0.01 * rate;
        const double release = 0.03 * rate;
        for (std::size_t s = first; s < last; ++s) {
          const double local = static_cast<double>(s - first);
          const double remain = static_cast<double>(last - s);
          const double env = std::min({1.0, local / attack, remain / release});
          double acc = 0.0;
          for (std::size_t h = 1; h <= harmonics; ++h) {
            const double fh = f0 * static_cast<double>(h);
            if (fh >= 0.49 * rate) break;
            acc += std::sin(2.0 * std::numbers::pi * fh * static_cast<double>(s) / rate) /
                   std::pow(static_cast<double>(h), rolloff);
          }
          mix[s] += gain * env * acc;
        }
      }
      t += dur;
    }
  }

  // Percussive noise bursts on a random subset of beats.
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double hit_prob = 0.3 + 0.5 * unit(rng);
  for (double t = 0.0; t < spec.clip_len_s; t += beat) {
    if (unit(rng) >= hit_prob) continue;
    const auto first = static_cast<std::size_t>(t * rate);
    const auto len = static_cast<std::size_t>(0.05 * rate);
    const double level = 0.5 + unit(rng);
    for (std::size_t s = first; s < std::min(n, first + len); ++s) {
      mix[s] += level * gauss(rng) * std::exp(-static_cast<double>(s - first) / (0.01 * rate));
    }
  }

  double peak = 0.0;
  for (double x : mix) peak = std::max(peak, std::abs(x));
  if (peak > 0.0) {
    for (double& x : mix) x *= 0.9 / peak;
  }
  double lp = 0.0;
  for (double& x : mix) {
    lp = 0.9 * lp + 0.1 * gauss(rng);
    x += spec.noise_floor * lp;
  }
  peak = 0.0;
  for (double x : mix) peak = std::max(peak, std::abs(x));
  AudioClip clip;
  clip.sample_rate = kCanonicalRate;
  clip.samples.resize(n);
  for (std::size_t s = 0; s < n; ++s) clip.samples[s] = static_cast<float>(peak > 0.0 ? 0.95 * mix[s] / peak : 0.0);
  return clip;
}

Corpus generate_corpus(const CorpusSpec& spec) {
  spec.validate();
  Corpus corpus;
  corpus.train.resize(spec.n_train);
  corpus.ref.resize(spec.n_ref);
  corpus.dist.resize(spec.n_dist);
  parallel_for(spec.n_train, [&](std::size_t i) {
    corpus.train[i] = {static_cast<std::uint32_t>(i), track_name("train", i),
                       synthesize_track(spec, CorpusSplit::kTrain, i)};
  });
  parallel_for(spec.n_ref, [&](std::size_t i) {
    corpus.ref[i] = {static_cast<std::uint32_t>(i), track_name("ref", i), synthesize_track(spec, CorpusSplit::kRef, i)};
  });
  parallel_for(spec.n_dist, [&](std::size_t i) {
    corpus.dist[i] = {static_cast<std::uint32_t>(spec.n_ref + i), track_name("dist", i),
                      synthesize_track(spec, CorpusSplit::kDist, i)};
  });
  return corpus;
}

void QuerySetSpec::validate(double hop_h) const {
  if (queries_per_track == 0) throw Error(ErrorCode::kInvalidConfig, "queries_per_track must be positive");
  if (!(query_len_s > 0.0)) throw Error(ErrorCode::kInvalidConfig, "query_len_s must be positive");
  if (!(max_jitter_s >= 0.0) || to_micros(max_jitter_s) * 2 > to_micros(hop_h)) {
    throw Error(ErrorCode::kInvalidConfig, "max_jitter_s must lie in [0, h/2]");
  }
  if (distort) {
    augment.validate();
    if (noise_pool_size == 0) throw Error(ErrorCode::kPoolEmpty, "query noise pool is empty");
  }
}

std::vector<Query> derive_query_set(std::span<const CorpusTrack> ref, const QuerySetSpec& spec, double hop_h) {
  spec.validate(hop_h);
  const double rate = kCanonicalRate;
  const auto len = static_cast<std::size_t>(std::llround(spec.query_len_s * rate));
  const auto hop = static_cast<std::int64_t>(std::llround(hop_h * rate));
  const auto max_jitter = static_cast<std::int64_t>(std::llround(spec.max_jitter_s * rate));

  std::vector<AudioClip> noise_pool;
  std::vector<ImpulseResponse> ir_pool;
  if (spec.distort) {
    noise_pool = make_noise_pool(spec.noise_pool_size, 10 * kCanonicalRate, spec.noise_seed);
    ir_pool = make_ir_pool(spec.augment.ir_lengths, spec.augment.rng_seed);
  }

  std::vector<Query> out(ref.size() * spec.queries_per_track);
  for (std::size_t t = 0; t < ref.size(); ++t) {
    const AudioClip& clip = ref[t].clip;
    require_rate(clip, kCanonicalRate);
    const std::int64_t first_index = (max_jitter + hop - 1) / hop;
    const std::int64_t span = static_cast<std::int64_t>(clip.size()) - static_cast<std::int64_t>(len) - max_jitter;
    const std::int64_t last_index = span < 0 ? -1 : span / hop;
    if (last_index < first_index) {
      throw Error(ErrorCode::kInvalidInput, "track " + ref[t].name + " is too short for " +
                                                format_seconds(spec.query_len_s) + " s queries");
    }
    for (std::size_t q = 0; q < spec.queries_per_track; ++q) {
      auto rng = make_rng({spec.seed, kQueryStream, ref[t].id, q});
      std::uniform_int_distribution<std::int64_t> pick_index(first_index, last_index);
      std::uniform_int_distribution<std::int64_t> pick_jitter(-max_jitter, max_jitter);
      const std::int64_t index = pick_index(rng);
      const std::int64_t jitter = max_jitter > 0 ? pick_jitter(rng) : 0;
      const std::int64_t start = index * hop + jitter;

      std::vector<double> x(len, 0.0);
      for (std::size_t n = 0; n < len; ++n) {
        const std::int64_t src = start + static_cast<std::int64_t>(n);
        if (src >= 0 && src < static_cast<std::int64_t>(clip.size())) x[n] = clip.samples[src];
      }
      Query& query = out[t * spec.queries_per_track + q];
      query.truth = {ref[t].id, index, static_cast<double>(jitter) / rate};
      query.clip.sample_rate = kCanonicalRate;
      if (spec.distort) {
        query.clip.samples = distort_signal(std::move(x), kCanonicalRate, noise_pool, ir_pool, spec.augment, rng);
      } else {
        query.clip.samples.resize(len);
        for (std::size_t n = 0; n < len; ++n) query.clip.samples[n] = static_cast<float>(x[n]);
      }
    }
  }
  return out;
}

bool score_query(const QueryResult& result, const QueryTruth& truth, std::size_t k, HitMode mode) {
  const std::size_t limit = std::min(k, result.candidates.size());
  for (std::size_t i = 0; i < limit; ++i) {
    const Candidate& c = result.candidates[i];
    if (c.track_id != truth.track_id) continue;
    const std::int64_t diff = c.start_index - truth.start_index;
    if (mode == HitMode::kExact ? diff == 0 : (diff >= -1 && diff <= 1)) return true;
  }
  return false;
}

std::vector<double> HitReport::window_values() const {
  std::vector<double> w;
  for (const auto& c : cells) {
    if (std::find(w.begin(), w.end(), c.window_w) == w.end()) w.push_back(c.window_w);
  }
  std::sort(w.begin(), w.end());
  return w;
}

std::vector<double> HitReport::query_lengths() const {
  std::vector<double> l;
  for (const auto& c : cells) {
    if (std::find(l.begin(), l.end(), c.query_len_l) == l.end()) l.push_back(c.query_len_l);
  }
  std::sort(l.begin(), l.end());
  return l;
}

const HitCell* HitReport::find(double window_w, double query_len_l) const {
  for (const auto& c : cells) {
    if (to_micros(c.window_w) == to_micros(window_w) && to_micros(c.query_len_l) == to_micros(query_len_l)) {
      return &c;
    }
  }
  return nullptr;
}

void HitReport::merge(const HitReport& other) {
  for (const auto& c : other.cells) {
    if (find(c.window_w, c.query_len_l)) {
      throw Error(ErrorCode::kInvalidInput, "duplicate report cell W=" + format_seconds(c.window_w) +
                                                " L=" + format_seconds(c.query_len_l));
    }
    cells.push_back(c);
  }
  std::sort(cells.begin(), cells.end(), [](const HitCell& a, const HitCell& b) {
    if (a.window_w != b.window_w) return a.window_w < b.window_w;
    return a.query_len_l < b.query_len_l;
  });
}

void HitReport::check_invariants() const {
  for (const auto& c : cells) {
    const std::string where = " at W=" + format_seconds(c.window_w) + " L=" + format_seconds(c.query_len_l);
    if (to_micros(c.query_len_l) < to_micros(c.window_w)) throw Error(ErrorCode::kInvalidInput, "cell with L < W" + where);
    if (!(c.top1_exact <= c.top3_exact && c.top3_exact <= c.top10_exact)) {
      throw Error(ErrorCode::kInvalidInput, "top-K rates not monotone" + where);
    }
    if (!(c.top1_exact <= c.top1_near)) throw Error(ErrorCode::kInvalidInput, "exact rate exceeds near rate" + where);
    for (double r : {c.top1_exact, c.top3_exact, c.top10_exact, c.top1_near}) {
      if (!(r >= 0.0 && r <= 1.0)) throw Error(ErrorCode::kInvalidInput, "rate outside [0, 1]" + where);
    }
  }
}

HitCell aggregate_hits(std::span<const HitFlags> flags, double window_w, double query_len_l) {
  if (flags.empty()) throw Error(ErrorCode::kEmptyQuerySet, "no queries to aggregate");
  std::size_t t1 = 0, t3 = 0, t10 = 0, n1 = 0;
  for (const auto& f : flags) {
    t1 += f.top1;
    t3 += f.top3;
    t10 += f.top10;
    n1 += f.near1;
  }
  const auto n = static_cast<double>(flags.size());
  return {window_w, query_len_l, t1 / n, t3 / n, t10 / n, n1 / n, flags.size()};
}

HitReport evaluate(const FingerprintDB& db, const EncoderWeights& weights, const FeatureConfig& features,
                   std::span<const Query> queries, std::span<const double> l_values, const EvalOptions& options) {
  if (queries.empty()) throw Error(ErrorCode::kEmptyQuerySet, "no queries to evaluate");
  if (l_values.empty()) throw Error(ErrorCode::kInvalidInput, "no query lengths to evaluate");
  check_window(db, weights.config.window_w);
  HitReport report;
  for (double l : l_values) {
    if (to_micros(l) < to_micros(db.header.window_w)) continue;
    std::vector<HitFlags> flags(queries.size());
    parallel_for(queries.size(), [&](std::size_t i) {
      QuerySpec spec{l, 0.0, options.k_nn, options.top_m};
      const QueryResult result = run_query(queries[i].clip, spec, db, weights, features);
      const QueryTruth& truth = queries[i].truth;
      flags[i] = {score_query(result, truth, 1, HitMode::kExact), score_query(result, truth, 3, HitMode::kExact),
                  score_query(result, truth, 10, HitMode::kExact), score_query(result, truth, 1, HitMode::kNear)};
    });
    report.cells.push_back(aggregate_hits(flags, db.header.window_w, l));
  }
  report.check_invariants();
  return report;
}

double metric_value(const HitCell& cell, HitMetric metric) {
  switch (metric) {
    case HitMetric::kTop1Exact: return cell.top1_exact;
    case HitMetric::kTop3Exact: return cell.top3_exact;
    case HitMetric::kTop10Exact: return cell.top10_exact;
    case HitMetric::kTop1Near: return cell.top1_near;
  }
  return 0.0;
}

const char* metric_label(HitMetric metric) {
  switch (metric) {
    case HitMetric::kTop1Exact: return "Top1 Exact";
    case HitMetric::kTop3Exact: return "Top3 Exact";
    case HitMetric::kTop10Exact: return "Top10 Exact";
    case HitMetric::kTop1Near: return "Top1 Near";
  }
  return "";
}

std::map<double, double> win_counts(const HitReport& report, HitMetric metric) {
  std::map<double, double> wins;
  for (double w : report.window_values()) wins[w] = 0.0;
  for (double l : report.query_lengths()) {
    std::vector<const HitCell*> column;
    for (const auto& c : report.cells) {
      if (to_micros(c.query_len_l) == to_micros(l)) column.push_back(&c);
    }
    if (column.size() < 2) continue;
    double best = -1.0;
    for (const auto* c : column) best = std::max(best, metric_value(*c, metric));
    std::vector<double> winners;
    for (const auto* c : column) {
      if (metric_value(*c, metric) == best) winners.push_back(c->window_w);
    }
    for (double w : winners) wins[w] += 1.0 / static_cast<double>(winners.size());
  }
  return wins;
}

std::size_t contested_lengths(const HitReport& report) {
  std::size_t n = 0;
  for (double l : report.query_lengths()) {
    std::size_t present = 0;
    for (const auto& c : report.cells) present += to_micros(c.query_len_l) == to_micros(l);
    n += present >= 2;
  }
  return n;
}

double best_window(const HitReport& report) {
  if (report.window_values().size() < 2) {
    throw Error(ErrorCode::kInsufficientReport, "report covers fewer than two segment lengths");
  }
  const auto wins = win_counts(report, HitMetric::kTop1Exact);
  double best_w = 0.0, best = -1.0;
  for (const auto& [w, n] : wins) {
    if (n > best) {
      best = n;
      best_w = w;
    }
  }
  return best_w;
}

}  // namespace segfp
