#include "segfp/training.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>

#include "segfp/error.h"
#include "segfp/serialization.h"
#include "segfp/util.h"

namespace segfp {
namespace {

constexpr std::uint16_t kCheckpointVersion = 1;
constexpr char kCheckpointMagic[] = "NFPW";

double power(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v * v;
  return s / static_cast<double>(x.size());
}

// RBJ biquad low-pass, Q = 1/sqrt(2).
void lowpass_in_place(std::vector<double>& x, double cutoff_hz, int rate) {
  const double w0 = 2.0 * std::numbers::pi * cutoff_hz / rate;
  const double alpha = std::sin(w0) / std::numbers::sqrt2;
  const double cw = std::cos(w0);
  const double a0 = 1.0 + alpha;
  const double b0 = (1.0 - cw) / 2.0 / a0;
  const double b1 = (1.0 - cw) / a0;
  const double b2 = b0;
  const double a1 = -2.0 * cw / a0;
  const double a2 = (1.0 - alpha) / a0;
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
  for (double& v : x) {
    const double y = b0 * v + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = v;
    y2 = y1;
    y1 = y;
    v = y;
  }
}

}  // namespace

void AugmentConfig::validate() const {
  if (std::isnan(snr_db_min) || std::isnan(snr_db_max) || snr_db_min > snr_db_max) {
    throw Error(ErrorCode::kInvalidConfig, "need snr_db_min <= snr_db_max");
  }
  if (!(offset_range_s >= 0.0)) throw Error(ErrorCode::kInvalidConfig, "offset_range_s must be >= 0");
  if (ir_lengths.empty()) throw Error(ErrorCode::kPoolEmpty, "no impulse-response lengths configured");
  for (std::size_t n : ir_lengths) {
    if (n == 0) throw Error(ErrorCode::kInvalidConfig, "impulse-response length must be positive");
  }
  if (cutoff_hz_max > 0.0 && !(cutoff_hz_min > 0.0 && cutoff_hz_min <= cutoff_hz_max)) {
    throw Error(ErrorCode::kInvalidConfig, "need 0 < cutoff_hz_min <= cutoff_hz_max");
  }
}

void TrainConfig::validate() const {
  if (!(temperature > 0.0)) throw Error(ErrorCode::kInvalidConfig, "temperature must be positive");
  if (batch_pairs < 2) throw Error(ErrorCode::kInvalidConfig, "batch_pairs must be at least 2");
  if (!(learning_rate >= 0.0)) throw Error(ErrorCode::kInvalidConfig, "learning_rate must be >= 0");
}

ImpulseResponse make_impulse_response(std::size_t length, std::mt19937_64& rng) {
  if (length == 0) throw Error(ErrorCode::kInvalidParams, "impulse response length must be positive");
  std::normal_distribution<double> gauss(0.0, 1.0);
  ImpulseResponse h(length);
  const double decay = std::log(1000.0) / static_cast<double>(length);
  double energy = 0.0;
  for (std::size_t n = 0; n < length; ++n) {
    h[n] = gauss(rng) * std::exp(-decay * static_cast<double>(n));
    energy += h[n] * h[n];
  }
  h[0] = std::abs(h[0]);
  if (energy <= 0.0) {
    h.assign(length, 0.0);
    h[0] = 1.0;
    return h;
  }
  const double scale = 1.0 / std::sqrt(energy);
  for (double& v : h) v *= scale;
  return h;
}

std::vector<ImpulseResponse> make_ir_pool(std::span<const std::size_t> lengths, std::uint64_t seed) {
  std::vector<ImpulseResponse> pool;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    auto rng = make_rng({seed, 0x6972ULL, i});
    pool.push_back(make_impulse_response(lengths[i], rng));
  }
  return pool;
}

std::vector<AudioClip> make_noise_pool(std::size_t count, std::size_t length_samples, std::uint64_t seed) {
  std::vector<AudioClip> pool(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto rng = make_rng({seed, 0x6e6f697365ULL, i});
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> x(length_samples);
    const double rate = kCanonicalRate;
    switch (i % 4) {
      case 0:
        for (double& v : x) v = gauss(rng);
        break;
      case 1: {
        const double a = 0.8 + 0.18 * unit(rng);
        double s = 0.0;
        for (double& v : x) v = s = a * s + (1.0 - a) * gauss(rng);
        break;
      }
      case 2: {
        const double fm = 2.0 + 6.0 * unit(rng);
        const double phase = 2.0 * std::numbers::pi * unit(rng);
        for (std::size_t n = 0; n < x.size(); ++n) {
          const double env = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * fm * n / rate + phase);
          x[n] = env * gauss(rng);
        }
        lowpass_in_place(x, 1000.0 + 2000.0 * unit(rng), kCanonicalRate);
        break;
      }
      default: {
        const double base = unit(rng) < 0.5 ? 50.0 : 60.0;
        for (std::size_t n = 0; n < x.size(); ++n) {
          double v = 0.1 * gauss(rng);
          for (int k = 1; k <= 5; ++k) v += std::sin(2.0 * std::numbers::pi * base * k * n / rate) / k;
          x[n] = v;
        }
        break;
      }
    }
    double peak = 0.0;
    for (double v : x) peak = std::max(peak, std::abs(v));
    pool[i].sample_rate = kCanonicalRate;
    pool[i].samples.resize(length_samples);
    for (std::size_t n = 0; n < x.size(); ++n) {
      pool[i].samples[n] = static_cast<float>(peak > 0.0 ? 0.9 * x[n] / peak : 0.0);
    }
  }
  return pool;
}

std::vector<double> scale_noise_for_snr(std::span<const double> signal, std::span<const double> noise,
                                        double snr_db) {
  std::vector<double> out(noise.size(), 0.0);
  const double ps = power(signal);
  const double pn = power(noise);
  if (ps <= 0.0 || pn <= 0.0 || std::isinf(snr_db)) return out;
  const double gain = std::sqrt(ps / (pn * std::pow(10.0, snr_db / 10.0)));
  for (std::size_t i = 0; i < noise.size(); ++i) out[i] = gain * noise[i];
  return out;
}

std::vector<float> distort_signal(std::vector<double> x, int sample_rate, std::span<const AudioClip> noise_pool,
                                  std::span<const ImpulseResponse> ir_pool, const AugmentConfig& config,
                                  std::mt19937_64& rng) {
  if (noise_pool.empty()) throw Error(ErrorCode::kPoolEmpty, "noise pool is empty");
  if (ir_pool.empty()) throw Error(ErrorCode::kPoolEmpty, "impulse-response pool is empty");
  const std::size_t len = x.size();
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // impulse response, truncated to the segment length
  const ImpulseResponse& ir = ir_pool[static_cast<std::size_t>(unit(rng) * ir_pool.size()) % ir_pool.size()];
  if (!(ir.size() == 1 && ir[0] == 1.0)) {
    std::vector<double> y(len, 0.0);
    for (std::size_t n = 0; n < len; ++n) {
      const std::size_t kmax = std::min(ir.size(), n + 1);
      double acc = 0.0;
      for (std::size_t k = 0; k < kmax; ++k) acc += ir[k] * x[n - k];
      y[n] = acc;
    }
    x = std::move(y);
  }

  // optional band limit
  if (config.cutoff_hz_max > 0.0) {
    const double cutoff = config.cutoff_hz_min + unit(rng) * (config.cutoff_hz_max - config.cutoff_hz_min);
    lowpass_in_place(x, std::min(cutoff, 0.45 * sample_rate), sample_rate);
  }

  // background noise at a random SNR
  const AudioClip& noise = noise_pool[static_cast<std::size_t>(unit(rng) * noise_pool.size()) % noise_pool.size()];
  const double snr = std::isinf(config.snr_db_min) && config.snr_db_min == config.snr_db_max
                         ? config.snr_db_min
                         : config.snr_db_min + unit(rng) * (config.snr_db_max - config.snr_db_min);
  if (!std::isinf(snr) && !noise.samples.empty()) {
    const auto offset = static_cast<std::size_t>(unit(rng) * noise.size()) % noise.size();
    std::vector<double> crop(len);
    for (std::size_t n = 0; n < len; ++n) crop[n] = noise.samples[(offset + n) % noise.size()];
    const auto scaled = scale_noise_for_snr(x, crop, snr);
    for (std::size_t n = 0; n < len; ++n) x[n] += scaled[n];
  }

  // peak renormalisation
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  const double scale = peak > 1.0 ? 1.0 / peak : 1.0;

  std::vector<float> out(len);
  for (std::size_t n = 0; n < len; ++n) out[n] = std::clamp(static_cast<float>(x[n] * scale), -1.0f, 1.0f);
  return out;
}

Segment augment(const AudioClip& source, const Segment& segment, const SegmentationParams& params,
                std::span<const AudioClip> noise_pool, std::span<const ImpulseResponse> ir_pool,
                const AugmentConfig& config, std::mt19937_64& rng) {
  if (noise_pool.empty()) throw Error(ErrorCode::kPoolEmpty, "noise pool is empty");
  if (ir_pool.empty()) throw Error(ErrorCode::kPoolEmpty, "impulse-response pool is empty");
  config.validate();
  const std::size_t len = params.window_samples(source.sample_rate);
  if (segment.samples.size() != len) {
    throw Error(ErrorCode::kInvalidInput, "segment length does not match the window");
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // time offset, re-cut from the source with zeros beyond its edges
  const auto hop = static_cast<std::int64_t>(params.hop_samples(source.sample_rate));
  std::int64_t shift = 0;
  if (config.offset_range_s > 0.0) {
    const double u = (2.0 * unit(rng) - 1.0) * config.offset_range_s;
    shift = std::llround(u * source.sample_rate);
  }
  const std::int64_t start = static_cast<std::int64_t>(segment.index) * hop + shift;
  std::vector<double> x(len, 0.0);
  for (std::size_t n = 0; n < len; ++n) {
    const std::int64_t src = start + static_cast<std::int64_t>(n);
    if (src >= 0 && src < static_cast<std::int64_t>(source.size())) x[n] = source.samples[src];
  }

  Segment out;
  out.track_id = segment.track_id;
  out.index = segment.index;
  out.start_time = segment.start_time;
  out.samples = distort_signal(std::move(x), source.sample_rate, noise_pool, ir_pool, config, rng);
  return out;
}

NtXentResult ntxent_loss(std::span<const std::vector<double>> anchors,
                         std::span<const std::vector<double>> replicas, double temperature) {
  if (anchors.size() != replicas.size() || anchors.empty()) {
    throw Error(ErrorCode::kInvalidInput, "need N >= 1 anchor/replica pairs");
  }
  if (!(temperature > 0.0)) throw Error(ErrorCode::kInvalidConfig, "temperature must be positive");
  const std::size_t n = anchors.size();
  const std::size_t views = 2 * n;
  std::vector<const std::vector<double>*> z(views);
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = &anchors[i];
    z[n + i] = &replicas[i];
  }
  const std::size_t dim = anchors[0].size();
  for (const auto* v : z) {
    if (v->size() != dim) throw Error(ErrorCode::kInvalidInput, "embedding dimensions differ");
    const double norm = std::sqrt(dot(*v, *v));
    if (std::abs(norm - 1.0) > 1e-4) {
      throw Error(ErrorCode::kNonUnitInput, "embedding norm " + std::to_string(norm));
    }
  }
  auto partner = [&](std::size_t i) { return i < n ? i + n : i - n; };

  Matrix sim(views, views);
  for (std::size_t i = 0; i < views; ++i) {
    for (std::size_t j = i; j < views; ++j) sim(i, j) = sim(j, i) = dot(*z[i], *z[j]) / temperature;
  }

  // prob(i, j): softmax of row i over j != i
  Matrix prob(views, views);
  double loss = 0.0;
  for (std::size_t i = 0; i < views; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < views; ++j) {
      if (j != i) mx = std::max(mx, sim(i, j));
    }
    double denom = 0.0;
    for (std::size_t j = 0; j < views; ++j) {
      if (j != i) denom += std::exp(sim(i, j) - mx);
    }
    for (std::size_t j = 0; j < views; ++j) {
      if (j != i) prob(i, j) = std::exp(sim(i, j) - mx) / denom;
    }
    loss += -(sim(i, partner(i)) - mx - std::log(denom));
  }
  const double scale = 1.0 / static_cast<double>(views);
  loss *= scale;

  // dL/dz_k = 1/(2N tau) * (sum_{j != k} (P_kj + P_jk) z_j - 2 z_partner(k))
  NtXentResult result;
  result.loss = loss;
  result.grad_anchors.assign(n, std::vector<double>(dim, 0.0));
  result.grad_replicas.assign(n, std::vector<double>(dim, 0.0));
  const double coeff = scale / temperature;
  for (std::size_t k = 0; k < views; ++k) {
    std::vector<double>& g = k < n ? result.grad_anchors[k] : result.grad_replicas[k - n];
    for (std::size_t j = 0; j < views; ++j) {
      if (j == k) continue;
      double w = prob(k, j) + prob(j, k);
      if (j == partner(k)) w -= 2.0;
      const auto& zj = *z[j];
      for (std::size_t d = 0; d < dim; ++d) g[d] += coeff * w * zj[d];
    }
  }
  return result;
}

AdamState make_adam_state(const EncoderWeights& weights) {
  return AdamState{zeros_like(weights), zeros_like(weights), 0};
}

void adam_update(EncoderWeights& weights, const EncoderWeights& grad, AdamState& state,
                 const TrainConfig& config) {
  ++state.step;
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));

  std::vector<std::span<const double>> g;
  std::vector<std::span<double>> m, v;
  grad.for_each_tensor([&](const std::string&, const std::vector<std::size_t>&, std::span<const double> t) {
    g.push_back(t);
  });
  state.first_moment.for_each_tensor(
      [&](const std::string&, const std::vector<std::size_t>&, std::span<double> t) { m.push_back(t); });
  state.second_moment.for_each_tensor(
      [&](const std::string&, const std::vector<std::size_t>&, std::span<double> t) { v.push_back(t); });
  std::size_t ti = 0;
  weights.for_each_tensor([&](const std::string&, const std::vector<std::size_t>&, std::span<double> w) {
    auto gt = g[ti];
    auto mt = m[ti];
    auto vt = v[ti];
    ++ti;
    for (std::size_t i = 0; i < w.size(); ++i) {
      mt[i] = b1 * mt[i] + (1.0 - b1) * gt[i];
      vt[i] = b2 * vt[i] + (1.0 - b2) * gt[i] * gt[i];
      const double mhat = mt[i] / c1;
      const double vhat = vt[i] / c2;
      w[i] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.adam_eps);
    }
  });
}

TrainResult train(std::span<const AudioClip> train_clips, std::span<const AudioClip> noise_pool,
                  const FeatureConfig& features, const EncoderConfig& encoder, const SegmentationParams& params,
                  const AugmentConfig& augment_config, const TrainConfig& train_config) {
  train_config.validate();
  augment_config.validate();
  features.validate();
  params.validate(features.sample_rate);
  if (train_clips.empty()) throw Error(ErrorCode::kInvalidInput, "no training clips");
  if (to_micros(encoder.window_w) != to_micros(params.window_w)) {
    throw Error(ErrorCode::kInvalidConfig, "encoder window_w does not match the segmentation window");
  }
  if (encoder.mel_bins != features.mel_bins) {
    throw Error(ErrorCode::kInvalidConfig, "encoder mel_bins does not match the feature config");
  }
  const std::size_t frames = frames_for_window(params.window_w, features);
  if (std::find(encoder.adapter_inputs.begin(), encoder.adapter_inputs.end(), frames) ==
      encoder.adapter_inputs.end()) {
    throw Error(ErrorCode::kNoAdapterForT, "encoder has no adapter for T=" + std::to_string(frames));
  }

  std::vector<std::vector<Segment>> segments;
  std::vector<std::size_t> offsets{0};
  for (std::size_t c = 0; c < train_clips.size(); ++c) {
    segments.push_back(slice_segments(train_clips[c], params, static_cast<std::uint32_t>(c)));
    offsets.push_back(offsets.back() + segments.back().size());
  }
  const std::size_t total = offsets.back();
  const auto ir_pool = make_ir_pool(augment_config.ir_lengths, augment_config.rng_seed);
  const FeatureExtractor extractor(features);

  TrainResult result;
  result.weights = init_weights(encoder);
  AdamState adam = make_adam_state(result.weights);
  const std::size_t n = train_config.batch_pairs;

  for (std::size_t step = 0; step < train_config.steps; ++step) {
    auto pick_rng = make_rng({train_config.seed, step, 0x7069636bULL});
    std::uniform_int_distribution<std::size_t> pick(0, total - 1);
    std::vector<std::pair<std::size_t, std::size_t>> batch(n);
    for (auto& item : batch) {
      const std::size_t g = pick(pick_rng);
      const auto clip = static_cast<std::size_t>(std::upper_bound(offsets.begin(), offsets.end(), g) -
                                                 offsets.begin() - 1);
      item = {clip, g - offsets[clip]};
    }

    std::vector<MelSpectrogram> mels(2 * n);
    parallel_for(n, [&](std::size_t i) {
      const auto [clip, idx] = batch[i];
      const Segment& seg = segments[clip][idx];
      auto rng = make_rng({augment_config.rng_seed, train_config.seed, step, i});
      mels[i] = extractor.extract(seg);
      mels[n + i] = extractor.extract(
          augment(train_clips[clip], seg, params, noise_pool, ir_pool, augment_config, rng));
    });

    const auto fps = encode_batch(mels, result.weights);
    std::vector<std::vector<double>> anchors(n), replicas(n);
    for (std::size_t i = 0; i < n; ++i) {
      anchors[i] = fps[i].values;
      replicas[i] = fps[n + i].values;
    }
    NtXentResult loss = ntxent_loss(anchors, replicas, train_config.temperature);
    if (!std::isfinite(loss.loss)) {
      throw Error(ErrorCode::kDivergenceDetected, "loss is not finite at step " + std::to_string(step));
    }
    std::vector<std::vector<double>> upstream = std::move(loss.grad_anchors);
    for (auto& g : loss.grad_replicas) upstream.push_back(std::move(g));
    const EncoderWeights grad = forward_backward(mels, result.weights, upstream);
    adam_update(result.weights, grad, adam, train_config);
    result.log.push_back({step, loss.loss});
  }
  return result;
}

std::string format_train_log(std::span<const TrainLogEntry> log) {
  std::ostringstream out;
  out << "step,loss\n";
  char buf[64];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof buf, "%.17g", e.loss);
    out << e.step << ',' << buf << '\n';
  }
  return out.str();
}

std::string serialize_checkpoint(const EncoderWeights& weights) {
  ByteWriter out;
  out.bytes(std::string_view(kCheckpointMagic, 4));
  out.u16(kCheckpointVersion);
  const std::string cfg = nlohmann::json(weights.config).dump();
  out.u32(static_cast<std::uint32_t>(cfg.size()));
  out.bytes(cfg);
  std::uint32_t count = 0;
  weights.for_each_tensor([&](const std::string&, const std::vector<std::size_t>&, std::span<const double>) {
    ++count;
  });
  out.u32(count);
  weights.for_each_tensor(
      [&](const std::string& name, const std::vector<std::size_t>& dims, std::span<const double> t) {
        out.u16(static_cast<std::uint16_t>(name.size()));
        out.bytes(name);
        out.u8(static_cast<std::uint8_t>(dims.size()));
        for (std::size_t d : dims) out.u32(static_cast<std::uint32_t>(d));
        for (double v : t) out.f64(v);
      });
  return out.str();
}

EncoderWeights deserialize_checkpoint(std::string_view bytes) {
  auto corrupt = [](const std::string& m) { throw Error(ErrorCode::kCorruptCheckpoint, m); };
  ByteReader in(bytes, corrupt);
  if (in.bytes(4) != std::string_view(kCheckpointMagic, 4)) corrupt("bad magic");
  const std::uint16_t version = in.u16();
  if (version != kCheckpointVersion) corrupt("unsupported version " + std::to_string(version));
  const std::uint32_t cfg_len = in.u32();
  if (cfg_len > in.remaining()) corrupt("config length exceeds file");
  EncoderConfig config;
  try {
    config = nlohmann::json::parse(in.bytes(cfg_len)).get<EncoderConfig>();
    config.validate();
  } catch (const nlohmann::json::exception& e) {
    corrupt(std::string("config: ") + e.what());
  } catch (const Error& e) {
    corrupt(std::string("config: ") + e.what());
  }

  EncoderWeights weights = zeros_like(init_weights(config));
  std::uint32_t expected = 0;
  weights.for_each_tensor([&](const std::string&, const std::vector<std::size_t>&, std::span<const double>) {
    ++expected;
  });
  if (in.u32() != expected) corrupt("tensor count does not match config");
  weights.for_each_tensor([&](const std::string& name, const std::vector<std::size_t>& dims, std::span<double> t) {
    const std::uint16_t name_len = in.u16();
    if (in.bytes(name_len) != name) corrupt("expected tensor " + name);
    const std::uint8_t rank = in.u8();
    if (rank != dims.size()) corrupt("rank mismatch for " + name);
    for (std::size_t d : dims) {
      if (in.u32() != d) corrupt("shape mismatch for " + name);
    }
    for (double& v : t) {
      v = in.f64();
      if (!std::isfinite(v)) corrupt("non-finite value in " + name);
    }
  });
  if (in.remaining() != 0) corrupt("trailing bytes after last tensor");
  return weights;
}

void save_checkpoint(const EncoderWeights& weights, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(weights));
}

EncoderWeights load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_file(path));
}

}  // namespace segfp
