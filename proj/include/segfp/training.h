#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "segfp/audio_io.h"
#include "segfp/encoder.h"
#include "segfp/features.h"
#include "segfp/segmentation.h"

namespace segfp {

struct AugmentConfig {
  double snr_db_min = 0.0;
  double snr_db_max = 10.0;  // +inf on both ends disables noise
  double offset_range_s = 0.25;
  std::vector<std::size_t> ir_lengths{1, 200, 400, 800};
  double cutoff_hz_min = 0.0;  // 0 disables the band-limit stage
  double cutoff_hz_max = 0.0;
  std::uint64_t rng_seed = 0;

  void validate() const;
  bool operator==(const AugmentConfig&) const = default;
};

struct TrainConfig {
  std::size_t batch_pairs = 16;
  double learning_rate = 1e-3;
  double temperature = 0.05;
  std::size_t steps = 500;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

using ImpulseResponse = std::vector<double>;

// Exponentially decaying white noise (60 dB over the length), first tap made
// positive, unit energy. Length 1 is the identity response.
ImpulseResponse make_impulse_response(std::size_t length, std::mt19937_64& rng);
std::vector<ImpulseResponse> make_ir_pool(std::span<const std::size_t> lengths, std::uint64_t seed);

// Background-noise clips of mixed colour (white, low-passed, amplitude
// modulated, hum). Different seeds give unrelated pools.
std::vector<AudioClip> make_noise_pool(std::size_t count, std::size_t length_samples, std::uint64_t seed);

// Noise scaled so that power(signal) / power(result) = 10^(snr_db / 10).
// Returns zeros when either input is silent.
std::vector<double> scale_noise_for_snr(std::span<const double> signal, std::span<const double> noise,
                                        double snr_db);

// Impulse response, optional band limit, background noise at a random SNR,
// then peak renormalisation to <= 1. Output has the input's length.
std::vector<float> distort_signal(std::vector<double> x, int sample_rate, std::span<const AudioClip> noise_pool,
                                  std::span<const ImpulseResponse> ir_pool, const AugmentConfig& config,
                                  std::mt19937_64& rng);

// Distorted replica of `segment` (cut from `source` with `params`): time
// offset, impulse response, optional band limit, background noise, then
// peak renormalisation to <= 1. Deterministic given rng.
Segment augment(const AudioClip& source, const Segment& segment, const SegmentationParams& params,
                std::span<const AudioClip> noise_pool, std::span<const ImpulseResponse> ir_pool,
                const AugmentConfig& config, std::mt19937_64& rng);

struct NtXentResult {
  double loss = 0.0;
  std::vector<std::vector<double>> grad_anchors;
  std::vector<std::vector<double>> grad_replicas;
};

// Normalised-temperature cross entropy over 2N views; view i's positive is
// its partner, every other view is a negative. Inputs must be unit norm.
NtXentResult ntxent_loss(std::span<const std::vector<double>> anchors,
                         std::span<const std::vector<double>> replicas, double temperature);

struct AdamState {
  EncoderWeights first_moment;
  EncoderWeights second_moment;
  std::size_t step = 0;
};

AdamState make_adam_state(const EncoderWeights& weights);
void adam_update(EncoderWeights& weights, const EncoderWeights& grad, AdamState& state,
                 const TrainConfig& config);

struct TrainLogEntry {
  std::size_t step = 0;
  double loss = 0.0;
};

struct TrainResult {
  EncoderWeights weights;
  std::vector<TrainLogEntry> log;
};

// Contrastive training on clean segments (anchors) against augmented
// replicas. Segments are drawn uniformly with replacement from all clips.
TrainResult train(std::span<const AudioClip> train_clips, std::span<const AudioClip> noise_pool,
                  const FeatureConfig& features, const EncoderConfig& encoder, const SegmentationParams& params,
                  const AugmentConfig& augment_config, const TrainConfig& train_config);

// CSV with header "step,loss".
std::string format_train_log(std::span<const TrainLogEntry> log);

// Binary checkpoint: "NFPW", u16 version, u32 length + JSON encoder config,
// u32 tensor count, then per tensor u16 name length, name, u8 rank, u32 dims,
// little-endian float-64 values.
std::string serialize_checkpoint(const EncoderWeights& weights);
EncoderWeights deserialize_checkpoint(std::string_view bytes);
void save_checkpoint(const EncoderWeights& weights, const std::filesystem::path& path);
EncoderWeights load_checkpoint(const std::filesystem::path& path);

}  // namespace segfp
