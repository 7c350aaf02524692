#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "segfp/features.h"
#include "segfp/matrix.h"

namespace segfp {

struct EncoderConfig {
  std::size_t mel_bins = 256;
  std::size_t adapter_t0 = 32;
  std::size_t fingerprint_dim = 128;
  std::size_t num_blocks = 8;
  std::size_t base_channels = 16;
  std::vector<std::size_t> time_strides{2, 2, 2, 2, 2, 1, 1, 1};
  std::vector<std::size_t> freq_strides{2, 2, 2, 2, 2, 2, 2, 2};
  // Frame counts T_in that get their own adapter.
  std::vector<std::size_t> adapter_inputs{16, 32, 63};
  // Segment length (seconds) the weights are trained for; checked against
  // the database header at query time.
  double window_w = 1.0;
  std::uint64_t seed = 0;

  // Throws InvalidConfig when the stride schedules do not collapse
  // (mel_bins, adapter_t0) to (1, 1) or any size is zero.
  void validate() const;

  // Channel width of block k: doubles every two blocks, capped at 8x base.
  std::size_t block_channels(std::size_t k) const;

  bool operator==(const EncoderConfig&) const = default;
};

struct AdapterWeights {
  Matrix weight;  // T_in x T0
  std::vector<double> bias;

  bool operator==(const AdapterWeights&) const = default;
};

struct BlockWeights {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::vector<double> tconv_weight;  // out x in x 3, kernel along time
  std::vector<double> tconv_bias;
  std::vector<double> fconv_weight;  // out x out x 3, kernel along frequency
  std::vector<double> fconv_bias;
  std::vector<double> norm_gain;  // per channel
  std::vector<double> norm_offset;

  bool operator==(const BlockWeights&) const = default;
};

// Also used as the gradient container (same shapes).
struct EncoderWeights {
  EncoderConfig config;
  std::map<std::size_t, AdapterWeights> adapters;  // keyed by T_in
  std::vector<BlockWeights> blocks;
  Matrix projection;  // final channels x d
  std::vector<double> projection_bias;

  // Visits every tensor in a fixed order with a stable name and its shape.
  void for_each_tensor(
      const std::function<void(const std::string&, const std::vector<std::size_t>&, std::span<double>)>& fn);
  void for_each_tensor(const std::function<void(const std::string&, const std::vector<std::size_t>&,
                                                std::span<const double>)>& fn) const;

  std::size_t parameter_count() const;
  bool operator==(const EncoderWeights&) const = default;
};

struct Fingerprint {
  std::vector<double> values;  // unit norm
};

// Kaiming-uniform weights, bound sqrt(6 / fan_in); biases and offsets 0,
// gains 1. Deterministic in (config, config.seed).
EncoderWeights init_weights(const EncoderConfig& config);

// Same shapes as weights, all zero.
EncoderWeights zeros_like(const EncoderWeights& weights);

// Maps every mel row through ELU(row * A + b) with the adapter chosen by the
// number of frames. Output is mel_bins x T0.
Matrix adapter_forward(const Matrix& mel, const EncoderWeights& weights);
Matrix adapter_forward(const MelSpectrogram& mel, const EncoderWeights& weights);

Fingerprint encode(const Matrix& mel, const EncoderWeights& weights);
Fingerprint encode(const MelSpectrogram& mel, const EncoderWeights& weights);

std::vector<Fingerprint> encode_batch(std::span<const MelSpectrogram> mels, const EncoderWeights& weights);

// Gradient of sum_i <upstream_i, encode(mel_i)> with respect to every weight.
// Per-item gradients are summed in item order, so the result does not
// depend on the thread count.
EncoderWeights forward_backward(std::span<const MelSpectrogram> mels, const EncoderWeights& weights,
                                std::span<const std::vector<double>> upstream);

// Adapter frame count expected for a segment of window_w seconds.
std::size_t frames_for_window(double window_w, const FeatureConfig& features);

}  // namespace segfp
