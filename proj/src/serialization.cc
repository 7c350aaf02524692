#include "segfp/serialization.h"

#include <cmath>
#include <limits>

namespace segfp {

double json_to_double(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw nlohmann::json::type_error::create(302, "expected number or \"inf\", got \"" + s + "\"", &j);
  }
  return j.get<double>();
}

nlohmann::json double_to_json(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

namespace {
void read_double(const nlohmann::json& j, const char* key, double& out) {
  if (j.contains(key)) out = json_to_double(j.at(key));
}
}  // namespace

void to_json(nlohmann::json& j, const FeatureConfig& c) {
  j = {{"sample_rate", c.sample_rate}, {"fft_window", c.fft_window}, {"stft_hop", c.stft_hop},
       {"mel_bins", c.mel_bins},       {"fmin", c.fmin},             {"fmax", c.fmax},
       {"log_floor", c.log_floor}};
}

void from_json(const nlohmann::json& j, FeatureConfig& c) {
  read_optional(j, "sample_rate", c.sample_rate);
  read_optional(j, "fft_window", c.fft_window);
  read_optional(j, "stft_hop", c.stft_hop);
  read_optional(j, "mel_bins", c.mel_bins);
  read_double(j, "fmin", c.fmin);
  read_double(j, "fmax", c.fmax);
  read_double(j, "log_floor", c.log_floor);
}

void to_json(nlohmann::json& j, const EncoderConfig& c) {
  j = {{"mel_bins", c.mel_bins},
       {"adapter_t0", c.adapter_t0},
       {"fingerprint_dim", c.fingerprint_dim},
       {"num_blocks", c.num_blocks},
       {"base_channels", c.base_channels},
       {"time_strides", c.time_strides},
       {"freq_strides", c.freq_strides},
       {"adapter_inputs", c.adapter_inputs},
       {"window_w", c.window_w},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, EncoderConfig& c) {
  read_optional(j, "mel_bins", c.mel_bins);
  read_optional(j, "adapter_t0", c.adapter_t0);
  read_optional(j, "fingerprint_dim", c.fingerprint_dim);
  read_optional(j, "num_blocks", c.num_blocks);
  read_optional(j, "base_channels", c.base_channels);
  read_optional(j, "time_strides", c.time_strides);
  read_optional(j, "freq_strides", c.freq_strides);
  read_optional(j, "adapter_inputs", c.adapter_inputs);
  read_double(j, "window_w", c.window_w);
  read_optional(j, "seed", c.seed);
}

void to_json(nlohmann::json& j, const AugmentConfig& c) {
  j = {{"snr_db_min", double_to_json(c.snr_db_min)},
       {"snr_db_max", double_to_json(c.snr_db_max)},
       {"offset_range_s", c.offset_range_s},
       {"ir_lengths", c.ir_lengths},
       {"cutoff_hz_min", c.cutoff_hz_min},
       {"cutoff_hz_max", c.cutoff_hz_max},
       {"rng_seed", c.rng_seed}};
}

void from_json(const nlohmann::json& j, AugmentConfig& c) {
  read_double(j, "snr_db_min", c.snr_db_min);
  read_double(j, "snr_db_max", c.snr_db_max);
  read_double(j, "offset_range_s", c.offset_range_s);
  read_optional(j, "ir_lengths", c.ir_lengths);
  read_double(j, "cutoff_hz_min", c.cutoff_hz_min);
  read_double(j, "cutoff_hz_max", c.cutoff_hz_max);
  read_optional(j, "rng_seed", c.rng_seed);
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"batch_pairs", c.batch_pairs}, {"learning_rate", c.learning_rate}, {"temperature", c.temperature},
       {"steps", c.steps},             {"adam_beta1", c.adam_beta1},       {"adam_beta2", c.adam_beta2},
       {"adam_eps", c.adam_eps},       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  read_optional(j, "batch_pairs", c.batch_pairs);
  read_double(j, "learning_rate", c.learning_rate);
  read_double(j, "temperature", c.temperature);
  read_optional(j, "steps", c.steps);
  read_double(j, "adam_beta1", c.adam_beta1);
  read_double(j, "adam_beta2", c.adam_beta2);
  read_double(j, "adam_eps", c.adam_eps);
  read_optional(j, "seed", c.seed);
}

}  // namespace segfp
