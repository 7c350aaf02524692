#include "segfp/features.h"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <numbers>
#include <string>

#include "segfp/error.h"

namespace segfp {
namespace {

// FFTW planning is not thread-safe; execution of an existing plan on new
// arrays is. Plans are created once per size and never destroyed.
fftw_plan r2c_plan(std::size_t n) {
  static std::mutex mu;
  static std::map<std::size_t, fftw_plan> plans;
  std::lock_guard lock(mu);
  auto it = plans.find(n);
  if (it != plans.end()) return it->second;
  std::vector<double> in(n);
  std::vector<fftw_complex> out(n / 2 + 1);
  fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), out.data(),
                                        FFTW_ESTIMATE | FFTW_UNALIGNED);
  plans.emplace(n, plan);
  return plan;
}

// numpy-style "reflect" index (edge sample not repeated).
std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  i %= period;
  if (i < 0) i += period;
  if (i >= static_cast<std::ptrdiff_t>(n)) i = period - i;
  return static_cast<std::size_t>(i);
}

}  // namespace

void FeatureConfig::validate() const {
  if (sample_rate <= 0) throw Error(ErrorCode::kInvalidConfig, "sample rate must be positive");
  if (fft_window < 2 || stft_hop == 0 || stft_hop > fft_window) {
    throw Error(ErrorCode::kInvalidConfig, "need 0 < stft_hop <= fft_window");
  }
  if (mel_bins == 0) throw Error(ErrorCode::kInvalidConfig, "mel_bins must be positive");
  if (!(log_floor > 0.0)) throw Error(ErrorCode::kInvalidConfig, "log_floor must be positive");
  if (!(fmin >= 0.0) || !(fmin < fmax) || fmax > sample_rate / 2.0) {
    throw Error(ErrorCode::kInvalidBand, "need 0 <= fmin < fmax <= f/2");
  }
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {

std::vector<double> mel_edges(const FeatureConfig& config) {
  const double lo = hz_to_mel(config.fmin);
  const double hi = hz_to_mel(config.fmax);
  const std::size_t n = config.mel_bins + 2;
  std::vector<double> hz(n);
  for (std::size_t i = 0; i < n; ++i) {
    hz[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1));
  }
  return hz;
}

}  // namespace

std::vector<double> mel_center_frequencies(const FeatureConfig& config) {
  config.validate();
  auto edges = mel_edges(config);
  return {edges.begin() + 1, edges.end() - 1};
}

Matrix stft_power(std::span<const float> samples, const FeatureConfig& config) {
  config.validate();
  const std::size_t n = samples.size();
  if (n == 0) throw Error(ErrorCode::kEmptyAudio, "stft of empty segment");
  const std::size_t nfft = config.fft_window;
  const std::size_t hop = config.stft_hop;
  const std::size_t frames = n / hop + 1;
  const std::size_t bins = config.freq_bins();
  const auto pad = static_cast<std::ptrdiff_t>(nfft / 2);

  std::vector<double> window(nfft);
  for (std::size_t i = 0; i < nfft; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(nfft));
  }

  fftw_plan plan = r2c_plan(nfft);
  std::vector<double> frame(nfft);
  std::vector<fftw_complex> spectrum(bins);
  Matrix power(bins, frames);
  for (std::size_t t = 0; t < frames; ++t) {
    const auto start = static_cast<std::ptrdiff_t>(t * hop) - pad;
    for (std::size_t i = 0; i < nfft; ++i) {
      frame[i] = window[i] * samples[reflect_index(start + static_cast<std::ptrdiff_t>(i), n)];
    }
    fftw_execute_dft_r2c(plan, frame.data(), spectrum.data());
    for (std::size_t k = 0; k < bins; ++k) {
      power(k, t) = spectrum[k][0] * spectrum[k][0] + spectrum[k][1] * spectrum[k][1];
    }
  }
  return power;
}

Matrix stft_power(const Segment& segment, const FeatureConfig& config) {
  return stft_power(std::span<const float>(segment.samples), config);
}

Matrix mel_filterbank(const FeatureConfig& config) {
  config.validate();
  const std::size_t bins = config.freq_bins();
  const double bin_hz = static_cast<double>(config.sample_rate) / static_cast<double>(config.fft_window);
  const auto edges = mel_edges(config);

  Matrix fb(config.mel_bins, bins);
  for (std::size_t m = 0; m < config.mel_bins; ++m) {
    const double lo = edges[m];
    const double center = edges[m + 1];
    const double hi = edges[m + 2];
    double peak = 0.0;
    for (std::size_t k = 0; k < bins; ++k) {
      const double g = static_cast<double>(k) * bin_hz;
      const double w = std::max(0.0, std::min((g - lo) / (center - lo), (hi - g) / (hi - center)));
      fb(m, k) = w;
      peak = std::max(peak, w);
    }
    if (peak > 0.0) {
      for (std::size_t k = 0; k < bins; ++k) fb(m, k) /= peak;
    } else {
      const auto nearest = static_cast<std::size_t>(std::llround(center / bin_hz));
      fb(m, std::min(nearest, bins - 1)) = 1.0;
    }
  }
  return fb;
}

FeatureExtractor::FeatureExtractor(FeatureConfig config)
    : config_(config), filterbank_(mel_filterbank(config)) {
  bands_.resize(filterbank_.rows);
  for (std::size_t m = 0; m < filterbank_.rows; ++m) {
    auto row = filterbank_.row(m);
    std::size_t first = 0;
    while (first < row.size() && row[first] == 0.0) ++first;
    std::size_t last = row.size();
    while (last > first && row[last - 1] == 0.0) --last;
    bands_[m] = {first, last};
  }
}

MelSpectrogram FeatureExtractor::extract(std::span<const float> samples) const {
  const Matrix power = stft_power(samples, config_);
  const double floor = config_.log_floor;
  MelSpectrogram mel;
  mel.config = config_;
  mel.window_w = static_cast<double>(samples.size()) / config_.sample_rate;
  mel.values = Matrix(config_.mel_bins, power.cols);
  for (std::size_t m = 0; m < config_.mel_bins; ++m) {
    const auto weights = filterbank_.row(m);
    const Band band = bands_[m];
    for (std::size_t t = 0; t < power.cols; ++t) {
      double acc = 0.0;
      for (std::size_t k = band.first; k < band.last; ++k) acc += weights[k] * power(k, t);
      mel.values(m, t) = std::log(std::max(acc, floor));
    }
  }
  return mel;
}

MelSpectrogram mel_spectrogram(const Segment& segment, const FeatureConfig& config) {
  return FeatureExtractor(config).extract(segment);
}

}  // namespace segfp
