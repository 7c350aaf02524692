#pragma once

#include <cstddef>
#include <vector>

#include "segfp/audio_io.h"
#include "segfp/matrix.h"
#include "segfp/segmentation.h"

namespace segfp {

struct FeatureConfig {
  int sample_rate = kCanonicalRate;
  std::size_t fft_window = 1024;
  std::size_t stft_hop = 256;
  std::size_t mel_bins = 256;
  double fmin = 300.0;
  double fmax = 4000.0;
  double log_floor = 1e-10;

  // Throws InvalidBand for a bad frequency band, InvalidConfig otherwise.
  void validate() const;
  std::size_t freq_bins() const { return fft_window / 2 + 1; }
};

struct MelSpectrogram {
  Matrix values;  // mel_bins x T, natural-log power
  double window_w = 0.0;
  FeatureConfig config;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Center frequencies (Hz) of the mel filters, equally spaced in mel between
// fmin and fmax (the band edges themselves are not centers).
std::vector<double> mel_center_frequencies(const FeatureConfig& config);

// Centered STFT power |X|^2 with reflection padding and a periodic Hann
// window: (fft_window/2 + 1) x (floor(N / stft_hop) + 1).
Matrix stft_power(std::span<const float> samples, const FeatureConfig& config);
Matrix stft_power(const Segment& segment, const FeatureConfig& config);

// Peak-normalized triangular filters, mel_bins x (fft_window/2 + 1). A filter
// too narrow to cover any linear bin becomes an indicator on the nearest bin.
Matrix mel_filterbank(const FeatureConfig& config);

// Holds the filterbank so repeated extraction does not rebuild it. Safe to
// share across threads once constructed.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(FeatureConfig config);

  const FeatureConfig& config() const { return config_; }
  const Matrix& filterbank() const { return filterbank_; }

  MelSpectrogram extract(std::span<const float> samples) const;
  MelSpectrogram extract(const Segment& segment) const { return extract(segment.samples); }

 private:
  struct Band {
    std::size_t first = 0;
    std::size_t last = 0;  // exclusive
  };

  FeatureConfig config_;
  Matrix filterbank_;
  std::vector<Band> bands_;
};

// log(max(filterbank * stft_power, log_floor)).
MelSpectrogram mel_spectrogram(const Segment& segment, const FeatureConfig& config);

}  // namespace segfp
