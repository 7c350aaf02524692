#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "segfp/encoder.h"
#include "segfp/eval_harness.h"
#include "segfp/features.h"
#include "segfp/training.h"

namespace segfp {

struct SegmentationSection {
  std::vector<double> w_values{0.5, 1.0, 2.0};
  double hop_h = 0.5;
};

struct TrainingSection {
  TrainConfig train;
  AugmentConfig augment;
  std::size_t noise_pool_size = 8;
  std::uint64_t noise_seed = 101;
};

struct EvaluationSection {
  std::vector<double> l_values{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::vector<std::size_t> k_values{1, 3, 10};
  std::size_t k_nn = 20;
  std::size_t top_m = 10;
  QuerySetSpec query_set;
};

struct AdvisorSection {
  std::filesystem::path replay_dir = "data/replays";
  std::vector<std::string> models{"gpt-5-mini", "gemini-2.5-flash", "claude-sonnet-4.5"};
};

// Everything a run needs; every random stream is seeded from here.
struct ExperimentConfig {
  CorpusSpec corpus;
  FeatureConfig features;
  EncoderConfig encoder;
  TrainingSection training;
  SegmentationSection segmentation;
  EvaluationSection evaluation;
  AdvisorSection advisor;
  std::filesystem::path workspace = "workspace";
  int threads = 0;

  // Cross-field checks; throws ConfigError naming the first problem.
  void validate() const;
  // Encoder settings for a model trained on windows of w seconds.
  EncoderConfig encoder_for(double window_w) const;
};

void to_json(nlohmann::json& j, const CorpusSpec& c);
void from_json(const nlohmann::json& j, CorpusSpec& c);
void to_json(nlohmann::json& j, const QuerySetSpec& c);
void from_json(const nlohmann::json& j, QuerySetSpec& c);
void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

// Parses and validates; any failure is reported as ConfigError.
ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace segfp
