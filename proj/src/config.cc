#include "segfp/config.h"

#include <algorithm>
#include <set>

#include "segfp/error.h"
#include "segfp/segmentation.h"
#include "segfp/serialization.h"
#include "segfp/util.h"

namespace segfp {
namespace {

void read_double(const nlohmann::json& j, const char* key, double& out) {
  if (j.contains(key)) out = json_to_double(j.at(key));
}

[[noreturn]] void config_error(const std::string& m) { throw Error(ErrorCode::kConfigError, m); }

}  // namespace

void to_json(nlohmann::json& j, const CorpusSpec& c) {
  j = {{"n_train", c.n_train},
       {"n_ref", c.n_ref},
       {"n_dist", c.n_dist},
       {"clip_len_s", c.clip_len_s},
       {"min_voices", c.min_voices},
       {"max_voices", c.max_voices},
       {"max_harmonics", c.max_harmonics},
       {"tempo_bpm_min", c.tempo_bpm_min},
       {"tempo_bpm_max", c.tempo_bpm_max},
       {"noise_floor", c.noise_floor},
       {"master_seed", c.master_seed}};
}

void from_json(const nlohmann::json& j, CorpusSpec& c) {
  read_optional(j, "n_train", c.n_train);
  read_optional(j, "n_ref", c.n_ref);
  read_optional(j, "n_dist", c.n_dist);
  read_double(j, "clip_len_s", c.clip_len_s);
  read_optional(j, "min_voices", c.min_voices);
  read_optional(j, "max_voices", c.max_voices);
  read_optional(j, "max_harmonics", c.max_harmonics);
  read_double(j, "tempo_bpm_min", c.tempo_bpm_min);
  read_double(j, "tempo_bpm_max", c.tempo_bpm_max);
  read_double(j, "noise_floor", c.noise_floor);
  read_optional(j, "master_seed", c.master_seed);
}

void to_json(nlohmann::json& j, const QuerySetSpec& c) {
  j = {{"queries_per_track", c.queries_per_track},
       {"query_len_s", c.query_len_s},
       {"max_jitter_s", c.max_jitter_s},
       {"distort", c.distort},
       {"augment", c.augment},
       {"noise_pool_size", c.noise_pool_size},
       {"noise_seed", c.noise_seed},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, QuerySetSpec& c) {
  read_optional(j, "queries_per_track", c.queries_per_track);
  read_double(j, "query_len_s", c.query_len_s);
  read_double(j, "max_jitter_s", c.max_jitter_s);
  read_optional(j, "distort", c.distort);
  read_optional(j, "augment", c.augment);
  read_optional(j, "noise_pool_size", c.noise_pool_size);
  read_optional(j, "noise_seed", c.noise_seed);
  read_optional(j, "seed", c.seed);
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  nlohmann::json training = c.training.train;
  training["augment"] = c.training.augment;
  training["noise_pool_size"] = c.training.noise_pool_size;
  training["noise_seed"] = c.training.noise_seed;
  j = {{"corpus", c.corpus},
       {"features", c.features},
       {"encoder", c.encoder},
       {"training", training},
       {"segmentation", {{"w_values", c.segmentation.w_values}, {"hop_h", c.segmentation.hop_h}}},
       {"evaluation",
        {{"l_values", c.evaluation.l_values},
         {"k_values", c.evaluation.k_values},
         {"k_nn", c.evaluation.k_nn},
         {"top_m", c.evaluation.top_m},
         {"query_set", c.evaluation.query_set}}},
       {"advisor", {{"replay_dir", c.advisor.replay_dir.string()}, {"models", c.advisor.models}}},
       {"paths", {{"workspace", c.workspace.string()}}},
       {"threads", c.threads}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  read_optional(j, "corpus", c.corpus);
  read_optional(j, "features", c.features);
  read_optional(j, "encoder", c.encoder);
  if (j.contains("training")) {
    const auto& t = j.at("training");
    t.get_to(c.training.train);
    read_optional(t, "augment", c.training.augment);
    read_optional(t, "noise_pool_size", c.training.noise_pool_size);
    read_optional(t, "noise_seed", c.training.noise_seed);
  }
  if (j.contains("segmentation")) {
    const auto& s = j.at("segmentation");
    read_optional(s, "w_values", c.segmentation.w_values);
    read_double(s, "hop_h", c.segmentation.hop_h);
  }
  if (j.contains("evaluation")) {
    const auto& e = j.at("evaluation");
    read_optional(e, "l_values", c.evaluation.l_values);
    read_optional(e, "k_values", c.evaluation.k_values);
    read_optional(e, "k_nn", c.evaluation.k_nn);
    read_optional(e, "top_m", c.evaluation.top_m);
    read_optional(e, "query_set", c.evaluation.query_set);
  }
  if (j.contains("advisor")) {
    const auto& a = j.at("advisor");
    if (a.contains("replay_dir")) c.advisor.replay_dir = a.at("replay_dir").get<std::string>();
    read_optional(a, "models", c.advisor.models);
  }
  if (j.contains("paths") && j.at("paths").contains("workspace")) {
    c.workspace = j.at("paths").at("workspace").get<std::string>();
  }
  read_optional(j, "threads", c.threads);
}

EncoderConfig ExperimentConfig::encoder_for(double window_w) const {
  EncoderConfig e = encoder;
  e.window_w = window_w;
  return e;
}

void ExperimentConfig::validate() const {
  try {
    corpus.validate();
    features.validate();
    encoder.validate();
    training.train.validate();
    training.augment.validate();
  } catch (const Error& e) {
    config_error(e.what());
  }
  if (encoder.mel_bins != features.mel_bins) {
    config_error("encoder.mel_bins (" + std::to_string(encoder.mel_bins) + ") != features.mel_bins (" +
                 std::to_string(features.mel_bins) + ")");
  }
  if (features.sample_rate != kCanonicalRate) config_error("features.sample_rate must be 8000");
  const auto& ws = segmentation.w_values;
  if (ws.empty()) config_error("segmentation.w_values is empty");
  for (double w : ws) {
    try {
      SegmentationParams{w, segmentation.hop_h}.validate(features.sample_rate);
    } catch (const Error& e) {
      config_error(e.what());
    }
    const std::size_t t = frames_for_window(w, features);
    if (std::find(encoder.adapter_inputs.begin(), encoder.adapter_inputs.end(), t) == encoder.adapter_inputs.end()) {
      config_error("encoder.adapter_inputs lacks T=" + std::to_string(t) + " needed for W=" + format_seconds(w));
    }
    if (!(training.augment.offset_range_s < w)) {
      config_error("training.augment.offset_range_s must be below every W");
    }
  }
  const auto& ev = evaluation;
  if (ev.l_values.empty()) config_error("evaluation.l_values is empty");
  const double min_w = *std::min_element(ws.begin(), ws.end());
  const double max_l = *std::max_element(ev.l_values.begin(), ev.l_values.end());
  for (double l : ev.l_values) {
    if (to_micros(l) < to_micros(min_w)) config_error("query length " + format_seconds(l) + " s is below every W");
  }
  if (ev.k_values.empty()) config_error("evaluation.k_values is empty");
  const std::size_t max_k = *std::max_element(ev.k_values.begin(), ev.k_values.end());
  for (std::size_t k : ev.k_values) {
    if (k != 1 && k != 3 && k != 10) config_error("evaluation.k_values may only contain 1, 3 and 10");
  }
  if (ev.k_nn < max_k) config_error("evaluation.k_nn must be >= the largest K");
  if (ev.top_m < max_k) config_error("evaluation.top_m must be >= the largest K");
  try {
    ev.query_set.validate(segmentation.hop_h);
  } catch (const Error& e) {
    config_error(e.what());
  }
  if (to_micros(ev.query_set.query_len_s) < to_micros(max_l)) {
    config_error("evaluation.query_set.query_len_s must cover the largest L");
  }
  if (ev.query_set.noise_seed == training.noise_seed) {
    config_error("query noise pool must be held out: noise seeds must differ");
  }
  if (to_micros(corpus.clip_len_s) <
      to_micros(ev.query_set.query_len_s) + 2 * to_micros(ev.query_set.max_jitter_s) + to_micros(segmentation.hop_h)) {
    config_error("corpus.clip_len_s is too short for the configured queries");
  }
  if (threads < 0) config_error("threads must be >= 0");
}

ExperimentConfig parse_config(std::string_view json_text) {
  ExperimentConfig cfg;
  try {
    nlohmann::json::parse(json_text).get_to(cfg);
  } catch (const nlohmann::json::exception& e) {
    config_error(e.what());
  } catch (const Error& e) {
    config_error(e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    config_error(e.what());
  }
  return parse_config(text);
}

}  // namespace segfp
