#pragma once

#include <json.hpp>

#include "segfp/encoder.h"
#include "segfp/features.h"
#include "segfp/training.h"

namespace segfp {

// JSON forms used by the experiment config file and the checkpoint header.
// Missing keys keep their defaults.
void to_json(nlohmann::json& j, const FeatureConfig& c);
void from_json(const nlohmann::json& j, FeatureConfig& c);
void to_json(nlohmann::json& j, const EncoderConfig& c);
void from_json(const nlohmann::json& j, EncoderConfig& c);
void to_json(nlohmann::json& j, const AugmentConfig& c);
void from_json(const nlohmann::json& j, AugmentConfig& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

// Reads key into out when present. Infinity is written as the string "inf".
template <typename T>
void read_optional(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}
double json_to_double(const nlohmann::json& j);
nlohmann::json double_to_json(double v);

}  // namespace segfp
