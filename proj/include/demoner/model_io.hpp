#pragma once

// JSON persistence for the feature-similarity predictor and the tagger.
// Doubles are written with round-trip precision, so a loaded model predicts
// bit-identically.

#include <filesystem>
#include <string>

#include <json.hpp>

#include "demoner/featsim.hpp"
#include "demoner/tagger.hpp"

namespace demoner {

inline constexpr int kModelFormatVersion = 1;

nlohmann::json to_json(const FeatureSimilarityModel& model);
FeatureSimilarityModel featsim_from_json(const nlohmann::json& j);

// Weights are stored as [index, value] pairs for the nonzero entries.
nlohmann::json to_json(const TrainedTagger& tagger);
TrainedTagger tagger_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TaggerConfig& config);
TaggerConfig tagger_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TransitionMatrix& tm);
TransitionMatrix transitions_from_json(const nlohmann::json& j);

// File helpers; read errors and malformed JSON raise DataError.
nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

void save_featsim(const std::filesystem::path& path, const FeatureSimilarityModel& model);
FeatureSimilarityModel load_featsim(const std::filesystem::path& path);
void save_tagger(const std::filesystem::path& path, const TrainedTagger& tagger);
TrainedTagger load_tagger(const std::filesystem::path& path);

}  // namespace demoner
