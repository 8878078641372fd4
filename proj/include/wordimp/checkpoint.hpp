#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "wordimp/pipeline.hpp"

namespace wordimp {

inline constexpr int kCheckpointVersion = 1;

/// Model plus free-form provenance (training seed, split fractions, ...).
struct Checkpoint {
  ImportanceModel model;
  nlohmann::json metadata = nlohmann::json::object();
};

/// Versioned JSON document: model config, feature configuration, speaker
/// statistics, input scaling and every tensor (shape + row-major values).
nlohmann::json checkpoint_to_json(const ImportanceModel& model, const nlohmann::json& metadata);

/// Throws DataError on a wrong format tag or version, or a tensor whose
/// name or shape disagrees with the stored config.
Checkpoint checkpoint_from_json(const nlohmann::json& doc);

void save_checkpoint(const std::filesystem::path& path, const ImportanceModel& model,
                     const nlohmann::json& metadata = nlohmann::json::object());
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace wordimp
