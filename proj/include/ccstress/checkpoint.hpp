#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "ccstress/fuzzer.hpp"

namespace ccstress {

/// Unreadable or inconsistent checkpoint data.
class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Checkpoint {
    CampaignConfig config;
    CampaignState state;
};

nlohmann::json checkpoint_to_json(const CampaignConfig& cfg, const CampaignState& state);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

std::string checkpoint_file_name(int generation);

/// Writes <dir>/gen_NNNNNN.json through a temporary file and removes all but
/// the newest cfg.keep_checkpoints files (0 keeps everything). Returns the
/// written path.
std::filesystem::path write_checkpoint(const std::filesystem::path& dir, const CampaignConfig& cfg,
                                       const CampaignState& state);

/// Highest-numbered checkpoint in `dir`, if any.
std::optional<std::filesystem::path> latest_checkpoint(const std::filesystem::path& dir);

/// Loads a checkpoint file, or the latest one when `path` is a directory.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ccstress
