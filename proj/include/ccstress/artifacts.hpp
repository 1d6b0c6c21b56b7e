#pragma once

#include <filesystem>
#include <string>

#include "ccstress/fuzzer.hpp"
#include "ccstress/sim.hpp"

namespace ccstress {

/// Layout of a campaign output directory.
struct CampaignPaths {
    std::filesystem::path root;

    std::filesystem::path config() const { return root / "config.txt"; }
    std::filesystem::path checkpoints() const { return root / "checkpoints"; }
    std::filesystem::path series() const { return root / "series.csv"; }
    std::filesystem::path best_dir() const { return root / "best"; }
    std::filesystem::path best() const { return root / "best.json"; }
    std::filesystem::path summary() const { return root / "summary.txt"; }
};

/// Checkpoint + series.csv for the current generation. Called after every
/// generation so an interrupted run can resume from the last one written.
void write_generation(const CampaignPaths& paths, const CampaignConfig& cfg, const CampaignState& state);

/// config.txt, best trace per island (native JSON, plus MahiMahi for link
/// traces), best.json and summary.txt.
void write_final_artifacts(const CampaignPaths& paths, const CampaignConfig& cfg, const CampaignState& state);

std::string campaign_summary(const CampaignConfig& cfg, const CampaignState& state);

/// throughput.csv, delays.csv, queue.csv, events.csv and summary.txt.
void write_replay_artifacts(const std::filesystem::path& dir, const SimResult& result, std::int64_t window_us);

std::string replay_summary(const SimResult& result, std::int64_t window_us);

}  // namespace ccstress
