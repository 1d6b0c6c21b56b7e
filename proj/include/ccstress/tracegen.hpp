#pragma once

#include <cstdint>
#include <vector>

#include "ccstress/rng.hpp"
#include "ccstress/trace.hpp"

namespace ccstress {

struct GenParams {
    std::int64_t k_agg_us = 50'000;  ///< below this interval length the rate band is not checked
    double rate_low = 0.5;
    double rate_high = 2.0;
    int max_split_retries = 64;
    std::uint64_t rng_seed = 1;
    bool record_split_tree = false;

    void check() const;
};

/// Options for a single distribution call.
struct DistOptions {
    bool rate_band = true;              ///< false for traffic traces: band check always passes
    SplitTree* tree = nullptr;          ///< when set, every split is appended in pre-order
};

/// Places `num` packets in [start_us, end_us) by recursive bisection. At every
/// node whose interval is at least k_agg_us, both halves' average rates must lie
/// within [rate_low, rate_high] times the node's rate; a node that rejects
/// max_split_retries samples splits at the midpoint with floor(num/2) on the left.
/// Throws std::invalid_argument when start_us >= end_us or num < 0.
std::vector<std::int64_t> dist_packets(std::int64_t num, std::int64_t start_us, std::int64_t end_us,
                                       const GenParams& params, Rng& rng, DistOptions options = {});

/// Rebuilds the timestamps that a recorded split tree describes.
std::vector<std::int64_t> replay_split_tree(const SplitTree& tree, std::int64_t num,
                                            std::int64_t start_us, std::int64_t end_us);

PacketTrace gen_initial_link_trace(double avg_rate_pps, std::int64_t duration_us,
                                   const GenParams& params, Rng& rng);

PacketTrace gen_initial_traffic_trace(std::int64_t max_packets, std::int64_t duration_us,
                                      const GenParams& params, Rng& rng);

/// Redistributes the packets on one side of a uniformly drawn split time.
PacketTrace mutate_link(const PacketTrace& trace, const GenParams& params, Rng& rng);

/// Like mutate_link, but the chosen segment's packet count is redrawn in
/// [0, budget - packets outside the segment] and placed without rate band.
PacketTrace mutate_traffic(const PacketTrace& trace, const GenParams& params, Rng& rng);

/// Count-fraction cut on the first parent, time cut on the second.
PacketTrace crossover_traffic(const PacketTrace& a, const PacketTrace& b, Rng& rng);

/// Deterministic core of crossover_traffic: `first` contributes its first
/// ceil(fraction * |first|) timestamps, `second` everything strictly later
/// than the last of those.
PacketTrace crossover_traffic_at(const PacketTrace& first, const PacketTrace& second, double fraction);

/// Gaussian smoothing of the inter-arrival gaps. Count, first and last
/// timestamp are kept; sigma_us == 0 returns the trace unchanged.
PacketTrace anneal(const PacketTrace& trace, double sigma_us);

}  // namespace ccstress
