#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace ccstress {

enum class TraceMode { Link, Traffic };

std::string_view to_string(TraceMode mode);
TraceMode trace_mode_from_string(std::string_view s);

/// One recorded bisection step of the packet distribution generator. Nodes are
/// stored in pre-order; only nodes with two or more packets split, so leaves
/// (zero or one packet, or unsplittable intervals) are implicit.
struct SplitNode {
    std::int64_t start_us = 0;
    std::int64_t end_us = 0;
    std::int64_t num = 0;
    std::int64_t t_split_us = 0;
    std::int64_t num_left = 0;
    bool band_checked = false;  ///< interval >= kAgg and the rate band was enforced
    bool forced = false;        ///< retry budget exhausted, midpoint split used

    bool operator==(const SplitNode&) const = default;
};

using SplitTree = std::vector<SplitNode>;

/// A sorted schedule of packet timestamps. In Link mode each timestamp is a
/// delivery opportunity at the bottleneck; in Traffic mode each timestamp
/// injects one cross-traffic packet at the gateway.
struct PacketTrace {
    TraceMode mode = TraceMode::Link;
    std::int64_t duration_us = 0;
    std::int64_t packet_budget = 0;
    std::vector<std::int64_t> timestamps_us;
    std::optional<SplitTree> split_tree;

    std::size_t size() const { return timestamps_us.size(); }

    /// Equality ignores the split tree, which is generation metadata.
    bool operator==(const PacketTrace& o) const
    {
        return mode == o.mode && duration_us == o.duration_us && packet_budget == o.packet_budget &&
               timestamps_us == o.timestamps_us;
    }
};

/// Checks sortedness, bounds and the per-mode count rule. Returns an empty
/// string when valid, otherwise a description of the first violation.
std::string validate(const PacketTrace& trace);

}  // namespace ccstress
