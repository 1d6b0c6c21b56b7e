#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ccstress/cca.hpp"
#include "ccstress/event_log.hpp"
#include "ccstress/tcp.hpp"
#include "ccstress/trace.hpp"

namespace ccstress {

enum class FuzzMode { LinkFuzz, TrafficFuzz };

std::string_view to_string(FuzzMode mode);
FuzzMode fuzz_mode_from_string(std::string_view s);
TraceMode trace_mode_for(FuzzMode mode);

struct SimConfig {
    FuzzMode mode = FuzzMode::TrafficFuzz;
    double bottleneck_rate_pps = 1000.0;  ///< TrafficFuzz only
    std::int64_t prop_delay_us = 20'000;
    std::int64_t access_delay_us = 100;  ///< sender to gateway; cross traffic enters the gateway directly
    std::int64_t queue_capacity_pkts = 50;
    std::int64_t duration_us = 30'000'000;
    std::int64_t mtu_bytes = 1500;
    CcaConfig cca;
    TcpConfig tcp;
    std::int64_t sender_start_us = 0;
    std::uint64_t rng_seed = 1;
    std::int64_t throughput_window_us = 500'000;
    std::int64_t queue_sample_us = 10'000;
    bool record_events = false;

    void check() const;
    bool operator==(const SimConfig&) const = default;
};

struct Delivery {
    std::int64_t arrival_us = 0;
    std::int64_t delay_us = 0;  ///< one-way, sender to sink
    std::int64_t seq = 0;
    bool fresh = true;          ///< false for a duplicate copy of an already received segment
};

struct QueueSample {
    std::int64_t time_us = 0;
    std::int64_t occupancy_pkts = 0;
};

struct FlowStats {
    std::int64_t sent = 0;
    std::int64_t delivered = 0;
    std::int64_t dropped = 0;
    std::int64_t queued_at_end = 0;
    std::int64_t on_wire_at_end = 0;

    std::int64_t in_flight_at_end() const { return queued_at_end + on_wire_at_end; }
};

struct SimResult {
    std::int64_t duration_us = 0;
    std::int64_t mtu_bytes = 0;
    double capacity_bps = 0.0;
    std::string cca_name;
    FlowStats sender;
    FlowStats cross;
    std::int64_t goodput_segments = 0;
    TcpCounters tcp;
    std::vector<Delivery> deliveries;  ///< sender flow, in arrival order
    std::vector<QueueSample> queue_series;
    std::int64_t max_queue_occupancy = 0;
    std::vector<LogEvent> events;

    /// Goodput over the whole run as a fraction of bottleneck capacity.
    double utilization() const;
    /// Stable 64-bit fingerprint of counters and series.
    std::uint64_t digest() const;
};

/// Runs the dumbbell: one bulk TCP flow plus the trace, for config.duration_us.
/// Throws std::invalid_argument on a mode or duration mismatch.
SimResult run_sim(const SimConfig& config, const PacketTrace& trace);
SimResult run_sim(const SimConfig& config, const PacketTrace& trace, std::unique_ptr<Cca> cca);

/// Tumbling-window goodput of the sender flow in Mbps. The last window may be
/// shorter than window_us and is normalized by its own length.
std::vector<double> windowed_throughput(const SimResult& result, std::int64_t window_us);

std::string throughput_csv(const SimResult& result, std::int64_t window_us);
std::string delays_csv(const SimResult& result);
std::string queue_csv(const SimResult& result);
std::string events_csv(const SimResult& result);

}  // namespace ccstress
