#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "ccstress/event_log.hpp"
#include "ccstress/rng.hpp"

namespace ccstress {

enum class CcaKind { Reno, Cubic, Bbr };

std::string_view to_string(CcaKind kind);
CcaKind cca_kind_from_string(std::string_view s);

struct CcaConfig {
    CcaKind kind = CcaKind::Reno;
    bool cubic_buggy = false;   ///< slow start ignores ssthresh on large cumulative ACKs
    bool bbr_patched = false;   ///< enter ProbeRTT when an RTO fires
    std::int64_t mss_bytes = 1500;
    std::int64_t initial_cwnd_pkts = 10;
    std::uint64_t seed = 1;

    bool operator==(const CcaConfig&) const = default;
};

/// Delivery-rate sample built from the most recently sent segment that an ACK
/// newly delivered.
struct RateSample {
    std::int64_t delivered_delta_bytes = 0;
    std::int64_t interval_us = 0;        ///< max(send_interval_us, ack_interval_us)
    std::int64_t send_interval_us = 0;
    std::int64_t ack_interval_us = 0;
    std::int64_t prior_delivered_bytes = 0;
    std::int64_t prior_time_us = 0;
    std::int64_t acked_seq = -1;
    bool is_app_limited = false;
    bool is_retransmitted = false;

    bool valid() const { return delivered_delta_bytes > 0 && interval_us > 0; }
    double rate_bps() const
    {
        return valid() ? static_cast<double>(delivered_delta_bytes) * 8e6 / static_cast<double>(interval_us) : 0.0;
    }
};

/// Everything a CCA sees on one ACK.
struct AckContext {
    std::int64_t now_us = 0;
    std::optional<RateSample> sample;
    std::int64_t acked_segments = 0;         ///< cumulative ACK advance, including already-SACKed segments
    std::int64_t newly_delivered_bytes = 0;  ///< bytes first (s)acked by this ACK
    std::int64_t delivered_bytes = 0;        ///< connection total after this ACK
    std::int64_t in_flight_bytes = 0;
    std::int64_t prior_in_flight_bytes = 0;
    std::int64_t lost_bytes = 0;             ///< bytes newly marked lost by this ACK
    std::optional<std::int64_t> rtt_us;
    std::int64_t srtt_us = 0;
    bool in_recovery = false;                ///< SACK-based fast recovery
    bool in_loss = false;                    ///< recovery after an RTO
};

/// Hook interface shared by all congestion controllers.
class Cca {
public:
    virtual ~Cca() = default;

    virtual void on_ack(const AckContext& ctx) = 0;
    virtual void on_loss_detected(std::int64_t now_us, std::int64_t in_flight_bytes) = 0;
    virtual void on_rto(std::int64_t now_us, std::int64_t in_flight_bytes) = 0;
    virtual void on_recovery_exit(std::int64_t /*now_us*/) {}

    virtual std::int64_t cwnd_bytes() const = 0;
    virtual std::optional<double> pacing_rate_bps() const { return std::nullopt; }
    virtual std::optional<std::int64_t> ssthresh_bytes() const { return std::nullopt; }
    virtual std::string_view name() const = 0;

    void set_log(EventLog* log) { log_ = log; }

protected:
    EventLog* log_ = nullptr;
};

std::unique_ptr<Cca> make_cca(const CcaConfig& config);

// ---------------------------------------------------------------------------
// Reno

struct RenoState {
    std::int64_t cwnd_bytes = 0;
    std::int64_t ssthresh_bytes = std::int64_t{1} << 31;
    std::int64_t ca_acked_bytes = 0;  ///< bytes acked since the last +1 MSS step
};

class Reno final : public Cca {
public:
    explicit Reno(const CcaConfig& config);

    void on_ack(const AckContext& ctx) override;
    void on_loss_detected(std::int64_t now_us, std::int64_t in_flight_bytes) override;
    void on_rto(std::int64_t now_us, std::int64_t in_flight_bytes) override;

    std::int64_t cwnd_bytes() const override { return s_.cwnd_bytes; }
    std::optional<std::int64_t> ssthresh_bytes() const override { return s_.ssthresh_bytes; }
    std::string_view name() const override { return "reno"; }

    /// Window growth for `segments` newly acked segments outside recovery.
    void grow(std::int64_t segments);

    const RenoState& state() const { return s_; }
    RenoState& state() { return s_; }

private:
    std::int64_t mss_;
    RenoState s_;
};

// ---------------------------------------------------------------------------
// CUBIC

struct CubicState {
    std::int64_t cwnd_bytes = 0;
    std::int64_t ssthresh_bytes = std::int64_t{1} << 31;
    double w_max_segments = 0.0;
    double k_seconds = 0.0;
    double origin_segments = 0.0;
    std::int64_t epoch_start_us = -1;  ///< -1 until the first congestion-avoidance ACK of an epoch
    std::int64_t ca_count = 0;         ///< segments acked since the last +1 MSS step
    std::int64_t delay_min_us = 0;
    bool buggy = false;
    // HyStart delay detection
    bool hystart = true;
    std::int64_t hystart_round_end_bytes = -1;
    std::int64_t hystart_curr_rtt_us = 0;
    int hystart_samples = 0;
};

class Cubic final : public Cca {
public:
    static constexpr double kC = 0.4;
    static constexpr double kBeta = 0.7;
    static constexpr std::int64_t kHystartLowWindow = 16;
    static constexpr int kHystartMinSamples = 8;

    explicit Cubic(const CcaConfig& config);

    void on_ack(const AckContext& ctx) override;
    void on_loss_detected(std::int64_t now_us, std::int64_t in_flight_bytes) override;
    void on_rto(std::int64_t now_us, std::int64_t in_flight_bytes) override;

    std::int64_t cwnd_bytes() const override { return s_.cwnd_bytes; }
    std::optional<std::int64_t> ssthresh_bytes() const override { return s_.ssthresh_bytes; }
    std::string_view name() const override { return s_.buggy ? "cubic-buggy" : "cubic"; }

    /// Window update for `segments_acked` cumulatively acked segments.
    void increase(std::int64_t segments_acked, std::int64_t now_us);

    /// Segments-acked count needed for one +1 MSS step at `now_us`.
    double ca_count_target(std::int64_t now_us) const;

    const CubicState& state() const { return s_; }
    CubicState& state() { return s_; }

private:
    void reduce(std::int64_t now_us);
    void hystart_update(const AckContext& ctx);
    void congestion_avoidance(std::int64_t segments_acked, std::int64_t now_us);

    std::int64_t mss_;
    CubicState s_;
};

// ---------------------------------------------------------------------------
// BBR

enum class BbrMode { Startup, Drain, ProbeBW, ProbeRTT };

std::string_view to_string(BbrMode mode);

/// Windowed maximum over the last `window_rounds` probe rounds. Entries are
/// only expired when a new sample arrives, so a stale estimate is held until
/// fresh evidence replaces it.
class BandwidthFilter {
public:
    explicit BandwidthFilter(std::int64_t window_rounds = 10) : window_(window_rounds) {}

    void update(double bw_bps, std::int64_t round);
    double best() const;
    std::size_t size() const { return entries_.size(); }
    std::int64_t window_rounds() const { return window_; }

    struct Entry {
        std::int64_t round;
        double bw_bps;
    };
    const std::vector<Entry>& entries() const { return entries_; }

private:
    std::int64_t window_;
    std::vector<Entry> entries_;
};

struct BbrState {
    BbrMode mode = BbrMode::Startup;
    BbrMode prior_mode = BbrMode::Startup;
    bool patched = false;
    double pacing_gain = 0.0;
    double cwnd_gain = 0.0;
    int cycle_index = 0;
    std::int64_t round_count = 0;
    std::int64_t next_round_delivered = 0;  ///< delivered bytes when the current round began
    bool round_start = false;
    BandwidthFilter filter{10};
    double round_max_bps = 0.0;             ///< largest sample of the round in progress
    std::int64_t min_rtt_us = std::numeric_limits<std::int64_t>::max();
    std::int64_t min_rtt_stamp_us = 0;
    std::int64_t probe_rtt_done_stamp_us = -1;
    bool probe_rtt_round_done = false;
    std::int64_t prior_cwnd_bytes = 0;
    bool filled_pipe = false;
    double full_bw_bps = 0.0;
    int full_bw_count = 0;
    bool packet_conservation = false;
    bool in_recovery = false;
    std::int64_t cwnd_bytes = 0;
    double pacing_rate_bps = 0.0;
    std::int64_t delivered_bytes = 0;
    std::int64_t valid_samples = 0;
};

class Bbr final : public Cca {
public:
    static constexpr double kHighGain = 2.885;  // 2/ln(2)
    static constexpr double kCwndGain = 2.0;
    static constexpr std::int64_t kMinPipeCwndSegments = 4;
    static constexpr std::int64_t kMinRttWindowUs = 10'000'000;
    static constexpr std::int64_t kProbeRttDurationUs = 200'000;
    static constexpr double kPacingGainCycle[8] = {1.25, 0.75, 1, 1, 1, 1, 1, 1};

    explicit Bbr(const CcaConfig& config);

    void on_ack(const AckContext& ctx) override;
    void on_loss_detected(std::int64_t now_us, std::int64_t in_flight_bytes) override;
    void on_rto(std::int64_t now_us, std::int64_t in_flight_bytes) override;
    void on_recovery_exit(std::int64_t now_us) override;

    std::int64_t cwnd_bytes() const override { return s_.cwnd_bytes; }
    std::optional<double> pacing_rate_bps() const override { return s_.pacing_rate_bps; }
    std::string_view name() const override { return s_.patched ? "bbr-patched" : "bbr"; }

    double btlbw_bps() const { return s_.filter.best(); }
    /// Bandwidth-delay product scaled by `gain`, in bytes.
    std::int64_t bdp_bytes(double gain) const;

    const BbrState& state() const { return s_; }
    BbrState& state() { return s_; }

private:
    void set_mode(BbrMode mode, std::int64_t now_us);
    void enter_probe_bw(std::int64_t now_us);
    void enter_probe_rtt(std::int64_t now_us);
    void exit_probe_rtt(std::int64_t now_us);
    void advance_cycle_phase(std::int64_t now_us);
    void save_cwnd();
    void update_round(const RateSample& rs, std::int64_t now_us);
    void check_full_pipe();
    void check_drain(const AckContext& ctx);
    void update_min_rtt(const AckContext& ctx, bool& expired);
    void check_probe_rtt(const AckContext& ctx, bool min_rtt_expired);
    void set_pacing_rate(const AckContext& ctx);
    void set_cwnd(const AckContext& ctx);

    std::int64_t mss_;
    std::int64_t initial_cwnd_;
    Rng rng_;
    BbrState s_;
};

}  // namespace ccstress
