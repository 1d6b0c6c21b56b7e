#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>

#include "ccstress/cca.hpp"
#include "ccstress/event_log.hpp"

namespace ccstress {

struct TcpConfig {
    std::int64_t mss_bytes = 1500;
    std::int64_t min_rto_us = 1'000'000;
    std::int64_t max_rto_us = 60'000'000;
    std::int64_t initial_rto_us = 1'000'000;
    std::int64_t delayed_ack_us = 200'000;
    int delayed_ack_segments = 2;
    int dupack_threshold = 3;
    /// Discard rate samples whose interval is shorter than the path min RTT.
    bool filter_short_samples = false;

    void check() const;
    bool operator==(const TcpConfig&) const = default;
};

/// Half-open range of segment indices [begin, end).
struct SackBlock {
    std::int64_t begin = 0;
    std::int64_t end = 0;
    bool operator==(const SackBlock&) const = default;
};

struct Ack {
    std::int64_t cum_ack = 0;  ///< next segment expected
    std::array<SackBlock, 3> sacks{};
    int num_sacks = 0;
};

struct Segment {
    std::int64_t seq = 0;
    std::int64_t sent_time_us = 0;
    bool retransmission = false;
};

struct ScoreboardEntry {
    std::int64_t sent_time_us = 0;
    std::int64_t first_tx_time_us = 0;
    std::int64_t prior_delivered_bytes = 0;
    std::int64_t prior_delivered_time_us = 0;
    int retransmit_count = 0;
    bool sacked = false;
    bool lost = false;
    bool retrans_in_flight = false;
};

enum class LossState { Open, Recovery, Loss };

struct TcpCounters {
    std::int64_t transmissions = 0;
    std::int64_t retransmissions = 0;
    std::int64_t fast_retransmits = 0;
    std::int64_t rtos = 0;
    std::int64_t acks = 0;
};

struct AckOutcome {
    std::optional<RateSample> sample;
    std::int64_t acked_from = 0;  ///< newly cumulatively acked segments are [acked_from, acked_to)
    std::int64_t acked_to = 0;
    std::int64_t newly_sacked = 0;
    std::int64_t newly_lost = 0;
    std::optional<std::int64_t> rtt_us;
    bool fast_retransmit = false;
    bool duplicate = false;  ///< pure duplicate ACK
    bool ignored = false;    ///< stale ACK carrying nothing new
};

struct RtoPlan {
    std::int64_t first_seq = 0;
    std::int64_t lost_segments = 0;
};

enum class SendBlock { None, Window, Pacing, Nothing };

/// Bulk-data TCP sender with a SACK scoreboard. Segments are numbered from 0;
/// every segment is mss_bytes long.
class TcpSender {
public:
    TcpSender(const TcpConfig& config, std::unique_ptr<Cca> cca, EventLog* log = nullptr);

    AckOutcome on_ack(const Ack& ack, std::int64_t now_us);
    RtoPlan on_rto(std::int64_t now_us);

    /// Returns the next segment to put on the wire at `now_us`, if the window
    /// and the pacing clock allow one.
    std::optional<Segment> poll_send(std::int64_t now_us);
    /// Why poll_send would return nothing at `now_us`.
    SendBlock blocked(std::int64_t now_us) const;
    std::int64_t next_send_time_us() const { return next_send_time_us_; }
    std::optional<std::int64_t> rto_deadline_us() const { return rto_deadline_us_; }

    std::int64_t snd_una() const { return snd_una_; }
    std::int64_t snd_nxt() const { return snd_nxt_; }
    std::int64_t in_flight_bytes() const { return pipe_ * cfg_.mss_bytes; }
    std::int64_t in_flight_segments() const { return pipe_; }
    std::int64_t delivered_bytes() const { return delivered_bytes_; }
    std::int64_t srtt_us() const { return srtt_us_; }
    std::int64_t min_rtt_us() const { return min_rtt_us_; }
    std::int64_t rttvar_us() const { return rttvar_us_; }
    std::int64_t rto_us() const { return rto_us_; }
    int backoff() const { return backoff_; }
    LossState loss_state() const { return state_; }
    std::int64_t recovery_point() const { return recovery_point_; }
    const std::deque<ScoreboardEntry>& scoreboard() const { return sb_; }
    const ScoreboardEntry& entry(std::int64_t seq) const { return sb_.at(static_cast<std::size_t>(seq - snd_una_)); }
    const TcpCounters& counters() const { return counters_; }
    std::int64_t cwnd_bytes() const;
    std::optional<double> pacing_rate_bps() const { return cca_->pacing_rate_bps(); }
    Cca& cca() { return *cca_; }
    const Cca& cca() const { return *cca_; }
    const TcpConfig& config() const { return cfg_; }

    /// Recounts in-flight segments from the scoreboard and compares with the
    /// incremental counter. Empty string when consistent.
    std::string check_invariants() const;

private:
    static bool counts_in_pipe(const ScoreboardEntry& e) { return !e.sacked && (!e.lost || e.retrans_in_flight); }
    void deliver(ScoreboardEntry& e, std::int64_t seq, std::int64_t now_us);
    void update_rtt(std::int64_t rtt_us);
    void recompute_rto();
    std::int64_t mark_losses(std::int64_t now_us);
    std::optional<std::int64_t> next_retransmit() const;
    bool prr_active() const;
    void update_prr(std::int64_t delivered_now);

    TcpConfig cfg_;
    std::unique_ptr<Cca> cca_;
    EventLog* log_;

    std::int64_t snd_una_ = 0;
    std::int64_t snd_nxt_ = 0;
    std::deque<ScoreboardEntry> sb_;  ///< entry i describes segment snd_una_ + i
    std::int64_t pipe_ = 0;

    std::int64_t delivered_bytes_ = 0;
    std::int64_t delivered_time_us_ = 0;
    std::int64_t first_tx_time_us_ = 0;

    std::int64_t srtt_us_ = 0;
    std::int64_t rttvar_us_ = 0;
    bool have_rtt_ = false;
    std::int64_t min_rtt_us_ = -1;
    std::int64_t rto_us_;
    int backoff_ = 0;
    std::optional<std::int64_t> rto_deadline_us_;

    LossState state_ = LossState::Open;
    std::int64_t recovery_point_ = 0;
    int dupacks_ = 0;
    bool force_retransmit_ = false;
    std::int64_t next_send_time_us_ = 0;
    std::int64_t lost_cursor_ = 0;  ///< no retransmittable segment below this index

    // proportional rate reduction during fast recovery (CCAs with an ssthresh)
    std::int64_t prr_delivered_ = 0;
    std::int64_t prr_out_ = 0;
    std::int64_t prr_recover_fs_ = 0;
    std::int64_t prr_sndcnt_ = 0;

    TcpCounters counters_;

    // rate-sample scratch for the ACK being processed
    std::int64_t rs_prior_delivered_ = -1;
    std::int64_t rs_sent_time_ = 0;
    RateSample rs_;
    std::optional<std::int64_t> ack_rtt_;
    std::int64_t ack_delivered_ = 0;
};

/// Receiver with delayed ACKs and up to three SACK blocks per ACK.
class TcpReceiver {
public:
    explicit TcpReceiver(const TcpConfig& config);

    std::optional<Ack> on_data(std::int64_t seq, std::int64_t now_us);
    std::optional<Ack> on_delack_timer(std::int64_t now_us);
    std::optional<std::int64_t> delack_deadline_us() const { return delack_deadline_us_; }

    std::int64_t rcv_nxt() const { return rcv_nxt_; }
    /// Out-of-order ranges keyed by begin, value is end (exclusive).
    const std::map<std::int64_t, std::int64_t>& out_of_order() const { return ooo_; }
    int pending_segments() const { return pending_; }
    /// True when `seq` was received before.
    bool has(std::int64_t seq) const;

private:
    Ack make_ack();

    TcpConfig cfg_;
    std::int64_t rcv_nxt_ = 0;
    std::map<std::int64_t, std::int64_t> ooo_;
    std::int64_t last_ooo_seq_ = -1;
    int pending_ = 0;
    std::optional<std::int64_t> delack_deadline_us_;
};

}  // namespace ccstress
