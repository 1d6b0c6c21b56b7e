#include "ccstress/cca.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ccstress {

std::string_view to_string(CcaKind kind)
{
    switch (kind) {
    case CcaKind::Reno:
        return "reno";
    case CcaKind::Cubic:
        return "cubic";
    case CcaKind::Bbr:
        return "bbr";
    }
    return "?";
}

CcaKind cca_kind_from_string(std::string_view s)
{
    if (s == "reno") {
        return CcaKind::Reno;
    }
    if (s == "cubic") {
        return CcaKind::Cubic;
    }
    if (s == "bbr") {
        return CcaKind::Bbr;
    }
    throw std::invalid_argument("unknown CCA '" + std::string(s) + "' (expected reno, cubic or bbr)");
}

std::string_view to_string(BbrMode mode)
{
    switch (mode) {
    case BbrMode::Startup:
        return "startup";
    case BbrMode::Drain:
        return "drain";
    case BbrMode::ProbeBW:
        return "probe_bw";
    case BbrMode::ProbeRTT:
        return "probe_rtt";
    }
    return "?";
}

std::unique_ptr<Cca> make_cca(const CcaConfig& config)
{
    if (config.mss_bytes <= 0 || config.initial_cwnd_pkts <= 0) {
        throw std::invalid_argument("CCA needs positive mss and initial window");
    }
    switch (config.kind) {
    case CcaKind::Reno:
        return std::make_unique<Reno>(config);
    case CcaKind::Cubic:
        return std::make_unique<Cubic>(config);
    case CcaKind::Bbr:
        return std::make_unique<Bbr>(config);
    }
    throw std::invalid_argument("bad CCA kind");
}

// ---------------------------------------------------------------------------
// Reno

Reno::Reno(const CcaConfig& config) : mss_(config.mss_bytes)
{
    s_.cwnd_bytes = config.initial_cwnd_pkts * mss_;
}

void Reno::grow(std::int64_t segments)
{
    if (segments <= 0) {
        return;
    }
    if (s_.cwnd_bytes < s_.ssthresh_bytes) {
        const std::int64_t room = (s_.ssthresh_bytes - s_.cwnd_bytes + mss_ - 1) / mss_;
        const std::int64_t used = std::min(segments, room);
        s_.cwnd_bytes = std::min(s_.cwnd_bytes + used * mss_, std::max(s_.ssthresh_bytes, s_.cwnd_bytes));
        segments -= used;
    }
    if (segments > 0) {
        s_.ca_acked_bytes += segments * mss_;
        if (s_.ca_acked_bytes >= s_.cwnd_bytes) {
            s_.ca_acked_bytes -= s_.cwnd_bytes;
            s_.cwnd_bytes += mss_;
        }
    }
}

void Reno::on_ack(const AckContext& ctx)
{
    if (ctx.in_recovery) {
        return;
    }
    grow(ctx.newly_delivered_bytes / mss_);
}

void Reno::on_loss_detected(std::int64_t now_us, std::int64_t /*in_flight_bytes*/)
{
    s_.ssthresh_bytes = std::max(s_.cwnd_bytes / 2, 2 * mss_);
    s_.cwnd_bytes = s_.ssthresh_bytes;
    s_.ca_acked_bytes = 0;
    if (log_) {
        log_->add(now_us, LogSource::Cca, "cwnd", -1, static_cast<double>(s_.cwnd_bytes), "fast_retransmit");
    }
}

void Reno::on_rto(std::int64_t now_us, std::int64_t in_flight_bytes)
{
    s_.ssthresh_bytes = std::max(in_flight_bytes / 2, 2 * mss_);
    s_.cwnd_bytes = mss_;
    s_.ca_acked_bytes = 0;
    if (log_) {
        log_->add(now_us, LogSource::Cca, "cwnd", -1, static_cast<double>(s_.cwnd_bytes), "rto");
    }
}

// ---------------------------------------------------------------------------
// CUBIC

Cubic::Cubic(const CcaConfig& config) : mss_(config.mss_bytes)
{
    s_.cwnd_bytes = config.initial_cwnd_pkts * mss_;
    s_.buggy = config.cubic_buggy;
}

double Cubic::ca_count_target(std::int64_t now_us) const
{
    const double cwnd = static_cast<double>(s_.cwnd_bytes) / static_cast<double>(mss_);
    const double t = static_cast<double>(now_us - s_.epoch_start_us + s_.delay_min_us) / 1e6;
    const double d = t - s_.k_seconds;
    const double target = s_.origin_segments + kC * d * d * d;
    if (target > cwnd) {
        return cwnd / (target - cwnd);
    }
    return 100.0 * cwnd;
}

void Cubic::congestion_avoidance(std::int64_t segments_acked, std::int64_t now_us)
{
    const double cwnd = static_cast<double>(s_.cwnd_bytes) / static_cast<double>(mss_);
    if (s_.epoch_start_us < 0) {
        s_.epoch_start_us = now_us;
        s_.ca_count = 0;
        if (cwnd < s_.w_max_segments) {
            s_.k_seconds = std::cbrt((s_.w_max_segments - cwnd) / kC);
            s_.origin_segments = s_.w_max_segments;
        } else {
            s_.k_seconds = 0.0;
            s_.origin_segments = cwnd;
        }
    }
    s_.ca_count += segments_acked;
    if (static_cast<double>(s_.ca_count) >= ca_count_target(now_us)) {
        s_.cwnd_bytes += mss_;
        s_.ca_count = 0;
    }
}

void Cubic::increase(std::int64_t segments_acked, std::int64_t now_us)
{
    if (segments_acked <= 0) {
        return;
    }
    if (s_.cwnd_bytes < s_.ssthresh_bytes) {
        if (s_.buggy) {
            s_.cwnd_bytes += segments_acked * mss_;
            return;
        }
        const std::int64_t before = s_.cwnd_bytes;
        s_.cwnd_bytes = std::min(s_.cwnd_bytes + segments_acked * mss_, s_.ssthresh_bytes);
        segments_acked -= (s_.cwnd_bytes - before + mss_ - 1) / mss_;
        if (segments_acked <= 0) {
            return;
        }
    }
    congestion_avoidance(segments_acked, now_us);
}

void Cubic::on_ack(const AckContext& ctx)
{
    if (ctx.rtt_us && *ctx.rtt_us > 0 && (s_.delay_min_us == 0 || *ctx.rtt_us < s_.delay_min_us)) {
        s_.delay_min_us = *ctx.rtt_us;
    }
    if (ctx.in_recovery) {
        return;
    }
    hystart_update(ctx);
    const std::int64_t before = s_.cwnd_bytes;
    increase(ctx.acked_segments, ctx.now_us);
    if (log_ && s_.cwnd_bytes != before) {
        log_->add(ctx.now_us, LogSource::Cca, "cwnd", -1, static_cast<double>(s_.cwnd_bytes), "ack");
    }
}

void Cubic::hystart_update(const AckContext& ctx)
{
    if (!s_.hystart || ctx.in_loss || s_.cwnd_bytes >= s_.ssthresh_bytes ||
        s_.cwnd_bytes < kHystartLowWindow * mss_) {
        return;
    }
    if (ctx.delivered_bytes >= s_.hystart_round_end_bytes) {
        s_.hystart_round_end_bytes = ctx.delivered_bytes + ctx.in_flight_bytes;
        s_.hystart_curr_rtt_us = std::numeric_limits<std::int64_t>::max();
        s_.hystart_samples = 0;
    }
    if (!ctx.rtt_us || s_.delay_min_us == 0) {
        return;
    }
    if (s_.hystart_samples < kHystartMinSamples) {
        s_.hystart_curr_rtt_us = std::min(s_.hystart_curr_rtt_us, *ctx.rtt_us);
        if (++s_.hystart_samples == kHystartMinSamples) {
            const std::int64_t thresh = std::clamp<std::int64_t>(s_.delay_min_us / 16, 4'000, 16'000);
            if (s_.hystart_curr_rtt_us > s_.delay_min_us + thresh) {
                s_.ssthresh_bytes = s_.cwnd_bytes;
                if (log_) {
                    log_->add(ctx.now_us, LogSource::Cca, "hystart_exit", -1, static_cast<double>(s_.cwnd_bytes));
                }
            }
        }
    }
}

void Cubic::reduce(std::int64_t /*now_us*/)
{
    s_.epoch_start_us = -1;
    s_.ca_count = 0;
    s_.w_max_segments = static_cast<double>(s_.cwnd_bytes) / static_cast<double>(mss_);
    s_.k_seconds = std::cbrt(s_.w_max_segments * (1.0 - kBeta) / kC);
    s_.ssthresh_bytes = std::max(static_cast<std::int64_t>(static_cast<double>(s_.cwnd_bytes) * kBeta), 2 * mss_);
}

void Cubic::on_loss_detected(std::int64_t now_us, std::int64_t /*in_flight_bytes*/)
{
    reduce(now_us);
    s_.cwnd_bytes = s_.ssthresh_bytes;
    if (log_) {
        log_->add(now_us, LogSource::Cca, "cwnd", -1, static_cast<double>(s_.cwnd_bytes), "fast_retransmit");
    }
}

void Cubic::on_rto(std::int64_t now_us, std::int64_t /*in_flight_bytes*/)
{
    reduce(now_us);
    s_.cwnd_bytes = mss_;
    if (log_) {
        log_->add(now_us, LogSource::Cca, "cwnd", -1, static_cast<double>(s_.cwnd_bytes), "rto");
    }
}

// ---------------------------------------------------------------------------
// BBR

void BandwidthFilter::update(double bw_bps, std::int64_t round)
{
    std::erase_if(entries_, [&](const Entry& e) { return e.round <= round - window_; });
    if (!entries_.empty() && entries_.back().round == round) {
        entries_.back().bw_bps = std::max(entries_.back().bw_bps, bw_bps);
    } else {
        entries_.push_back({round, bw_bps});
    }
}

double BandwidthFilter::best() const
{
    double best = 0.0;
    for (const auto& e : entries_) {
        best = std::max(best, e.bw_bps);
    }
    return best;
}

Bbr::Bbr(const CcaConfig& config)
    : mss_(config.mss_bytes), initial_cwnd_(config.initial_cwnd_pkts * config.mss_bytes),
      rng_(make_rng(derive_seed(config.seed, {0xbb5})))
{
    s_.patched = config.bbr_patched;
    s_.cwnd_bytes = initial_cwnd_;
    s_.prior_cwnd_bytes = initial_cwnd_;
    s_.pacing_gain = kHighGain;
    s_.cwnd_gain = kHighGain;
    // No RTT yet: pace the initial window over 1 ms.
    s_.pacing_rate_bps = kHighGain * static_cast<double>(initial_cwnd_) * 8e6 / 1000.0;
}

std::int64_t Bbr::bdp_bytes(double gain) const
{
    const double bw = s_.filter.best();
    if (s_.min_rtt_us == std::numeric_limits<std::int64_t>::max() || bw <= 0.0) {
        return initial_cwnd_;
    }
    return static_cast<std::int64_t>(gain * bw * static_cast<double>(s_.min_rtt_us) / 8e6);
}

void Bbr::set_mode(BbrMode mode, std::int64_t now_us)
{
    if (mode == s_.mode) {
        return;
    }
    s_.mode = mode;
    if (log_) {
        log_->add(now_us, LogSource::Cca, "mode", -1, static_cast<double>(static_cast<int>(mode)),
                  std::string(to_string(mode)));
    }
}

void Bbr::save_cwnd()
{
    if (!s_.in_recovery && s_.mode != BbrMode::ProbeRTT) {
        s_.prior_cwnd_bytes = s_.cwnd_bytes;
    } else {
        s_.prior_cwnd_bytes = std::max(s_.prior_cwnd_bytes, s_.cwnd_bytes);
    }
}

void Bbr::advance_cycle_phase(std::int64_t now_us)
{
    s_.cycle_index = (s_.cycle_index + 1) % 8;
    s_.pacing_gain = kPacingGainCycle[s_.cycle_index];
    if (log_) {
        log_->add(now_us, LogSource::Cca, "gain_phase", s_.cycle_index, s_.pacing_gain);
    }
}

void Bbr::enter_probe_bw(std::int64_t now_us)
{
    set_mode(BbrMode::ProbeBW, now_us);
    s_.cwnd_gain = kCwndGain;
    // Start anywhere except the 0.75 phase.
    s_.cycle_index = 7 - static_cast<int>(uniform_int(rng_, 0, 6));
    advance_cycle_phase(now_us);
}

void Bbr::enter_probe_rtt(std::int64_t now_us)
{
    save_cwnd();
    s_.prior_mode = s_.mode;
    set_mode(BbrMode::ProbeRTT, now_us);
    s_.pacing_gain = 1.0;
    s_.cwnd_gain = 1.0;
    s_.probe_rtt_done_stamp_us = -1;
    s_.probe_rtt_round_done = false;
}

void Bbr::exit_probe_rtt(std::int64_t now_us)
{
    s_.min_rtt_stamp_us = now_us;
    s_.cwnd_bytes = std::max(s_.cwnd_bytes, s_.prior_cwnd_bytes);
    s_.probe_rtt_done_stamp_us = -1;
    if (s_.filled_pipe) {
        enter_probe_bw(now_us);
    } else {
        set_mode(BbrMode::Startup, now_us);
        s_.pacing_gain = kHighGain;
        s_.cwnd_gain = kHighGain;
    }
}

void Bbr::update_round(const RateSample& rs, std::int64_t now_us)
{
    s_.round_start = false;
    if (rs.prior_delivered_bytes > s_.next_round_delivered) {
        s_.next_round_delivered = s_.delivered_bytes;
        ++s_.round_count;
        s_.round_start = true;
        s_.packet_conservation = false;
        s_.filter.update(s_.round_max_bps, s_.round_count);
        if (log_) {
            log_->add(now_us, LogSource::Cca, "round_end", s_.round_count, s_.round_max_bps,
                      "btlbw=" + std::to_string(s_.filter.best()));
        }
        s_.round_max_bps = 0.0;
    }
}

void Bbr::check_full_pipe()
{
    if (s_.filled_pipe || !s_.round_start) {
        return;
    }
    const double best = s_.filter.best();
    if (best >= s_.full_bw_bps * 1.25) {
        s_.full_bw_bps = best;
        s_.full_bw_count = 0;
        return;
    }
    if (++s_.full_bw_count >= 3) {
        s_.filled_pipe = true;
    }
}

void Bbr::check_drain(const AckContext& ctx)
{
    if (s_.mode == BbrMode::Startup && s_.filled_pipe) {
        set_mode(BbrMode::Drain, ctx.now_us);
        s_.pacing_gain = 1.0 / kHighGain;
        s_.cwnd_gain = kHighGain;
    }
    if (s_.mode == BbrMode::Drain && ctx.in_flight_bytes <= bdp_bytes(1.0)) {
        enter_probe_bw(ctx.now_us);
    }
}

void Bbr::update_min_rtt(const AckContext& ctx, bool& expired)
{
    expired = ctx.now_us > s_.min_rtt_stamp_us + kMinRttWindowUs;
    if (ctx.rtt_us && *ctx.rtt_us >= 0 && (*ctx.rtt_us <= s_.min_rtt_us || expired)) {
        s_.min_rtt_us = *ctx.rtt_us;
        s_.min_rtt_stamp_us = ctx.now_us;
    }
}

void Bbr::check_probe_rtt(const AckContext& ctx, bool min_rtt_expired)
{
    if (min_rtt_expired && s_.mode != BbrMode::ProbeRTT) {
        enter_probe_rtt(ctx.now_us);
    }
    if (s_.mode != BbrMode::ProbeRTT) {
        return;
    }
    if (s_.probe_rtt_done_stamp_us < 0) {
        if (ctx.in_flight_bytes <= kMinPipeCwndSegments * mss_) {
            s_.probe_rtt_done_stamp_us = ctx.now_us + kProbeRttDurationUs;
            s_.probe_rtt_round_done = false;
            s_.next_round_delivered = s_.delivered_bytes;
        }
        return;
    }
    if (s_.round_start) {
        s_.probe_rtt_round_done = true;
    }
    if (s_.probe_rtt_round_done && ctx.now_us > s_.probe_rtt_done_stamp_us) {
        exit_probe_rtt(ctx.now_us);
    }
}

void Bbr::set_pacing_rate(const AckContext& /*ctx*/)
{
    const double bw = s_.filter.best();
    if (bw > 0.0) {
        s_.pacing_rate_bps = s_.pacing_gain * bw;
    }
}

void Bbr::set_cwnd(const AckContext& ctx)
{
    const std::int64_t acked = ctx.newly_delivered_bytes;
    const std::int64_t min_cwnd = kMinPipeCwndSegments * mss_;
    if (acked > 0) {
        if (ctx.lost_bytes > 0) {
            s_.cwnd_bytes = std::max(s_.cwnd_bytes - ctx.lost_bytes, mss_);
        }
        if (s_.packet_conservation) {
            s_.cwnd_bytes = std::max(s_.cwnd_bytes, ctx.in_flight_bytes + acked);
        } else {
            const std::int64_t target = bdp_bytes(s_.cwnd_gain);
            if (s_.filled_pipe) {
                s_.cwnd_bytes = std::min(s_.cwnd_bytes + acked, std::max(target, min_cwnd));
            } else if (s_.cwnd_bytes < target || s_.delivered_bytes < initial_cwnd_) {
                s_.cwnd_bytes += acked;
            }
            s_.cwnd_bytes = std::max(s_.cwnd_bytes, min_cwnd);
        }
    }
    if (s_.mode == BbrMode::ProbeRTT) {
        s_.cwnd_bytes = std::min(s_.cwnd_bytes, min_cwnd);
    }
}

void Bbr::on_ack(const AckContext& ctx)
{
    s_.delivered_bytes = ctx.delivered_bytes;
    s_.round_start = false;
    if (ctx.sample && ctx.sample->valid()) {
        ++s_.valid_samples;
        s_.round_max_bps = std::max(s_.round_max_bps, ctx.sample->rate_bps());
        update_round(*ctx.sample, ctx.now_us);
    }
    if (s_.mode == BbrMode::ProbeBW && s_.round_start) {
        advance_cycle_phase(ctx.now_us);
    }
    check_full_pipe();
    check_drain(ctx);
    bool expired = false;
    update_min_rtt(ctx, expired);
    check_probe_rtt(ctx, expired);
    set_pacing_rate(ctx);
    set_cwnd(ctx);
}

void Bbr::on_loss_detected(std::int64_t now_us, std::int64_t in_flight_bytes)
{
    save_cwnd();
    s_.in_recovery = true;
    s_.packet_conservation = true;
    s_.cwnd_bytes = std::max(in_flight_bytes + mss_, mss_);
    if (s_.mode == BbrMode::ProbeRTT) {
        s_.cwnd_bytes = std::min(s_.cwnd_bytes, kMinPipeCwndSegments * mss_);
    }
    if (log_) {
        log_->add(now_us, LogSource::Cca, "cwnd", -1, static_cast<double>(s_.cwnd_bytes), "recovery");
    }
}

void Bbr::on_rto(std::int64_t now_us, std::int64_t /*in_flight_bytes*/)
{
    save_cwnd();
    s_.in_recovery = true;
    s_.packet_conservation = false;
    if (s_.patched) {
        if (s_.mode != BbrMode::ProbeRTT) {
            enter_probe_rtt(now_us);
        }
        s_.cwnd_bytes = kMinPipeCwndSegments * mss_;
        const std::int64_t rtt = s_.min_rtt_us == std::numeric_limits<std::int64_t>::max() ? 0 : s_.min_rtt_us;
        s_.probe_rtt_done_stamp_us = now_us + std::max(kProbeRttDurationUs, rtt);
        s_.probe_rtt_round_done = false;
        s_.next_round_delivered = s_.delivered_bytes;
    } else {
        s_.cwnd_bytes = mss_;
    }
    if (log_) {
        log_->add(now_us, LogSource::Cca, "cwnd", -1, static_cast<double>(s_.cwnd_bytes), "rto");
    }
}

void Bbr::on_recovery_exit(std::int64_t now_us)
{
    s_.in_recovery = false;
    s_.packet_conservation = false;
    s_.cwnd_bytes = std::max(s_.cwnd_bytes, s_.prior_cwnd_bytes);
    if (s_.mode == BbrMode::ProbeRTT) {
        s_.cwnd_bytes = std::min(s_.cwnd_bytes, kMinPipeCwndSegments * mss_);
    }
    if (log_) {
        log_->add(now_us, LogSource::Cca, "cwnd", -1, static_cast<double>(s_.cwnd_bytes), "recovery_exit");
    }
}

}  // namespace ccstress
