#include "ccstress/tcp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ccstress {

void TcpConfig::check() const
{
    if (mss_bytes <= 0) {
        throw std::invalid_argument("sim.mtu_bytes must be positive");
    }
    if (min_rto_us <= 0 || max_rto_us < min_rto_us || initial_rto_us <= 0) {
        throw std::invalid_argument("sim.min_rto_us must satisfy 0 < min_rto_us <= max_rto_us, with initial_rto_us > 0");
    }
    if (delayed_ack_us <= 0 || delayed_ack_segments < 1) {
        throw std::invalid_argument("sim.delayed_ack_us and sim.delayed_ack_segments must be positive");
    }
    if (dupack_threshold < 1) {
        throw std::invalid_argument("sim.dupack_threshold must be >= 1");
    }
}

// ---------------------------------------------------------------------------
// TcpSender

TcpSender::TcpSender(const TcpConfig& config, std::unique_ptr<Cca> cca, EventLog* log)
    : cfg_(config), cca_(std::move(cca)), log_(log), rto_us_(config.initial_rto_us)
{
    cfg_.check();
    if (!cca_) {
        throw std::invalid_argument("TcpSender needs a CCA");
    }
    cca_->set_log(log_);
}

std::int64_t TcpSender::cwnd_bytes() const
{
    return std::max(cca_->cwnd_bytes(), cfg_.mss_bytes);
}

SendBlock TcpSender::blocked(std::int64_t now_us) const
{
    if (force_retransmit_) {
        return SendBlock::None;
    }
    if (prr_active()) {
        if (prr_sndcnt_ < cfg_.mss_bytes) {
            return SendBlock::Window;
        }
    } else if ((pipe_ + 1) * cfg_.mss_bytes > cwnd_bytes()) {
        return SendBlock::Window;
    }
    if (cca_->pacing_rate_bps() && now_us < next_send_time_us_) {
        return SendBlock::Pacing;
    }
    return SendBlock::None;
}

std::optional<std::int64_t> TcpSender::next_retransmit() const
{
    const auto n = static_cast<std::int64_t>(sb_.size());
    for (std::int64_t i = std::max<std::int64_t>(lost_cursor_ - snd_una_, 0); i < n; ++i) {
        const auto& e = sb_[static_cast<std::size_t>(i)];
        if (e.lost && !e.retrans_in_flight && !e.sacked) {
            return snd_una_ + i;
        }
    }
    return std::nullopt;
}

std::optional<Segment> TcpSender::poll_send(std::int64_t now_us)
{
    if (blocked(now_us) != SendBlock::None) {
        return std::nullopt;
    }
    Segment seg;
    seg.sent_time_us = now_us;
    ScoreboardEntry* e = nullptr;
    if (auto r = next_retransmit()) {
        seg.seq = *r;
        seg.retransmission = true;
        e = &sb_[static_cast<std::size_t>(*r - snd_una_)];
        lost_cursor_ = *r + 1;
        e->retrans_in_flight = true;
        ++e->retransmit_count;
        ++pipe_;
        ++counters_.retransmissions;
    } else {
        lost_cursor_ = std::max(lost_cursor_, snd_nxt_);
        if (sb_.empty()) {
            first_tx_time_us_ = now_us;
            delivered_time_us_ = now_us;
        }
        seg.seq = snd_nxt_++;
        sb_.emplace_back();
        e = &sb_.back();
        ++pipe_;
    }
    e->sent_time_us = now_us;
    e->first_tx_time_us = first_tx_time_us_;
    e->prior_delivered_bytes = delivered_bytes_;
    e->prior_delivered_time_us = delivered_time_us_;
    ++counters_.transmissions;
    force_retransmit_ = false;
    if (prr_active()) {
        prr_out_ += cfg_.mss_bytes;
        prr_sndcnt_ = std::max<std::int64_t>(prr_sndcnt_ - cfg_.mss_bytes, 0);
    }

    if (auto rate = cca_->pacing_rate_bps(); rate && *rate > 0.0) {
        const double gap = std::min(static_cast<double>(cfg_.mss_bytes) * 8e6 / *rate, 3.6e9);
        next_send_time_us_ = std::max(now_us, next_send_time_us_) + static_cast<std::int64_t>(std::ceil(gap));
    }
    if (!rto_deadline_us_) {
        rto_deadline_us_ = now_us + rto_us_;
    }
    if (log_) {
        log_->add(now_us, LogSource::Tcp, seg.retransmission ? "retransmit" : "send", seg.seq,
                  static_cast<double>(e->prior_delivered_bytes));
    }
    return seg;
}

void TcpSender::deliver(ScoreboardEntry& e, std::int64_t seq, std::int64_t now_us)
{
    delivered_bytes_ += cfg_.mss_bytes;
    delivered_time_us_ = now_us;
    ack_delivered_ += cfg_.mss_bytes;
    if (e.prior_delivered_bytes > rs_prior_delivered_ ||
        (e.prior_delivered_bytes == rs_prior_delivered_ && e.sent_time_us > rs_sent_time_)) {
        rs_prior_delivered_ = e.prior_delivered_bytes;
        rs_sent_time_ = e.sent_time_us;
        rs_.prior_delivered_bytes = e.prior_delivered_bytes;
        rs_.prior_time_us = e.prior_delivered_time_us;
        rs_.send_interval_us = e.sent_time_us - e.first_tx_time_us;
        rs_.is_retransmitted = e.retransmit_count > 0;
        rs_.acked_seq = seq;
    }
    if (e.retransmit_count == 0) {
        const std::int64_t rtt = now_us - e.sent_time_us;
        ack_rtt_ = ack_rtt_ ? std::min(*ack_rtt_, rtt) : rtt;
    }
}

void TcpSender::update_rtt(std::int64_t rtt_us)
{
    if (!have_rtt_) {
        srtt_us_ = rtt_us;
        rttvar_us_ = rtt_us / 2;
        have_rtt_ = true;
        return;
    }
    const std::int64_t err = srtt_us_ > rtt_us ? srtt_us_ - rtt_us : rtt_us - srtt_us_;
    rttvar_us_ = (3 * rttvar_us_ + err) / 4;
    srtt_us_ = (7 * srtt_us_ + rtt_us) / 8;
}

void TcpSender::recompute_rto()
{
    std::int64_t rto = have_rtt_ ? std::max(cfg_.min_rto_us, srtt_us_ + 4 * rttvar_us_) : cfg_.initial_rto_us;
    for (int i = 0; i < backoff_ && rto < cfg_.max_rto_us; ++i) {
        rto *= 2;
    }
    rto_us_ = std::min(rto, cfg_.max_rto_us);
}

bool TcpSender::prr_active() const
{
    return state_ == LossState::Recovery && cca_->ssthresh_bytes().has_value();
}

void TcpSender::update_prr(std::int64_t delivered_now)
{
    const std::int64_t ssthresh = *cca_->ssthresh_bytes();
    prr_delivered_ += delivered_now;
    const std::int64_t pipe = in_flight_bytes();
    std::int64_t sndcnt = 0;
    if (pipe > ssthresh) {
        const std::int64_t fs = std::max<std::int64_t>(prr_recover_fs_, 1);
        sndcnt = (prr_delivered_ * ssthresh + fs - 1) / fs - prr_out_;
    } else {
        const std::int64_t limit = std::max(prr_delivered_ - prr_out_, delivered_now) + cfg_.mss_bytes;
        sndcnt = std::min(ssthresh - pipe, limit);
    }
    prr_sndcnt_ = std::max<std::int64_t>(sndcnt, 0);
}

std::int64_t TcpSender::mark_losses(std::int64_t now_us)
{
    std::int64_t newly = 0;
    std::int64_t sacked_above = 0;
    for (std::int64_t i = static_cast<std::int64_t>(sb_.size()) - 1; i >= 0; --i) {
        auto& e = sb_[static_cast<std::size_t>(i)];
        if (e.sacked) {
            ++sacked_above;
            continue;
        }
        const bool dupack_rule = i == 0 && dupacks_ >= cfg_.dupack_threshold;
        if (!e.lost && (sacked_above >= cfg_.dupack_threshold || dupack_rule)) {
            if (counts_in_pipe(e)) {
                --pipe_;
            }
            e.lost = true;
            ++newly;
            lost_cursor_ = std::min(lost_cursor_, snd_una_ + i);
            if (log_) {
                log_->add(now_us, LogSource::Tcp, "mark_lost", snd_una_ + i);
            }
        }
    }
    return newly;
}

AckOutcome TcpSender::on_ack(const Ack& ack, std::int64_t now_us)
{
    if (ack.cum_ack > snd_nxt_ || ack.num_sacks < 0 || ack.num_sacks > 3) {
        throw std::invalid_argument("malformed ACK");
    }
    ++counters_.acks;
    AckOutcome out;
    const std::int64_t prior_in_flight = in_flight_bytes();
    rs_prior_delivered_ = -1;
    rs_sent_time_ = 0;
    rs_ = RateSample{};
    ack_rtt_.reset();
    ack_delivered_ = 0;

    out.acked_from = snd_una_;
    const bool cum_advanced = ack.cum_ack > snd_una_;
    while (snd_una_ < ack.cum_ack) {
        auto& e = sb_.front();
        if (counts_in_pipe(e)) {
            --pipe_;
        }
        if (!e.sacked) {
            deliver(e, snd_una_, now_us);
        }
        sb_.pop_front();
        ++snd_una_;
    }
    lost_cursor_ = std::max(lost_cursor_, snd_una_);
    out.acked_to = snd_una_;

    for (int b = 0; b < ack.num_sacks; ++b) {
        const std::int64_t lo = std::max(ack.sacks[static_cast<std::size_t>(b)].begin, snd_una_);
        const std::int64_t hi = std::min(ack.sacks[static_cast<std::size_t>(b)].end, snd_nxt_);
        for (std::int64_t s = lo; s < hi; ++s) {
            auto& e = sb_[static_cast<std::size_t>(s - snd_una_)];
            if (e.sacked) {
                continue;
            }
            if (counts_in_pipe(e)) {
                --pipe_;
            }
            e.sacked = true;
            e.lost = false;
            e.retrans_in_flight = false;
            deliver(e, s, now_us);
            ++out.newly_sacked;
        }
    }

    if (!cum_advanced && out.newly_sacked == 0) {
        if (ack.cum_ack == snd_una_ && snd_una_ < snd_nxt_ && ack.num_sacks == 0) {
            out.duplicate = true;
            ++dupacks_;
        } else {
            out.ignored = true;
            return out;
        }
    } else if (!cum_advanced) {
        ++dupacks_;
    } else {
        dupacks_ = 0;
    }

    if (log_) {
        log_->add(now_us, LogSource::Tcp, out.newly_sacked > 0 ? "sack" : "ack", ack.cum_ack,
                  static_cast<double>(out.newly_sacked));
    }

    if (out.newly_sacked > 0 || out.duplicate) {
        out.newly_lost = mark_losses(now_us);
    }

    if (ack_delivered_ > 0) {
        rs_.delivered_delta_bytes = delivered_bytes_ - rs_prior_delivered_;
        rs_.ack_interval_us = now_us - rs_.prior_time_us;
        rs_.interval_us = std::max(rs_.send_interval_us, rs_.ack_interval_us);
        if (ack_rtt_ && (min_rtt_us_ < 0 || *ack_rtt_ < min_rtt_us_)) {
            min_rtt_us_ = *ack_rtt_;
        }
        if (cfg_.filter_short_samples && min_rtt_us_ > 0 && rs_.interval_us < min_rtt_us_) {
            rs_.interval_us = 0;
        }
        first_tx_time_us_ = rs_sent_time_;
        out.sample = rs_;
        if (log_) {
            log_->add(now_us, LogSource::Tcp, "rate_sample", rs_.acked_seq, rs_.rate_bps(),
                      "prior_delivered=" + std::to_string(rs_.prior_delivered_bytes) +
                          " interval_us=" + std::to_string(rs_.interval_us));
        }
    }
    out.rtt_us = ack_rtt_;
    if (ack_rtt_) {
        update_rtt(*ack_rtt_);
    }
    if (cum_advanced) {
        backoff_ = 0;
    }
    recompute_rto();

    if (out.newly_lost > 0 && state_ == LossState::Open) {
        state_ = LossState::Recovery;
        recovery_point_ = snd_nxt_;
        force_retransmit_ = true;
        out.fast_retransmit = true;
        ++counters_.fast_retransmits;
        if (log_) {
            log_->add(now_us, LogSource::Tcp, "fast_retransmit", snd_una_);
        }
        prr_recover_fs_ = (snd_nxt_ - snd_una_) * cfg_.mss_bytes;
        prr_delivered_ = 0;
        prr_out_ = 0;
        prr_sndcnt_ = 0;
        cca_->on_loss_detected(now_us, in_flight_bytes());
    } else if (state_ == LossState::Recovery && snd_una_ < recovery_point_ && prr_active()) {
        update_prr(ack_delivered_);
    } else if (state_ != LossState::Open && snd_una_ >= recovery_point_) {
        state_ = LossState::Open;
        if (log_) {
            log_->add(now_us, LogSource::Tcp, "recovery_exit", snd_una_);
        }
        cca_->on_recovery_exit(now_us);
    }

    if (cum_advanced) {
        if (snd_una_ < snd_nxt_) {
            rto_deadline_us_ = now_us + rto_us_;
        } else {
            rto_deadline_us_.reset();
        }
    }

    AckContext ctx;
    ctx.now_us = now_us;
    ctx.sample = out.sample;
    ctx.acked_segments = out.acked_to - out.acked_from;
    ctx.newly_delivered_bytes = ack_delivered_;
    ctx.delivered_bytes = delivered_bytes_;
    ctx.in_flight_bytes = in_flight_bytes();
    ctx.prior_in_flight_bytes = prior_in_flight;
    ctx.lost_bytes = out.newly_lost * cfg_.mss_bytes;
    ctx.rtt_us = ack_rtt_;
    ctx.srtt_us = srtt_us_;
    ctx.in_recovery = state_ == LossState::Recovery;
    ctx.in_loss = state_ == LossState::Loss;
    cca_->on_ack(ctx);
    return out;
}

RtoPlan TcpSender::on_rto(std::int64_t now_us)
{
    RtoPlan plan;
    if (snd_una_ == snd_nxt_) {
        rto_deadline_us_.reset();
        return plan;
    }
    const std::int64_t prior_in_flight = in_flight_bytes();
    plan.first_seq = snd_una_;
    for (auto& e : sb_) {
        if (!e.sacked) {
            e.lost = true;
            e.retrans_in_flight = false;
            ++plan.lost_segments;
        }
    }
    pipe_ = 0;
    lost_cursor_ = snd_una_;
    state_ = LossState::Loss;
    recovery_point_ = snd_nxt_;
    dupacks_ = 0;
    ++backoff_;
    recompute_rto();
    ++counters_.rtos;
    rto_deadline_us_ = now_us + rto_us_;
    force_retransmit_ = true;
    if (log_) {
        log_->add(now_us, LogSource::Tcp, "rto", snd_una_, static_cast<double>(rto_us_),
                  "backoff=" + std::to_string(backoff_));
    }
    cca_->on_rto(now_us, prior_in_flight);
    return plan;
}

std::string TcpSender::check_invariants() const
{
    std::int64_t pipe = 0;
    for (const auto& e : sb_) {
        pipe += counts_in_pipe(e) ? 1 : 0;
        if (e.prior_delivered_bytes > delivered_bytes_) {
            return "prior_delivered above delivered";
        }
    }
    if (pipe != pipe_) {
        return "pipe counter " + std::to_string(pipe_) + " != recount " + std::to_string(pipe);
    }
    if (snd_una_ > snd_nxt_ || static_cast<std::int64_t>(sb_.size()) != snd_nxt_ - snd_una_) {
        return "scoreboard size mismatch";
    }
    if (rto_us_ < std::min(cfg_.min_rto_us, cfg_.initial_rto_us)) {
        return "rto below minimum";
    }
    return {};
}

// ---------------------------------------------------------------------------
// TcpReceiver

TcpReceiver::TcpReceiver(const TcpConfig& config) : cfg_(config)
{
    cfg_.check();
}

bool TcpReceiver::has(std::int64_t seq) const
{
    if (seq < rcv_nxt_) {
        return true;
    }
    auto it = ooo_.upper_bound(seq);
    if (it == ooo_.begin()) {
        return false;
    }
    --it;
    return seq < it->second;
}

Ack TcpReceiver::make_ack()
{
    Ack ack;
    ack.cum_ack = rcv_nxt_;
    auto push = [&](std::int64_t b, std::int64_t e) {
        if (ack.num_sacks < 3) {
            ack.sacks[static_cast<std::size_t>(ack.num_sacks++)] = SackBlock{b, e};
        }
    };
    std::int64_t first_begin = -1;
    if (last_ooo_seq_ >= rcv_nxt_) {
        auto it = ooo_.upper_bound(last_ooo_seq_);
        if (it != ooo_.begin()) {
            --it;
            if (last_ooo_seq_ < it->second) {
                first_begin = it->first;
                push(it->first, it->second);
            }
        }
    }
    for (auto it = ooo_.rbegin(); it != ooo_.rend() && ack.num_sacks < 3; ++it) {
        if (it->first != first_begin) {
            push(it->first, it->second);
        }
    }
    pending_ = 0;
    delack_deadline_us_.reset();
    return ack;
}

std::optional<Ack> TcpReceiver::on_data(std::int64_t seq, std::int64_t now_us)
{
    if (has(seq)) {
        return make_ack();
    }
    if (seq == rcv_nxt_) {
        const bool had_gap = !ooo_.empty();
        ++rcv_nxt_;
        if (auto it = ooo_.begin(); it != ooo_.end() && it->first == rcv_nxt_) {
            rcv_nxt_ = it->second;
            ooo_.erase(it);
        }
        if (had_gap) {
            return make_ack();
        }
        if (++pending_ >= cfg_.delayed_ack_segments) {
            return make_ack();
        }
        if (!delack_deadline_us_) {
            delack_deadline_us_ = now_us + cfg_.delayed_ack_us;
        }
        return std::nullopt;
    }
    std::int64_t begin = seq;
    std::int64_t end = seq + 1;
    if (auto it = ooo_.upper_bound(seq); it != ooo_.begin()) {
        auto prev = std::prev(it);
        if (prev->second == seq) {
            begin = prev->first;
            ooo_.erase(prev);
        }
    }
    if (auto next = ooo_.find(end); next != ooo_.end()) {
        end = next->second;
        ooo_.erase(next);
    }
    ooo_[begin] = end;
    last_ooo_seq_ = seq;
    return make_ack();
}

std::optional<Ack> TcpReceiver::on_delack_timer(std::int64_t /*now_us*/)
{
    if (pending_ == 0) {
        delack_deadline_us_.reset();
        return std::nullopt;
    }
    return make_ack();
}

}  // namespace ccstress
