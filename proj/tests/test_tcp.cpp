#include <gtest/gtest.h>

#include "ccstress/tcp.hpp"
#include "test_support.hpp"

using namespace ccstress;
using ccstress::testing::FixedWindow;
using ccstress::testing::make_ack;
using ccstress::testing::MiniPath;

namespace {

constexpr std::int64_t kMss = 1500;

TcpSender fixed_sender(std::int64_t segments, TcpConfig cfg = {})
{
    return TcpSender(cfg, std::make_unique<FixedWindow>(segments * kMss));
}

FixedWindow& cca_of(TcpSender& s) { return static_cast<FixedWindow&>(s.cca()); }

int send_all(TcpSender& s, std::int64_t now)
{
    int n = 0;
    while (s.poll_send(now)) {
        ++n;
    }
    return n;
}

}  // namespace

TEST(TcpSender, FirstSampleArithmetic)
{
    auto s = fixed_sender(1);
    ASSERT_TRUE(s.poll_send(0));
    const auto out = s.on_ack(make_ack(1), 40'000);
    ASSERT_TRUE(out.sample);
    EXPECT_EQ(out.sample->interval_us, 40'000);
    EXPECT_EQ(out.sample->delivered_delta_bytes, 1500);
    EXPECT_EQ(out.sample->prior_delivered_bytes, 0);
    EXPECT_DOUBLE_EQ(out.sample->rate_bps(), 300'000.0);
    EXPECT_EQ(*out.rtt_us, 40'000);
}

TEST(TcpSender, RttEstimatorFollowsStandardUpdate)
{
    auto s = fixed_sender(1);
    s.poll_send(0);
    s.on_ack(make_ack(1), 40'000);
    EXPECT_EQ(s.srtt_us(), 40'000);
    EXPECT_EQ(s.rttvar_us(), 20'000);
    EXPECT_EQ(s.rto_us(), 1'000'000);  // 40 + 4*20 ms is below the 1 s floor
    s.poll_send(40'000);
    s.on_ack(make_ack(2), 100'000);
    // err = 20 ms: rttvar = (3*20 + 20)/4, srtt = (7*40 + 60)/8
    EXPECT_EQ(s.rttvar_us(), 20'000);
    EXPECT_EQ(s.srtt_us(), 42'500);
}

TEST(TcpSender, RtoRespectsConfiguredFloor)
{
    TcpConfig cfg;
    cfg.min_rto_us = 200'000;
    auto s = fixed_sender(1, cfg);
    s.poll_send(0);
    s.on_ack(make_ack(1), 10'000);
    EXPECT_EQ(s.rto_us(), 200'000);
}

TEST(TcpSender, ThreeDuplicateAcksTriggerFastRetransmit)
{
    auto s = fixed_sender(5);
    ASSERT_EQ(send_all(s, 0), 5);
    EXPECT_FALSE(s.on_ack(make_ack(0), 1000).fast_retransmit);
    EXPECT_FALSE(s.on_ack(make_ack(0), 1001).fast_retransmit);
    const auto third = s.on_ack(make_ack(0), 1002);
    EXPECT_TRUE(third.duplicate);
    EXPECT_TRUE(third.fast_retransmit);
    EXPECT_EQ(s.loss_state(), LossState::Recovery);
    EXPECT_EQ(cca_of(s).losses, 1);
    const auto seg = s.poll_send(1002);
    ASSERT_TRUE(seg);
    EXPECT_EQ(seg->seq, 0);
    EXPECT_TRUE(seg->retransmission);
    EXPECT_EQ(s.counters().fast_retransmits, 1);
}

TEST(TcpSender, ThreeSackedSegmentsAboveMarkLoss)
{
    auto s = fixed_sender(5);
    send_all(s, 0);
    EXPECT_EQ(s.on_ack(make_ack(0, {{1, 2}}), 1000).newly_lost, 0);
    EXPECT_EQ(s.on_ack(make_ack(0, {{1, 3}}), 1001).newly_lost, 0);
    const auto out = s.on_ack(make_ack(0, {{1, 4}}), 1002);
    EXPECT_EQ(out.newly_lost, 1);
    EXPECT_TRUE(out.fast_retransmit);
    EXPECT_TRUE(s.entry(0).lost);
    EXPECT_FALSE(s.entry(4).lost);
}

TEST(TcpSender, RtoBacksOffExponentiallyAndCaps)
{
    auto s = fixed_sender(1);
    s.poll_send(0);
    EXPECT_EQ(*s.rto_deadline_us(), 1'000'000);
    const auto plan = s.on_rto(1'000'000);
    EXPECT_EQ(plan.lost_segments, 1);
    EXPECT_EQ(s.rto_us(), 2'000'000);
    EXPECT_EQ(*s.rto_deadline_us(), 3'000'000);
    ASSERT_TRUE(s.poll_send(1'000'000)->retransmission);
    s.on_rto(3'000'000);
    EXPECT_EQ(s.rto_us(), 4'000'000);
    EXPECT_EQ(*s.rto_deadline_us(), 7'000'000);
    for (int i = 0; i < 10; ++i) {
        s.poll_send(*s.rto_deadline_us());
        s.on_rto(*s.rto_deadline_us());
    }
    EXPECT_EQ(s.rto_us(), 60'000'000);
    EXPECT_EQ(cca_of(s).rtos, 12);
    // new cumulative data resets the backoff; no clean RTT sample exists yet
    s.on_ack(make_ack(1), 200'000'000);
    EXPECT_EQ(s.backoff(), 0);
    EXPECT_EQ(s.rto_us(), 1'000'000);
    EXPECT_FALSE(s.rto_deadline_us());
}

TEST(TcpSender, RtoRetransmitsOutstandingSegmentsSpuriously)
{
    auto s = fixed_sender(7);
    ASSERT_EQ(send_all(s, 0), 7);
    s.on_ack(make_ack(1), 40'000);
    // segment 1 lost, 2..6 delivered but their SACKs still in flight
    const auto plan = s.on_rto(1'040'000);
    EXPECT_EQ(plan.first_seq, 1);
    EXPECT_EQ(plan.lost_segments, 6);
    EXPECT_EQ(send_all(s, 1'040'000), 7);  // six retransmissions, then new segment 7
    EXPECT_EQ(s.snd_nxt(), 8);
    for (std::int64_t seq = 1; seq <= 6; ++seq) {
        const auto& e = s.entry(seq);
        EXPECT_EQ(e.retransmit_count, 1);
        EXPECT_EQ(e.sent_time_us, 1'040'000);
        EXPECT_EQ(e.prior_delivered_bytes, 1500) << seq;
        EXPECT_EQ(e.prior_delivered_time_us, 40'000);
    }
    EXPECT_EQ(s.counters().retransmissions, 6);
    EXPECT_EQ(s.check_invariants(), "");
}

// Retransmit-then-original-SACK chain after an RTO. The third link of the
// chain carries fresh send and delivery stamps, so its interval collapses.
TEST(TcpSender, SackAfterSpuriousRetransmissionGivesTinyInterval)
{
    for (bool filter : {false, true}) {
        TcpConfig cfg;
        cfg.filter_short_samples = filter;
        auto s = fixed_sender(7, cfg);
        auto& w = cca_of(s);
        send_all(s, 0);
        s.on_ack(make_ack(1), 40'000);
        s.on_rto(1'040'000);
        w.cwnd_ = kMss;
        ASSERT_EQ(send_all(s, 1'040'000), 1);  // segment 1, genuinely needed

        s.on_ack(make_ack(1, {{2, 3}}), 1'040'100);
        w.cwnd_ = 2 * kMss;
        ASSERT_EQ(s.poll_send(1'040'100)->seq, 3);  // spurious
        EXPECT_EQ(s.entry(3).prior_delivered_bytes, 3000);

        const auto low = s.on_ack(make_ack(1, {{2, 4}}), 1'040'200);
        ASSERT_TRUE(low.sample);
        EXPECT_EQ(low.sample->acked_seq, 3);
        EXPECT_EQ(low.sample->prior_delivered_bytes, 3000);
        EXPECT_EQ(low.sample->send_interval_us, 1'040'100);  // stale first-send stamp
        ASSERT_EQ(s.poll_send(1'040'200)->seq, 4);

        const auto tiny = s.on_ack(make_ack(1, {{2, 5}}), 1'040'300);
        ASSERT_TRUE(tiny.sample);
        EXPECT_EQ(tiny.sample->acked_seq, 4);
        EXPECT_TRUE(tiny.sample->is_retransmitted);
        EXPECT_EQ(tiny.sample->prior_delivered_bytes, 4500);
        EXPECT_EQ(tiny.sample->delivered_delta_bytes, 1500);
        EXPECT_EQ(tiny.sample->send_interval_us, 100);
        EXPECT_EQ(tiny.sample->ack_interval_us, 100);
        if (filter) {
            EXPECT_FALSE(tiny.sample->valid());
        } else {
            EXPECT_EQ(tiny.sample->interval_us, 100);
            EXPECT_DOUBLE_EQ(tiny.sample->rate_bps(), 120e6);  // 100x the real 1.2 Mbps
        }
        EXPECT_EQ(s.check_invariants(), "");
    }
}

TEST(TcpSender, StaleAcksAreIgnored)
{
    auto s = fixed_sender(4);
    send_all(s, 0);
    s.on_ack(make_ack(2), 1000);
    EXPECT_TRUE(s.on_ack(make_ack(1), 2000).ignored);
    EXPECT_THROW(s.on_ack(make_ack(9), 3000), std::invalid_argument);
}

TEST(TcpReceiver, DelayedAckEverySecondSegment)
{
    TcpReceiver r{TcpConfig{}};
    EXPECT_FALSE(r.on_data(0, 0));
    EXPECT_EQ(*r.delack_deadline_us(), 200'000);
    const auto a = r.on_data(1, 1000);
    ASSERT_TRUE(a);
    EXPECT_EQ(a->cum_ack, 2);
    EXPECT_EQ(a->num_sacks, 0);
    EXPECT_FALSE(r.delack_deadline_us());
}

TEST(TcpReceiver, DelayedAckTimerFlushesSingleSegment)
{
    TcpReceiver r{TcpConfig{}};
    r.on_data(0, 0);
    const auto a = r.on_delack_timer(200'000);
    ASSERT_TRUE(a);
    EXPECT_EQ(a->cum_ack, 1);
    EXPECT_FALSE(r.on_delack_timer(400'000));
}

TEST(TcpReceiver, OutOfOrderAckedImmediatelyWithSack)
{
    TcpReceiver r{TcpConfig{}};
    r.on_data(0, 0);
    auto a = r.on_data(2, 10);
    ASSERT_TRUE(a);
    EXPECT_EQ(a->cum_ack, 1);
    ASSERT_EQ(a->num_sacks, 1);
    EXPECT_EQ(a->sacks[0], (SackBlock{2, 3}));
    a = r.on_data(4, 20);
    ASSERT_EQ(a->num_sacks, 2);
    EXPECT_EQ(a->sacks[0], (SackBlock{4, 5}));  // most recent block first
    EXPECT_EQ(a->sacks[1], (SackBlock{2, 3}));
    a = r.on_data(3, 30);
    ASSERT_EQ(a->num_sacks, 1);
    EXPECT_EQ(a->sacks[0], (SackBlock{2, 5}));
    a = r.on_data(1, 40);  // fills the hole
    ASSERT_TRUE(a);
    EXPECT_EQ(a->cum_ack, 5);
    EXPECT_EQ(a->num_sacks, 0);
    a = r.on_data(2, 50);  // duplicate
    ASSERT_TRUE(a);
    EXPECT_EQ(a->cum_ack, 5);
}

TEST(TcpReceiver, AtMostThreeSackBlocks)
{
    TcpReceiver r{TcpConfig{}};
    for (std::int64_t s : {2, 4, 6, 8, 10}) {
        r.on_data(s, s);
    }
    const auto a = r.on_data(12, 12);
    EXPECT_EQ(a->num_sacks, 3);
    EXPECT_EQ(a->sacks[0], (SackBlock{12, 13}));
}

// Scoreboard accounting and delivery bookkeeping under random loss.
TEST(TcpInvariants, RandomLossKeepsScoreboardConsistent)
{
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng(seed);
        MiniPath path(TcpConfig{}, std::make_unique<FixedWindow>(20 * kMss), 1000, 20'000);
        path.drop = [&](std::int64_t, int) { return uniform01(rng) < 0.05; };
        std::int64_t last_delivered = 0;
        std::string failure;
        path.on_outcome = [&](const AckOutcome& out, std::int64_t) {
            if (out.sample && out.sample->prior_delivered_bytes > path.sender.delivered_bytes()) {
                failure = "sample prior_delivered above delivered";
            }
        };
        path.after_event = [&](std::int64_t) {
            if (auto err = path.sender.check_invariants(); !err.empty() && failure.empty()) {
                failure = err;
            }
            if (path.sender.delivered_bytes() < last_delivered) {
                failure = "delivered decreased";
            }
            last_delivered = path.sender.delivered_bytes();
            if (path.sender.snd_una() > path.receiver.rcv_nxt()) {
                failure = "acked beyond receiver";
            }
        };
        path.run_until(10'000'000);
        ASSERT_EQ(failure, "") << "seed " << seed;
        EXPECT_GT(path.sender.snd_una(), 1000);
    }
}

TEST(TcpInvariants, LosslessSamplesMatchLinkRate)
{
    MiniPath path(TcpConfig{}, std::make_unique<FixedWindow>(60 * kMss), 1000, 20'000);
    std::vector<double> rates;
    path.on_outcome = [&](const AckOutcome& out, std::int64_t now) {
        // skip the initial window, whose delivery stamps all predate the first ACK
        if (out.sample && out.sample->valid() && now > 200'000) {
            rates.push_back(out.sample->rate_bps());
        }
    };
    path.run_until(1'000'000);
    ASSERT_GE(rates.size(), 10u);
    for (std::size_t i = 0; i < 10; ++i) {
        EXPECT_NEAR(rates[i], 12e6, 0.05 * 12e6) << i;
    }
    EXPECT_EQ(path.sender.counters().retransmissions, 0);
}
