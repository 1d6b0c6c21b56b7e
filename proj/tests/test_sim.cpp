#include <gtest/gtest.h>

#include "ccstress/sim.hpp"
#include "ccstress/tracegen.hpp"
#include "test_support.hpp"

using namespace ccstress;

namespace {

PacketTrace traffic(std::vector<std::int64_t> ts, std::int64_t dur = 30'000'000)
{
    PacketTrace t;
    t.mode = TraceMode::Traffic;
    t.duration_us = dur;
    t.packet_budget = static_cast<std::int64_t>(ts.size());
    t.timestamps_us = std::move(ts);
    return t;
}

SimConfig config(CcaKind kind, std::int64_t dur = 30'000'000)
{
    SimConfig c;
    c.cca.kind = kind;
    c.duration_us = dur;
    return c;
}

void expect_conserved(const FlowStats& f)
{
    EXPECT_EQ(f.sent, f.delivered + f.dropped + f.in_flight_at_end());
}

}  // namespace

TEST(Sim, PacketConservationOnRandomTraces)
{
    GenParams p;
    for (std::uint64_t seed = 1; seed <= 12; ++seed) {
        Rng rng(seed);
        const auto kind = static_cast<CcaKind>(seed % 3);
        auto cfg = config(kind, 10'000'000);
        const auto t = gen_initial_traffic_trace(8000, cfg.duration_us, p, rng);
        const auto r = run_sim(cfg, t);
        expect_conserved(r.sender);
        expect_conserved(r.cross);
        EXPECT_EQ(r.cross.sent, static_cast<std::int64_t>(t.size()));
        EXPECT_LE(r.max_queue_occupancy, cfg.queue_capacity_pkts);

        cfg.mode = FuzzMode::LinkFuzz;
        const auto l = gen_initial_link_trace(800.0, cfg.duration_us, p, rng);
        const auto rl = run_sim(cfg, l);
        expect_conserved(rl.sender);
        EXPECT_EQ(rl.cross.sent, 0);
        EXPECT_LE(rl.goodput_segments, static_cast<std::int64_t>(l.size()));
    }
}

TEST(Sim, DeterministicForSameInputs)
{
    GenParams p;
    Rng rng(4);
    const auto t = gen_initial_traffic_trace(5000, 30'000'000, p, rng);
    for (auto kind : {CcaKind::Reno, CcaKind::Cubic, CcaKind::Bbr}) {
        const auto a = run_sim(config(kind), t);
        const auto b = run_sim(config(kind), t);
        EXPECT_EQ(a.digest(), b.digest());
        EXPECT_EQ(a.deliveries.size(), b.deliveries.size());
    }
}

TEST(Sim, UniformLinkTraceMatchesConstantRateLink)
{
    PacketTrace link;
    link.mode = TraceMode::Link;
    link.duration_us = 30'000'000;
    for (std::int64_t i = 0; i < 30'000; ++i) {
        link.timestamps_us.push_back(i * 1000);
    }
    link.packet_budget = 30'000;
    for (auto kind : {CcaKind::Reno, CcaKind::Cubic, CcaKind::Bbr}) {
        auto cfg = config(kind);
        const auto constant = run_sim(cfg, traffic({}));
        cfg.mode = FuzzMode::LinkFuzz;
        const auto uniform = run_sim(cfg, link);
        EXPECT_DOUBLE_EQ(uniform.capacity_bps, 12e6);
        EXPECT_NEAR(uniform.utilization(), constant.utilization(), 0.01) << to_string(kind);
    }
}

TEST(Sim, BaselineUtilizationAboveEightyFivePercent)
{
    for (auto kind : {CcaKind::Reno, CcaKind::Cubic, CcaKind::Bbr}) {
        const auto r = run_sim(config(kind), traffic({}));
        EXPECT_GE(r.utilization(), 0.85) << to_string(kind);
        EXPECT_DOUBLE_EQ(r.capacity_bps, 12e6);
    }
}

TEST(Sim, BurstOverflowingQueueDropsCrossTraffic)
{
    const auto r = run_sim(config(CcaKind::Reno, 5'000'000), traffic(std::vector<std::int64_t>(60, 2'000'000), 5'000'000));
    EXPECT_GE(r.cross.dropped, 10);
    EXPECT_EQ(r.max_queue_occupancy, 50);
}

TEST(Sim, ModeAndDurationMismatchRejected)
{
    auto cfg = config(CcaKind::Reno, 5'000'000);
    EXPECT_THROW(run_sim(cfg, traffic({}, 6'000'000)), std::invalid_argument);
    PacketTrace link;
    link.mode = TraceMode::Link;
    link.duration_us = 5'000'000;
    EXPECT_THROW(run_sim(cfg, link), std::invalid_argument);
}

TEST(Sim, CustomCcaRuns)
{
    const auto r = run_sim(config(CcaKind::Reno, 2'000'000), traffic({}, 2'000'000),
                           std::make_unique<ccstress::testing::FixedWindow>(20 * 1500));
    EXPECT_EQ(r.cca_name, "fixed");
    // 20 segments per ~40 ms RTT, about 6 Mbps
    EXPECT_NEAR(r.utilization(), 0.5, 0.08);
}

TEST(Sim, DelaysIncludePropagationAndQueueing)
{
    const auto r = run_sim(config(CcaKind::Reno, 3'000'000), traffic({}, 3'000'000));
    ASSERT_FALSE(r.deliveries.empty());
    for (const auto& d : r.deliveries) {
        // access + serialization + propagation at least, plus at most a full queue
        ASSERT_GE(d.delay_us, 100 + 1000 + 20'000);
        ASSERT_LE(d.delay_us, 100 + 51 * 1000 + 20'000);
    }
}

TEST(WindowedThroughput, HandComputedWindows)
{
    SimResult r;
    r.duration_us = 2'500'000;
    r.mtu_bytes = 1500;
    for (int i = 0; i < 1000; ++i) {
        r.deliveries.push_back({i * 1000, 0, i, true});  // 12 Mbps in the first second
    }
    for (int i = 0; i < 100; ++i) {
        r.deliveries.push_back({2'000'000 + i * 1000, 0, 1000 + i, true});
    }
    r.deliveries.push_back({2'400'000, 0, 5, false});  // duplicate copy, not goodput
    const auto w = windowed_throughput(r, 1'000'000);
    ASSERT_EQ(w.size(), 3u);
    EXPECT_DOUBLE_EQ(w[0], 12.0);
    EXPECT_DOUBLE_EQ(w[1], 0.0);
    EXPECT_DOUBLE_EQ(w[2], 100 * 1500 * 8 / 500'000.0);  // short last window
    EXPECT_THROW(windowed_throughput(r, 0), std::invalid_argument);
}

TEST(SimCsv, DocumentedHeaders)
{
    auto cfg = config(CcaKind::Bbr, 1'000'000);
    cfg.record_events = true;
    const auto r = run_sim(cfg, traffic({500'000}, 1'000'000));
    auto first_line = [](const std::string& s) { return s.substr(0, s.find('\n')); };
    EXPECT_EQ(first_line(throughput_csv(r, 500'000)), "window_start_us,window_end_us,throughput_mbps");
    EXPECT_EQ(first_line(delays_csv(r)), "arrival_us,seq,delay_us,fresh");
    EXPECT_EQ(first_line(queue_csv(r)), "time_us,occupancy_pkts");
    EXPECT_EQ(first_line(events_csv(r)), "time_us,source,event,seq,value,detail");
    EXPECT_FALSE(r.events.empty());
}
