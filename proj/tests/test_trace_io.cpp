#include <gtest/gtest.h>

#include <filesystem>

#include "ccstress/trace_io.hpp"
#include "ccstress/tracegen.hpp"

using namespace ccstress;

namespace {

PacketTrace link_trace(std::vector<std::int64_t> ts, std::int64_t dur)
{
    PacketTrace t;
    t.mode = TraceMode::Link;
    t.duration_us = dur;
    t.packet_budget = static_cast<std::int64_t>(ts.size());
    t.timestamps_us = std::move(ts);
    return t;
}

}  // namespace

TEST(Mahimahi, RoundsToNearestMillisecond)
{
    EXPECT_EQ(write_mahimahi(link_trace({1000, 1400, 2700}, 1'000'000)), "1\n1\n3\n");
}

TEST(Mahimahi, RefusesTrafficTraces)
{
    PacketTrace t;
    t.mode = TraceMode::Traffic;
    t.duration_us = 1'000'000;
    EXPECT_THROW(write_mahimahi(t), std::invalid_argument);
}

TEST(Mahimahi, MillisecondAlignedRoundTripIsIdentity)
{
    const auto t = link_trace({0, 1000, 1000, 5000, 999'000}, 2'000'000);
    EXPECT_EQ(parse_mahimahi(write_mahimahi(t), 2'000'000), t);
}

TEST(Mahimahi, RoundTripKeepsCountAndMsPrecision)
{
    GenParams p;
    Rng rng(12);
    const auto t = gen_initial_link_trace(1000.0, 3'000'000, p, rng);
    const auto back = parse_mahimahi(write_mahimahi(t), t.duration_us);
    ASSERT_EQ(back.size(), t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        EXPECT_LE(std::llabs(back.timestamps_us[i] - t.timestamps_us[i]), 500);
    }
}

TEST(Mahimahi, DefaultDurationIsNextWholeSecond)
{
    EXPECT_EQ(parse_mahimahi("1\n2500\n").duration_us, 3'000'000);
    EXPECT_EQ(parse_mahimahi("3000\n").duration_us, 4'000'000);
    EXPECT_EQ(parse_mahimahi("").duration_us, 1'000'000);
}

TEST(Mahimahi, ParseErrorsCarryLineNumbers)
{
    try {
        parse_mahimahi("1\n2\nabc\n");
        FAIL() << "expected a parse error";
    } catch (const TraceParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
    try {
        parse_mahimahi("5\n4\n");
        FAIL() << "expected a parse error";
    } catch (const TraceParseError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
    EXPECT_THROW(parse_mahimahi("-1\n"), TraceParseError);
}

TEST(TraceJson, RoundTrip)
{
    GenParams p;
    Rng rng(3);
    const auto link = gen_initial_link_trace(500.0, 2'000'000, p, rng);
    const auto traffic = gen_initial_traffic_trace(700, 2'000'000, p, rng);
    EXPECT_EQ(parse_trace_json(write_trace_json(link)), link);
    EXPECT_EQ(parse_trace_json(write_trace_json(traffic)), traffic);
}

TEST(TraceJson, MalformedInputReportsLine)
{
    try {
        parse_trace_json("{\n\"mode\": \"link\",\n\"duration_us\": ,\n}");
        FAIL() << "expected a parse error";
    } catch (const TraceParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
}

TEST(TraceJson, RejectsInvalidTraces)
{
    EXPECT_THROW(parse_trace_json(R"({"mode":"link","duration_us":100,"packet_budget":2,"timestamps_us":[5,3]})"),
                 TraceParseError);
    EXPECT_THROW(parse_trace_json(R"({"mode":"link","duration_us":100,"packet_budget":1,"timestamps_us":[101]})"),
                 TraceParseError);
    EXPECT_THROW(parse_trace_json(R"({"mode":"traffic","duration_us":100,"packet_budget":1,"timestamps_us":[1,2]})"),
                 TraceParseError);
    EXPECT_THROW(parse_trace_json(R"({"mode":"wifi","duration_us":100,"packet_budget":0,"timestamps_us":[]})"),
                 TraceParseError);
    EXPECT_THROW(parse_trace_json(R"({"mode":"link"})"), TraceParseError);
}

TEST(TraceFiles, LoadDetectsFormat)
{
    const auto dir = std::filesystem::temp_directory_path() / "ccstress_trace_io_test";
    std::filesystem::create_directories(dir);
    const auto t = link_trace({1000, 2000, 3000}, 1'000'000);
    save_text_file(dir / "a.json", write_trace_json(t));
    save_text_file(dir / "a.mahimahi", write_mahimahi(t));
    EXPECT_EQ(load_trace_file(dir / "a.json"), t);
    EXPECT_EQ(load_trace_file(dir / "a.mahimahi").timestamps_us, t.timestamps_us);
    EXPECT_THROW(load_trace_file(dir / "missing.json"), std::runtime_error);
    std::filesystem::remove_all(dir);
}
