#include <gtest/gtest.h>

#include "ccstress/config.hpp"

using namespace ccstress;

namespace {

std::string field_of(const std::function<void()>& f)
{
    try {
        f();
    } catch (const ConfigError& e) {
        return e.field();
    }
    return "<no error>";
}

}  // namespace

TEST(Config, DefaultsMatchReferenceSetup)
{
    const CampaignConfig c;
    EXPECT_EQ(c.ga.population_size, 500);
    EXPECT_EQ(c.ga.num_islands, 20);
    EXPECT_EQ(c.sim.tcp.min_rto_us, 1'000'000);
    EXPECT_EQ(c.sim.queue_capacity_pkts, 50);
    EXPECT_EQ(c.sim.duration_us, 30'000'000);
    EXPECT_NO_THROW(validate_config(c));
}

TEST(Config, TextRoundTrip)
{
    auto c = parse_config("# campaign\n"
                          "ga.population_size = 50\n"
                          "ga.num_islands=5   # trailing comment\n"
                          "ga.lambda = 0.0025\n"
                          "ga.realism_ccas = reno, bbr\n"
                          "sim.mode = link\n"
                          "cca.kind = bbr\n"
                          "cca.bbr_patched = yes\n"
                          "\n"
                          "seed = 7\n");
    EXPECT_EQ(c.ga.population_size, 50);
    EXPECT_EQ(c.ga.num_islands, 5);
    EXPECT_DOUBLE_EQ(c.ga.lambda, 0.0025);
    EXPECT_EQ(c.ga.realism_ccas, (std::vector<std::string>{"reno", "bbr"}));
    EXPECT_EQ(c.sim.mode, FuzzMode::LinkFuzz);
    EXPECT_EQ(c.sim.cca.kind, CcaKind::Bbr);
    EXPECT_TRUE(c.sim.cca.bbr_patched);
    EXPECT_EQ(c.seed, 7u);
    const auto again = parse_config(config_to_text(c));
    EXPECT_TRUE(again == c);
    EXPECT_EQ(config_to_text(again), config_to_text(c));
}

TEST(Config, ThreadsAcceptedButNotSerialized)
{
    auto c = parse_config("ga.threads = 4\n");
    EXPECT_EQ(c.ga.threads, 4);
    EXPECT_EQ(config_to_text(c).find("threads"), std::string::npos);
}

TEST(Config, ErrorsNameTheField)
{
    CampaignConfig c;
    EXPECT_EQ(field_of([&] { set_config_value(c, "ga.population_size", "many"); }), "ga.population_size");
    EXPECT_EQ(field_of([&] { set_config_value(c, "ga.lambda", "1e-3x"); }), "ga.lambda");
    EXPECT_EQ(field_of([&] { set_config_value(c, "ga.anneal", "maybe"); }), "ga.anneal");
    EXPECT_EQ(field_of([&] { set_config_value(c, "cca.kind", "vegas"); }), "cca.kind");
    EXPECT_EQ(field_of([&] { set_config_value(c, "sim.mode", "both"); }), "sim.mode");
    EXPECT_EQ(field_of([&] { set_config_value(c, "ga.score", "fast"); }), "ga.score");
    EXPECT_EQ(field_of([&] { set_config_value(c, "sim.colour", "red"); }), "sim.colour");
}

TEST(Config, MalformedLineReportsLineNumber)
{
    try {
        parse_config("seed = 1\n\nga.population_size 50\n");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
}

TEST(Config, ValidationNamesTheField)
{
    auto c = parse_config("ga.population_size = 51\nga.num_islands = 5\n");
    EXPECT_EQ(field_of([&] { validate_config(c); }), "ga.population_size");
    c = parse_config("ga.k_elite = 100\n");
    EXPECT_EQ(field_of([&] { validate_config(c); }), "ga.k_elite");
    c = parse_config("ga.realism_weight = 0.5\nga.realism_ccas = reno\n");
    EXPECT_EQ(field_of([&] { validate_config(c); }), "ga.realism_ccas");
    c = parse_config("ga.realism_weight = 0.5\nga.realism_ccas = reno,tahoe\n");
    EXPECT_THROW(validate_config(c), ConfigError);
}
