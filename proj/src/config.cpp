#include "ccstress/config.hpp"

#include <charconv>
#include <cstdio>
#include <functional>
#include <sstream>

namespace ccstress {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class Int>
Int parse_int(const std::string& key, const std::string& v)
{
    Int out{};
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end) {
        throw ConfigError(key, "expected an integer, got '" + v + "'");
    }
    return out;
}

double parse_double(const std::string& key, const std::string& v)
{
    if (v.empty()) {
        throw ConfigError(key, "expected a number, got ''");
    }
    char* end = nullptr;
    const double d = std::strtod(v.c_str(), &end);
    if (end != v.c_str() + v.size()) {
        throw ConfigError(key, "expected a number, got '" + v + "'");
    }
    return d;
}

bool parse_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1" || v == "yes" || v == "on") {
        return true;
    }
    if (v == "false" || v == "0" || v == "no" || v == "off") {
        return false;
    }
    throw ConfigError(key, "expected true or false, got '" + v + "'");
}

// shortest %g form that reads back to the same double
std::string fmt(double d)
{
    char buf[40];
    for (int prec = 6; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, d);
        if (std::strtod(buf, nullptr) == d) {
            break;
        }
    }
    return buf;
}

std::string fmt(bool b) { return b ? "true" : "false"; }

std::string join(const std::vector<std::string>& v)
{
    std::string out;
    for (const auto& s : v) {
        out += out.empty() ? s : "," + s;
    }
    return out;
}

std::vector<std::string> split_list(const std::string& v)
{
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

struct Field {
    const char* key;
    std::function<std::string(const CampaignConfig&)> get;
    std::function<void(CampaignConfig&, const std::string& key, const std::string&)> set;
};

#define INT_FIELD(KEY, EXPR)                                                                                \
    Field{KEY, [](const CampaignConfig& c) { return std::to_string(c.EXPR); },                             \
          [](CampaignConfig& c, const std::string& k, const std::string& v) {                               \
              c.EXPR = parse_int<std::remove_reference_t<decltype(c.EXPR)>>(k, v);                          \
          }}
#define DBL_FIELD(KEY, EXPR)                                                                                \
    Field{KEY, [](const CampaignConfig& c) { return fmt(c.EXPR); },                                        \
          [](CampaignConfig& c, const std::string& k, const std::string& v) { c.EXPR = parse_double(k, v); }}
#define BOOL_FIELD(KEY, EXPR)                                                                               \
    Field{KEY, [](const CampaignConfig& c) { return fmt(c.EXPR); },                                        \
          [](CampaignConfig& c, const std::string& k, const std::string& v) { c.EXPR = parse_bool(k, v); }}

const std::vector<Field>& fields()
{
    static const std::vector<Field> table = {
        INT_FIELD("seed", seed),
        INT_FIELD("keep_checkpoints", keep_checkpoints),

        INT_FIELD("ga.population_size", ga.population_size),
        INT_FIELD("ga.num_islands", ga.num_islands),
        DBL_FIELD("ga.migration_fraction", ga.migration_fraction),
        INT_FIELD("ga.migration_interval_gens", ga.migration_interval_gens),
        INT_FIELD("ga.k_elite", ga.k_elite),
        DBL_FIELD("ga.crossover_fraction", ga.crossover_fraction),
        DBL_FIELD("ga.lambda", ga.lambda),
        DBL_FIELD("ga.drop_weight", ga.drop_weight),
        Field{"ga.score",
              [](const CampaignConfig& c) { return std::string(to_string(c.ga.score_kind)); },
              [](CampaignConfig& c, const std::string& k, const std::string& v) {
                  try {
                      c.ga.score_kind = score_kind_from_string(v);
                  } catch (const std::invalid_argument& e) {
                      throw ConfigError(k, e.what());
                  }
              }},
        DBL_FIELD("ga.low_fraction", ga.low_fraction),
        INT_FIELD("ga.max_generations", ga.max_generations),
        INT_FIELD("ga.patience_gens", ga.patience_gens),
        BOOL_FIELD("ga.anneal", ga.anneal),
        DBL_FIELD("ga.anneal_sigma_us", ga.anneal_sigma_us),
        INT_FIELD("ga.max_cross_packets", ga.max_cross_packets),
        Field{"ga.realism_ccas", [](const CampaignConfig& c) { return join(c.ga.realism_ccas); },
              [](CampaignConfig& c, const std::string&, const std::string& v) { c.ga.realism_ccas = split_list(v); }},
        DBL_FIELD("ga.realism_weight", ga.realism_weight),
        INT_FIELD("ga.realism_every", ga.realism_every),

        Field{"sim.mode", [](const CampaignConfig& c) { return std::string(to_string(c.sim.mode)); },
              [](CampaignConfig& c, const std::string& k, const std::string& v) {
                  try {
                      c.sim.mode = fuzz_mode_from_string(v);
                  } catch (const std::invalid_argument& e) {
                      throw ConfigError(k, e.what());
                  }
              }},
        DBL_FIELD("sim.bottleneck_rate_pps", sim.bottleneck_rate_pps),
        INT_FIELD("sim.prop_delay_us", sim.prop_delay_us),
        INT_FIELD("sim.access_delay_us", sim.access_delay_us),
        INT_FIELD("sim.queue_capacity_pkts", sim.queue_capacity_pkts),
        INT_FIELD("sim.duration_us", sim.duration_us),
        INT_FIELD("sim.mtu_bytes", sim.mtu_bytes),
        INT_FIELD("sim.sender_start_us", sim.sender_start_us),
        INT_FIELD("sim.rng_seed", sim.rng_seed),
        INT_FIELD("sim.throughput_window_us", sim.throughput_window_us),
        INT_FIELD("sim.queue_sample_us", sim.queue_sample_us),
        INT_FIELD("sim.min_rto_us", sim.tcp.min_rto_us),
        INT_FIELD("sim.max_rto_us", sim.tcp.max_rto_us),
        INT_FIELD("sim.initial_rto_us", sim.tcp.initial_rto_us),
        INT_FIELD("sim.delayed_ack_us", sim.tcp.delayed_ack_us),
        INT_FIELD("sim.delayed_ack_segments", sim.tcp.delayed_ack_segments),
        INT_FIELD("sim.dupack_threshold", sim.tcp.dupack_threshold),
        BOOL_FIELD("sim.filter_short_samples", sim.tcp.filter_short_samples),

        Field{"cca.kind", [](const CampaignConfig& c) { return std::string(to_string(c.sim.cca.kind)); },
              [](CampaignConfig& c, const std::string& k, const std::string& v) {
                  try {
                      c.sim.cca.kind = cca_kind_from_string(v);
                  } catch (const std::invalid_argument& e) {
                      throw ConfigError(k, e.what());
                  }
              }},
        BOOL_FIELD("cca.cubic_buggy", sim.cca.cubic_buggy),
        BOOL_FIELD("cca.bbr_patched", sim.cca.bbr_patched),
        INT_FIELD("cca.initial_cwnd_pkts", sim.cca.initial_cwnd_pkts),

        INT_FIELD("gen.k_agg_us", gen.k_agg_us),
        DBL_FIELD("gen.rate_low", gen.rate_low),
        DBL_FIELD("gen.rate_high", gen.rate_high),
        INT_FIELD("gen.max_split_retries", gen.max_split_retries),
    };
    return table;
}

#undef INT_FIELD
#undef DBL_FIELD
#undef BOOL_FIELD

}  // namespace

void set_config_value(CampaignConfig& cfg, const std::string& key, const std::string& value)
{
    if (key == "ga.threads") {
        cfg.ga.threads = parse_int<int>(key, value);
        return;
    }
    for (const auto& f : fields()) {
        if (key == f.key) {
            f.set(cfg, key, value);
            return;
        }
    }
    throw ConfigError(key, "unknown configuration key");
}

std::vector<std::pair<std::string, std::string>> config_entries(const CampaignConfig& cfg)
{
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& f : fields()) {
        out.emplace_back(f.key, f.get(cfg));
    }
    return out;
}

void apply_config_text(CampaignConfig& cfg, const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("", "line " + std::to_string(lineno) + ": expected key = value");
        }
        set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

CampaignConfig parse_config(const std::string& text)
{
    CampaignConfig cfg;
    apply_config_text(cfg, text);
    return cfg;
}

std::string config_to_text(const CampaignConfig& cfg)
{
    std::string out;
    for (const auto& [k, v] : config_entries(cfg)) {
        out += k + " = " + v + "\n";
    }
    return out;
}

void validate_config(const CampaignConfig& cfg)
{
    try {
        cfg.check();
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        const auto sp = msg.find(' ');
        std::string field = msg.substr(0, sp);
        if (field.find('.') == std::string::npos) {
            field.clear();
        }
        throw ConfigError(field, msg);
    }
}

}  // namespace ccstress
