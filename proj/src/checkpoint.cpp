#include "ccstress/checkpoint.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <regex>
#include <vector>

#include "ccstress/config.hpp"
#include "ccstress/trace_io.hpp"

namespace ccstress {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kFormat = "ccstress-checkpoint";
constexpr int kVersion = 1;

// JSON has no infinities; a failed trace scores -inf, so non-finite values
// travel as strings.
json enc(double v)
{
    if (std::isfinite(v)) {
        return v;
    }
    if (std::isnan(v)) {
        return "nan";
    }
    return v > 0 ? "inf" : "-inf";
}

double dec(const json& j)
{
    if (j.is_number()) {
        return j.get<double>();
    }
    const auto s = j.get<std::string>();
    if (s == "inf") {
        return HUGE_VAL;
    }
    if (s == "-inf") {
        return -HUGE_VAL;
    }
    if (s == "nan") {
        return std::nan("");
    }
    throw CheckpointError("bad number '" + s + "'");
}

json scored_to_json(const ScoredTrace& s)
{
    json j;
    j["trace"] = trace_to_json(s.trace);
    j["scores"] = {{"performance", enc(s.performance)}, {"trace", enc(s.trace_score)},
                   {"realism", enc(s.realism)},         {"total", enc(s.total)},
                   {"digest", s.digest}};
    if (s.failed()) {
        j["scores"]["error"] = s.error;
    }
    return j;
}

ScoredTrace scored_from_json(const json& j)
{
    ScoredTrace s;
    s.trace = trace_from_json(j.at("trace"));
    const auto& sc = j.at("scores");
    s.performance = dec(sc.at("performance"));
    s.trace_score = dec(sc.at("trace"));
    s.realism = dec(sc.at("realism"));
    s.total = dec(sc.at("total"));
    s.digest = sc.at("digest").get<std::uint64_t>();
    if (sc.contains("error")) {
        s.error = sc.at("error").get<std::string>();
    }
    return s;
}

}  // namespace

json checkpoint_to_json(const CampaignConfig& cfg, const CampaignState& state)
{
    json j;
    j["format"] = kFormat;
    j["version"] = kVersion;
    j["gen_index"] = state.generation;
    json c = json::object();
    for (const auto& [k, v] : config_entries(cfg)) {
        c[k] = v;
    }
    j["config"] = std::move(c);
    j["progress"] = {{"best_total", enc(state.best_total)},
                     {"stale_gens", state.stale_gens},
                     {"converged", state.converged}};
    json islands = json::array();
    for (const auto& isl : state.islands) {
        json ji;
        ji["seed"] = isl.seed;
        ji["generation"] = isl.generation;
        json traces = json::array();
        for (const auto& s : isl.population) {
            traces.push_back(scored_to_json(s));
        }
        ji["traces"] = std::move(traces);
        islands.push_back(std::move(ji));
    }
    j["islands"] = std::move(islands);
    json series = json::array();
    for (const auto& r : state.series) {
        series.push_back(json::array({r.generation, r.island, enc(r.best), enc(r.mean), enc(r.top20_mean)}));
    }
    j["series"] = std::move(series);
    return j;
}

Checkpoint checkpoint_from_json(const json& j)
{
    Checkpoint cp;
    try {
        if (j.at("format").get<std::string>() != kFormat) {
            throw CheckpointError("not a checkpoint file");
        }
        if (j.at("version").get<int>() != kVersion) {
            throw CheckpointError("unsupported checkpoint version");
        }
        for (const auto& [k, v] : j.at("config").items()) {
            set_config_value(cp.config, k, v.get<std::string>());
        }
        validate_config(cp.config);
        auto& st = cp.state;
        st.generation = j.at("gen_index").get<int>();
        const auto& pr = j.at("progress");
        st.best_total = dec(pr.at("best_total"));
        st.stale_gens = pr.at("stale_gens").get<int>();
        st.converged = pr.at("converged").get<bool>();
        const TraceMode mode = trace_mode_for(cp.config.sim.mode);
        for (const auto& ji : j.at("islands")) {
            Island isl;
            isl.seed = ji.at("seed").get<std::uint64_t>();
            isl.generation = ji.at("generation").get<int>();
            if (isl.generation != st.generation) {
                throw CheckpointError("island generation does not match gen_index");
            }
            for (const auto& jt : ji.at("traces")) {
                isl.population.push_back(scored_from_json(jt));
                const auto& t = isl.population.back().trace;
                if (t.mode != mode || t.duration_us != cp.config.sim.duration_us) {
                    throw CheckpointError("trace does not match the configured mode or duration");
                }
            }
            if (static_cast<int>(isl.population.size()) != cp.config.ga.island_size()) {
                throw CheckpointError("island population size does not match the configuration");
            }
            st.islands.push_back(std::move(isl));
        }
        if (static_cast<int>(st.islands.size()) != cp.config.ga.num_islands) {
            throw CheckpointError("island count does not match the configuration");
        }
        for (const auto& r : j.at("series")) {
            st.series.push_back(SeriesRow{r.at(0).get<int>(), r.at(1).get<int>(), dec(r.at(2)), dec(r.at(3)),
                                          dec(r.at(4))});
        }
    } catch (const CheckpointError&) {
        throw;
    } catch (const std::exception& e) {
        throw CheckpointError(std::string("corrupt checkpoint: ") + e.what());
    }
    return cp;
}

std::string checkpoint_file_name(int generation)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "gen_%06d.json", generation);
    return buf;
}

namespace {

std::vector<std::pair<int, fs::path>> list_checkpoints(const fs::path& dir)
{
    static const std::regex re(R"(gen_(\d{6,})\.json)");
    std::vector<std::pair<int, fs::path>> out;
    if (!fs::is_directory(dir)) {
        return out;
    }
    for (const auto& e : fs::directory_iterator(dir)) {
        std::smatch m;
        const auto name = e.path().filename().string();
        if (e.is_regular_file() && std::regex_match(name, m, re)) {
            out.emplace_back(std::stoi(m[1].str()), e.path());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

fs::path write_checkpoint(const fs::path& dir, const CampaignConfig& cfg, const CampaignState& state)
{
    fs::create_directories(dir);
    const fs::path path = dir / checkpoint_file_name(state.generation);
    const fs::path tmp = dir / (checkpoint_file_name(state.generation) + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << checkpoint_to_json(cfg, state).dump() << '\n';
        if (!out) {
            throw std::runtime_error("cannot write " + tmp.string());
        }
    }
    fs::rename(tmp, path);
    if (cfg.keep_checkpoints > 0) {
        auto all = list_checkpoints(dir);
        const auto keep = static_cast<std::size_t>(cfg.keep_checkpoints);
        for (std::size_t i = 0; i + keep < all.size(); ++i) {
            fs::remove(all[i].second);
        }
    }
    return path;
}

std::optional<fs::path> latest_checkpoint(const fs::path& dir)
{
    auto all = list_checkpoints(dir);
    if (all.empty()) {
        return std::nullopt;
    }
    return all.back().second;
}

Checkpoint load_checkpoint(const fs::path& path)
{
    fs::path file = path;
    if (fs::is_directory(path)) {
        auto latest = latest_checkpoint(path);
        if (!latest) {
            latest = latest_checkpoint(path / "checkpoints");
        }
        if (!latest) {
            throw CheckpointError("no checkpoint found in " + path.string());
        }
        file = *latest;
    }
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw CheckpointError("cannot open " + file.string());
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw CheckpointError(file.string() + ": " + e.what());
    }
    return checkpoint_from_json(j);
}

}  // namespace ccstress
