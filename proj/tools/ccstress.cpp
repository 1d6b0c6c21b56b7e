// ccstress command line: fuzz, resume, replay, export, report.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ccstress/artifacts.hpp"
#include "ccstress/checkpoint.hpp"
#include "ccstress/config.hpp"
#include "ccstress/fuzzer.hpp"
#include "ccstress/sim.hpp"
#include "ccstress/trace_io.hpp"

namespace fs = std::filesystem;
using namespace ccstress;

namespace {

enum Exit { kOk = 0, kConfig = 1, kRuntime = 2, kCheckpoint = 3 };

// Shortcut flags; each maps onto one config key and is applied after the
// config file, before --set.
struct ConfigOpts {
    std::string config_file;
    std::vector<std::string> sets;
    std::optional<std::string> mode, cca, score;
    std::optional<std::uint64_t> seed;
    std::optional<int> pop, islands, gens, threads;
    std::optional<double> crossover_frac;
    std::optional<std::int64_t> max_cross;
    bool cubic_buggy = false;
    bool bbr_patched = false;
    bool anneal = false;
    mutable bool crossover_explicit = false;

    void add_to(CLI::App* app, bool campaign)
    {
        app->add_option("-c,--config", config_file, "key = value configuration file")->check(CLI::ExistingFile);
        app->add_option("--set", sets, "override one key, e.g. --set ga.lambda=0.002 (repeatable)");
        app->add_option("--mode", mode, "link or traffic");
        app->add_option("--cca", cca, "reno, cubic or bbr");
        app->add_flag("--cubic-buggy", cubic_buggy, "CUBIC without the slow-start clamp");
        app->add_flag("--bbr-patched", bbr_patched, "BBR entering ProbeRTT on RTO");
        if (campaign) {
            app->add_option("--seed", seed, "campaign seed");
            app->add_option("--pop", pop, "population size");
            app->add_option("--islands", islands, "number of islands");
            app->add_option("--gens", gens, "maximum generations");
            app->add_option("--crossover-frac", crossover_frac, "share of crossovers (traffic mode)");
            app->add_option("--score", score, "low_utilization or high_delay");
            app->add_option("--max-cross", max_cross, "cross-traffic packet budget");
            app->add_flag("--anneal", anneal, "smooth every new trace");
            app->add_option("--threads", threads, "evaluation threads (default: $CCSTRESS_THREADS or all cores)");
        }
    }

    CampaignConfig build() const
    {
        CampaignConfig cfg;
        crossover_explicit = crossover_frac.has_value();
        if (!config_file.empty()) {
            const auto text = read_text_file(config_file);
            crossover_explicit |= text.find("ga.crossover_fraction") != std::string::npos;
            apply_config_text(cfg, text);
        }
        auto set = [&](const char* key, const std::string& v) { set_config_value(cfg, key, v); };
        if (mode) set("sim.mode", *mode);
        if (cca) set("cca.kind", *cca);
        if (cubic_buggy) set("cca.cubic_buggy", "true");
        if (bbr_patched) set("cca.bbr_patched", "true");
        if (seed) set("seed", std::to_string(*seed));
        if (pop) set("ga.population_size", std::to_string(*pop));
        if (islands) set("ga.num_islands", std::to_string(*islands));
        if (gens) set("ga.max_generations", std::to_string(*gens));
        if (crossover_frac) set("ga.crossover_fraction", std::to_string(*crossover_frac));
        if (score) set("ga.score", *score);
        if (max_cross) set("ga.max_cross_packets", std::to_string(*max_cross));
        if (anneal) set("ga.anneal", "true");
        for (const auto& kv : sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) {
                throw ConfigError(kv, "--set expects key=value");
            }
            crossover_explicit |= kv.substr(0, eq) == "ga.crossover_fraction";
            set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (threads) {
            cfg.ga.threads = *threads;
        } else if (cfg.ga.threads == 0) {
            cfg.ga.threads = env_threads();
        }
        return cfg;
    }

    static int env_threads()
    {
        if (const char* t = std::getenv("CCSTRESS_THREADS")) {
            try {
                return std::max(0, std::stoi(t));
            } catch (const std::exception&) {
                throw ConfigError("CCSTRESS_THREADS", std::string("not an integer: '") + t + "'");
            }
        }
        return 0;
    }
};

fs::path default_output_dir(const std::string& fallback)
{
    if (const char* d = std::getenv("CCSTRESS_OUTPUT_DIR"); d && *d) {
        return d;
    }
    return fallback;
}

void progress(const CampaignState& st, const CampaignConfig& cfg, std::chrono::steady_clock::time_point t0)
{
    const auto& row = st.series.back();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::fprintf(stderr, "gen %d/%d best %.6g mean %.6g top20 %.6g (%.1fs)\n", st.generation,
                 cfg.ga.max_generations, row.best, row.mean, row.top20_mean, secs);
}

int drive_campaign(const CampaignConfig& cfg, const fs::path& out, std::optional<CampaignState> resume, bool quiet)
{
    const CampaignPaths paths{out};
    fs::create_directories(out);
    save_text_file(paths.config(), config_to_text(cfg));
    const auto t0 = std::chrono::steady_clock::now();
    auto hook = [&](const CampaignState& st) {
        write_generation(paths, cfg, st);
        if (!quiet) {
            progress(st, cfg, t0);
        }
    };
    const auto state = run_campaign(cfg, hook, std::move(resume));
    write_final_artifacts(paths, cfg, state);
    std::cout << campaign_summary(cfg, state);
    std::cout << "artifacts in " << out.string() << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"ccstress: genetic search for network traces that hurt congestion control"};
    app.require_subcommand(1);

    // fuzz
    auto* fuzz = app.add_subcommand("fuzz", "run a fuzzing campaign");
    ConfigOpts fuzz_opts;
    fuzz_opts.add_to(fuzz, true);
    std::string fuzz_out;
    bool quiet = false;
    fuzz->add_option("-o,--out", fuzz_out, "output directory (default: $CCSTRESS_OUTPUT_DIR or ccstress_out)");
    fuzz->add_flag("-q,--quiet", quiet, "no per-generation progress");

    // resume
    auto* resume = app.add_subcommand("resume", "continue a campaign from its latest checkpoint");
    std::string resume_from, resume_out;
    std::optional<int> resume_gens, resume_threads;
    resume->add_option("from", resume_from, "campaign directory or checkpoint file")->required();
    resume->add_option("-o,--out", resume_out, "output directory (default: the campaign directory)");
    resume->add_option("--gens", resume_gens, "new maximum generation count");
    resume->add_option("--threads", resume_threads, "evaluation threads");
    resume->add_flag("-q,--quiet", quiet, "no per-generation progress");

    // replay
    auto* replay = app.add_subcommand("replay", "simulate one trace with full event logging");
    ConfigOpts replay_opts;
    replay_opts.add_to(replay, false);
    std::string replay_trace, replay_out;
    std::int64_t replay_window = 0;
    replay->add_option("trace", replay_trace, "trace file (native JSON or MahiMahi)")->required()->check(CLI::ExistingFile);
    replay->add_option("-o,--out", replay_out, "CSV directory (default: $CCSTRESS_OUTPUT_DIR or ccstress_replay)");
    replay->add_option("--window-us", replay_window, "throughput window (default sim.throughput_window_us)");

    // export
    auto* exp = app.add_subcommand("export", "convert between native JSON and MahiMahi traces");
    std::string exp_in, exp_out, exp_format = "mahimahi";
    std::optional<std::int64_t> exp_duration;
    exp->add_option("trace", exp_in, "input trace")->required()->check(CLI::ExistingFile);
    exp->add_option("-f,--format", exp_format, "output format")->check(CLI::IsMember({"mahimahi", "json"}));
    exp->add_option("-o,--out", exp_out, "output file (default: stdout)");
    exp->add_option("--duration-us", exp_duration, "duration for MahiMahi input (default: whole seconds)");

    // report
    auto* report = app.add_subcommand("report", "summarize a campaign and optionally replay its best trace");
    std::string report_from, report_replay;
    report->add_option("from", report_from, "campaign directory or checkpoint file")->required();
    report->add_option("--replay-out", report_replay, "replay the best trace and write its CSVs here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (fuzz->parsed()) {
            const auto cfg = fuzz_opts.build();
            validate_config(cfg);
            if (cfg.sim.mode == FuzzMode::LinkFuzz && cfg.ga.crossover_fraction > 0.0 && fuzz_opts.crossover_explicit) {
                std::cerr << "warning: link mode ignores crossovers; ga.crossover_fraction has no effect\n";
            }
            const fs::path out = fuzz_out.empty() ? default_output_dir("ccstress_out") : fs::path(fuzz_out);
            return drive_campaign(cfg, out, std::nullopt, quiet);
        }
        if (resume->parsed()) {
            auto cp = load_checkpoint(resume_from);
            if (resume_gens) {
                set_config_value(cp.config, "ga.max_generations", std::to_string(*resume_gens));
            }
            cp.config.ga.threads = resume_threads ? *resume_threads : ConfigOpts::env_threads();
            validate_config(cp.config);
            fs::path out = resume_out;
            if (out.empty()) {
                const fs::path from(resume_from);
                if (fs::is_directory(from)) {
                    out = from.filename() == "checkpoints" ? from.parent_path() : from;
                } else {
                    out = from.parent_path().parent_path();
                }
            }
            std::cerr << "resuming at generation " << cp.state.generation << "\n";
            return drive_campaign(cp.config, out, std::move(cp.state), quiet);
        }
        if (replay->parsed()) {
            auto cfg = replay_opts.build();
            const auto trace = load_trace_file(replay_trace);
            const FuzzMode wanted = trace.mode == TraceMode::Link ? FuzzMode::LinkFuzz : FuzzMode::TrafficFuzz;
            const bool mode_pinned = replay_opts.mode || !replay_opts.config_file.empty() || !replay_opts.sets.empty();
            if (!mode_pinned) {
                cfg.sim.mode = wanted;
            } else if (cfg.sim.mode != wanted) {
                throw ConfigError("sim.mode", std::string("trace is a ") + std::string(to_string(trace.mode)) +
                                                  " trace but the configuration selects " +
                                                  std::string(to_string(cfg.sim.mode)));
            }
            cfg.sim.duration_us = trace.duration_us;
            validate_config(cfg);
            cfg.sim.record_events = true;
            const auto window = replay_window > 0 ? replay_window : cfg.sim.throughput_window_us;
            const auto result = run_sim(cfg.sim, trace);
            const fs::path out = replay_out.empty() ? default_output_dir("ccstress_replay") : fs::path(replay_out);
            write_replay_artifacts(out, result, window);
            std::cout << replay_summary(result, window) << "CSVs in " << out.string() << "\n";
            return kOk;
        }
        if (exp->parsed()) {
            PacketTrace trace;
            const auto text = read_text_file(exp_in);
            const auto first = text.find_first_not_of(" \t\r\n");
            if (first != std::string::npos && text[first] == '{') {
                trace = parse_trace_json(text);
            } else {
                trace = parse_mahimahi(text, exp_duration);
            }
            const std::string body = exp_format == "json" ? write_trace_json(trace) : write_mahimahi(trace);
            if (exp_out.empty()) {
                std::cout << body;
            } else {
                save_text_file(exp_out, body);
            }
            return kOk;
        }
        if (report->parsed()) {
            const auto cp = load_checkpoint(report_from);
            std::cout << campaign_summary(cp.config, cp.state);
            if (!report_replay.empty()) {
                auto sim = cp.config.sim;
                sim.record_events = true;
                const auto result = run_sim(sim, best_of(cp.state).trace);
                write_replay_artifacts(report_replay, result, sim.throughput_window_us);
                std::cout << "\nbest trace replay\n" << replay_summary(result, sim.throughput_window_us);
            }
            return kOk;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return kCheckpoint;
    } catch (const TraceParseError& e) {
        std::cerr << "trace error: " << e.what() << "\n";
        return kRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntime;
    }
    return kOk;
}
