#include "ccstress/artifacts.hpp"

#include <cstdio>
#include <sstream>

#include "ccstress/checkpoint.hpp"
#include "ccstress/config.hpp"
#include "ccstress/scoring.hpp"
#include "ccstress/trace_io.hpp"

namespace ccstress {

namespace fs = std::filesystem;

namespace {

std::string num(double v, int prec = 6)
{
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    return buf;
}

}  // namespace

void write_generation(const CampaignPaths& paths, const CampaignConfig& cfg, const CampaignState& state)
{
    write_checkpoint(paths.checkpoints(), cfg, state);
    save_text_file(paths.series(), series_csv(state.series));
}

std::string campaign_summary(const CampaignConfig& cfg, const CampaignState& state)
{
    std::ostringstream os;
    const auto& best = best_of(state);
    os << "mode " << to_string(cfg.sim.mode) << ", cca " << to_string(cfg.sim.cca.kind);
    if (cfg.sim.cca.kind == CcaKind::Cubic) {
        os << (cfg.sim.cca.cubic_buggy ? " (buggy)" : " (fixed)");
    }
    if (cfg.sim.cca.kind == CcaKind::Bbr) {
        os << (cfg.sim.cca.bbr_patched ? " (patched)" : " (unpatched)");
    }
    os << ", score " << to_string(cfg.ga.score_kind) << ", seed " << cfg.seed << "\n";
    os << "generations " << state.generation << (state.converged ? " (converged)" : "") << ", population "
       << cfg.ga.population_size << " in " << cfg.ga.num_islands << " islands\n";
    os << "best total " << num(best.total) << " = performance " << num(best.performance) << " + "
       << num(cfg.ga.lambda) << " x trace " << num(best.trace_score);
    if (cfg.ga.realism_enabled()) {
        os << " + " << num(cfg.ga.realism_weight) << " x realism " << num(best.realism);
    }
    os << "\nbest trace: " << best.trace.size() << " packets, digest " << best.digest << "\n";
    int failures = 0;
    for (const auto& isl : state.islands) {
        for (const auto& s : isl.population) {
            failures += s.failed() ? 1 : 0;
        }
    }
    if (failures > 0) {
        os << "failed evaluations in the current population: " << failures << "\n";
    }
    os << "island,best,packets\n";
    for (std::size_t i = 0; i < state.islands.size(); ++i) {
        const auto& b = best_of(state.islands[i]);
        os << i << ',' << num(b.total) << ',' << b.trace.size() << "\n";
    }
    return os.str();
}

void write_final_artifacts(const CampaignPaths& paths, const CampaignConfig& cfg, const CampaignState& state)
{
    fs::create_directories(paths.best_dir());
    save_text_file(paths.config(), config_to_text(cfg));
    for (std::size_t i = 0; i < state.islands.size(); ++i) {
        const auto& b = best_of(state.islands[i]);
        char name[32];
        std::snprintf(name, sizeof name, "island_%02zu", i);
        save_text_file(paths.best_dir() / (std::string(name) + ".json"), write_trace_json(b.trace));
        if (b.trace.mode == TraceMode::Link) {
            save_text_file(paths.best_dir() / (std::string(name) + ".mahimahi"), write_mahimahi(b.trace));
        }
    }
    save_text_file(paths.best(), write_trace_json(best_of(state).trace));
    save_text_file(paths.series(), series_csv(state.series));
    save_text_file(paths.summary(), campaign_summary(cfg, state));
}

std::string replay_summary(const SimResult& r, std::int64_t window_us)
{
    std::ostringstream os;
    os << "cca " << r.cca_name << "\n";
    os << "utilization " << num(r.utilization(), 4) << "\n";
    os << "lowest-20% window throughput (Mbps) " << num(-score_low_utilization(r, window_us), 4) << "\n";
    os << "p10 one-way delay (us) " << num(score_high_delay(r), 8) << "\n";
    os << "sender: sent " << r.sender.sent << ", delivered " << r.sender.delivered << ", dropped "
       << r.sender.dropped << "\n";
    os << "cross: sent " << r.cross.sent << ", delivered " << r.cross.delivered << ", dropped " << r.cross.dropped
       << "\n";
    os << "tcp: transmissions " << r.tcp.transmissions << ", retransmissions " << r.tcp.retransmissions
       << ", fast retransmits " << r.tcp.fast_retransmits << ", rtos " << r.tcp.rtos << "\n";
    os << "max queue " << r.max_queue_occupancy << " packets\n";
    os << "digest " << r.digest() << "\n";
    return os.str();
}

void write_replay_artifacts(const fs::path& dir, const SimResult& result, std::int64_t window_us)
{
    fs::create_directories(dir);
    save_text_file(dir / "throughput.csv", throughput_csv(result, window_us));
    save_text_file(dir / "delays.csv", delays_csv(result));
    save_text_file(dir / "queue.csv", queue_csv(result));
    save_text_file(dir / "events.csv", events_csv(result));
    save_text_file(dir / "summary.txt", replay_summary(result, window_us));
}

}  // namespace ccstress
