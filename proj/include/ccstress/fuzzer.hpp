#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ccstress/rng.hpp"
#include "ccstress/scoring.hpp"
#include "ccstress/sim.hpp"
#include "ccstress/trace.hpp"
#include "ccstress/tracegen.hpp"

namespace ccstress {

struct GaParams {
    int population_size = 500;
    int num_islands = 20;
    double migration_fraction = 0.10;
    int migration_interval_gens = 10;
    int k_elite = 1;
    double crossover_fraction = 0.30;  ///< traffic mode only
    double lambda = 0.001;             ///< weight of the trace score, per packet
    double drop_weight = 1.0;
    ScoreKind score_kind = ScoreKind::LowUtilization;
    double low_fraction = 0.2;
    int max_generations = 100;
    int patience_gens = 30;
    bool anneal = false;
    double anneal_sigma_us = 10'000.0;
    std::int64_t max_cross_packets = 5000;
    /// Reference CCAs for the optional realism term ("reno", "cubic", "bbr").
    std::vector<std::string> realism_ccas;
    double realism_weight = 0.0;
    int realism_every = 5;
    int threads = 0;  ///< 0 = OpenMP default; never changes results

    void check() const;
    int island_size() const { return population_size / num_islands; }
    int crossover_count(TraceMode mode) const;
    int mutation_count(TraceMode mode) const;
    int migrant_count() const;
    bool realism_enabled() const { return realism_weight != 0.0 && !realism_ccas.empty(); }
    bool operator==(const GaParams&) const = default;
};

struct ScoredTrace {
    PacketTrace trace;
    double performance = 0.0;
    double trace_score = 0.0;
    double realism = 0.0;
    double total = -std::numeric_limits<double>::infinity();
    std::uint64_t digest = 0;
    std::string error;  ///< non-empty when the evaluation threw

    bool failed() const { return !error.empty(); }
};

/// total = performance + lambda * trace_score + realism_weight * realism;
/// -inf for a failed evaluation.
double combine_scores(const ScoredTrace& s, const GaParams& params);

struct Island {
    std::uint64_t seed = 0;
    int generation = 0;
    std::vector<ScoredTrace> population;  ///< sorted by total, best first
};

/// Everything needed to score one trace. Each call builds its own simulator,
/// so one Evaluator can be shared by concurrent workers.
struct Evaluator {
    SimConfig sim;
    GaParams ga;
    std::function<double(const SimResult&)> custom_score;  ///< required for ScoreKind::Custom

    ScoredTrace evaluate(const PacketTrace& trace, bool with_realism) const;
};

/// Highest utilization any of the reference CCAs reaches on the trace.
double score_realism(const PacketTrace& trace, const SimConfig& sim, const std::vector<std::string>& ccas);

/// Reference implementation: one trace after another.
std::vector<ScoredTrace> evaluate_serial(const Evaluator& ev, const std::vector<PacketTrace>& traces,
                                         bool with_realism = false);
/// OpenMP version; results are gathered by index and match evaluate_serial.
std::vector<ScoredTrace> evaluate_parallel(const Evaluator& ev, const std::vector<PacketTrace>& traces,
                                           bool with_realism = false, int threads = 0);

/// Stable sort, best total first; ties keep their current order.
void rank_population(std::vector<ScoredTrace>& population);

/// Index into a 1/rank distribution (probabilities as returned by
/// selection_probabilities).
std::size_t select_rank(const std::vector<double>& probabilities, Rng& rng);

/// One child of the next generation. Elites keep their scores; everything
/// else needs an evaluation.
struct Offspring {
    PacketTrace trace;
    std::optional<ScoredTrace> carried;
    double inherited_realism = 0.0;
    enum class Origin { Elite, Crossover, Mutation } origin = Origin::Mutation;
};

/// Builds the next generation's traces for a ranked island. The RNG stream
/// is derived from (island seed, generation), so breeding is reproducible.
std::vector<Offspring> breed(const Island& island, const GaParams& ga, const GenParams& gen);

/// Assembles the scored next generation and advances the generation counter.
/// `scored` holds one result per child without carried scores, in order.
/// When realism was not refreshed this generation, children keep their
/// parent's realism term.
Island assemble(const Island& island, std::vector<Offspring> children, std::vector<ScoredTrace> scored,
                const GaParams& ga, bool realism_fresh);

/// breed + evaluate + assemble for a single island.
Island step_generation(const Island& island, const GaParams& ga, const GenParams& gen, const Evaluator& ev,
                       bool parallel = false);

/// Ring migration: island i sends copies of its top migrant_count() traces to
/// island i+1, which drops its worst to make room.
void migrate(std::vector<Island>& islands, const GaParams& ga);

struct CampaignConfig {
    GaParams ga;
    SimConfig sim;
    GenParams gen;
    std::uint64_t seed = 1;
    int keep_checkpoints = 5;  ///< 0 keeps every generation

    void check() const;
    bool operator==(const CampaignConfig& o) const
    {
        return ga == o.ga && sim == o.sim && seed == o.seed && keep_checkpoints == o.keep_checkpoints &&
               gen.k_agg_us == o.gen.k_agg_us && gen.rate_low == o.gen.rate_low &&
               gen.rate_high == o.gen.rate_high && gen.max_split_retries == o.gen.max_split_retries;
    }
};

struct SeriesRow {
    int generation = 0;
    int island = -1;  ///< -1 for the whole population
    double best = 0.0;
    double mean = 0.0;
    double top20_mean = 0.0;
};

struct CampaignState {
    int generation = 0;
    std::vector<Island> islands;
    std::vector<SeriesRow> series;
    double best_total = -std::numeric_limits<double>::infinity();
    int stale_gens = 0;
    bool converged = false;
};

std::vector<SeriesRow> series_rows(const CampaignState& state);
std::string series_csv(const std::vector<SeriesRow>& rows);
const ScoredTrace& best_of(const CampaignState& state);
const ScoredTrace& best_of(const Island& island);

/// Generation 0: islands seeded from the trace generator and scored.
CampaignState init_campaign(const CampaignConfig& cfg, const Evaluator& ev);
/// One generation for every island, migration when due, series and
/// convergence bookkeeping.
void advance_campaign(CampaignState& state, const CampaignConfig& cfg, const Evaluator& ev);
bool campaign_done(const CampaignState& state, const CampaignConfig& cfg);

Evaluator make_evaluator(const CampaignConfig& cfg);

bool realism_due(const GaParams& ga, int generation);

using GenerationHook = std::function<void(const CampaignState&)>;

/// Runs (or continues) a campaign until max_generations or convergence.
/// `on_generation` sees every state including generation 0.
CampaignState run_campaign(const CampaignConfig& cfg, const Evaluator& ev, const GenerationHook& on_generation,
                           std::optional<CampaignState> resume = {});
CampaignState run_campaign(const CampaignConfig& cfg, const GenerationHook& on_generation = {},
                           std::optional<CampaignState> resume = {});

}  // namespace ccstress
