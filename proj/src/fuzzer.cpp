#include "ccstress/fuzzer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <omp.h>

namespace ccstress {

void GaParams::check() const
{
    if (population_size < 1 || num_islands < 1) {
        throw std::invalid_argument("ga.population_size and ga.num_islands must be >= 1");
    }
    if (population_size % num_islands != 0) {
        throw std::invalid_argument("ga.population_size must be a multiple of ga.num_islands");
    }
    if (k_elite < 0 || k_elite > island_size()) {
        throw std::invalid_argument("ga.k_elite must lie in [0, island size]");
    }
    if (!(migration_fraction >= 0.0 && migration_fraction <= 1.0)) {
        throw std::invalid_argument("ga.migration_fraction must lie in [0, 1]");
    }
    if (migration_interval_gens < 1) {
        throw std::invalid_argument("ga.migration_interval_gens must be >= 1");
    }
    if (!(crossover_fraction >= 0.0 && crossover_fraction <= 1.0)) {
        throw std::invalid_argument("ga.crossover_fraction must lie in [0, 1]");
    }
    if (!std::isfinite(lambda) || !std::isfinite(drop_weight) || !std::isfinite(realism_weight)) {
        throw std::invalid_argument("ga.lambda, ga.drop_weight and ga.realism_weight must be finite");
    }
    if (!(low_fraction > 0.0 && low_fraction <= 1.0)) {
        throw std::invalid_argument("ga.low_fraction must lie in (0, 1]");
    }
    if (max_generations < 0 || patience_gens < 0) {
        throw std::invalid_argument("ga.max_generations and ga.patience_gens must be >= 0");
    }
    if (!(anneal_sigma_us >= 0.0)) {
        throw std::invalid_argument("ga.anneal_sigma_us must be >= 0");
    }
    if (max_cross_packets < 0) {
        throw std::invalid_argument("ga.max_cross_packets must be >= 0");
    }
    if (realism_every < 1) {
        throw std::invalid_argument("ga.realism_every must be >= 1");
    }
    for (const auto& name : realism_ccas) {
        cca_kind_from_string(name);
    }
    if (realism_weight != 0.0 && realism_ccas.size() < 2) {
        throw std::invalid_argument("ga.realism_ccas needs at least two CCAs when ga.realism_weight is set");
    }
    if (threads < 0) {
        throw std::invalid_argument("ga.threads must be >= 0");
    }
}

int GaParams::crossover_count(TraceMode mode) const
{
    if (mode == TraceMode::Link) {
        return 0;
    }
    const int free_slots = island_size() - k_elite;
    const auto n = static_cast<int>(std::llround(crossover_fraction * island_size()));
    return std::clamp(n, 0, free_slots);
}

int GaParams::mutation_count(TraceMode mode) const
{
    return island_size() - k_elite - crossover_count(mode);
}

int GaParams::migrant_count() const
{
    const auto n = static_cast<int>(std::ceil(migration_fraction * island_size() - 1e-9));
    return std::clamp(n, 0, island_size());
}

double combine_scores(const ScoredTrace& s, const GaParams& params)
{
    if (s.failed()) {
        return -std::numeric_limits<double>::infinity();
    }
    return s.performance + params.lambda * s.trace_score + params.realism_weight * s.realism;
}

double score_realism(const PacketTrace& trace, const SimConfig& sim, const std::vector<std::string>& ccas)
{
    double best = 0.0;
    for (const auto& name : ccas) {
        SimConfig c = sim;
        c.record_events = false;
        c.cca.kind = cca_kind_from_string(name);
        best = std::max(best, run_sim(c, trace).utilization());
    }
    return best;
}

ScoredTrace Evaluator::evaluate(const PacketTrace& trace, bool with_realism) const
{
    ScoredTrace s;
    s.trace = trace;
    try {
        SimConfig c = sim;
        c.record_events = false;
        const SimResult r = run_sim(c, trace);
        switch (ga.score_kind) {
        case ScoreKind::LowUtilization:
            s.performance = score_low_utilization(r, c.throughput_window_us, ga.low_fraction);
            break;
        case ScoreKind::HighDelay:
            s.performance = score_high_delay(r);
            break;
        case ScoreKind::Custom:
            if (!custom_score) {
                throw std::logic_error("custom score kind without a score function");
            }
            s.performance = custom_score(r);
            break;
        }
        s.trace_score = score_trace(trace, r, ga.drop_weight);
        if (with_realism) {
            s.realism = score_realism(trace, sim, ga.realism_ccas);
        }
        s.digest = r.digest();
    } catch (const std::exception& e) {
        s.error = e.what();
        if (s.error.empty()) {
            s.error = "evaluation failed";
        }
    }
    s.total = combine_scores(s, ga);
    return s;
}

std::vector<ScoredTrace> evaluate_serial(const Evaluator& ev, const std::vector<PacketTrace>& traces,
                                         bool with_realism)
{
    std::vector<ScoredTrace> out;
    out.reserve(traces.size());
    for (const auto& t : traces) {
        out.push_back(ev.evaluate(t, with_realism));
    }
    return out;
}

std::vector<ScoredTrace> evaluate_parallel(const Evaluator& ev, const std::vector<PacketTrace>& traces,
                                           bool with_realism, int threads)
{
    std::vector<ScoredTrace> out(traces.size());
    const auto n = static_cast<std::int64_t>(traces.size());
    const int nt = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(nt)
    for (std::int64_t i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(i)] = ev.evaluate(traces[static_cast<std::size_t>(i)], with_realism);
    }
    return out;
}

void rank_population(std::vector<ScoredTrace>& population)
{
    std::stable_sort(population.begin(), population.end(),
                     [](const ScoredTrace& a, const ScoredTrace& b) { return a.total > b.total; });
}

std::size_t select_rank(const std::vector<double>& probabilities, Rng& rng)
{
    const double u = uniform01(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        acc += probabilities[i];
        if (u < acc) {
            return i;
        }
    }
    return probabilities.empty() ? 0 : probabilities.size() - 1;
}

std::vector<Offspring> breed(const Island& island, const GaParams& ga, const GenParams& gen)
{
    const auto& pop = island.population;
    if (pop.empty()) {
        throw std::invalid_argument("cannot breed an empty island");
    }
    const TraceMode mode = pop.front().trace.mode;
    Rng rng = make_rng(derive_seed(island.seed, {static_cast<std::uint64_t>(island.generation), 0xb7eed}));
    const auto probs = selection_probabilities(pop.size());

    std::vector<Offspring> kids;
    kids.reserve(pop.size());
    const auto n_elite = std::min<std::size_t>(static_cast<std::size_t>(ga.k_elite), pop.size());
    for (std::size_t i = 0; i < n_elite; ++i) {
        Offspring o;
        o.trace = pop[i].trace;
        o.carried = pop[i];
        o.inherited_realism = pop[i].realism;
        o.origin = Offspring::Origin::Elite;
        kids.push_back(std::move(o));
    }
    const int n_cross = ga.crossover_count(mode);
    for (int i = 0; i < n_cross; ++i) {
        const auto a = select_rank(probs, rng);
        const auto b = select_rank(probs, rng);
        Offspring o;
        o.trace = crossover_traffic(pop[a].trace, pop[b].trace, rng);
        o.inherited_realism = pop[a].realism;
        o.origin = Offspring::Origin::Crossover;
        kids.push_back(std::move(o));
    }
    while (kids.size() < pop.size()) {
        const auto a = select_rank(probs, rng);
        Offspring o;
        o.trace = mode == TraceMode::Link ? mutate_link(pop[a].trace, gen, rng) : mutate_traffic(pop[a].trace, gen, rng);
        o.inherited_realism = pop[a].realism;
        o.origin = Offspring::Origin::Mutation;
        kids.push_back(std::move(o));
    }
    if (ga.anneal && ga.anneal_sigma_us > 0.0) {
        for (auto& k : kids) {
            if (!k.carried) {
                k.trace = anneal(k.trace, ga.anneal_sigma_us);
            }
        }
    }
    return kids;
}

Island assemble(const Island& island, std::vector<Offspring> children, std::vector<ScoredTrace> scored,
                const GaParams& ga, bool realism_fresh)
{
    Island next;
    next.seed = island.seed;
    next.generation = island.generation + 1;
    next.population.reserve(children.size());
    std::size_t j = 0;
    for (auto& c : children) {
        if (c.carried) {
            next.population.push_back(std::move(*c.carried));
            continue;
        }
        if (j >= scored.size()) {
            throw std::logic_error("assemble: fewer scores than children");
        }
        ScoredTrace s = std::move(scored[j++]);
        if (ga.realism_enabled() && !realism_fresh) {
            s.realism = c.inherited_realism;
            s.total = combine_scores(s, ga);
        }
        next.population.push_back(std::move(s));
    }
    if (j != scored.size()) {
        throw std::logic_error("assemble: more scores than children");
    }
    rank_population(next.population);
    return next;
}

bool realism_due(const GaParams& ga, int generation)
{
    return ga.realism_enabled() && generation % ga.realism_every == 0;
}

namespace {

std::vector<PacketTrace> unscored(const std::vector<Offspring>& kids)
{
    std::vector<PacketTrace> out;
    for (const auto& k : kids) {
        if (!k.carried) {
            out.push_back(k.trace);
        }
    }
    return out;
}

}  // namespace

Island step_generation(const Island& island, const GaParams& ga, const GenParams& gen, const Evaluator& ev,
                       bool parallel)
{
    auto kids = breed(island, ga, gen);
    const bool fresh = realism_due(ga, island.generation + 1);
    const auto todo = unscored(kids);
    auto scored = parallel ? evaluate_parallel(ev, todo, fresh, ga.threads) : evaluate_serial(ev, todo, fresh);
    return assemble(island, std::move(kids), std::move(scored), ga, fresh);
}

void migrate(std::vector<Island>& islands, const GaParams& ga)
{
    const auto n_isl = islands.size();
    const auto k = static_cast<std::size_t>(ga.migrant_count());
    if (n_isl < 2 || k == 0) {
        return;
    }
    // snapshot first so a migrant moves exactly one hop per migration
    std::vector<std::vector<ScoredTrace>> outgoing(n_isl);
    for (std::size_t i = 0; i < n_isl; ++i) {
        const auto& pop = islands[i].population;
        outgoing[i].assign(pop.begin(), pop.begin() + static_cast<std::ptrdiff_t>(std::min(k, pop.size())));
    }
    for (std::size_t i = 0; i < n_isl; ++i) {
        auto& dst = islands[(i + 1) % n_isl].population;
        const auto& in = outgoing[i];
        const auto keep = dst.size() - std::min(in.size(), dst.size());
        dst.resize(keep);
        dst.insert(dst.end(), in.begin(), in.end());
        rank_population(dst);
    }
}

void CampaignConfig::check() const
{
    ga.check();
    sim.check();
    gen.check();
    if (sim.cca.initial_cwnd_pkts < 1) {
        throw std::invalid_argument("cca.initial_cwnd_pkts must be >= 1");
    }
    if (keep_checkpoints < 0) {
        throw std::invalid_argument("keep_checkpoints must be >= 0");
    }
    if (sim.mode == FuzzMode::LinkFuzz &&
        std::llround(sim.bottleneck_rate_pps * static_cast<double>(sim.duration_us) / 1e6) < 1) {
        throw std::invalid_argument("sim.bottleneck_rate_pps gives an empty link trace");
    }
}

namespace {

SeriesRow summarize(const std::vector<const ScoredTrace*>& members, int generation, int island)
{
    SeriesRow row;
    row.generation = generation;
    row.island = island;
    std::vector<double> totals;
    for (const auto* m : members) {
        totals.push_back(m->total);
    }
    std::sort(totals.begin(), totals.end(), std::greater<>());
    if (totals.empty()) {
        return row;
    }
    row.best = totals.front();
    row.mean = std::accumulate(totals.begin(), totals.end(), 0.0) / static_cast<double>(totals.size());
    const auto top = std::min<std::size_t>(20, totals.size());
    row.top20_mean = std::accumulate(totals.begin(), totals.begin() + static_cast<std::ptrdiff_t>(top), 0.0) /
                     static_cast<double>(top);
    return row;
}

std::string fmt_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

}  // namespace

std::vector<SeriesRow> series_rows(const CampaignState& state)
{
    std::vector<SeriesRow> rows;
    std::vector<const ScoredTrace*> all;
    for (std::size_t i = 0; i < state.islands.size(); ++i) {
        std::vector<const ScoredTrace*> members;
        for (const auto& s : state.islands[i].population) {
            members.push_back(&s);
            all.push_back(&s);
        }
        rows.push_back(summarize(members, state.generation, static_cast<int>(i)));
    }
    rows.push_back(summarize(all, state.generation, -1));
    return rows;
}

std::string series_csv(const std::vector<SeriesRow>& rows)
{
    std::ostringstream os;
    os << "generation,island,best,mean,top20_mean\n";
    for (const auto& r : rows) {
        os << r.generation << ',' << (r.island < 0 ? std::string("all") : std::to_string(r.island)) << ','
           << fmt_double(r.best) << ',' << fmt_double(r.mean) << ',' << fmt_double(r.top20_mean) << '\n';
    }
    return os.str();
}

const ScoredTrace& best_of(const Island& island)
{
    if (island.population.empty()) {
        throw std::logic_error("empty island");
    }
    return island.population.front();
}

const ScoredTrace& best_of(const CampaignState& state)
{
    const ScoredTrace* best = nullptr;
    for (const auto& isl : state.islands) {
        const auto& b = best_of(isl);
        if (!best || b.total > best->total) {
            best = &b;
        }
    }
    if (!best) {
        throw std::logic_error("campaign has no islands");
    }
    return *best;
}

Evaluator make_evaluator(const CampaignConfig& cfg)
{
    Evaluator ev;
    ev.sim = cfg.sim;
    ev.ga = cfg.ga;
    return ev;
}

namespace {

void track_convergence(CampaignState& state, const CampaignConfig& cfg)
{
    const double best = best_of(state).total;
    if (best > state.best_total) {
        state.best_total = best;
        state.stale_gens = 0;
    } else {
        ++state.stale_gens;
    }
    state.converged = cfg.ga.patience_gens > 0 && state.stale_gens >= cfg.ga.patience_gens;
    const auto rows = series_rows(state);
    state.series.insert(state.series.end(), rows.begin(), rows.end());
}

}  // namespace

CampaignState init_campaign(const CampaignConfig& cfg, const Evaluator& ev)
{
    cfg.check();
    CampaignState state;
    const TraceMode mode = trace_mode_for(cfg.sim.mode);
    const int per_island = cfg.ga.island_size();
    std::vector<PacketTrace> traces;
    for (int i = 0; i < cfg.ga.num_islands; ++i) {
        Island isl;
        isl.seed = derive_seed(cfg.seed, {0x151a, static_cast<std::uint64_t>(i)});
        Rng rng = make_rng(derive_seed(isl.seed, {0x1417}));
        for (int j = 0; j < per_island; ++j) {
            traces.push_back(mode == TraceMode::Link
                                 ? gen_initial_link_trace(cfg.sim.bottleneck_rate_pps, cfg.sim.duration_us, cfg.gen, rng)
                                 : gen_initial_traffic_trace(cfg.ga.max_cross_packets, cfg.sim.duration_us, cfg.gen, rng));
        }
        state.islands.push_back(std::move(isl));
    }
    auto scored = evaluate_parallel(ev, traces, realism_due(cfg.ga, 0), cfg.ga.threads);
    std::size_t k = 0;
    for (auto& isl : state.islands) {
        for (int j = 0; j < per_island; ++j) {
            isl.population.push_back(std::move(scored[k++]));
        }
        rank_population(isl.population);
    }
    track_convergence(state, cfg);
    return state;
}

void advance_campaign(CampaignState& state, const CampaignConfig& cfg, const Evaluator& ev)
{
    const int next_gen = state.generation + 1;
    const bool fresh = realism_due(cfg.ga, next_gen);
    std::vector<std::vector<Offspring>> kids;
    std::vector<PacketTrace> todo;
    std::vector<std::size_t> offsets;
    for (const auto& isl : state.islands) {
        kids.push_back(breed(isl, cfg.ga, cfg.gen));
        offsets.push_back(todo.size());
        auto t = unscored(kids.back());
        todo.insert(todo.end(), std::make_move_iterator(t.begin()), std::make_move_iterator(t.end()));
    }
    offsets.push_back(todo.size());
    auto scored = evaluate_parallel(ev, todo, fresh, cfg.ga.threads);
    for (std::size_t i = 0; i < state.islands.size(); ++i) {
        std::vector<ScoredTrace> mine(std::make_move_iterator(scored.begin() + static_cast<std::ptrdiff_t>(offsets[i])),
                                      std::make_move_iterator(scored.begin() + static_cast<std::ptrdiff_t>(offsets[i + 1])));
        state.islands[i] = assemble(state.islands[i], std::move(kids[i]), std::move(mine), cfg.ga, fresh);
    }
    state.generation = next_gen;
    if (next_gen % cfg.ga.migration_interval_gens == 0) {
        migrate(state.islands, cfg.ga);
    }
    track_convergence(state, cfg);
}

bool campaign_done(const CampaignState& state, const CampaignConfig& cfg)
{
    return state.generation >= cfg.ga.max_generations || state.converged;
}

CampaignState run_campaign(const CampaignConfig& cfg, const Evaluator& ev, const GenerationHook& on_generation,
                           std::optional<CampaignState> resume)
{
    CampaignState state = resume ? std::move(*resume) : init_campaign(cfg, ev);
    if (!resume && on_generation) {
        on_generation(state);
    }
    while (!campaign_done(state, cfg)) {
        advance_campaign(state, cfg, ev);
        if (on_generation) {
            on_generation(state);
        }
    }
    return state;
}

CampaignState run_campaign(const CampaignConfig& cfg, const GenerationHook& on_generation,
                           std::optional<CampaignState> resume)
{
    return run_campaign(cfg, make_evaluator(cfg), on_generation, std::move(resume));
}

}  // namespace ccstress
