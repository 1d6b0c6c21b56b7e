#include "ccstress/tracegen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ccstress {

std::string_view to_string(TraceMode mode)
{
    return mode == TraceMode::Link ? "link" : "traffic";
}

TraceMode trace_mode_from_string(std::string_view s)
{
    if (s == "link" || s == "Link") {
        return TraceMode::Link;
    }
    if (s == "traffic" || s == "Traffic") {
        return TraceMode::Traffic;
    }
    throw std::invalid_argument("unknown trace mode '" + std::string(s) + "'");
}

std::string validate(const PacketTrace& trace)
{
    if (trace.duration_us < 0) {
        return "negative duration";
    }
    const auto& ts = trace.timestamps_us;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        if (ts[i] < 0 || ts[i] > trace.duration_us) {
            return "timestamp " + std::to_string(ts[i]) + " at index " + std::to_string(i) +
                   " outside [0, duration]";
        }
        if (i > 0 && ts[i] < ts[i - 1]) {
            return "timestamps not sorted at index " + std::to_string(i);
        }
    }
    const auto n = static_cast<std::int64_t>(ts.size());
    if (trace.mode == TraceMode::Link && n != trace.packet_budget) {
        return "link trace has " + std::to_string(n) + " packets, budget " +
               std::to_string(trace.packet_budget);
    }
    if (trace.mode == TraceMode::Traffic && n > trace.packet_budget) {
        return "traffic trace exceeds its packet budget";
    }
    return {};
}

void GenParams::check() const
{
    if (k_agg_us <= 0) {
        throw std::invalid_argument("gen.k_agg_us must be positive");
    }
    if (!(rate_low > 0.0 && rate_low < 1.0 && rate_high > 1.0)) {
        throw std::invalid_argument("gen.rate_low and gen.rate_high must satisfy 0 < low < 1 < high");
    }
    if (max_split_retries < 0) {
        throw std::invalid_argument("gen.max_split_retries must be >= 0");
    }
}

namespace {

bool in_band(std::int64_t num, std::int64_t num_left, std::int64_t start, std::int64_t split,
             std::int64_t end, const GenParams& p)
{
    // rate = num / len; compare each side's rate against the band by cross
    // multiplication so no division by a zero-length side happens.
    const double len = static_cast<double>(end - start);
    const double left_len = static_cast<double>(split - start);
    const double right_len = static_cast<double>(end - split);
    const double n = static_cast<double>(num);
    const double nl = static_cast<double>(num_left);
    const double nr = static_cast<double>(num - num_left);
    if (nl * len > p.rate_high * n * left_len || nr * len > p.rate_high * n * right_len) {
        return false;
    }
    if (nl * len < p.rate_low * n * left_len || nr * len < p.rate_low * n * right_len) {
        return false;
    }
    return true;
}

void dist_rec(std::int64_t num, std::int64_t start, std::int64_t end, const GenParams& p, Rng& rng,
              const DistOptions& opt, std::vector<std::int64_t>& out)
{
    if (num == 0) {
        return;
    }
    if (num == 1) {
        out.push_back(start + (end - start) / 2);
        return;
    }
    if (end - start <= 1) {
        out.insert(out.end(), static_cast<std::size_t>(num), start);
        return;
    }

    const bool check = opt.rate_band && (end - start) >= p.k_agg_us;
    std::int64_t split = 0;
    std::int64_t num_left = 0;
    bool forced = false;
    for (int attempt = 0;; ++attempt) {
        if (check && attempt >= p.max_split_retries) {
            split = start + (end - start) / 2;
            num_left = num / 2;
            forced = true;
            break;
        }
        split = uniform_int(rng, start + 1, end - 1);
        num_left = uniform_int(rng, 0, num);
        if (!check || in_band(num, num_left, start, split, end, p)) {
            break;
        }
    }

    if (opt.tree != nullptr) {
        opt.tree->push_back(SplitNode{start, end, num, split, num_left, check, forced});
    }
    dist_rec(num_left, start, split, p, rng, opt, out);
    dist_rec(num - num_left, split, end, p, rng, opt, out);
}

void replay_rec(const SplitTree& tree, std::size_t& idx, std::int64_t num, std::int64_t start,
                std::int64_t end, std::vector<std::int64_t>& out)
{
    if (num == 0) {
        return;
    }
    if (num == 1) {
        out.push_back(start + (end - start) / 2);
        return;
    }
    if (end - start <= 1) {
        out.insert(out.end(), static_cast<std::size_t>(num), start);
        return;
    }
    if (idx >= tree.size()) {
        throw std::invalid_argument("split tree is shorter than the distribution it describes");
    }
    const SplitNode& node = tree[idx++];
    if (node.start_us != start || node.end_us != end || node.num != num) {
        throw std::invalid_argument("split tree node does not match its interval");
    }
    replay_rec(tree, idx, node.num_left, start, node.t_split_us, out);
    replay_rec(tree, idx, num - node.num_left, node.t_split_us, end, out);
}

void require_mode(const PacketTrace& t, TraceMode mode, const char* op)
{
    if (t.mode != mode) {
        throw std::invalid_argument(std::string(op) + ": wrong trace mode");
    }
}

struct Segment {
    std::int64_t start;
    std::int64_t end;
    bool left;
};

// Draws the split time and side. The left segment is [0, split), the right
// one [split, duration].
Segment pick_segment(const PacketTrace& t, Rng& rng)
{
    const std::int64_t split = uniform_int(rng, 0, t.duration_us);
    const bool left = coin(rng);
    return left ? Segment{0, split, true} : Segment{split, t.duration_us, false};
}

PacketTrace splice(const PacketTrace& t, const Segment& seg, const std::vector<std::int64_t>& fresh)
{
    PacketTrace out;
    out.mode = t.mode;
    out.duration_us = t.duration_us;
    out.packet_budget = t.packet_budget;
    const auto& ts = t.timestamps_us;
    const auto cut = std::lower_bound(ts.begin(), ts.end(), seg.left ? seg.end : seg.start);
    out.timestamps_us.reserve(fresh.size() + ts.size());
    if (seg.left) {
        out.timestamps_us.insert(out.timestamps_us.end(), fresh.begin(), fresh.end());
        out.timestamps_us.insert(out.timestamps_us.end(), cut, ts.end());
    } else {
        out.timestamps_us.insert(out.timestamps_us.end(), ts.begin(), cut);
        out.timestamps_us.insert(out.timestamps_us.end(), fresh.begin(), fresh.end());
    }
    return out;
}

std::int64_t count_in(const PacketTrace& t, const Segment& seg)
{
    const auto& ts = t.timestamps_us;
    if (seg.left) {
        return std::lower_bound(ts.begin(), ts.end(), seg.end) - ts.begin();
    }
    return ts.end() - std::lower_bound(ts.begin(), ts.end(), seg.start);
}

PacketTrace without_tree(const PacketTrace& t)
{
    PacketTrace out = t;
    out.split_tree.reset();
    return out;
}

}  // namespace

std::vector<std::int64_t> dist_packets(std::int64_t num, std::int64_t start_us, std::int64_t end_us,
                                       const GenParams& params, Rng& rng, DistOptions options)
{
    if (start_us >= end_us) {
        throw std::invalid_argument("dist_packets: start must be before end");
    }
    if (num < 0) {
        throw std::invalid_argument("dist_packets: negative packet count");
    }
    std::vector<std::int64_t> out;
    out.reserve(static_cast<std::size_t>(num));
    dist_rec(num, start_us, end_us, params, rng, options, out);
    return out;
}

std::vector<std::int64_t> replay_split_tree(const SplitTree& tree, std::int64_t num,
                                            std::int64_t start_us, std::int64_t end_us)
{
    std::vector<std::int64_t> out;
    std::size_t idx = 0;
    replay_rec(tree, idx, num, start_us, end_us, out);
    if (idx != tree.size()) {
        throw std::invalid_argument("split tree has unused nodes");
    }
    return out;
}

PacketTrace gen_initial_link_trace(double avg_rate_pps, std::int64_t duration_us,
                                   const GenParams& params, Rng& rng)
{
    params.check();
    if (!(avg_rate_pps > 0.0) || duration_us <= 0) {
        throw std::invalid_argument("link trace needs a positive rate and duration");
    }
    const auto budget = static_cast<std::int64_t>(std::llround(avg_rate_pps * static_cast<double>(duration_us) / 1e6));
    if (budget <= 0) {
        throw std::invalid_argument("link trace packet budget rounds to zero");
    }
    PacketTrace t;
    t.mode = TraceMode::Link;
    t.duration_us = duration_us;
    t.packet_budget = budget;
    SplitTree tree;
    t.timestamps_us = dist_packets(budget, 0, duration_us, params, rng,
                                   {true, params.record_split_tree ? &tree : nullptr});
    if (params.record_split_tree) {
        t.split_tree = std::move(tree);
    }
    return t;
}

PacketTrace gen_initial_traffic_trace(std::int64_t max_packets, std::int64_t duration_us,
                                      const GenParams& params, Rng& rng)
{
    params.check();
    if (max_packets < 0 || duration_us <= 0) {
        throw std::invalid_argument("traffic trace needs max_packets >= 0 and a positive duration");
    }
    PacketTrace t;
    t.mode = TraceMode::Traffic;
    t.duration_us = duration_us;
    t.packet_budget = max_packets;
    const std::int64_t count = uniform_int(rng, 0, max_packets);
    SplitTree tree;
    t.timestamps_us = dist_packets(count, 0, duration_us, params, rng,
                                   {false, params.record_split_tree ? &tree : nullptr});
    if (params.record_split_tree) {
        t.split_tree = std::move(tree);
    }
    return t;
}

PacketTrace mutate_link(const PacketTrace& trace, const GenParams& params, Rng& rng)
{
    require_mode(trace, TraceMode::Link, "mutate_link");
    const Segment seg = pick_segment(trace, rng);
    const std::int64_t count = count_in(trace, seg);
    if (count == 0 || seg.end <= seg.start) {
        return without_tree(trace);
    }
    return splice(trace, seg, dist_packets(count, seg.start, seg.end, params, rng, {true, nullptr}));
}

PacketTrace mutate_traffic(const PacketTrace& trace, const GenParams& params, Rng& rng)
{
    require_mode(trace, TraceMode::Traffic, "mutate_traffic");
    const Segment seg = pick_segment(trace, rng);
    const std::int64_t inside = count_in(trace, seg);
    const std::int64_t outside = static_cast<std::int64_t>(trace.size()) - inside;
    const std::int64_t room = std::max<std::int64_t>(0, trace.packet_budget - outside);
    const std::int64_t count = uniform_int(rng, 0, room);
    if (seg.end <= seg.start) {
        return without_tree(trace);
    }
    std::vector<std::int64_t> fresh;
    if (count > 0) {
        fresh = dist_packets(count, seg.start, seg.end, params, rng, {false, nullptr});
    }
    return splice(trace, seg, fresh);
}

PacketTrace crossover_traffic_at(const PacketTrace& first, const PacketTrace& second, double fraction)
{
    const auto n = first.timestamps_us.size();
    auto cut = static_cast<std::size_t>(std::ceil(std::clamp(fraction, 0.0, 1.0) * static_cast<double>(n)));
    cut = std::min(cut, n);

    PacketTrace out;
    out.mode = TraceMode::Traffic;
    out.duration_us = first.duration_us;
    out.packet_budget = first.packet_budget;
    out.timestamps_us.assign(first.timestamps_us.begin(), first.timestamps_us.begin() + static_cast<std::ptrdiff_t>(cut));
    const auto& tail = second.timestamps_us;
    auto from = tail.begin();
    if (cut > 0) {
        from = std::upper_bound(tail.begin(), tail.end(), first.timestamps_us[cut - 1]);
    }
    out.timestamps_us.insert(out.timestamps_us.end(), from, tail.end());
    if (static_cast<std::int64_t>(out.timestamps_us.size()) > out.packet_budget) {
        out.timestamps_us.resize(static_cast<std::size_t>(out.packet_budget));
    }
    return out;
}

PacketTrace crossover_traffic(const PacketTrace& a, const PacketTrace& b, Rng& rng)
{
    require_mode(a, TraceMode::Traffic, "crossover_traffic");
    require_mode(b, TraceMode::Traffic, "crossover_traffic");
    if (a.duration_us != b.duration_us || a.packet_budget != b.packet_budget) {
        throw std::invalid_argument("crossover_traffic: parents differ in duration or budget");
    }
    const double fraction = uniform01(rng);
    const bool a_first = coin(rng);
    return a_first ? crossover_traffic_at(a, b, fraction) : crossover_traffic_at(b, a, fraction);
}

PacketTrace anneal(const PacketTrace& trace, double sigma_us)
{
    if (sigma_us < 0.0) {
        throw std::invalid_argument("anneal: sigma must be >= 0");
    }
    const auto& ts = trace.timestamps_us;
    const std::size_t n = ts.size();
    if (sigma_us == 0.0 || n < 3 || ts.back() == ts.front()) {
        return without_tree(trace);
    }

    const std::size_t m = n - 1;
    const double span = static_cast<double>(ts.back() - ts.front());
    const double mean_gap = span / static_cast<double>(m);
    const auto half = static_cast<std::ptrdiff_t>(
        std::min<double>(static_cast<double>(m), std::ceil(3.0 * sigma_us / mean_gap)));

    std::vector<double> kernel(static_cast<std::size_t>(2 * half + 1));
    for (std::ptrdiff_t j = -half; j <= half; ++j) {
        const double x = static_cast<double>(j) * mean_gap / sigma_us;
        kernel[static_cast<std::size_t>(j + half)] = std::exp(-0.5 * x * x);
    }

    std::vector<double> smooth(m);
    double total = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        double acc = 0.0;
        double wsum = 0.0;
        const auto lo = std::max<std::ptrdiff_t>(-half, -static_cast<std::ptrdiff_t>(k));
        const auto hi = std::min<std::ptrdiff_t>(half, static_cast<std::ptrdiff_t>(m - 1 - k));
        for (std::ptrdiff_t j = lo; j <= hi; ++j) {
            const double w = kernel[static_cast<std::size_t>(j + half)];
            const auto idx = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(k) + j);
            acc += w * static_cast<double>(ts[idx + 1] - ts[idx]);
            wsum += w;
        }
        smooth[k] = acc / wsum;
        total += smooth[k];
    }

    PacketTrace out = without_tree(trace);
    const double scale = span / total;
    double pos = static_cast<double>(ts.front());
    for (std::size_t k = 0; k < m; ++k) {
        pos += smooth[k] * scale;
        out.timestamps_us[k + 1] = std::clamp(static_cast<std::int64_t>(std::llround(pos)), ts.front(), ts.back());
    }
    out.timestamps_us[m] = ts.back();
    std::sort(out.timestamps_us.begin(), out.timestamps_us.end());
    return out;
}

}  // namespace ccstress
