#include "ccstress/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace ccstress {

std::string_view to_string(ScoreKind kind)
{
    switch (kind) {
    case ScoreKind::LowUtilization:
        return "low_utilization";
    case ScoreKind::HighDelay:
        return "high_delay";
    case ScoreKind::Custom:
        return "custom";
    }
    return "?";
}

ScoreKind score_kind_from_string(std::string_view s)
{
    if (s == "low_utilization" || s == "utilization") {
        return ScoreKind::LowUtilization;
    }
    if (s == "high_delay" || s == "delay") {
        return ScoreKind::HighDelay;
    }
    if (s == "custom") {
        return ScoreKind::Custom;
    }
    throw std::invalid_argument("unknown score kind '" + std::string(s) +
                                "' (expected low_utilization, high_delay or custom)");
}

double lowest_fraction_mean(std::vector<double> values, double fraction)
{
    if (values.empty()) {
        return 0.0;
    }
    const auto n = values.size();
    auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
    k = std::clamp<std::size_t>(k, 1, n);
    std::partial_sort(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), values.end());
    return std::accumulate(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), 0.0) /
           static_cast<double>(k);
}

std::int64_t percentile_nearest_rank(std::vector<std::int64_t> values, double p)
{
    if (values.empty()) {
        throw std::invalid_argument("percentile of an empty sample");
    }
    const auto n = values.size();
    auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n) - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, n);
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rank - 1), values.end());
    return values[rank - 1];
}

double score_low_utilization(const SimResult& result, std::int64_t window_us, double fraction)
{
    return -lowest_fraction_mean(windowed_throughput(result, window_us), fraction);
}

double score_high_delay(const SimResult& result)
{
    std::vector<std::int64_t> delays;
    delays.reserve(result.deliveries.size());
    for (const auto& d : result.deliveries) {
        delays.push_back(d.delay_us);
    }
    if (delays.empty()) {
        return 0.0;
    }
    return static_cast<double>(percentile_nearest_rank(std::move(delays), 10.0));
}

double score_trace(const PacketTrace& trace, const SimResult& result, double drop_weight)
{
    if (trace.mode != TraceMode::Traffic) {
        return 0.0;
    }
    return -(static_cast<double>(result.cross.sent) + drop_weight * static_cast<double>(result.cross.dropped));
}

std::vector<double> selection_probabilities(std::size_t n)
{
    // extended precision so small cases round to the exact fractions (6/11, ...)
    long double harmonic = 0.0L;
    for (std::size_t i = 1; i <= n; ++i) {
        harmonic += 1.0L / static_cast<long double>(i);
    }
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i) {
        p[i] = static_cast<double>(1.0L / (static_cast<long double>(i + 1) * harmonic));
    }
    return p;
}

}  // namespace ccstress
