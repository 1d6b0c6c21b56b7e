#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "ccstress/sim.hpp"
#include "ccstress/trace.hpp"

namespace ccstress {

enum class ScoreKind { LowUtilization, HighDelay, Custom };

std::string_view to_string(ScoreKind kind);
ScoreKind score_kind_from_string(std::string_view s);

/// Mean of the lowest ceil(fraction * n) values. Empty input gives 0.
double lowest_fraction_mean(std::vector<double> values, double fraction);

/// Nearest-rank percentile: the value at 1-based rank ceil(p/100 * n) of the
/// sorted sample. Throws std::invalid_argument on an empty sample.
std::int64_t percentile_nearest_rank(std::vector<std::int64_t> values, double p);

/// Negated mean of the lowest 20% throughput windows (Mbps); higher = worse
/// for the CCA.
double score_low_utilization(const SimResult& result, std::int64_t window_us, double fraction = 0.2);

/// 10th percentile one-way delay of delivered sender packets in microseconds;
/// 0 when nothing was delivered.
double score_high_delay(const SimResult& result);

/// -(cross packets sent + drop_weight * cross packets dropped). Link traces
/// score 0.
double score_trace(const PacketTrace& trace, const SimResult& result, double drop_weight = 1.0);

/// Parent-selection probabilities for ranks 1..n, proportional to 1/rank.
std::vector<double> selection_probabilities(std::size_t n);

}  // namespace ccstress
