#pragma once

#include <span>

#include "sarneg/ranking.hpp"

namespace sarneg {

struct FusionConfig {
    double k_rrf = 60.0;  // smoothing constant; ranks are 1-based
};

/// Reciprocal rank fusion: score(a) = sum_r 1 / (k_rrf + rank_r(a)). Output is
/// sorted by score descending, ties by ascending id, tagged Fused.
///
/// Each article's terms are summed in ascending-rank order in extended precision
/// and rounded once, so the result does not depend on the order of `rankings`
/// and articles with equal exact scores fall through to the id tie-break.
DifficultyRanking rrf_fuse(std::span<const DifficultyRanking> rankings, FusionConfig config = {});

} // namespace sarneg
