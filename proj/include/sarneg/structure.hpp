#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sarneg/corpus.hpp"
#include "sarneg/ranking.hpp"

namespace sarneg {

struct DistanceEntry {
    ArticleIndex article;
    std::uint32_t distance;

    friend bool operator==(const DistanceEntry&, const DistanceEntry&) = default;
};

/// Distance of each pool article to its nearest positive, in pool order.
using DistanceMap = std::vector<DistanceEntry>;

/// Tree hop count from each pool article to the closest positive leaf, via one
/// multi-source BFS seeded with every positive. Structural nodes count as hops,
/// so two sibling articles are at distance 2.
DistanceMap hierarchical_distances(const LegislationGraph& graph,
                                   std::span<const ArticleIndex> positives,
                                   std::span<const ArticleIndex> pool);

/// min over positives of |seq_index(negative) - seq_index(positive)|.
DistanceMap sequential_distances(const CorpusStore& corpus,
                                 std::span<const ArticleIndex> positives,
                                 std::span<const ArticleIndex> pool);

/// Ascending distance, ties by ascending article id.
DifficultyRanking rank_by_distance(const DistanceMap& distances, std::string query_id,
                                   RankingSource source);

} // namespace sarneg
