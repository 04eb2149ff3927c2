#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "sarneg/corpus.hpp"

namespace sarneg {

enum class RankingSource {
    SemanticStatic,
    SemanticDynamic,
    Hierarchical,
    Sequential,
    Fused,
};

std::string_view to_string(RankingSource source);
RankingSource ranking_source_from_string(std::string_view name);

/// Per-query ordering of a negative pool; order[0] is rank 1 (most difficult).
struct DifficultyRanking {
    std::string query_id;
    RankingSource source = RankingSource::Fused;
    std::vector<ArticleIndex> order;

    std::size_t size() const { return order.size(); }
};

/// 1-based rank of every pool article, indexed by ArticleIndex; 0 for
/// articles outside the pool.
std::vector<std::size_t> rank_positions(const DifficultyRanking& ranking, std::size_t corpus_size);

} // namespace sarneg
