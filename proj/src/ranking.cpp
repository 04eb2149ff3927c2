#include "sarneg/ranking.hpp"

#include "sarneg/errors.hpp"

namespace sarneg {

std::string_view to_string(RankingSource source) {
    switch (source) {
    case RankingSource::SemanticStatic:
        return "semantic-static";
    case RankingSource::SemanticDynamic:
        return "semantic-dynamic";
    case RankingSource::Hierarchical:
        return "hierarchical";
    case RankingSource::Sequential:
        return "sequential";
    case RankingSource::Fused:
        return "fused";
    }
    return "unknown";
}

RankingSource ranking_source_from_string(std::string_view name) {
    for (auto s : {RankingSource::SemanticStatic, RankingSource::SemanticDynamic,
                   RankingSource::Hierarchical, RankingSource::Sequential, RankingSource::Fused}) {
        if (to_string(s) == name) {
            return s;
        }
    }
    throw ConfigError("unknown ranking source " + std::string(name));
}

std::vector<std::size_t> rank_positions(const DifficultyRanking& ranking, std::size_t corpus_size) {
    std::vector<std::size_t> rank(corpus_size, 0);
    for (std::size_t i = 0; i < ranking.order.size(); ++i) {
        const ArticleIndex a = ranking.order[i];
        if (a >= corpus_size) {
            throw NotFoundError("ranking references article outside the corpus");
        }
        if (rank[a] != 0) {
            throw ValidationError("ranking for " + ranking.query_id + " repeats an article");
        }
        rank[a] = i + 1;
    }
    return rank;
}

} // namespace sarneg
