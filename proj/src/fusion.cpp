#include "sarneg/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "sarneg/errors.hpp"

namespace sarneg {

DifficultyRanking rrf_fuse(std::span<const DifficultyRanking> rankings, FusionConfig config) {
    if (!(config.k_rrf > 0.0) || !std::isfinite(config.k_rrf)) {
        throw ConfigError("k_rrf must be a positive finite number");
    }
    if (rankings.empty()) {
        throw ValidationError("rrf_fuse needs at least one ranking");
    }

    const auto& reference = rankings.front();
    const std::size_t pool_size = reference.size();
    ArticleIndex max_id = 0;
    for (const auto& r : rankings) {
        if (r.size() != pool_size) {
            throw ValidationError("rankings for " + reference.query_id + " cover different pools");
        }
        for (ArticleIndex a : r.order) {
            max_id = std::max(max_id, a);
        }
    }
    const std::size_t span_size = pool_size == 0 ? 0 : static_cast<std::size_t>(max_id) + 1;

    std::vector<std::vector<std::size_t>> positions;
    positions.reserve(rankings.size());
    for (const auto& r : rankings) {
        positions.push_back(rank_positions(r, span_size));
    }
    for (std::size_t i = 1; i < positions.size(); ++i) {
        for (ArticleIndex a : reference.order) {
            if (positions[i][a] == 0) {
                throw ValidationError("rankings for " + reference.query_id +
                                      " cover different pools");
            }
        }
    }

    struct Scored {
        ArticleIndex article;
        double score;
    };
    std::vector<Scored> scored;
    scored.reserve(pool_size);
    std::vector<std::size_t> ranks(rankings.size());
    const long double k = config.k_rrf;
    for (ArticleIndex a : reference.order) {
        for (std::size_t i = 0; i < positions.size(); ++i) {
            ranks[i] = positions[i][a];
        }
        std::sort(ranks.begin(), ranks.end());
        long double sum = 0.0L;
        for (std::size_t r : ranks) {
            sum += 1.0L / (k + static_cast<long double>(r));
        }
        scored.push_back(Scored{a, static_cast<double>(sum)});
    }
    std::sort(scored.begin(), scored.end(), [](const Scored& x, const Scored& y) {
        return x.score != y.score ? x.score > y.score : x.article < y.article;
    });

    DifficultyRanking out;
    out.query_id = reference.query_id;
    out.source = RankingSource::Fused;
    out.order.reserve(pool_size);
    for (const auto& s : scored) {
        out.order.push_back(s.article);
    }
    return out;
}

} // namespace sarneg
