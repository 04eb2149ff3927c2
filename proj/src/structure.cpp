#include "sarneg/structure.hpp"

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <queue>

#include "sarneg/errors.hpp"

namespace sarneg {

namespace {

void check_disjoint(std::span<const ArticleIndex> positives, std::span<const ArticleIndex> pool) {
    std::vector<ArticleIndex> sorted(positives.begin(), positives.end());
    std::sort(sorted.begin(), sorted.end());
    for (ArticleIndex a : pool) {
        if (std::binary_search(sorted.begin(), sorted.end(), a)) {
            throw ValidationError("negative pool contains positive article " + std::to_string(a));
        }
    }
}

} // namespace

DistanceMap hierarchical_distances(const LegislationGraph& graph,
                                   std::span<const ArticleIndex> positives,
                                   std::span<const ArticleIndex> pool) {
    if (positives.empty()) {
        throw ValidationError("hierarchical distances need at least one positive");
    }
    check_disjoint(positives, pool);

    constexpr auto kUnreached = std::numeric_limits<std::uint32_t>::max();
    std::vector<std::uint32_t> dist(graph.node_count(), kUnreached);
    std::queue<LegislationGraph::NodeId> frontier;
    for (ArticleIndex p : positives) {
        if (p >= graph.article_count()) {
            throw NotFoundError("positive article " + std::to_string(p) + " is not in the graph");
        }
        const auto node = graph.article_node(p);
        if (dist[node] != 0) {
            dist[node] = 0;
            frontier.push(node);
        }
    }
    while (!frontier.empty()) {
        const auto u = frontier.front();
        frontier.pop();
        for (auto v : graph.neighbors(u)) {
            if (dist[v] == kUnreached) {
                dist[v] = dist[u] + 1;
                frontier.push(v);
            }
        }
    }

    DistanceMap out;
    out.reserve(pool.size());
    for (ArticleIndex a : pool) {
        if (a >= graph.article_count()) {
            throw NotFoundError("pool article " + std::to_string(a) + " is not in the graph");
        }
        out.push_back(DistanceEntry{a, dist[graph.article_node(a)]});
    }
    return out;
}

DistanceMap sequential_distances(const CorpusStore& corpus,
                                 std::span<const ArticleIndex> positives,
                                 std::span<const ArticleIndex> pool) {
    if (positives.empty()) {
        throw ValidationError("sequential distances need at least one positive");
    }
    check_disjoint(positives, pool);

    std::vector<std::size_t> anchors;
    anchors.reserve(positives.size());
    for (ArticleIndex p : positives) {
        anchors.push_back(corpus.article(p).seq_index);
    }
    std::sort(anchors.begin(), anchors.end());

    DistanceMap out;
    out.reserve(pool.size());
    for (ArticleIndex a : pool) {
        const std::size_t pos = corpus.article(a).seq_index;
        auto it = std::lower_bound(anchors.begin(), anchors.end(), pos);
        std::size_t best = std::numeric_limits<std::size_t>::max();
        if (it != anchors.end()) {
            best = *it - pos;
        }
        if (it != anchors.begin()) {
            best = std::min(best, pos - *std::prev(it));
        }
        out.push_back(DistanceEntry{a, static_cast<std::uint32_t>(best)});
    }
    return out;
}

DifficultyRanking rank_by_distance(const DistanceMap& distances, std::string query_id,
                                   RankingSource source) {
    DistanceMap sorted = distances;
    std::sort(sorted.begin(), sorted.end(), [](const DistanceEntry& x, const DistanceEntry& y) {
        return x.distance != y.distance ? x.distance < y.distance : x.article < y.article;
    });
    DifficultyRanking out;
    out.query_id = std::move(query_id);
    out.source = source;
    out.order.reserve(sorted.size());
    for (const auto& e : sorted) {
        out.order.push_back(e.article);
    }
    return out;
}

} // namespace sarneg
