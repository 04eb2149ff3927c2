#pragma once

#include <random>
#include <string>
#include <vector>

#include "sarneg/corpus.hpp"

namespace sarneg::test {

struct Row {
    std::string id;
    std::string text;
    std::vector<std::string> path;
};

inline CorpusStore corpus_of(const std::vector<Row>& rows) {
    std::vector<Article> articles;
    for (const auto& r : rows) {
        articles.push_back(Article{r.id, r.text, r.path, 0});
    }
    return CorpusStore::from_articles(std::move(articles));
}

inline std::string numbered(const char* prefix, std::size_t i) {
    std::string s = std::to_string(i);
    return prefix + std::string(s.size() < 4 ? 4 - s.size() : 0, '0') + s;
}

/// Random ragged hierarchy: every article gets a path of depth 1..max_depth
/// drawn from a small label alphabet so prefixes are shared. File order is
/// shuffled relative to id order.
inline CorpusStore random_tree_corpus(std::mt19937_64& rng, std::size_t articles,
                                      std::size_t max_depth = 4, std::size_t fanout = 3) {
    std::uniform_int_distribution<std::size_t> depth(1, max_depth);
    std::uniform_int_distribution<std::size_t> label(0, fanout - 1);
    std::vector<Row> rows;
    for (std::size_t i = 0; i < articles; ++i) {
        Row r;
        r.id = numbered("a", i);
        r.text = "article " + std::to_string(i);
        const std::size_t d = depth(rng);
        for (std::size_t k = 0; k < d; ++k) {
            r.path.push_back("L" + std::to_string(k) + "_" + std::to_string(label(rng)));
        }
        rows.push_back(std::move(r));
    }
    std::shuffle(rows.begin(), rows.end(), rng);
    return corpus_of(rows);
}

inline QueryExample query_of(const CorpusStore& corpus, std::string id, std::string question,
                             const std::vector<std::string>& positives) {
    QueryExample q{std::move(id), std::move(question), {}};
    for (const auto& p : positives) {
        q.positives.push_back(corpus.index_of(p));
    }
    std::sort(q.positives.begin(), q.positives.end());
    return q;
}

} // namespace sarneg::test
