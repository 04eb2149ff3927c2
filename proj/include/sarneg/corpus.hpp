#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sarneg {

/// Dense handle for an article: its position when the corpus is sorted by id.
/// Ordering handles therefore orders ids, which is the tie-break used by every
/// ranking in this library.
using ArticleIndex = std::uint32_t;

struct Article {
    std::string id;
    std::string text;
    std::vector<std::string> path;  // code -> book -> ... ; depth >= 1
    std::size_t seq_index = 0;      // position in corpus file order
};

/// Immutable, validated statute corpus.
class CorpusStore {
public:
    CorpusStore() = default;

    /// Validates and indexes articles given in enumeration order. seq_index is
    /// reassigned from the input order.
    static CorpusStore from_articles(std::vector<Article> in_file_order);

    std::size_t size() const { return articles_.size(); }
    bool empty() const { return articles_.empty(); }

    const Article& article(ArticleIndex idx) const { return articles_.at(idx); }
    const std::string& id(ArticleIndex idx) const { return articles_.at(idx).id; }

    /// Articles sorted by id; position == ArticleIndex.
    std::span<const Article> articles() const { return articles_; }

    /// Article handles in enumeration (seq_index) order.
    std::span<const ArticleIndex> order() const { return order_; }

    std::optional<ArticleIndex> find(std::string_view id) const;
    ArticleIndex index_of(std::string_view id) const;  // throws NotFoundError

    /// Content checksum over ids, texts and paths in enumeration order.
    std::uint64_t checksum() const;

private:
    std::vector<Article> articles_;
    std::vector<ArticleIndex> order_;
};

struct QueryExample {
    std::string id;
    std::string question;
    std::vector<ArticleIndex> positives;  // sorted, unique, non-empty
};

/// Corpus records are JSON objects, one per line:
///   {"id": "art_1", "text": "...", "path": ["Code civil", "Livre I", ...]}
CorpusStore parse_corpus(std::istream& in);
CorpusStore load_corpus(const std::filesystem::path& path);
void write_corpus(std::ostream& out, const CorpusStore& corpus);

/// Query records: {"id": "q1", "question": "...", "positives": ["art_1", ...]}
std::vector<QueryExample> parse_queries(std::istream& in, const CorpusStore& corpus);
std::vector<QueryExample> load_queries(const std::filesystem::path& path,
                                       const CorpusStore& corpus);
void write_queries(std::ostream& out, std::span<const QueryExample> queries,
                   const CorpusStore& corpus);

std::uint64_t queries_checksum(std::span<const QueryExample> queries);

struct SplitRatios {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
};

struct QuerySplit {
    std::vector<QueryExample> train;
    std::vector<QueryExample> val;
    std::vector<QueryExample> test;
};

/// Seeded shuffle followed by contiguous cuts. Sizes are the largest-remainder
/// apportionment of |queries| by the ratios.
QuerySplit split_queries(std::span<const QueryExample> queries, SplitRatios ratios,
                         std::uint64_t seed);

/// Sorted handles of every article not in `positives`.
std::vector<ArticleIndex> negative_pool(std::size_t corpus_size,
                                        std::span<const ArticleIndex> positives);

/// Undirected tree: virtual root -> one node per distinct path prefix -> article
/// leaves. Node 0 is the root.
class LegislationGraph {
public:
    using NodeId = std::uint32_t;
    static constexpr NodeId kRoot = 0;

    static LegislationGraph build(const CorpusStore& corpus);

    std::size_t node_count() const { return labels_.size(); }
    std::size_t edge_count() const { return neighbors_.size() / 2; }

    std::span<const NodeId> neighbors(NodeId node) const {
        return std::span<const NodeId>(neighbors_).subspan(
            offsets_[node], offsets_[node + 1] - offsets_[node]);
    }
    NodeId parent(NodeId node) const { return parents_.at(node); }
    const std::string& label(NodeId node) const { return labels_.at(node); }
    std::size_t depth(NodeId node) const { return depths_.at(node); }

    NodeId article_node(ArticleIndex article) const { return article_nodes_.at(article); }
    std::optional<ArticleIndex> article_at(NodeId node) const;
    bool is_article(NodeId node) const { return article_at(node).has_value(); }
    std::size_t article_count() const { return article_nodes_.size(); }

    /// Structural labels from the root (exclusive) down to the node (exclusive
    /// for articles, inclusive for structural nodes).
    std::vector<std::string> path_to(NodeId node) const;

private:
    std::vector<std::string> labels_;
    std::vector<NodeId> parents_;
    std::vector<std::size_t> depths_;
    std::vector<std::size_t> offsets_;
    std::vector<NodeId> neighbors_;
    std::vector<NodeId> article_nodes_;                  // by ArticleIndex
    std::vector<std::optional<ArticleIndex>> node_articles_;  // by NodeId
};

inline LegislationGraph build_graph(const CorpusStore& corpus) {
    return LegislationGraph::build(corpus);
}

} // namespace sarneg
