#include "sarneg/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "sarneg/checksum.hpp"
#include "sarneg/errors.hpp"

namespace sarneg {

namespace {

using nlohmann::json;

std::string line_prefix(std::size_t line_no) {
    return "line " + std::to_string(line_no) + ": ";
}

bool is_blank(std::string_view line) {
    return std::all_of(line.begin(), line.end(),
                       [](unsigned char c) { return std::isspace(c) != 0; });
}

json parse_record(const std::string& line, std::size_t line_no) {
    json record;
    try {
        record = json::parse(line);
    } catch (const json::parse_error& e) {
        throw ValidationError(line_prefix(line_no) + "malformed record: " + e.what());
    }
    if (!record.is_object()) {
        throw ValidationError(line_prefix(line_no) + "record is not an object");
    }
    return record;
}

std::string required_string(const json& record, const char* field, std::size_t line_no) {
    auto it = record.find(field);
    if (it == record.end() || it->is_null()) {
        throw ValidationError(line_prefix(line_no) + "missing " + field);
    }
    if (!it->is_string()) {
        throw ValidationError(line_prefix(line_no) + field + " must be a string");
    }
    return it->get<std::string>();
}

std::vector<std::string> required_string_array(const json& record, const char* field,
                                               std::size_t line_no) {
    auto it = record.find(field);
    if (it == record.end() || !it->is_array()) {
        throw ValidationError(line_prefix(line_no) + "missing " + field + " array");
    }
    std::vector<std::string> out;
    out.reserve(it->size());
    for (const auto& v : *it) {
        if (!v.is_string()) {
            throw ValidationError(line_prefix(line_no) + field + " entries must be strings");
        }
        out.push_back(v.get<std::string>());
    }
    return out;
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw NotFoundError("cannot open " + path.string());
    }
    return in;
}

} // namespace

CorpusStore CorpusStore::from_articles(std::vector<Article> in_file_order) {
    if (in_file_order.empty()) {
        throw ValidationError("empty corpus");
    }
    for (std::size_t i = 0; i < in_file_order.size(); ++i) {
        auto& a = in_file_order[i];
        if (a.id.empty()) {
            throw ValidationError("article " + std::to_string(i) + ": missing id");
        }
        if (a.text.empty()) {
            throw ValidationError("article " + a.id + ": empty text");
        }
        if (a.path.empty()) {
            throw ValidationError("article " + a.id + ": empty path");
        }
        if (std::any_of(a.path.begin(), a.path.end(), [](const auto& s) { return s.empty(); })) {
            throw ValidationError("article " + a.id + ": empty path label");
        }
        a.seq_index = i;
    }

    CorpusStore store;
    store.articles_ = std::move(in_file_order);
    std::stable_sort(store.articles_.begin(), store.articles_.end(),
                     [](const Article& x, const Article& y) { return x.id < y.id; });
    for (std::size_t i = 1; i < store.articles_.size(); ++i) {
        if (store.articles_[i].id == store.articles_[i - 1].id) {
            throw ValidationError("duplicate id " + store.articles_[i].id);
        }
    }
    store.order_.resize(store.articles_.size());
    for (std::size_t i = 0; i < store.articles_.size(); ++i) {
        store.order_[store.articles_[i].seq_index] = static_cast<ArticleIndex>(i);
    }
    return store;
}

std::optional<ArticleIndex> CorpusStore::find(std::string_view id) const {
    auto it = std::lower_bound(articles_.begin(), articles_.end(), id,
                               [](const Article& a, std::string_view key) { return a.id < key; });
    if (it == articles_.end() || it->id != id) {
        return std::nullopt;
    }
    return static_cast<ArticleIndex>(it - articles_.begin());
}

ArticleIndex CorpusStore::index_of(std::string_view id) const {
    if (auto idx = find(id)) {
        return *idx;
    }
    throw NotFoundError("unknown article id " + std::string(id));
}

std::uint64_t CorpusStore::checksum() const {
    std::uint64_t h = kFnvOffset;
    for (ArticleIndex idx : order_) {
        const auto& a = articles_[idx];
        h = fnv1a64(a.id, h);
        h = fnv1a64(std::string_view("\x1f", 1), h);
        h = fnv1a64(a.text, h);
        for (const auto& label : a.path) {
            h = fnv1a64(std::string_view("\x1e", 1), h);
            h = fnv1a64(label, h);
        }
        h = fnv1a64(std::string_view("\n", 1), h);
    }
    return h;
}

CorpusStore parse_corpus(std::istream& in) {
    std::vector<Article> articles;
    std::map<std::string, std::size_t> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) {
            continue;
        }
        const json record = parse_record(line, line_no);
        Article a;
        a.id = required_string(record, "id", line_no);
        if (a.id.empty()) {
            throw ValidationError(line_prefix(line_no) + "missing id");
        }
        if (auto [it, inserted] = seen.emplace(a.id, line_no); !inserted) {
            throw ValidationError(line_prefix(line_no) + "duplicate id " + a.id +
                                  " (first on line " + std::to_string(it->second) + ")");
        }
        a.text = required_string(record, "text", line_no);
        if (a.text.empty()) {
            throw ValidationError(line_prefix(line_no) + "empty text for " + a.id);
        }
        a.path = required_string_array(record, "path", line_no);
        if (a.path.empty()) {
            throw ValidationError(line_prefix(line_no) + "empty path for " + a.id);
        }
        articles.push_back(std::move(a));
    }
    return CorpusStore::from_articles(std::move(articles));
}

CorpusStore load_corpus(const std::filesystem::path& path) {
    auto in = open_input(path);
    return parse_corpus(in);
}

void write_corpus(std::ostream& out, const CorpusStore& corpus) {
    for (ArticleIndex idx : corpus.order()) {
        const auto& a = corpus.article(idx);
        json record = {{"id", a.id}, {"text", a.text}, {"path", a.path}};
        out << record.dump() << '\n';
    }
}

std::vector<QueryExample> parse_queries(std::istream& in, const CorpusStore& corpus) {
    std::vector<QueryExample> queries;
    std::map<std::string, std::size_t> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) {
            continue;
        }
        const json record = parse_record(line, line_no);
        QueryExample q;
        q.id = required_string(record, "id", line_no);
        if (q.id.empty()) {
            throw ValidationError(line_prefix(line_no) + "missing id");
        }
        if (auto [it, inserted] = seen.emplace(q.id, line_no); !inserted) {
            throw ValidationError(line_prefix(line_no) + "duplicate query id " + q.id);
        }
        q.question = required_string(record, "question", line_no);
        for (const auto& pid : required_string_array(record, "positives", line_no)) {
            auto idx = corpus.find(pid);
            if (!idx) {
                throw ValidationError(line_prefix(line_no) + "query " + q.id +
                                      " references unknown article " + pid);
            }
            q.positives.push_back(*idx);
        }
        std::sort(q.positives.begin(), q.positives.end());
        q.positives.erase(std::unique(q.positives.begin(), q.positives.end()),
                          q.positives.end());
        if (q.positives.empty()) {
            throw ValidationError(line_prefix(line_no) + "query " + q.id + " has no positives");
        }
        queries.push_back(std::move(q));
    }
    return queries;
}

std::vector<QueryExample> load_queries(const std::filesystem::path& path,
                                       const CorpusStore& corpus) {
    auto in = open_input(path);
    return parse_queries(in, corpus);
}

void write_queries(std::ostream& out, std::span<const QueryExample> queries,
                   const CorpusStore& corpus) {
    for (const auto& q : queries) {
        json positives = json::array();
        for (ArticleIndex p : q.positives) {
            positives.push_back(corpus.id(p));
        }
        json record = {{"id", q.id}, {"question", q.question}, {"positives", positives}};
        out << record.dump() << '\n';
    }
}

std::uint64_t queries_checksum(std::span<const QueryExample> queries) {
    std::uint64_t h = kFnvOffset;
    for (const auto& q : queries) {
        h = fnv1a64(q.id, h);
        h = fnv1a64(std::string_view("\x1f", 1), h);
        h = fnv1a64(q.question, h);
        for (ArticleIndex p : q.positives) {
            h = fnv1a64(std::to_string(p), h);
            h = fnv1a64(std::string_view(",", 1), h);
        }
        h = fnv1a64(std::string_view("\n", 1), h);
    }
    return h;
}

QuerySplit split_queries(std::span<const QueryExample> queries, SplitRatios ratios,
                         std::uint64_t seed) {
    const double parts[3] = {ratios.train, ratios.val, ratios.test};
    for (double r : parts) {
        if (!std::isfinite(r) || r < 0.0) {
            throw ConfigError("split ratios must be non-negative");
        }
    }
    if (ratios.train <= 0.0) {
        throw ConfigError("train ratio must be positive");
    }
    if (std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
        throw ConfigError("split ratios must sum to 1");
    }

    const std::size_t n = queries.size();
    std::size_t sizes[3];
    double remainders[3];
    std::size_t assigned = 0;
    for (int i = 0; i < 3; ++i) {
        const double exact = parts[i] * static_cast<double>(n);
        sizes[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        remainders[i] = exact - static_cast<double>(sizes[i]);
        assigned += sizes[i];
    }
    while (assigned < n) {
        int best = 0;
        for (int i = 1; i < 3; ++i) {
            if (remainders[i] > remainders[best] + 1e-12) {
                best = i;
            }
        }
        ++sizes[best];
        remainders[best] = -1.0;
        ++assigned;
    }

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);

    QuerySplit split;
    std::vector<QueryExample>* targets[3] = {&split.train, &split.val, &split.test};
    std::size_t pos = 0;
    for (int i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < sizes[i]; ++j) {
            targets[i]->push_back(queries[perm[pos++]]);
        }
    }
    return split;
}

std::vector<ArticleIndex> negative_pool(std::size_t corpus_size,
                                        std::span<const ArticleIndex> positives) {
    std::vector<char> excluded(corpus_size, 0);
    for (ArticleIndex p : positives) {
        if (p >= corpus_size) {
            throw NotFoundError("positive article handle out of range");
        }
        excluded[p] = 1;
    }
    std::vector<ArticleIndex> pool;
    pool.reserve(corpus_size);
    for (std::size_t i = 0; i < corpus_size; ++i) {
        if (!excluded[i]) {
            pool.push_back(static_cast<ArticleIndex>(i));
        }
    }
    return pool;
}

LegislationGraph LegislationGraph::build(const CorpusStore& corpus) {
    LegislationGraph g;
    std::vector<std::map<std::string, NodeId>> children(1);
    g.labels_.emplace_back("");
    g.parents_.push_back(kRoot);
    g.depths_.push_back(0);
    g.node_articles_.emplace_back();

    auto add_node = [&](NodeId parent, std::string label, std::optional<ArticleIndex> article) {
        const auto id = static_cast<NodeId>(g.labels_.size());
        g.labels_.push_back(std::move(label));
        g.parents_.push_back(parent);
        g.depths_.push_back(g.depths_[parent] + 1);
        g.node_articles_.push_back(article);
        children.emplace_back();
        return id;
    };

    g.article_nodes_.assign(corpus.size(), kRoot);
    for (ArticleIndex idx : corpus.order()) {
        const auto& a = corpus.article(idx);
        NodeId cur = kRoot;
        for (const auto& label : a.path) {
            auto it = children[cur].find(label);
            if (it == children[cur].end()) {
                const NodeId next = add_node(cur, label, std::nullopt);
                children[cur].emplace(label, next);
                cur = next;
            } else {
                cur = it->second;
            }
        }
        g.article_nodes_[idx] = add_node(cur, a.id, idx);
    }

    // CSR adjacency from the parent array.
    const std::size_t n = g.labels_.size();
    std::vector<std::size_t> degree(n, 0);
    for (NodeId v = 1; v < n; ++v) {
        ++degree[v];
        ++degree[g.parents_[v]];
    }
    g.offsets_.assign(n + 1, 0);
    for (std::size_t v = 0; v < n; ++v) {
        g.offsets_[v + 1] = g.offsets_[v] + degree[v];
    }
    g.neighbors_.resize(g.offsets_[n]);
    std::vector<std::size_t> fill(g.offsets_.begin(), g.offsets_.end() - 1);
    for (NodeId v = 1; v < n; ++v) {
        const NodeId p = g.parents_[v];
        g.neighbors_[fill[v]++] = p;
        g.neighbors_[fill[p]++] = v;
    }
    return g;
}

std::optional<ArticleIndex> LegislationGraph::article_at(NodeId node) const {
    return node_articles_.at(node);
}

std::vector<std::string> LegislationGraph::path_to(NodeId node) const {
    std::vector<std::string> path;
    if (is_article(node)) {
        node = parents_[node];
    }
    while (node != kRoot) {
        path.push_back(labels_[node]);
        node = parents_[node];
    }
    std::reverse(path.begin(), path.end());
    return path;
}

} // namespace sarneg
