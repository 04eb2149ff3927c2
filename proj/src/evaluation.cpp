#include "sarneg/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "sarneg/checksum.hpp"
#include "sarneg/errors.hpp"
#include "sarneg/text.hpp"

namespace sarneg {

namespace {

std::vector<ArticleIndex> relevant_set(std::span<const ArticleIndex> relevant) {
    if (relevant.empty()) {
        throw ValidationError("relevant set must not be empty");
    }
    std::vector<ArticleIndex> sorted(relevant.begin(), relevant.end());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    return sorted;
}

std::size_t hits_in_prefix(std::span<const ArticleIndex> ranked,
                           const std::vector<ArticleIndex>& relevant, std::size_t k) {
    const std::size_t n = std::min(k, ranked.size());
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (std::binary_search(relevant.begin(), relevant.end(), ranked[i])) {
            ++hits;
        }
    }
    return hits;
}

} // namespace

double recall_at_k(std::span<const ArticleIndex> ranked, std::span<const ArticleIndex> relevant,
                   std::size_t k) {
    if (k == 0) {
        throw ConfigError("recall@k requires k >= 1");
    }
    const auto rel = relevant_set(relevant);
    return static_cast<double>(hits_in_prefix(ranked, rel, k)) / static_cast<double>(rel.size());
}

double average_precision(std::span<const ArticleIndex> ranked,
                         std::span<const ArticleIndex> relevant) {
    const auto rel = relevant_set(relevant);
    double sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < ranked.size() && hits < rel.size(); ++i) {
        if (std::binary_search(rel.begin(), rel.end(), ranked[i])) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(i + 1);
        }
    }
    return sum / static_cast<double>(rel.size());
}

double r_precision(std::span<const ArticleIndex> ranked, std::span<const ArticleIndex> relevant) {
    const auto rel = relevant_set(relevant);
    return static_cast<double>(hits_in_prefix(ranked, rel, rel.size())) /
           static_cast<double>(rel.size());
}

std::vector<ArticleIndex> Bm25Retriever::rank_all(std::string_view question) const {
    const auto tokens = index_.analyzer().analyze(question);
    const auto ranked = index_.top_k(tokens, index_.doc_count());
    std::vector<ArticleIndex> out;
    out.reserve(ranked.size());
    for (const auto& s : ranked) {
        out.push_back(s.doc);
    }
    return out;
}

DenseRetriever::DenseRetriever(const DualEncoder& model, std::span<const TokenBag> article_bags,
                               std::string name)
    : model_(model), articles_(embed_all(model, article_bags, Side::Article)),
      name_(std::move(name)) {}

std::vector<ArticleIndex> DenseRetriever::rank_all(std::string_view question) const {
    const auto bag = encode_text(question, model_.vocab_size());
    const auto q = embed(model_, bag, Side::Query);
    const std::size_t n = articles_.dim == 0 ? 0 : articles_.values.size() / articles_.dim;
    std::vector<std::pair<double, ArticleIndex>> scored;
    scored.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        scored.emplace_back(dot(q, articles_.row(i)), static_cast<ArticleIndex>(i));
    }
    std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
        return x.first != y.first ? x.first > y.first : x.second < y.second;
    });
    std::vector<ArticleIndex> out;
    out.reserve(n);
    for (const auto& s : scored) {
        out.push_back(s.second);
    }
    return out;
}

double MetricsReport::recall_at(std::size_t k) const {
    for (std::size_t i = 0; i < ks.size(); ++i) {
        if (ks[i] == k) {
            return recall[i];
        }
    }
    throw NotFoundError("recall@" + std::to_string(k) + " was not evaluated");
}

nlohmann::json MetricsReport::to_json() const {
    nlohmann::json recall_json = nlohmann::json::object();
    for (std::size_t i = 0; i < ks.size(); ++i) {
        recall_json[std::to_string(ks[i])] = recall[i];
    }
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& q : per_query) {
        nlohmann::json r = nlohmann::json::object();
        for (std::size_t i = 0; i < ks.size(); ++i) {
            r[std::to_string(ks[i])] = q.recall[i];
        }
        rows.push_back({{"query_id", q.query_id},
                        {"recall", r},
                        {"average_precision", q.average_precision},
                        {"r_precision", q.r_precision}});
    }
    return {
        {"retriever", retriever},
        {"ks", ks},
        {"recall", recall_json},
        {"map", map},
        {"mrp", mrp},
        {"query_count", per_query.size()},
        {"corpus_checksum", to_hex(corpus_checksum)},
        {"queries_checksum", to_hex(queries_checksum)},
        {"per_query", rows},
    };
}

MetricsReport evaluate(const Retriever& retriever, std::span<const QueryExample> queries,
                       const CorpusStore& corpus, std::span<const std::size_t> ks) {
    MetricsReport report;
    report.retriever = retriever.name();
    report.ks.assign(ks.begin(), ks.end());
    report.recall.assign(ks.size(), 0.0);
    report.corpus_checksum = corpus.checksum();
    report.queries_checksum = queries_checksum(queries);
    for (std::size_t k : ks) {
        if (k == 0) {
            throw ConfigError("evaluation k values must be >= 1");
        }
    }
    if (queries.empty()) {
        return report;
    }
    for (const auto& q : queries) {
        const auto ranking = retriever.rank_all(q.question);
        QueryMetrics m;
        m.query_id = q.id;
        for (std::size_t k : ks) {
            m.recall.push_back(recall_at_k(ranking, q.positives, k));
        }
        m.average_precision = average_precision(ranking, q.positives);
        m.r_precision = r_precision(ranking, q.positives);
        report.per_query.push_back(std::move(m));
    }
    std::sort(report.per_query.begin(), report.per_query.end(),
              [](const QueryMetrics& a, const QueryMetrics& b) { return a.query_id < b.query_id; });
    const double inv = 1.0 / static_cast<double>(queries.size());
    for (const auto& m : report.per_query) {
        for (std::size_t i = 0; i < ks.size(); ++i) {
            report.recall[i] += m.recall[i];
        }
        report.map += m.average_precision;
        report.mrp += m.r_precision;
    }
    for (double& r : report.recall) {
        r *= inv;
    }
    report.map *= inv;
    report.mrp *= inv;
    return report;
}

std::string metrics_table_header(std::span<const std::size_t> ks, std::string_view label_column) {
    std::ostringstream out;
    out << "| " << label_column << " |";
    for (std::size_t k : ks) {
        out << " R@" << k << " |";
    }
    out << " MAP | MRP |\n|---|";
    for (std::size_t i = 0; i < ks.size() + 2; ++i) {
        out << "---:|";
    }
    out << '\n';
    return out.str();
}

std::string metrics_table_row(const MetricsReport& report, std::string_view label) {
    auto pct = [](double x) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.1f", 100.0 * x);
        return std::string(buf);
    };
    std::ostringstream out;
    out << "| " << label << " |";
    for (double r : report.recall) {
        out << ' ' << pct(r) << " |";
    }
    out << ' ' << pct(report.map) << " | " << pct(report.mrp) << " |\n";
    return out.str();
}

} // namespace sarneg
