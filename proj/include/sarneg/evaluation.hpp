#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sarneg/bm25.hpp"
#include "sarneg/corpus.hpp"
#include "sarneg/encoder.hpp"

namespace sarneg {

double recall_at_k(std::span<const ArticleIndex> ranked, std::span<const ArticleIndex> relevant,
                   std::size_t k);

/// Mean over relevant articles of Precision@(rank); unretrieved ones count 0.
double average_precision(std::span<const ArticleIndex> ranked,
                         std::span<const ArticleIndex> relevant);

/// Precision at R = |relevant|.
double r_precision(std::span<const ArticleIndex> ranked, std::span<const ArticleIndex> relevant);

/// Produces a full ranking of the corpus for a question.
class Retriever {
public:
    virtual ~Retriever() = default;
    virtual std::string name() const = 0;
    virtual std::vector<ArticleIndex> rank_all(std::string_view question) const = 0;
};

class Bm25Retriever final : public Retriever {
public:
    explicit Bm25Retriever(const Bm25Index& index) : index_(index) {}
    std::string name() const override { return "bm25"; }
    std::vector<ArticleIndex> rank_all(std::string_view question) const override;

private:
    const Bm25Index& index_;
};

/// Ranks by f(q, s) with article embeddings cached at construction.
class DenseRetriever final : public Retriever {
public:
    DenseRetriever(const DualEncoder& model, std::span<const TokenBag> article_bags,
                   std::string name = "dual-encoder");
    std::string name() const override { return name_; }
    std::vector<ArticleIndex> rank_all(std::string_view question) const override;

private:
    const DualEncoder& model_;
    EmbeddingMatrix articles_;
    std::string name_;
};

struct QueryMetrics {
    std::string query_id;
    std::vector<double> recall;  // parallel to MetricsReport::ks
    double average_precision = 0.0;
    double r_precision = 0.0;
};

struct MetricsReport {
    std::string retriever;
    std::vector<std::size_t> ks;
    std::vector<double> recall;  // macro-averaged, parallel to ks
    double map = 0.0;
    double mrp = 0.0;
    std::vector<QueryMetrics> per_query;
    std::uint64_t corpus_checksum = 0;
    std::uint64_t queries_checksum = 0;

    double recall_at(std::size_t k) const;  // throws NotFoundError if k not evaluated
    nlohmann::json to_json() const;
};

/// Macro-averaged R@k, MAP and MRP; one full ranking per query. Per-query rows
/// are sorted by query id.
MetricsReport evaluate(const Retriever& retriever, std::span<const QueryExample> queries,
                       const CorpusStore& corpus, std::span<const std::size_t> ks);

/// Header and row for a flat comparison table: label, R@k..., MAP, MRP, in percent.
std::string metrics_table_header(std::span<const std::size_t> ks, std::string_view label_column);
std::string metrics_table_row(const MetricsReport& report, std::string_view label);

} // namespace sarneg
