#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sarneg/corpus.hpp"
#include "sarneg/ranking.hpp"
#include "sarneg/text.hpp"

namespace sarneg {

/// Okapi BM25 free parameters. Defaults are the conventional Robertson values.
struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct Posting {
    ArticleIndex doc;
    std::uint32_t tf;

    friend bool operator==(const Posting&, const Posting&) = default;
};

struct ScoredDoc {
    ArticleIndex doc;
    double score;
};

/// Inverted index with per-document lengths. Document ids are ArticleIndex
/// values, so "ascending doc id" and "ascending article id" coincide.
class Bm25Index {
public:
    static Bm25Index build(const CorpusStore& corpus, Bm25Params params = {},
                           Analyzer analyzer = {});

    const Bm25Params& params() const { return params_; }
    const Analyzer& analyzer() const { return analyzer_; }
    std::size_t doc_count() const { return doc_lengths_.size(); }
    std::size_t term_count() const { return terms_.size(); }
    double average_doc_length() const { return avg_doc_length_; }
    std::uint32_t doc_length(ArticleIndex doc) const { return doc_lengths_.at(doc); }
    const std::vector<std::string>& doc_ids() const { return doc_ids_; }

    /// True when the index was built over exactly this corpus's article ids.
    bool covers(const CorpusStore& corpus) const;

    /// Postings for a term, sorted by doc; empty span for unknown terms.
    std::span<const Posting> postings(const std::string& term) const;
    std::uint32_t document_frequency(const std::string& term) const;

    /// ln((N - n + 0.5) / (n + 0.5) + 1); strictly positive.
    double idf(std::uint32_t document_frequency) const;

    /// Sum over query tokens (with multiplicity) of idf * tf(k1+1) / (tf + k1 norm).
    double score(std::span<const std::string> query_tokens, ArticleIndex doc) const;

    /// Scores for every document, indexed by ArticleIndex.
    std::vector<double> score_all(std::span<const std::string> query_tokens) const;

    /// Descending score, ascending doc id on ties; length min(k, N).
    std::vector<ScoredDoc> top_k(std::span<const std::string> query_tokens, std::size_t k) const;

    /// Rank 1 = highest BM25 score; ties by ascending id.
    DifficultyRanking rank_negatives_static(const QueryExample& query,
                                            std::span<const ArticleIndex> pool) const;

    void save(std::ostream& out) const;
    static Bm25Index load(std::istream& in);
    void save(const std::filesystem::path& path) const;
    static Bm25Index load(const std::filesystem::path& path);

    friend bool operator==(const Bm25Index& a, const Bm25Index& b);

private:
    Bm25Params params_;
    Analyzer analyzer_;
    std::vector<std::uint32_t> doc_lengths_;
    double avg_doc_length_ = 0.0;
    std::vector<std::string> terms_;          // sorted
    std::vector<std::size_t> term_offsets_;   // |terms| + 1
    std::vector<Posting> postings_;
    std::unordered_map<std::string, std::uint32_t> term_ids_;
    std::vector<std::string> doc_ids_;  // for snapshot self-description

    void rebuild_lookup();
    double term_weight(std::uint32_t tf, std::uint32_t doc_len, double idf) const;
};

inline Bm25Index build_index(const CorpusStore& corpus, double k1 = 1.2, double b = 0.75) {
    return Bm25Index::build(corpus, Bm25Params{k1, b});
}

} // namespace sarneg
