#include "sarneg/bm25.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "sarneg/errors.hpp"

namespace sarneg {

namespace {

using nlohmann::json;

constexpr const char* kSnapshotFormat = "sarneg-bm25-index";
constexpr int kSnapshotVersion = 1;

bool score_order(const ScoredDoc& x, const ScoredDoc& y) {
    if (x.score != y.score) {
        return x.score > y.score;
    }
    return x.doc < y.doc;
}

void check_params(const Bm25Params& p) {
    if (!std::isfinite(p.k1) || p.k1 < 0.0) {
        throw ConfigError("bm25 k1 must be >= 0");
    }
    if (!std::isfinite(p.b) || p.b < 0.0 || p.b > 1.0) {
        throw ConfigError("bm25 b must lie in [0, 1]");
    }
}

} // namespace

Bm25Index Bm25Index::build(const CorpusStore& corpus, Bm25Params params, Analyzer analyzer) {
    check_params(params);
    Bm25Index index;
    index.params_ = params;
    index.analyzer_ = std::move(analyzer);

    std::map<std::string, std::vector<Posting>> inverted;
    index.doc_lengths_.resize(corpus.size());
    index.doc_ids_.reserve(corpus.size());
    std::uint64_t total_length = 0;
    std::size_t empty_docs = 0;
    std::string first_empty;
    for (std::size_t d = 0; d < corpus.size(); ++d) {
        const auto& article = corpus.articles()[d];
        index.doc_ids_.push_back(article.id);
        auto tokens = index.analyzer_.analyze(article.text);
        if (tokens.empty() && empty_docs++ == 0) {
            first_empty = article.id;
        }
        index.doc_lengths_[d] = static_cast<std::uint32_t>(tokens.size());
        total_length += tokens.size();
        std::sort(tokens.begin(), tokens.end());
        for (std::size_t i = 0; i < tokens.size();) {
            std::size_t j = i;
            while (j < tokens.size() && tokens[j] == tokens[i]) {
                ++j;
            }
            inverted[tokens[i]].push_back(
                Posting{static_cast<ArticleIndex>(d), static_cast<std::uint32_t>(j - i)});
            i = j;
        }
    }
    if (empty_docs == corpus.size()) {
        throw ValidationError("no indexable tokens in corpus");
    }
    if (empty_docs > 0) {
        throw ValidationError("article " + first_empty + " has no indexable tokens");
    }
    index.avg_doc_length_ =
        static_cast<double>(total_length) / static_cast<double>(corpus.size());

    index.term_offsets_.push_back(0);
    for (auto& [term, list] : inverted) {
        index.terms_.push_back(term);
        index.postings_.insert(index.postings_.end(), list.begin(), list.end());
        index.term_offsets_.push_back(index.postings_.size());
    }
    index.rebuild_lookup();
    return index;
}

void Bm25Index::rebuild_lookup() {
    term_ids_.clear();
    term_ids_.reserve(terms_.size());
    for (std::size_t t = 0; t < terms_.size(); ++t) {
        term_ids_.emplace(terms_[t], static_cast<std::uint32_t>(t));
    }
}

bool Bm25Index::covers(const CorpusStore& corpus) const {
    if (corpus.size() != doc_ids_.size()) {
        return false;
    }
    for (std::size_t d = 0; d < doc_ids_.size(); ++d) {
        if (corpus.articles()[d].id != doc_ids_[d]) {
            return false;
        }
    }
    return true;
}

std::span<const Posting> Bm25Index::postings(const std::string& term) const {
    auto it = term_ids_.find(term);
    if (it == term_ids_.end()) {
        return {};
    }
    const std::size_t begin = term_offsets_[it->second];
    const std::size_t end = term_offsets_[it->second + 1];
    return std::span<const Posting>(postings_).subspan(begin, end - begin);
}

std::uint32_t Bm25Index::document_frequency(const std::string& term) const {
    return static_cast<std::uint32_t>(postings(term).size());
}

double Bm25Index::idf(std::uint32_t df) const {
    const double n = static_cast<double>(doc_count());
    const double nt = static_cast<double>(df);
    return std::log((n - nt + 0.5) / (nt + 0.5) + 1.0);
}

double Bm25Index::term_weight(std::uint32_t tf, std::uint32_t doc_len, double idf_value) const {
    const double f = static_cast<double>(tf);
    const double norm = 1.0 - params_.b + params_.b * static_cast<double>(doc_len) / avg_doc_length_;
    return idf_value * f * (params_.k1 + 1.0) / (f + params_.k1 * norm);
}

double Bm25Index::score(std::span<const std::string> query_tokens, ArticleIndex doc) const {
    if (doc >= doc_count()) {
        throw NotFoundError("unknown document " + std::to_string(doc));
    }
    double total = 0.0;
    for (const auto& token : query_tokens) {
        const auto list = postings(token);
        auto it = std::lower_bound(list.begin(), list.end(), doc,
                                   [](const Posting& p, ArticleIndex d) { return p.doc < d; });
        if (it != list.end() && it->doc == doc) {
            total += term_weight(it->tf, doc_lengths_[doc],
                                 idf(static_cast<std::uint32_t>(list.size())));
        }
    }
    return total;
}

std::vector<double> Bm25Index::score_all(std::span<const std::string> query_tokens) const {
    std::vector<double> scores(doc_count(), 0.0);
    for (const auto& token : query_tokens) {
        const auto list = postings(token);
        if (list.empty()) {
            continue;
        }
        const double w = idf(static_cast<std::uint32_t>(list.size()));
        for (const auto& p : list) {
            scores[p.doc] += term_weight(p.tf, doc_lengths_[p.doc], w);
        }
    }
    return scores;
}

std::vector<ScoredDoc> Bm25Index::top_k(std::span<const std::string> query_tokens,
                                        std::size_t k) const {
    if (k == 0) {
        throw ConfigError("top_k requires k >= 1");
    }
    const auto scores = score_all(query_tokens);
    std::vector<ScoredDoc> ranked(scores.size());
    for (std::size_t d = 0; d < scores.size(); ++d) {
        ranked[d] = ScoredDoc{static_cast<ArticleIndex>(d), scores[d]};
    }
    const std::size_t n = std::min(k, ranked.size());
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(n),
                      ranked.end(), score_order);
    ranked.resize(n);
    return ranked;
}

DifficultyRanking Bm25Index::rank_negatives_static(const QueryExample& query,
                                                   std::span<const ArticleIndex> pool) const {
    const auto tokens = analyzer_.analyze(query.question);
    const auto scores = score_all(tokens);
    std::vector<ScoredDoc> ranked;
    ranked.reserve(pool.size());
    for (ArticleIndex a : pool) {
        if (a >= doc_count()) {
            throw NotFoundError("pool article outside the index");
        }
        if (std::binary_search(query.positives.begin(), query.positives.end(), a)) {
            throw ValidationError("negative pool for " + query.id + " contains a positive");
        }
        ranked.push_back(ScoredDoc{a, scores[a]});
    }
    std::sort(ranked.begin(), ranked.end(), score_order);

    DifficultyRanking out;
    out.query_id = query.id;
    out.source = RankingSource::SemanticStatic;
    out.order.reserve(ranked.size());
    for (const auto& s : ranked) {
        out.order.push_back(s.doc);
    }
    return out;
}

void Bm25Index::save(std::ostream& out) const {
    json postings_json = json::array();
    for (std::size_t t = 0; t < terms_.size(); ++t) {
        json list = json::array();
        for (std::size_t i = term_offsets_[t]; i < term_offsets_[t + 1]; ++i) {
            list.push_back({postings_[i].doc, postings_[i].tf});
        }
        postings_json.push_back({{"term", terms_[t]}, {"postings", std::move(list)}});
    }
    std::vector<std::string> stopwords(analyzer_.stopwords.begin(), analyzer_.stopwords.end());
    std::sort(stopwords.begin(), stopwords.end());
    json snapshot = {
        {"format", kSnapshotFormat},
        {"version", kSnapshotVersion},
        {"k1", params_.k1},
        {"b", params_.b},
        {"doc_count", doc_count()},
        {"avg_doc_length", avg_doc_length_},
        {"doc_ids", doc_ids_},
        {"doc_lengths", doc_lengths_},
        {"stopwords", stopwords},
        {"terms", std::move(postings_json)},
    };
    out << snapshot.dump() << '\n';
}

Bm25Index Bm25Index::load(std::istream& in) {
    json snapshot;
    try {
        snapshot = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("malformed index snapshot: ") + e.what());
    }
    if (snapshot.value("format", "") != kSnapshotFormat) {
        throw ValidationError("not a bm25 index snapshot");
    }
    if (snapshot.value("version", 0) != kSnapshotVersion) {
        throw ValidationError("unsupported index snapshot version");
    }
    try {
        Bm25Index index;
        index.params_ = Bm25Params{snapshot.at("k1").get<double>(), snapshot.at("b").get<double>()};
        check_params(index.params_);
        index.avg_doc_length_ = snapshot.at("avg_doc_length").get<double>();
        index.doc_ids_ = snapshot.at("doc_ids").get<std::vector<std::string>>();
        index.doc_lengths_ = snapshot.at("doc_lengths").get<std::vector<std::uint32_t>>();
        for (const auto& w : snapshot.at("stopwords")) {
            index.analyzer_.stopwords.insert(w.get<std::string>());
        }
        if (index.doc_ids_.size() != index.doc_lengths_.size() ||
            index.doc_lengths_.size() != snapshot.at("doc_count").get<std::size_t>()) {
            throw ValidationError("index snapshot document tables disagree");
        }
        index.term_offsets_.push_back(0);
        for (const auto& entry : snapshot.at("terms")) {
            index.terms_.push_back(entry.at("term").get<std::string>());
            for (const auto& p : entry.at("postings")) {
                const auto doc = p.at(0).get<ArticleIndex>();
                if (doc >= index.doc_lengths_.size()) {
                    throw ValidationError("index snapshot posting out of range");
                }
                index.postings_.push_back(Posting{doc, p.at(1).get<std::uint32_t>()});
            }
            index.term_offsets_.push_back(index.postings_.size());
        }
        index.rebuild_lookup();
        return index;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed index snapshot: ") + e.what());
    }
}

void Bm25Index::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw NotFoundError("cannot write " + path.string());
    }
    save(out);
}

Bm25Index Bm25Index::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw NotFoundError("cannot open " + path.string());
    }
    return load(in);
}

bool operator==(const Bm25Index& a, const Bm25Index& b) {
    return a.params_.k1 == b.params_.k1 && a.params_.b == b.params_.b &&
           a.analyzer_.stopwords == b.analyzer_.stopwords && a.doc_lengths_ == b.doc_lengths_ &&
           a.avg_doc_length_ == b.avg_doc_length_ && a.terms_ == b.terms_ &&
           a.term_offsets_ == b.term_offsets_ && a.postings_ == b.postings_ &&
           a.doc_ids_ == b.doc_ids_;
}

} // namespace sarneg
