#include "sarneg/synthetic.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>

#include "sarneg/errors.hpp"

namespace sarneg {

namespace {

std::string pseudo_word(std::mt19937_64& rng) {
    static constexpr std::string_view consonants = "bcdfgklmnprstvz";
    static constexpr std::string_view vowels = "aeiou";
    std::uniform_int_distribution<std::size_t> c(0, consonants.size() - 1);
    std::uniform_int_distribution<std::size_t> v(0, vowels.size() - 1);
    std::string w;
    for (int s = 0; s < 3; ++s) {
        w += consonants[c(rng)];
        w += vowels[v(rng)];
    }
    return w;
}

std::string join(const std::vector<std::string>& words) {
    std::string out;
    for (const auto& w : words) {
        if (!out.empty()) {
            out += ' ';
        }
        out += w;
    }
    return out;
}

std::string padded(std::size_t i, std::size_t width) {
    std::string s = std::to_string(i);
    return std::string(width > s.size() ? width - s.size() : 0, '0') + s;
}

} // namespace

SyntheticData make_synthetic(const SyntheticSpec& spec) {
    const std::size_t n = spec.article_count();
    if (n == 0) {
        throw ConfigError("synthetic corpus must have at least one article");
    }
    if (spec.query_words == 0 || spec.query_words > spec.unique_words) {
        throw ConfigError("query_words must be in [1, unique_words]");
    }
    if (spec.train_queries == 0 || spec.train_queries > n) {
        throw ConfigError("train_queries must be in [1, article count]");
    }
    std::mt19937_64 rng(spec.seed);

    std::set<std::string> used;
    auto fresh_word = [&] {
        for (;;) {
            auto w = pseudo_word(rng);
            if (used.insert(w).second) {
                return w;
            }
        }
    };

    const std::size_t width = std::to_string(n).size();
    std::vector<Article> articles;
    std::vector<std::vector<std::string>> unique(n);
    articles.reserve(n);
    for (std::size_t c = 0; c < spec.codes; ++c) {
        for (std::size_t b = 0; b < spec.books_per_code; ++b) {
            for (std::size_t s = 0; s < spec.sections_per_book; ++s) {
                for (std::size_t a = 0; a < spec.articles_per_section; ++a) {
                    const std::size_t i = articles.size();
                    Article art;
                    art.id = "art_" + padded(i + 1, width);
                    art.path = {"Code " + std::to_string(c + 1), "Book " + std::to_string(b + 1),
                                "Section " + std::to_string(s + 1)};
                    std::vector<std::string> words = {
                        "code" + std::to_string(c + 1),
                        "book" + std::to_string(c + 1) + "n" + std::to_string(b + 1),
                        "section" + std::to_string(c + 1) + "n" + std::to_string(b + 1) + "n" +
                            std::to_string(s + 1),
                    };
                    for (std::size_t w = 0; w < spec.unique_words; ++w) {
                        unique[i].push_back(fresh_word());
                        words.push_back(unique[i].back());
                    }
                    art.text = join(words);
                    articles.push_back(std::move(art));
                }
            }
        }
    }

    SyntheticData data;
    data.corpus = CorpusStore::from_articles(articles);
    // Articles were created in id order, so creation position == ArticleIndex.

    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) {
        all[i] = i;
    }
    std::vector<std::size_t> primaries;
    std::sample(all.begin(), all.end(), std::back_inserter(primaries), spec.train_queries, rng);
    std::shuffle(primaries.begin(), primaries.end(), rng);

    struct Built {
        std::vector<ArticleIndex> positives;
        std::vector<std::string> words;
    };
    std::vector<Built> train_words;
    const std::size_t width_q = std::to_string(spec.train_queries + spec.val_queries +
                                               spec.test_queries).size();
    for (std::size_t qi = 0; qi < primaries.size(); ++qi) {
        const std::size_t p = primaries[qi];
        Built built;
        built.positives.push_back(static_cast<ArticleIndex>(p));
        const bool pair = spec.pair_every > 0 && spec.articles_per_section > 1 &&
                          spec.query_words > 1 && (qi + 1) % spec.pair_every == 0;
        auto take = [&](std::size_t article, std::size_t count) {
            std::vector<std::string> pool = unique[article];
            std::shuffle(pool.begin(), pool.end(), rng);
            built.words.insert(built.words.end(), pool.begin(),
                               pool.begin() + static_cast<std::ptrdiff_t>(count));
        };
        if (pair) {
            const std::size_t in_section = p % spec.articles_per_section;
            const std::size_t sibling = in_section + 1 < spec.articles_per_section ? p + 1 : p - 1;
            built.positives.push_back(static_cast<ArticleIndex>(sibling));
            std::sort(built.positives.begin(), built.positives.end());
            const std::size_t first = (spec.query_words + 1) / 2;
            take(p, first);
            take(sibling, spec.query_words - first);
        } else {
            take(p, spec.query_words);
        }
        std::shuffle(built.words.begin(), built.words.end(), rng);
        data.queries.train.push_back(
            QueryExample{"q" + padded(qi + 1, width_q), join(built.words), built.positives});
        train_words.push_back(std::move(built));
    }

    const std::size_t held_words = std::max<std::size_t>(1, spec.query_words - 1);
    std::size_t next_id = primaries.size();
    auto held_out = [&](std::size_t count, std::vector<QueryExample>& out) {
        for (std::size_t i = 0; i < count; ++i) {
            const auto& src = train_words[(next_id - primaries.size()) % train_words.size()];
            std::vector<std::string> words;
            std::sample(src.words.begin(), src.words.end(), std::back_inserter(words),
                        std::min(held_words, src.words.size()), rng);
            std::shuffle(words.begin(), words.end(), rng);
            ++next_id;
            out.push_back(QueryExample{"q" + padded(next_id, width_q), join(words), src.positives});
        }
    };
    held_out(spec.val_queries, data.queries.val);
    held_out(spec.test_queries, data.queries.test);
    return data;
}

void write_synthetic(const std::filesystem::path& dir, const SyntheticData& data) {
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream out(dir / name);
        if (!out) {
            throw NotFoundError("cannot write " + (dir / name).string());
        }
        return out;
    };
    {
        auto out = open("corpus.jsonl");
        write_corpus(out, data.corpus);
    }
    {
        auto out = open("train.jsonl");
        write_queries(out, data.queries.train, data.corpus);
    }
    {
        auto out = open("val.jsonl");
        write_queries(out, data.queries.val, data.corpus);
    }
    {
        auto out = open("test.jsonl");
        write_queries(out, data.queries.test, data.corpus);
    }
}

} // namespace sarneg
