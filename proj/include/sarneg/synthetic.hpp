#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>

#include "sarneg/corpus.hpp"

namespace sarneg {

/// Generator for a small statute-shaped corpus with a known answer key.
///
/// Articles sit in a code -> book -> section hierarchy and are numbered in
/// enumeration order. Each article text holds its hierarchy words plus a few
/// words no other article uses. A training question is built only from words
/// of its positives; held-out questions reuse a subset of one training
/// question's words with the same positives.
struct SyntheticSpec {
    std::size_t codes = 2;
    std::size_t books_per_code = 5;
    std::size_t sections_per_book = 2;
    std::size_t articles_per_section = 5;
    std::size_t unique_words = 6;
    std::size_t query_words = 4;
    std::size_t train_queries = 50;
    std::size_t val_queries = 10;
    std::size_t test_queries = 10;
    std::size_t pair_every = 5;  // every k-th question also has the next sibling as a positive
    std::uint64_t seed = 1;

    std::size_t article_count() const {
        return codes * books_per_code * sections_per_book * articles_per_section;
    }
};

struct SyntheticData {
    CorpusStore corpus;
    QuerySplit queries;
};

SyntheticData make_synthetic(const SyntheticSpec& spec);

/// corpus.jsonl, train.jsonl, val.jsonl, test.jsonl in `dir`.
void write_synthetic(const std::filesystem::path& dir, const SyntheticData& data);

} // namespace sarneg
