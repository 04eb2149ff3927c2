#pragma once

#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace sarneg {

/// Splits UTF-8 text into maximal runs of Unicode letters/digits and lowercases
/// them. Invalid byte sequences act as separators.
std::vector<std::string> tokenize(std::string_view text);

/// Tokenizer plus an optional stopword filter. Stemming is out of scope; the
/// stopword list is the only analysis hook and is persisted with index snapshots.
struct Analyzer {
    std::unordered_set<std::string> stopwords;

    std::vector<std::string> analyze(std::string_view text) const;
};

} // namespace sarneg
