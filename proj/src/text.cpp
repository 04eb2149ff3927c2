#include "sarneg/text.hpp"

#include <algorithm>
#include <cstdint>

#include <unicode/uchar.h>
#include <unicode/utf8.h>

namespace sarneg {

namespace {

void append_utf8(std::string& out, UChar32 cp) {
    char buf[U8_MAX_LENGTH];
    int32_t len = 0;
    UBool error = false;
    U8_APPEND(reinterpret_cast<uint8_t*>(buf), len, U8_MAX_LENGTH, cp, error);
    if (!error) {
        out.append(buf, static_cast<std::size_t>(len));
    }
}

} // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    const auto* bytes = reinterpret_cast<const uint8_t*>(text.data());
    const auto length = static_cast<int32_t>(text.size());
    int32_t i = 0;
    while (i < length) {
        UChar32 cp = 0;
        U8_NEXT(bytes, i, length, cp);
        if (cp >= 0 && u_isalnum(cp)) {
            append_utf8(current, u_tolower(cp));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) {
        tokens.push_back(std::move(current));
    }
    return tokens;
}

std::vector<std::string> Analyzer::analyze(std::string_view text) const {
    auto tokens = tokenize(text);
    if (!stopwords.empty()) {
        std::erase_if(tokens, [&](const std::string& t) { return stopwords.contains(t); });
    }
    return tokens;
}

} // namespace sarneg
