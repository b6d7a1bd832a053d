#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace persic {

// Tokenizer used everywhere text is consumed: lowercase, URLs and @mentions
// stripped, tokens split on non-alphanumeric characters.
struct TokenizerSettings {
    bool lowercase = true;
    bool strip_urls = true;
    bool strip_mentions = true;

    bool operator==(const TokenizerSettings&) const = default;
};

inline std::vector<std::string> tokenize(std::string_view text,
                                         const TokenizerSettings& settings = {}) {
    std::vector<std::string> tokens;
    const std::size_t n = text.size();
    std::size_t i = 0;

    auto skip_word = [&](std::size_t from) {
        // advance past a whitespace-delimited chunk
        while (from < n && !std::isspace(static_cast<unsigned char>(text[from]))) ++from;
        return from;
    };

    while (i < n) {
        const unsigned char c = static_cast<unsigned char>(text[i]);
        if (std::isspace(c)) {
            ++i;
            continue;
        }
        if (settings.strip_mentions && c == '@') {
            i = skip_word(i);
            continue;
        }
        if (settings.strip_urls && (c == 'h' || c == 'H' || c == 'w' || c == 'W')) {
            const std::string_view rest = text.substr(i);
            auto starts = [&](std::string_view prefix) {
                if (rest.size() < prefix.size()) return false;
                for (std::size_t k = 0; k < prefix.size(); ++k) {
                    if (std::tolower(static_cast<unsigned char>(rest[k])) != prefix[k]) return false;
                }
                return true;
            };
            if (starts("http://") || starts("https://") || starts("www.")) {
                i = skip_word(i);
                continue;
            }
        }
        if (std::isalnum(c)) {
            std::string token;
            while (i < n && std::isalnum(static_cast<unsigned char>(text[i]))) {
                char ch = text[i];
                if (settings.lowercase) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
                token.push_back(ch);
                ++i;
            }
            tokens.push_back(std::move(token));
        } else {
            ++i;
        }
    }
    return tokens;
}

inline std::vector<std::string> tokenize_all(const std::vector<std::string>& docs,
                                             const TokenizerSettings& settings = {}) {
    std::vector<std::string> tokens;
    for (const auto& doc : docs) {
        auto t = tokenize(doc, settings);
        tokens.insert(tokens.end(), t.begin(), t.end());
    }
    return tokens;
}

}  // namespace persic
