#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "persic/serde.hpp"
#include "persic/text.hpp"

namespace persic {

// Word-category lexicon for psycholinguistic-style text features. Entries
// ending in '*' match any token with that prefix; all matching is done on
// tokenizer output, so entries should be lowercase.
class CategoryLexicon {
public:
    CategoryLexicon() = default;

    void add_category(const std::string& name, const std::vector<std::string>& entries) {
        for (const auto& c : categories_)
            if (c == name) fail("duplicate lexicon category \"", name, "\"");
        const int cat = static_cast<int>(categories_.size());
        categories_.push_back(name);
        raw_entries_.push_back(entries);
        for (const auto& e : entries) {
            if (e.empty()) fail("category \"", name, "\" has an empty entry");
            if (e.back() == '*') {
                const std::string prefix = e.substr(0, e.size() - 1);
                if (prefix.empty()) fail("category \"", name, "\": bare \"*\" entry is not allowed");
                prefixes_.emplace_back(prefix, cat);
            } else {
                exact_[e].push_back(cat);
            }
        }
    }

    const std::vector<std::string>& categories() const { return categories_; }
    int n_categories() const { return static_cast<int>(categories_.size()); }

    // Category indices the token falls into, deduplicated, ascending.
    std::vector<int> match(const std::string& token) const {
        std::vector<int> cats;
        if (auto it = exact_.find(token); it != exact_.end())
            cats.insert(cats.end(), it->second.begin(), it->second.end());
        for (const auto& [prefix, cat] : prefixes_)
            if (token.size() >= prefix.size() && token.compare(0, prefix.size(), prefix) == 0)
                cats.push_back(cat);
        std::sort(cats.begin(), cats.end());
        cats.erase(std::unique(cats.begin(), cats.end()), cats.end());
        return cats;
    }

    // Per-category hit counts over all docs, divided by the total token
    // count. Zero vector when the docs contain no tokens.
    Vec features(const std::vector<std::string>& docs,
                 const TokenizerSettings& settings = {}) const {
        Vec out = Vec::Zero(n_categories());
        long long total = 0;
        for (const auto& doc : docs) {
            for (const auto& tok : tokenize(doc, settings)) {
                ++total;
                for (int c : match(tok)) out[c] += 1.0;
            }
        }
        if (total > 0) out /= static_cast<double>(total);
        return out;
    }

    Json to_json() const {
        Json j = Json::object();
        for (std::size_t i = 0; i < categories_.size(); ++i) j[categories_[i]] = raw_entries_[i];
        return j;
    }

    static CategoryLexicon from_json(const Json& j) {
        if (!j.is_object()) fail("lexicon JSON must be an object mapping category to entry list");
        CategoryLexicon lex;
        for (const auto& [name, entries] : j.items()) {
            if (!entries.is_array()) fail("lexicon category \"", name, "\" must map to an array");
            std::vector<std::string> words;
            for (const auto& e : entries) {
                if (!e.is_string())
                    fail("lexicon category \"", name, "\" has a non-string entry");
                words.push_back(e.get<std::string>());
            }
            lex.add_category(name, words);
        }
        if (lex.n_categories() == 0) fail("lexicon has no categories");
        return lex;
    }

    static CategoryLexicon load(const std::filesystem::path& path) {
        return from_json(read_json_file(path));
    }

    void save(const std::filesystem::path& path) const { write_json_file(path, to_json()); }

private:
    std::vector<std::string> categories_;
    std::vector<std::vector<std::string>> raw_entries_;
    std::unordered_map<std::string, std::vector<int>> exact_;
    std::vector<std::pair<std::string, int>> prefixes_;
};

// Small built-in lexicon so tests and demos run without an external file.
inline CategoryLexicon builtin_demo_lexicon() {
    CategoryLexicon lex;
    lex.add_category("posemo", {
        "good", "great", "love", "lov*", "happ*", "nice", "sweet", "awesome", "amazing",
        "excellent", "wonderful", "best", "better", "fun", "glad", "joy*", "beautiful",
        "brilliant", "cheer*", "delight*", "enjoy*", "excit*", "fantastic", "favorite",
        "friend*", "gorgeous", "grateful", "kind", "laugh*", "like", "perfect", "pleas*",
        "pretty", "proud", "smil*", "succeed*", "success*", "thank*", "win", "won",
        "wow", "yay", "cool", "super", "positive", "optimis*", "hope*", "celebrat*",
    });
    lex.add_category("negemo", {
        "bad", "hate", "hat*", "sad", "angry", "anger", "annoy*", "afraid", "awful",
        "terrible", "horrible", "worst", "worse", "fear*", "cry", "cri*", "hurt*",
        "lose", "lost", "lonely", "mad", "miss", "pain*", "problem*", "reject*",
        "scare*", "shame*", "sorry", "stress*", "stupid", "suck*", "tired", "ugly",
        "upset", "weep*", "worr*", "wrong", "fail*", "disappoint*", "disgust*",
        "envy", "grief", "guilt*", "jealous*", "negative", "panic*", "regret*",
    });
    lex.add_category("social", {
        "we", "us", "our", "they", "them", "their", "you", "your", "friend", "friends",
        "family", "families", "talk*", "share*", "shar*", "people", "person", "social",
        "together", "team*", "community", "neighbor*", "parent*", "mother", "father",
        "mom", "dad", "sister*", "brother*", "child*", "kids", "baby", "babies",
        "meet*", "party", "parties", "group*", "crowd*", "everyone", "everybody",
        "couple*", "date", "dating", "marr*", "wife", "husband", "buddy", "pal",
    });
    lex.add_category("cogproc", {
        "think*", "know*", "because", "cause*", "effect*", "reason*", "consider*",
        "understand*", "idea*", "insight*", "question*", "wonder*", "learn*", "logic*",
        "mean", "means", "meaning", "believ*", "decide*", "decision*", "conclude*",
        "analy*", "explain*", "theory", "theories", "proof", "prove*", "evidence",
        "should", "would", "could", "maybe", "perhaps", "guess*", "doubt*", "if",
        "how", "why", "whether", "realize*", "remember*", "thought*", "solve*",
        "plan*", "expect*", "assume*", "infer*", "define*",
    });
    lex.add_category("work", {
        "work*", "job*", "office*", "boss*", "career*", "business*", "meeting*",
        "project*", "deadline*", "salary", "salaries", "hire*", "hiring", "fired",
        "employ*", "manage*", "company", "companies", "corporate", "colleague*",
        "coworker*", "client*", "customer*", "market*", "sell*", "sale*", "sold",
        "budget*", "finance*", "invest*", "profit*", "report*", "presentation*",
        "email*", "desk", "interview*", "promot*", "resume*", "startup*", "staff",
        "task*", "trade*", "wage*", "earn*", "produc*", "industr*", "econom*",
    });
    lex.add_category("leisure", {
        "play*", "game*", "movie*", "film*", "music*", "song*", "sing*", "dance*",
        "travel*", "trip*", "vacation*", "holiday*", "beach*", "park*", "hike*",
        "sport*", "ball", "football", "soccer", "basketball", "tennis", "golf*",
        "swim*", "run", "running", "bike*", "ski*", "surf*", "camp*", "fish*",
        "read*", "book*", "tv", "show*", "concert*", "festival*", "fun", "hobby",
        "hobbies", "relax*", "rest*", "weekend*", "picnic*", "garden*", "cook*",
        "bake*", "wine", "beer", "coffee", "restaurant*", "dinner*", "lunch*",
    });
    return lex;
}

}  // namespace persic
