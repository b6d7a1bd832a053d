#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "persic/serde.hpp"
#include "persic/text.hpp"

namespace persic {

// Sparse row: (term index, weight) pairs with strictly ascending indices.
using SparseVec = std::vector<std::pair<int, double>>;

inline double sparse_dot(const SparseVec& a, const SparseVec& b) {
    double s = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i].first < b[j].first) ++i;
        else if (a[i].first > b[j].first) ++j;
        else s += a[i++].second * b[j++].second;
    }
    return s;
}

struct TfidfModel {
    std::vector<std::string> vocabulary;  // lexicographic
    Vec idf;
    TokenizerSettings tokenizer;

    int vocab_size() const { return static_cast<int>(vocabulary.size()); }

    int term_index(const std::string& term) const {
        auto it = index_.find(term);
        return it == index_.end() ? -1 : it->second;
    }

    // Term frequency times idf, L2-normalized. Out-of-vocabulary tokens are
    // ignored; a document with no known tokens maps to the zero vector.
    SparseVec transform(const std::string& doc) const {
        std::map<int, double> tf;
        for (const auto& tok : tokenize(doc, tokenizer)) {
            const int t = term_index(tok);
            if (t >= 0) tf[t] += 1.0;
        }
        SparseVec row;
        row.reserve(tf.size());
        double sq = 0.0;
        for (const auto& [t, f] : tf) {
            const double w = f * idf[t];
            row.emplace_back(t, w);
            sq += w * w;
        }
        if (sq > 0.0) {
            const double inv = 1.0 / std::sqrt(sq);
            for (auto& [t, w] : row) w *= inv;
        }
        return row;
    }

    Vec transform_dense(const std::string& doc) const {
        Vec v = Vec::Zero(vocab_size());
        for (const auto& [t, w] : transform(doc)) v[t] = w;
        return v;
    }

    void rebuild_index() {
        index_.clear();
        for (int i = 0; i < vocab_size(); ++i) index_[vocabulary[i]] = i;
    }

private:
    std::unordered_map<std::string, int> index_;
};

// Smoothed idf: ln((1+N)/(1+df)) + 1, so a term present in every document
// still carries weight 1 rather than vanishing.
inline TfidfModel fit_tfidf(const std::vector<std::string>& corpus,
                            const TokenizerSettings& settings = {}) {
    if (corpus.empty()) fail("tf-idf corpus is empty");
    std::map<std::string, int> df;  // ordered, gives the lexicographic vocabulary
    for (const auto& doc : corpus) {
        auto toks = tokenize(doc, settings);
        std::sort(toks.begin(), toks.end());
        toks.erase(std::unique(toks.begin(), toks.end()), toks.end());
        for (const auto& t : toks) ++df[t];
    }
    if (df.empty()) fail("tf-idf corpus contains no tokens");
    TfidfModel m;
    m.tokenizer = settings;
    m.vocabulary.reserve(df.size());
    m.idf.resize(static_cast<Eigen::Index>(df.size()));
    const double n = static_cast<double>(corpus.size());
    int i = 0;
    for (const auto& [term, d] : df) {
        m.vocabulary.push_back(term);
        m.idf[i++] = std::log((1.0 + n) / (1.0 + static_cast<double>(d))) + 1.0;
    }
    m.rebuild_index();
    return m;
}

}  // namespace persic
