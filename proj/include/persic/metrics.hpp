#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "persic/common.hpp"

namespace persic {

// Mann-Whitney AUC with ties counted half. Returns nullopt when the input
// has only one class (such users are excluded upstream, not scored 0).
inline std::optional<double> auc(const std::vector<std::pair<double, bool>>& scored) {
    long long n_pos = 0, n_neg = 0;
    for (const auto& [s, pos] : scored) (pos ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0) return std::nullopt;

    std::vector<int> order(scored.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return scored[a].first < scored[b].first; });

    // average ranks within tie groups, 1-based
    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scored[order[j]].first == scored[order[i]].first) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of i+1 .. j
        for (std::size_t t = i; t < j; ++t)
            if (scored[order[t]].second) pos_rank_sum += avg_rank;
        i = j;
    }
    const double u = pos_rank_sum - 0.5 * static_cast<double>(n_pos) * (n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// relevance: binary labels in ranked order (best first), covering the full
// candidate list. Gain r_i / log2(i+1) with 1-based ranks; ideal DCG puts all
// relevant items first. Returns nullopt when nothing is relevant.
inline std::optional<double> ndcg_at_k(const std::vector<int>& relevance, int k) {
    if (k < 1) fail("ndcg cutoff must be >= 1, got ", k);
    long long total_relevant = 0;
    for (int r : relevance) {
        if (r != 0 && r != 1) fail("relevance labels must be binary");
        total_relevant += r;
    }
    if (total_relevant == 0) return std::nullopt;
    const int n = static_cast<int>(relevance.size());
    double dcg = 0.0;
    for (int i = 0; i < std::min(k, n); ++i)
        dcg += relevance[i] / std::log2(static_cast<double>(i + 2));
    double idcg = 0.0;
    for (int i = 0; i < std::min<long long>(k, total_relevant); ++i)
        idcg += 1.0 / std::log2(static_cast<double>(i + 2));
    return dcg / idcg;
}

inline double f1_at_k(const std::vector<int>& relevance, int k, long long total_relevant) {
    if (k < 1) fail("f1 cutoff must be >= 1, got ", k);
    if (total_relevant < 1) fail("f1 requires at least one relevant item");
    const int n = static_cast<int>(relevance.size());
    long long hits = 0;
    for (int i = 0; i < std::min(k, n); ++i) hits += relevance[i] != 0;
    if (hits == 0) return 0.0;
    const double precision = static_cast<double>(hits) / k;
    const double recall = static_cast<double>(hits) / static_cast<double>(total_relevant);
    return 2.0 * precision * recall / (precision + recall);
}

// Descending score with ascending-index tie-break; returns positions into
// the scores vector.
inline std::vector<int> ranking_order(const std::vector<double>& scores) {
    std::vector<int> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    return order;
}

// Pearson correlation; nullopt when either side has zero variance.
inline std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) fail("pearson: length mismatch ", x.size(), " vs ", y.size());
    const std::size_t n = x.size();
    if (n < 2) return std::nullopt;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace persic
