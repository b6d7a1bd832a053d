#pragma once

#include <algorithm>
#include <utility>
#include <vector>

#include "persic/common.hpp"
#include "persic/rng.hpp"

namespace persic {

struct TrainConfig {
    int epochs = 30;
    int batch_size = 64;
    int negatives_per_positive = 20;
    double learning_rate = 1e-3;
    double weight_decay = 1e-5;  // lambda_theta on ||Theta||^2
    double dropout_rate = 0.3;
    std::uint64_t seed = 0;

    void validate() const {
        if (epochs < 1) fail("epochs must be >= 1, got ", epochs);
        if (batch_size < 1) fail("batch_size must be >= 1, got ", batch_size);
        if (negatives_per_positive < 1)
            fail("negatives_per_positive must be >= 1, got ", negatives_per_positive);
        if (learning_rate < 0.0) fail("learning_rate must be >= 0, got ", learning_rate);
        if (weight_decay < 0.0) fail("weight_decay must be >= 0, got ", weight_decay);
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
            fail("dropout_rate must be in [0,1), got ", dropout_rate);
    }
};

struct Triple {
    int user, pos, neg;
};

struct TrainResult {
    std::vector<double> objective_trace;  // per-epoch mean maximization objective
};

// Uniform draws (with replacement) over the posts the user has NOT liked.
// positives must be sorted ascending.
inline std::vector<int> sample_negatives(Rng& rng, const std::vector<int>& positives,
                                         int n_posts, int n) {
    const int free = n_posts - static_cast<int>(positives.size());
    if (free < 1) fail("cannot sample negatives: user has liked every post");
    std::vector<int> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        int c = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(free)));
        for (int p : positives) {
            if (c >= p) ++c;
            else break;
        }
        out.push_back(c);
    }
    return out;
}

// Shuffles positive pairs each epoch, cuts them into mini-batches, expands
// each pair into `negatives` triples, and hands batches to fn. fn returns the
// batch's maximization objective; the per-epoch means come back as the trace.
template <class Fn>
std::vector<double> run_bpr_epochs(std::vector<std::pair<int, int>> pairs,
                                   const std::vector<std::vector<int>>& positives_by_user,
                                   int n_posts, const TrainConfig& cfg, Rng& rng, Fn&& fn) {
    cfg.validate();
    if (pairs.empty()) fail("no training pairs");
    std::vector<double> trace;
    trace.reserve(cfg.epochs);
    std::vector<Triple> batch;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(pairs);
        double sum = 0.0;
        int batches = 0;
        for (std::size_t at = 0; at < pairs.size(); at += cfg.batch_size) {
            const std::size_t end = std::min(at + cfg.batch_size, pairs.size());
            batch.clear();
            for (std::size_t i = at; i < end; ++i) {
                const auto& [u, p] = pairs[i];
                for (int neg : sample_negatives(rng, positives_by_user[u], n_posts,
                                                cfg.negatives_per_positive))
                    batch.push_back({u, p, neg});
            }
            const double obj = fn(epoch, batch);
            if (!std::isfinite(obj))
                fail("non-finite objective at epoch ", epoch, ", batch ", batches);
            sum += obj;
            ++batches;
        }
        trace.push_back(sum / batches);
    }
    return trace;
}

}  // namespace persic
