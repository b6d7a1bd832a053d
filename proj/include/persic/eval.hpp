#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "persic/dataset.hpp"
#include "persic/metrics.hpp"

namespace persic {

struct EvalOptions {
    std::vector<int> cutoffs{10, 50};
    bool pooled_auc = false;  // additionally pool all (score, label) pairs across users
};

// One evaluated model. Aggregates are exact means of the retained per-user
// arrays; users without a test positive are excluded everywhere.
struct RankingRow {
    std::string model;
    std::vector<int> cutoffs;
    double auc = 0.0;
    std::vector<double> ndcg;  // aligned to cutoffs
    std::vector<double> f1;
    std::vector<double> per_user_auc;
    std::vector<std::vector<double>> per_user_ndcg;
    std::vector<std::vector<double>> per_user_f1;
    int evaluated_users = 0;
    int skipped_users = 0;
    std::optional<double> pooled_auc;

    Json to_json() const {
        Json j;
        j["model"] = model;
        j["auc"] = auc;
        for (std::size_t c = 0; c < cutoffs.size(); ++c) {
            j["ndcg@" + std::to_string(cutoffs[c])] = ndcg[c];
            j["f1@" + std::to_string(cutoffs[c])] = f1[c];
        }
        j["evaluated_users"] = evaluated_users;
        j["skipped_users"] = skipped_users;
        if (pooled_auc) j["pooled_auc"] = *pooled_auc;
        j["per_user"] = Json::object();
        j["per_user"]["auc"] = per_user_auc;
        for (std::size_t c = 0; c < cutoffs.size(); ++c) {
            j["per_user"]["ndcg@" + std::to_string(cutoffs[c])] = per_user_ndcg[c];
            j["per_user"]["f1@" + std::to_string(cutoffs[c])] = per_user_f1[c];
        }
        return j;
    }
};

struct RankingReport {
    std::vector<RankingRow> rows;
    Json config;  // provenance: seeds and resolved settings for the run

    Json to_json(bool include_per_user = true) const {
        Json j;
        j["kind"] = "ranking_report";
        if (!config.is_null()) j["config"] = config;
        j["rows"] = Json::array();
        for (const auto& r : rows) {
            Json row = r.to_json();
            if (!include_per_user) row.erase("per_user");
            j["rows"].push_back(std::move(row));
        }
        return j;
    }

    std::string to_text() const {
        std::ostringstream os;
        os << std::left << std::setw(18) << "model" << std::right;
        std::vector<std::string> cols{"AUC"};
        if (!rows.empty())
            for (int k : rows[0].cutoffs) {
                cols.push_back("nDCG@" + std::to_string(k));
                cols.push_back("F1@" + std::to_string(k));
            }
        for (const auto& c : cols) os << std::setw(10) << c;
        os << "\n";
        for (const auto& r : rows) {
            os << std::left << std::setw(18) << r.model << std::right << std::fixed
               << std::setprecision(4);
            os << std::setw(10) << r.auc;
            for (std::size_t c = 0; c < r.cutoffs.size(); ++c)
                os << std::setw(10) << r.ndcg[c] << std::setw(10) << r.f1[c];
            os << "\n";
            os.unsetf(std::ios::fixed);
        }
        return os.str();
    }

    std::string to_csv() const {
        std::ostringstream os;
        os << "model,auc";
        if (!rows.empty())
            for (int k : rows[0].cutoffs) os << ",ndcg@" << k << ",f1@" << k;
        os << "\n";
        os << std::setprecision(17);
        for (const auto& r : rows) {
            os << r.model << "," << r.auc;
            for (std::size_t c = 0; c < r.cutoffs.size(); ++c)
                os << "," << r.ndcg[c] << "," << r.f1[c];
            os << "\n";
        }
        return os.str();
    }
};

// Scores every candidate post (all posts minus the user's training
// positives) with score_fn(user, post), then folds ranking metrics per user.
// Candidate input order cannot affect results: ranking sorts by score with
// ascending post index as the tie-break.
template <class ScoreFn>
RankingRow evaluate_scores(std::string model_name, const InteractionDataset& data,
                           const DatasetSplit& split, ScoreFn&& score_fn,
                           const EvalOptions& opt = {}) {
    for (int k : opt.cutoffs)
        if (k < 1) fail("cutoffs must be >= 1");
    RankingRow row;
    row.model = std::move(model_name);
    row.cutoffs = opt.cutoffs;
    row.per_user_ndcg.resize(opt.cutoffs.size());
    row.per_user_f1.resize(opt.cutoffs.size());
    std::vector<std::pair<double, bool>> pooled;

    for (int u = 0; u < data.n_users(); ++u) {
        const auto& train_pos = split.train_posts(u);
        const auto& test_pos = split.test_posts(u);
        if (test_pos.empty()) {
            ++row.skipped_users;
            continue;
        }
        std::vector<std::pair<double, int>> scored;  // (score, post), candidates only
        scored.reserve(data.n_posts() - train_pos.size());
        std::size_t ti = 0;
        for (int p = 0; p < data.n_posts(); ++p) {
            if (ti < train_pos.size() && train_pos[ti] == p) {
                ++ti;
                continue;
            }
            scored.emplace_back(score_fn(u, p), p);
        }

        std::vector<std::pair<double, bool>> for_auc;
        for_auc.reserve(scored.size());
        for (const auto& [s, p] : scored)
            for_auc.emplace_back(s, std::binary_search(test_pos.begin(), test_pos.end(), p));
        const auto a = auc(for_auc);
        if (!a) {
            ++row.skipped_users;
            continue;
        }
        if (opt.pooled_auc) pooled.insert(pooled.end(), for_auc.begin(), for_auc.end());

        std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
            if (x.first != y.first) return x.first > y.first;
            return x.second < y.second;
        });
        std::vector<int> relevance;
        relevance.reserve(scored.size());
        for (const auto& [s, p] : scored)
            relevance.push_back(std::binary_search(test_pos.begin(), test_pos.end(), p) ? 1 : 0);

        row.per_user_auc.push_back(*a);
        for (std::size_t c = 0; c < opt.cutoffs.size(); ++c) {
            const auto nd = ndcg_at_k(relevance, opt.cutoffs[c]);
            row.per_user_ndcg[c].push_back(nd.value());  // test_pos nonempty, so present
            row.per_user_f1[c].push_back(
                f1_at_k(relevance, opt.cutoffs[c], static_cast<long long>(test_pos.size())));
        }
        ++row.evaluated_users;
    }

    if (row.evaluated_users == 0) fail("no evaluable users (all lack test positives)");
    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    row.auc = mean(row.per_user_auc);
    row.ndcg.resize(opt.cutoffs.size());
    row.f1.resize(opt.cutoffs.size());
    for (std::size_t c = 0; c < opt.cutoffs.size(); ++c) {
        row.ndcg[c] = mean(row.per_user_ndcg[c]);
        row.f1[c] = mean(row.per_user_f1[c]);
    }
    if (opt.pooled_auc) row.pooled_auc = auc(pooled);
    return row;
}

// ---------------------------------------------------------------------------
// Trait-concept correlation

struct TraitConceptEntry {
    int concept_index;
    double correlation;
};

struct TraitConceptReport {
    // poles in order E, I, S, N, T, F, J, P
    std::vector<std::string> pole_names;
    std::vector<std::vector<TraitConceptEntry>> top_concepts;  // per pole, descending corr
    std::vector<int> skipped_concepts;                         // zero-variance columns

    Json to_json() const {
        Json j;
        j["kind"] = "trait_concept_report";
        j["poles"] = Json::array();
        for (std::size_t i = 0; i < pole_names.size(); ++i) {
            Json pole;
            pole["pole"] = pole_names[i];
            pole["concepts"] = Json::array();
            for (const auto& e : top_concepts[i])
                pole["concepts"].push_back(
                    {{"concept", e.concept_index}, {"correlation", e.correlation}});
            j["poles"].push_back(std::move(pole));
        }
        j["skipped_concepts"] = skipped_concepts;
        return j;
    }

    std::string to_text() const {
        std::ostringstream os;
        for (std::size_t i = 0; i < pole_names.size(); ++i) {
            os << pole_names[i] << ":";
            os << std::fixed << std::setprecision(3);
            for (const auto& e : top_concepts[i])
                os << "  c" << e.concept_index << " (" << std::showpos << e.correlation
                   << std::noshowpos << ")";
            os.unsetf(std::ios::fixed);
            os << "\n";
        }
        return os.str();
    }
};

// For each trait pole, Pearson correlation between the fraction of a post's
// labeled likers on that pole and each concept weight, across posts with at
// least one labeled liker. Zero-variance concept columns are skipped once.
inline TraitConceptReport trait_concept_correlation(const InteractionDataset& data,
                                                    int top_n = 10) {
    if (top_n < 1) fail("top_n must be >= 1, got ", top_n);
    const int C = data.concept_dim();
    static const std::array<std::pair<const char*, bool>, 8> kPoles{{
        {"E", true}, {"I", false},  // pair 0
        {"S", true}, {"N", false},  // pair 1
        {"T", true}, {"F", false},  // pair 2
        {"J", true}, {"P", false},  // pair 3
    }};

    // per-post labeled-liker counts per pole
    std::vector<std::array<int, 8>> pole_hits(data.n_posts(), std::array<int, 8>{});
    std::vector<int> labeled(data.n_posts(), 0);
    for (const auto& [u, p] : data.interactions()) {
        const auto& mbti = data.users()[u].mbti;
        if (!mbti) continue;
        ++labeled[p];
        for (int i = 0; i < 8; ++i)
            if (mbti->pole(i / 2, kPoles[i].second)) ++pole_hits[p][i];
    }

    std::vector<int> posts_with_audience;
    for (int p = 0; p < data.n_posts(); ++p)
        if (labeled[p] > 0) posts_with_audience.push_back(p);
    if (posts_with_audience.size() < 2)
        fail("trait correlation needs at least 2 posts with labeled likers, got ",
             posts_with_audience.size());

    std::vector<std::vector<double>> concept_cols(C);
    std::vector<bool> usable(C, true);
    TraitConceptReport report;
    for (int c = 0; c < C; ++c) {
        auto& col = concept_cols[c];
        col.reserve(posts_with_audience.size());
        for (int p : posts_with_audience) col.push_back(data.posts()[p].concepts[c]);
        const double first = col.empty() ? 0.0 : col[0];
        bool constant = true;
        for (double v : col)
            if (v != first) {
                constant = false;
                break;
            }
        if (constant) {
            usable[c] = false;
            report.skipped_concepts.push_back(c);
        }
    }
    if (!report.skipped_concepts.empty())
        log_warn("skipping ", report.skipped_concepts.size(),
                 " zero-variance concept column(s) in trait correlation");

    for (int i = 0; i < 8; ++i) {
        report.pole_names.push_back(kPoles[i].first);
        std::vector<double> frac;
        frac.reserve(posts_with_audience.size());
        for (int p : posts_with_audience)
            frac.push_back(static_cast<double>(pole_hits[p][i]) / labeled[p]);
        std::vector<TraitConceptEntry> entries;
        for (int c = 0; c < C; ++c) {
            if (!usable[c]) continue;
            if (auto r = pearson(frac, concept_cols[c])) entries.push_back({c, *r});
        }
        std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
            if (a.correlation != b.correlation) return a.correlation > b.correlation;
            return a.concept_index < b.concept_index;
        });
        if (static_cast<int>(entries.size()) > top_n) entries.resize(top_n);
        report.top_concepts.push_back(std::move(entries));
    }
    return report;
}

}  // namespace persic
