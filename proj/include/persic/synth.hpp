#pragma once

#include <array>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "persic/dataset.hpp"
#include "persic/lexicon.hpp"
#include "persic/metrics.hpp"
#include "persic/rng.hpp"

namespace persic {

constexpr int kTraitPairs = 4;

// Planted-preference generator. Posts carry a latent attribute vector with
// one dim per trait pair plus `latent_dim` generic taste dims; users combine
// coin-flip traits with a random generic taste vector. personality_effect
// sets how much of the like utility the traits explain. Concepts 0..7 are
// planted one per trait pole; texts draw from per-(dim, sign) vocabulary
// blocks so the text pipeline can recover the same structure.
struct SynthSpec {
    int n_users = 200;
    int n_posts = 100;
    int n_concepts = 24;  // >= 8; concept pair 2k/2k+1 is planted on trait pair k
    int vocab_size = 400;
    int latent_dim = 8;  // generic (non-trait) preference dims
    double personality_effect = 0.5;
    double density = 0.05;
    double noise = 0.0;  // 0 = deterministic top-n likes, 1 = near-random
    double pers_noise = 0.1;
    double text_noise = 0.2;
    double trait_leak = 0.25;  // how strongly timelines reflect traits
    int tokens_per_doc = 24;
    int timeline_docs = 3;
    int liked_docs_cap = 20;
    std::uint64_t seed = 0;

    int attr_dim() const { return kTraitPairs + latent_dim; }

    void validate() const {
        if (n_users < 1) fail("n_users must be >= 1");
        if (n_posts < 3) fail("n_posts must be >= 3 (two likes plus a negative)");
        if (n_concepts < 2 * kTraitPairs)
            fail("n_concepts must be >= ", 2 * kTraitPairs, ", got ", n_concepts);
        if (latent_dim < 1) fail("latent_dim must be >= 1");
        if (!(density > 0.0 && density < 1.0)) fail("density must be in (0,1), got ", density);
        if (!(personality_effect >= 0.0 && personality_effect <= 1.0))
            fail("personality_effect must be in [0,1], got ", personality_effect);
        if (!(noise >= 0.0 && noise <= 1.0)) fail("noise must be in [0,1], got ", noise);
        if (!(text_noise >= 0.0 && text_noise < 1.0)) fail("text_noise must be in [0,1)");
        if (pers_noise < 0.0) fail("pers_noise must be >= 0");
        if (trait_leak < 0.0) fail("trait_leak must be >= 0");
        if (tokens_per_doc < 1 || timeline_docs < 1 || liked_docs_cap < 1)
            fail("tokens_per_doc, timeline_docs and liked_docs_cap must be >= 1");
        const int blocks = 2 * attr_dim();
        if (vocab_size * 3 / 4 / blocks < 4)
            fail("vocab_size ", vocab_size, " too small for ", blocks,
                 " attribute blocks; need at least ", blocks * 6);

        // The >= 2 likes guarantee must not distort the requested density.
        const double target = density * n_posts;
        double mean = 0.0;
        const int steps = 1601;
        for (int i = 0; i < steps; ++i) {
            const double act = 0.6 + 0.8 * i / (steps - 1);
            const double t = std::clamp<double>(std::lround(act * target), 2.0,
                                                static_cast<double>(n_posts - 1));
            mean += t / steps;
        }
        if (std::abs(mean - target) > 0.25 * target)
            fail("density ", density, " with ", n_posts,
                 " posts cannot guarantee 2 interactions per user without distorting density "
                 "(expected mean ",
                 mean, " likes vs target ", target, ")");
    }

    Json to_json() const {
        return Json{{"n_users", n_users},
                    {"n_posts", n_posts},
                    {"n_concepts", n_concepts},
                    {"vocab_size", vocab_size},
                    {"latent_dim", latent_dim},
                    {"personality_effect", personality_effect},
                    {"density", density},
                    {"noise", noise},
                    {"pers_noise", pers_noise},
                    {"text_noise", text_noise},
                    {"trait_leak", trait_leak},
                    {"tokens_per_doc", tokens_per_doc},
                    {"timeline_docs", timeline_docs},
                    {"liked_docs_cap", liked_docs_cap},
                    {"seed", seed}};
    }

    static SynthSpec from_json(const Json& j) {
        SynthSpec s;
        auto get = [&](const char* name, auto& field) {
            if (auto it = j.find(name); it != j.end())
                field = it->get<std::decay_t<decltype(field)>>();
        };
        get("n_users", s.n_users);
        get("n_posts", s.n_posts);
        get("n_concepts", s.n_concepts);
        get("vocab_size", s.vocab_size);
        get("latent_dim", s.latent_dim);
        get("personality_effect", s.personality_effect);
        get("density", s.density);
        get("noise", s.noise);
        get("pers_noise", s.pers_noise);
        get("text_noise", s.text_noise);
        get("trait_leak", s.trait_leak);
        get("tokens_per_doc", s.tokens_per_doc);
        get("timeline_docs", s.timeline_docs);
        get("liked_docs_cap", s.liked_docs_cap);
        get("seed", s.seed);
        return s;
    }
};

struct GroundTruth {
    Mat like_prob;   // n_users x n_posts, the exact sampling probabilities
    Mat utilities;   // n_users x n_posts raw utilities
    Mat user_pref;   // n_users x attr_dim: [traits +-1 | generic taste]
    Mat post_attr;   // n_posts x attr_dim
    std::vector<MbtiTraits> traits;

    Json to_json() const {
        Json j;
        j["kind"] = "ground_truth";
        j["like_prob"] = mat_to_json(like_prob);
        j["utilities"] = mat_to_json(utilities);
        j["user_pref"] = mat_to_json(user_pref);
        j["post_attr"] = mat_to_json(post_attr);
        Json t = Json::array();
        for (const auto& tr : traits) t.push_back(tr.to_string());
        j["traits"] = std::move(t);
        return j;
    }

    static GroundTruth from_json(const Json& j) {
        if (j.value("kind", "") != "ground_truth")
            fail("expected a ground_truth file, got kind \"", j.value("kind", ""), "\"");
        GroundTruth g;
        g.like_prob = mat_from_json(j.at("like_prob"));
        g.utilities = mat_from_json(j.at("utilities"));
        g.user_pref = mat_from_json(j.at("user_pref"));
        g.post_attr = mat_from_json(j.at("post_attr"));
        for (const auto& t : j.at("traits"))
            g.traits.push_back(MbtiTraits::parse(t.get<std::string>()));
        return g;
    }
};

// Ideal ordering by true like probability (ties by ascending post index).
inline std::vector<int> oracle_rank(const GroundTruth& gt, int user) {
    if (user < 0 || user >= gt.like_prob.rows()) fail("unknown user index ", user);
    std::vector<double> p(gt.like_prob.cols());
    for (int j = 0; j < gt.like_prob.cols(); ++j) p[j] = gt.like_prob(user, j);
    return ranking_order(p);
}

// Lexicon matching the generated vocabulary blocks, exercising prefix
// wildcards downstream.
inline CategoryLexicon synth_lexicon(const SynthSpec& spec) {
    CategoryLexicon lex;
    for (int d = 0; d < spec.attr_dim(); ++d) {
        lex.add_category("dim" + std::to_string(d) + "pos",
                         {"c" + std::to_string(d) + "p*"});
        lex.add_category("dim" + std::to_string(d) + "neg",
                         {"c" + std::to_string(d) + "n*"});
    }
    lex.add_category("filler", {"f*"});
    return lex;
}

namespace synth_detail {

inline std::string padded_id(char prefix, int index, int count) {
    std::string digits = std::to_string(count - 1);
    std::string s = std::to_string(index);
    return prefix + std::string(digits.size() - s.size(), '0') + s;
}

struct TextSampler {
    const SynthSpec& spec;
    int block_size;
    int filler_count;

    explicit TextSampler(const SynthSpec& s) : spec(s) {
        const int blocks = 2 * spec.attr_dim();
        block_size = spec.vocab_size * 3 / 4 / blocks;
        filler_count = spec.vocab_size - blocks * block_size;
    }

    std::string doc(const Vec& attr, Rng& rng) const {
        double total = 0.0;
        for (int d = 0; d < attr.size(); ++d) total += std::abs(attr[d]);
        std::string out;
        for (int t = 0; t < spec.tokens_per_doc; ++t) {
            if (!out.empty()) out += ' ';
            if (total == 0.0 || rng.uniform() < spec.text_noise) {
                out += 'f' + std::to_string(rng.uniform_index(filler_count));
                continue;
            }
            double pick = rng.uniform() * total;
            int d = 0;
            for (; d < attr.size() - 1; ++d) {
                pick -= std::abs(attr[d]);
                if (pick < 0.0) break;
            }
            out += 'c' + std::to_string(d) + (attr[d] >= 0.0 ? 'p' : 'n') +
                   std::to_string(rng.uniform_index(block_size));
        }
        return out;
    }
};

// Nonnegative concept distribution reflecting the attribute vector: trait
// dim k feeds concepts 2k (positive side) and 2k+1 (negative side); generic
// dims spread over the remaining concepts.
inline Vec concepts_from_attr(const Vec& attr, const SynthSpec& spec, Rng& rng) {
    Vec c(spec.n_concepts);
    for (int i = 0; i < spec.n_concepts; ++i) c[i] = 0.05 * rng.uniform();
    for (int k = 0; k < kTraitPairs; ++k) {
        c[2 * k] += std::max(0.0, attr[k]);
        c[2 * k + 1] += std::max(0.0, -attr[k]);
    }
    const int room = spec.n_concepts - 2 * kTraitPairs;
    if (room > 0) {
        for (int g = 0; g < spec.latent_dim; ++g) {
            const double a = attr[kTraitPairs + g];
            c[2 * kTraitPairs + (2 * g) % room] += 0.8 * std::max(0.0, a);
            c[2 * kTraitPairs + (2 * g + 1) % room] += 0.8 * std::max(0.0, -a);
        }
    }
    const double sum = c.sum();
    if (sum > 0.0) c /= sum;
    else c.setConstant(1.0 / spec.n_concepts);
    return c;
}

// Bisect the threshold tau so that sum_j sigmoid((u_j - tau)/T) = target.
inline double calibrate_threshold(const Vec& util, double temp, double target) {
    double lo = util.minCoeff() - 50.0 * temp;
    double hi = util.maxCoeff() + 50.0 * temp;
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        double sum = 0.0;
        for (int j = 0; j < util.size(); ++j) sum += stable_sigmoid((util[j] - mid) / temp);
        if (sum > target) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace synth_detail

inline std::pair<InteractionDataset, GroundTruth> generate(const SynthSpec& spec) {
    spec.validate();
    const int n = spec.n_users, m = spec.n_posts, da = spec.attr_dim();
    const int g_dim = spec.latent_dim;

    Rng traits_rng = substream(spec.seed, "synth.traits");
    Rng attr_rng = substream(spec.seed, "synth.attrs");
    Rng pref_rng = substream(spec.seed, "synth.prefs");
    Rng act_rng = substream(spec.seed, "synth.activity");
    Rng like_rng = substream(spec.seed, "synth.likes");
    Rng post_payload_rng = substream(spec.seed, "synth.posts");
    Rng user_payload_rng = substream(spec.seed, "synth.userdocs");
    Rng pers_rng = substream(spec.seed, "synth.pers");
    Rng liked_rng = substream(spec.seed, "synth.liked");

    GroundTruth gt;
    gt.traits.reserve(n);
    gt.user_pref.resize(n, da);
    for (int u = 0; u < n; ++u) {
        MbtiTraits t;
        t.extrovert = traits_rng.bernoulli(0.5);
        t.sensing = traits_rng.bernoulli(0.5);
        t.thinking = traits_rng.bernoulli(0.5);
        t.judging = traits_rng.bernoulli(0.5);
        gt.traits.push_back(t);
        gt.user_pref(u, 0) = t.extrovert ? 1.0 : -1.0;
        gt.user_pref(u, 1) = t.sensing ? 1.0 : -1.0;
        gt.user_pref(u, 2) = t.thinking ? 1.0 : -1.0;
        gt.user_pref(u, 3) = t.judging ? 1.0 : -1.0;
        for (int g = 0; g < g_dim; ++g) gt.user_pref(u, kTraitPairs + g) = pref_rng.normal();
    }

    gt.post_attr.resize(m, da);
    for (Eigen::Index i = 0; i < gt.post_attr.size(); ++i)
        gt.post_attr.data()[i] = attr_rng.normal();

    // utilities: rho-weighted blend of two unit-variance components
    const double rho = spec.personality_effect;
    gt.utilities.resize(n, m);
    for (int u = 0; u < n; ++u) {
        for (int j = 0; j < m; ++j) {
            double trait_util = 0.0, generic_util = 0.0;
            for (int k = 0; k < kTraitPairs; ++k)
                trait_util += gt.user_pref(u, k) * gt.post_attr(j, k);
            trait_util /= std::sqrt(static_cast<double>(kTraitPairs));
            for (int g = 0; g < g_dim; ++g)
                generic_util += gt.user_pref(u, kTraitPairs + g) * gt.post_attr(j, kTraitPairs + g);
            generic_util /= std::sqrt(static_cast<double>(g_dim));
            gt.utilities(u, j) = rho * trait_util + (1.0 - rho) * generic_util;
        }
    }

    // likes
    gt.like_prob = Mat::Zero(n, m);
    std::vector<std::vector<int>> likes(n);
    for (int u = 0; u < n; ++u) {
        const double act = act_rng.uniform(0.6, 1.4);
        const int target = static_cast<int>(
            std::clamp<long>(std::lround(act * spec.density * m), 2L, static_cast<long>(m - 1)));
        const Vec util = gt.utilities.row(u).transpose();
        if (spec.noise == 0.0) {
            std::vector<double> scores(util.data(), util.data() + m);
            const auto order = ranking_order(scores);
            likes[u].assign(order.begin(), order.begin() + target);
            std::sort(likes[u].begin(), likes[u].end());
            for (int j : likes[u]) gt.like_prob(u, j) = 1.0;
        } else {
            const double temp = std::min(100.0, 0.3 * std::tan(1.5707963267948966 * spec.noise));
            const double tau = synth_detail::calibrate_threshold(util, temp, target);
            Vec p(m);
            for (int j = 0; j < m; ++j) p[j] = stable_sigmoid((util[j] - tau) / temp);
            gt.like_prob.row(u) = p.transpose();
            for (int attempt = 0; attempt < 64 && likes[u].size() < 2; ++attempt) {
                likes[u].clear();
                for (int j = 0; j < m; ++j)
                    if (like_rng.bernoulli(p[j])) likes[u].push_back(j);
            }
            if (likes[u].size() < 2) {
                std::vector<double> scores(p.data(), p.data() + m);
                const auto order = ranking_order(scores);
                likes[u] = {order[0], order[1]};
                std::sort(likes[u].begin(), likes[u].end());
            }
        }
    }

    // posts
    synth_detail::TextSampler sampler(spec);
    std::vector<PostRecord> posts(m);
    const int n_brands = std::max(1, m / 50);
    for (int j = 0; j < m; ++j) {
        posts[j].post_id = synth_detail::padded_id('p', j, m);
        posts[j].brand_id = synth_detail::padded_id('b', j % n_brands, n_brands);
        const Vec attr = gt.post_attr.row(j).transpose();
        posts[j].text = sampler.doc(attr, post_payload_rng);
        posts[j].concepts = synth_detail::concepts_from_attr(attr, spec, post_payload_rng);
    }

    // users
    std::vector<UserRecord> users(n);
    for (int u = 0; u < n; ++u) {
        users[u].user_id = synth_detail::padded_id('u', u, n);
        users[u].mbti = gt.traits[u];

        Vec blend(da);
        for (int k = 0; k < kTraitPairs; ++k) blend[k] = spec.trait_leak * gt.user_pref(u, k);
        for (int g = 0; g < g_dim; ++g) blend[kTraitPairs + g] = gt.user_pref(u, kTraitPairs + g);
        for (int d = 0; d < spec.timeline_docs; ++d) {
            users[u].timeline_texts.push_back(sampler.doc(blend, user_payload_rng));
            users[u].timeline_concepts.push_back(
                synth_detail::concepts_from_attr(blend, spec, user_payload_rng));
        }

        // liked payloads: subsample of liked posts with some replaced by
        // random posts, so the liked-side features are informative but noisy
        std::vector<int> kept;
        for (int j : likes[u])
            if (liked_rng.bernoulli(0.7)) kept.push_back(j);
        if (kept.empty()) kept.push_back(likes[u].front());
        if (static_cast<int>(kept.size()) > spec.liked_docs_cap) {
            liked_rng.shuffle(kept);
            kept.resize(spec.liked_docs_cap);
            std::sort(kept.begin(), kept.end());
        }
        for (int j : kept) {
            const int src = liked_rng.bernoulli(0.3)
                                ? static_cast<int>(liked_rng.uniform_index(m))
                                : j;
            users[u].liked_texts.push_back(posts[src].text);
            users[u].liked_concepts.push_back(posts[src].concepts);
        }

        users[u].pers = Vec::Zero(kPersDim);
        for (int k = 0; k < kTraitPairs; ++k) {
            const bool first_pole = gt.user_pref(u, k) > 0.0;
            users[u].pers[3 * k + (first_pole ? 0 : 1)] = 1.0;
        }
        for (int i = 0; i < kPersDim; ++i) users[u].pers[i] += pers_rng.normal(0.0, spec.pers_noise);
    }

    std::vector<std::pair<std::string, std::string>> interactions;
    for (int u = 0; u < n; ++u)
        for (int j : likes[u]) interactions.emplace_back(users[u].user_id, posts[j].post_id);

    auto dataset = InteractionDataset::build(std::move(users), std::move(posts), interactions,
                                             FilterPolicy::kDropSparseUsers);
    if (dataset.n_users() != n) fail("internal: generator dropped users");
    return {std::move(dataset), std::move(gt)};
}

}  // namespace persic
