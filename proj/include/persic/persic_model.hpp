#pragma once

#include <filesystem>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "persic/adam.hpp"
#include "persic/bpr.hpp"
#include "persic/features.hpp"
#include "persic/metrics.hpp"
#include "persic/nn.hpp"

namespace persic {

// Feature subsets for the user tower. "Posts" draws on the user's own
// timeline, "Likes" on posts the user liked, "Pers" appends the personality
// activations after the fusion layer. OneHot drops features entirely in
// favor of a learned per-user embedding.
enum class Ablation {
    kOneHot,
    kPosts,
    kLikes,
    kPostsLikes,
    kPostsPers,
    kPostsLikesPers,
};

inline const char* ablation_name(Ablation a) {
    switch (a) {
        case Ablation::kOneHot: return "onehot";
        case Ablation::kPosts: return "posts";
        case Ablation::kLikes: return "likes";
        case Ablation::kPostsLikes: return "posts_likes";
        case Ablation::kPostsPers: return "posts_pers";
        case Ablation::kPostsLikesPers: return "posts_likes_pers";
    }
    fail("unreachable ablation");
}

inline Ablation ablation_from_name(const std::string& s) {
    for (Ablation a : {Ablation::kOneHot, Ablation::kPosts, Ablation::kLikes,
                       Ablation::kPostsLikes, Ablation::kPostsPers, Ablation::kPostsLikesPers})
        if (s == ablation_name(a)) return a;
    fail("unknown ablation \"", s,
         "\"; expected one of onehot, posts, likes, posts_likes, posts_pers, posts_likes_pers");
}

inline bool ablation_uses_pers(Ablation a) {
    return a == Ablation::kPostsPers || a == Ablation::kPostsLikesPers;
}
inline bool ablation_uses_posts(Ablation a) {
    return a == Ablation::kPosts || a == Ablation::kPostsLikes || a == Ablation::kPostsPers ||
           a == Ablation::kPostsLikesPers;
}
inline bool ablation_uses_likes(Ablation a) {
    return a == Ablation::kLikes || a == Ablation::kPostsLikes ||
           a == Ablation::kPostsLikesPers;
}

// Selected user-feature parts, ordered (T_p, I_p, T_l, I_l, L_p, L_l)
// restricted to the active sources. Empty for OneHot.
inline Vec assemble_user_input(const UserFeatureBundle& b, Ablation a) {
    std::vector<const Vec*> parts;
    if (ablation_uses_posts(a)) {
        parts.push_back(&b.t_p);
        parts.push_back(&b.i_p);
    }
    if (ablation_uses_likes(a)) {
        parts.push_back(&b.t_l);
        parts.push_back(&b.i_l);
    }
    if (ablation_uses_posts(a)) parts.push_back(&b.l_p);
    if (ablation_uses_likes(a)) parts.push_back(&b.l_l);
    Eigen::Index total = 0;
    for (const Vec* p : parts) total += p->size();
    Vec out(total);
    Eigen::Index at = 0;
    for (const Vec* p : parts) {
        out.segment(at, p->size()) = *p;
        at += p->size();
    }
    return out;
}

inline int user_input_dim(Ablation a, int k, int concept_dim, int n_categories) {
    const int per_source = k + concept_dim + n_categories;
    int d = 0;
    if (ablation_uses_posts(a)) d += per_source;
    if (ablation_uses_likes(a)) d += per_source;
    return d;
}

// Two-tower scorer. The user tower fuses the selected feature parts through
// one affine+ReLU layer into D_p - 12 dims, then concatenates the 12
// personality dims (zeros when the ablation excludes them) so both towers
// meet in the same D_p-dim space; the score is their dot product.
class PersicModel {
public:
    PersicModel() = default;

    static PersicModel init(Ablation ablation, int user_in, int post_in, int n_users, int d_p,
                            std::uint64_t seed) {
        if (d_p <= kPersDim)
            fail("latent dim must exceed ", kPersDim, ", got ", d_p);
        PersicModel m;
        m.ablation_ = ablation;
        m.d_p_ = d_p;
        Rng rng = substream(seed, "init.persic");
        if (ablation == Ablation::kOneHot) {
            if (n_users < 1) fail("one-hot ablation needs the user count");
            m.onehot_.resize(n_users, d_p);
            for (Eigen::Index i = 0; i < m.onehot_.size(); ++i)
                m.onehot_.data()[i] = 0.1 * rng.normal();
            m.g_onehot_ = Mat::Zero(n_users, d_p);
        } else {
            if (user_in < 1) fail("user feature dim must be >= 1, got ", user_in);
            m.psi_.init(d_p - kPersDim, user_in, rng);
        }
        if (post_in < 1) fail("post feature dim must be >= 1, got ", post_in);
        m.gamma_.init(d_p, post_in, rng);
        return m;
    }

    Ablation ablation() const { return ablation_; }
    int d_p() const { return d_p_; }
    int d_u() const { return d_p_ - kPersDim; }
    int user_input_size() const {
        return ablation_ == Ablation::kOneHot ? 0 : psi_.in_dim();
    }
    int post_input_size() const { return gamma_.in_dim(); }
    int n_embedded_users() const { return static_cast<int>(onehot_.rows()); }

    Affine& psi() { return psi_; }
    Affine& gamma() { return gamma_; }
    Mat& onehot_table() { return onehot_; }

    std::vector<ParamRef> param_refs() {
        std::vector<ParamRef> refs;
        if (ablation_ == Ablation::kOneHot)
            refs.push_back({"onehot", onehot_.data(), g_onehot_.data(), onehot_.size()});
        else
            for (auto& r : psi_.refs("psi")) refs.push_back(r);
        for (auto& r : gamma_.refs("gamma")) refs.push_back(r);
        return refs;
    }

    // Inference-mode encodings (no dropout). Train-mode encodings live in
    // the batched loss below so masks stay tied to one forward pass.
    Vec encode_user(int user_index, const UserFeatureBundle& b) const {
        Vec out(d_p_);
        if (ablation_ == Ablation::kOneHot) {
            if (user_index < 0 || user_index >= onehot_.rows())
                fail("user index ", user_index, " outside embedding table of ", onehot_.rows());
            out = onehot_.row(user_index).transpose();
        } else {
            out.head(d_u()) = relu(psi_.forward(assemble_user_input(b, ablation_)));
            if (ablation_uses_pers(ablation_)) {
                if (b.pers.size() != kPersDim)
                    fail("pers vector must have ", kPersDim, " entries, got ", b.pers.size());
                out.tail(kPersDim) = b.pers;
            } else {
                out.tail(kPersDim).setZero();
            }
        }
        if (!all_finite(out)) fail("non-finite user encoding");
        return out;
    }

    Vec encode_post(const PostFeatureBundle& b) const {
        Vec out = relu(gamma_.forward(b.concat()));
        if (!all_finite(out)) fail("non-finite post encoding");
        return out;
    }

    double score(int user_index, const UserFeatureBundle& ub, const PostFeatureBundle& pb) const {
        return encode_user(user_index, ub).dot(encode_post(pb));
    }

    // All latents at once for evaluation: columns are users / posts.
    Mat user_latents(const FeatureStore& feats) const {
        Mat out(d_p_, feats.users.size());
        for (std::size_t u = 0; u < feats.users.size(); ++u)
            out.col(static_cast<Eigen::Index>(u)) =
                encode_user(static_cast<int>(u), feats.users[u]);
        return out;
    }

    Mat post_latents(const FeatureStore& feats) const {
        Mat out(d_p_, feats.posts.size());
        for (std::size_t p = 0; p < feats.posts.size(); ++p)
            out.col(static_cast<Eigen::Index>(p)) = encode_post(feats.posts[p]);
        return out;
    }

    Json to_json() const {
        Json j;
        j["format_version"] = 1;
        j["model_kind"] = "persic";
        j["ablation"] = ablation_name(ablation_);
        j["d_p"] = d_p_;
        if (ablation_ == Ablation::kOneHot)
            j["onehot"] = mat_to_json(onehot_);
        else
            j["psi"] = psi_.to_json();
        j["gamma"] = gamma_.to_json();
        return j;
    }

    static PersicModel from_json(const Json& j) {
        if (j.at("format_version").get<int>() != 1) fail("unsupported checkpoint format_version");
        if (j.at("model_kind").get<std::string>() != "persic")
            fail("checkpoint model_kind is \"", j.at("model_kind").get<std::string>(),
                 "\", expected \"persic\"");
        PersicModel m;
        m.ablation_ = ablation_from_name(j.at("ablation").get<std::string>());
        m.d_p_ = j.at("d_p").get<int>();
        if (m.ablation_ == Ablation::kOneHot) {
            m.onehot_ = mat_from_json(j.at("onehot"));
            m.g_onehot_ = Mat::Zero(m.onehot_.rows(), m.onehot_.cols());
        } else {
            m.psi_ = Affine::from_json(j.at("psi"));
        }
        m.gamma_ = Affine::from_json(j.at("gamma"));
        if (m.gamma_.out_dim() != m.d_p_) fail("checkpoint gamma dims do not match d_p");
        return m;
    }

    // -----------------------------------------------------------------------
    // Batched training core. Returns the minimized loss
    //   mean_t softplus(-delta_t) + lambda * ||Theta||^2
    // and accumulates exact gradients into the parameter grad buffers.
    // Each unique user/post in the batch is encoded once; its dropout mask is
    // drawn here and reused for the backward pass. rng may be null when
    // dropout_rate is 0.
    double loss_and_grads(const std::vector<Triple>& triples, const Mat& user_inputs,
                          const Mat& pers, const Mat& post_inputs, double lambda,
                          double dropout_rate, Rng* rng) {
        if (triples.empty()) fail("empty triple batch");
        if (dropout_rate > 0.0 && rng == nullptr) fail("dropout requires an rng");

        std::vector<int> users, posts;
        std::unordered_map<int, int> umap, pmap;
        for (const auto& t : triples) {
            if (umap.emplace(t.user, static_cast<int>(users.size())).second)
                users.push_back(t.user);
            if (pmap.emplace(t.pos, static_cast<int>(posts.size())).second)
                posts.push_back(t.pos);
            if (pmap.emplace(t.neg, static_cast<int>(posts.size())).second)
                posts.push_back(t.neg);
        }
        const int nu = static_cast<int>(users.size());
        const int np = static_cast<int>(posts.size());

        // user tower forward
        Mat lat_u(d_p_, nu);
        Mat xu, zu, mask_u;
        if (ablation_ == Ablation::kOneHot) {
            mask_u = dropout_rate > 0.0 ? dropout_mask(d_p_, nu, dropout_rate, *rng) : Mat();
            for (int i = 0; i < nu; ++i) lat_u.col(i) = onehot_.row(users[i]).transpose();
            if (mask_u.size() > 0) lat_u.array() *= mask_u.array();
        } else {
            xu.resize(psi_.in_dim(), nu);
            for (int i = 0; i < nu; ++i) xu.col(i) = user_inputs.col(users[i]);
            zu = psi_.forward(xu);
            Mat hu = relu(zu);
            if (dropout_rate > 0.0) {
                mask_u = dropout_mask(d_u(), nu, dropout_rate, *rng);
                hu.array() *= mask_u.array();
            }
            lat_u.topRows(d_u()) = hu;
            for (int i = 0; i < nu; ++i) lat_u.col(i).tail(kPersDim) = pers.col(users[i]);
        }

        // post tower forward
        Mat xp(gamma_.in_dim(), np);
        for (int i = 0; i < np; ++i) xp.col(i) = post_inputs.col(posts[i]);
        Mat zp = gamma_.forward(xp);
        Mat lat_p = relu(zp);
        Mat mask_p;
        if (dropout_rate > 0.0) {
            mask_p = dropout_mask(d_p_, np, dropout_rate, *rng);
            lat_p.array() *= mask_p.array();
        }

        const double inv_b = 1.0 / static_cast<double>(triples.size());
        double data_loss = 0.0;
        Mat dlat_u = Mat::Zero(d_p_, nu);
        Mat dlat_p = Mat::Zero(d_p_, np);
        for (const auto& t : triples) {
            const int ui = umap[t.user], ai = pmap[t.pos], bi = pmap[t.neg];
            const Vec diff = lat_p.col(ai) - lat_p.col(bi);
            const double delta = lat_u.col(ui).dot(diff);
            data_loss += softplus(-delta) * inv_b;
            const double c = stable_sigmoid(-delta) * inv_b;  // -dL/ddelta
            dlat_u.col(ui) -= c * diff;
            dlat_p.col(ai) -= c * lat_u.col(ui);
            dlat_p.col(bi) += c * lat_u.col(ui);
        }

        // post tower backward
        if (mask_p.size() > 0) dlat_p.array() *= mask_p.array();
        gamma_.backward(xp, relu_backward(zp, dlat_p));

        // user tower backward
        if (ablation_ == Ablation::kOneHot) {
            if (mask_u.size() > 0) dlat_u.array() *= mask_u.array();
            for (int i = 0; i < nu; ++i) g_onehot_.row(users[i]) += dlat_u.col(i).transpose();
        } else {
            Mat dhu = dlat_u.topRows(d_u());
            if (mask_u.size() > 0) dhu.array() *= mask_u.array();
            psi_.backward(xu, relu_backward(zu, dhu));
        }

        auto refs = param_refs();
        add_l2_grad(refs, lambda);
        return data_loss + lambda * param_sq_norm(refs);
    }

private:
    Ablation ablation_ = Ablation::kPostsLikesPers;
    int d_p_ = 512;
    Affine psi_, gamma_;
    Mat onehot_, g_onehot_;
};

struct PersicConfig {
    Ablation ablation = Ablation::kPostsLikesPers;
    int d_p = 512;  // user latent = (d_p - 12) fused dims + 12 personality dims
};

// Column-major feature caches shared by every batch of one training run.
struct PersicInputs {
    Mat user_inputs;  // user_input_dim x n_users (0 rows for OneHot)
    Mat pers;         // 12 x n_users (zeros when ablation excludes Pers)
    Mat post_inputs;  // post_dim x n_posts
};

inline PersicInputs make_persic_inputs(const FeatureStore& feats, Ablation ablation) {
    PersicInputs in;
    const int n_users = static_cast<int>(feats.users.size());
    const int n_posts = static_cast<int>(feats.posts.size());
    if (n_users == 0 || n_posts == 0) fail("feature store is empty");
    if (ablation != Ablation::kOneHot) {
        const Vec first = assemble_user_input(feats.users[0], ablation);
        in.user_inputs.resize(first.size(), n_users);
        in.user_inputs.col(0) = first;
        for (int u = 1; u < n_users; ++u)
            in.user_inputs.col(u) = assemble_user_input(feats.users[u], ablation);
    }
    in.pers = Mat::Zero(kPersDim, n_users);
    if (ablation_uses_pers(ablation))
        for (int u = 0; u < n_users; ++u) in.pers.col(u) = feats.users[u].pers;
    in.post_inputs.resize(feats.posts[0].concat().size(), n_posts);
    for (int p = 0; p < n_posts; ++p) in.post_inputs.col(p) = feats.posts[p].concat();
    return in;
}

inline PersicModel init_persic(const FeaturePipeline& pipeline, const InteractionDataset& data,
                               const PersicConfig& cfg, std::uint64_t seed) {
    const int user_in = user_input_dim(cfg.ablation, pipeline.k(), pipeline.concept_dim(),
                                       pipeline.n_categories());
    return PersicModel::init(cfg.ablation, std::max(user_in, 1), pipeline.post_dim(),
                             data.n_users(), cfg.d_p, seed);
}

// BPR training: per epoch, shuffle the train positives, expand each into
// `negatives_per_positive` triples against posts the user has not liked in
// training, and take one Adam step per mini-batch.
inline TrainResult train_persic(PersicModel& m, const InteractionDataset& data,
                                const DatasetSplit& split, const FeatureStore& feats,
                                const TrainConfig& cfg) {
    cfg.validate();
    const PersicInputs in = make_persic_inputs(feats, m.ablation());
    Rng rng = substream(cfg.seed, "train.persic");
    Adam opt(cfg.learning_rate);
    auto refs = m.param_refs();
    TrainResult result;
    result.objective_trace = run_bpr_epochs(
        split.train, split.train_by_user, data.n_posts(), cfg, rng,
        [&](int epoch, const std::vector<Triple>& batch) {
            zero_grads(refs);
            const double loss = m.loss_and_grads(batch, in.user_inputs, in.pers, in.post_inputs,
                                                 cfg.weight_decay, cfg.dropout_rate, &rng);
            if (!std::isfinite(loss))
                fail("non-finite loss at epoch ", epoch, " (parameter norm ",
                     std::sqrt(param_sq_norm(refs)), ")");
            opt.step(refs);
            // maximization objective mean log sigma(delta) - lambda||Theta||^2
            // is exactly the negated minimized loss
            return -loss;
        });
    return result;
}

inline std::vector<int> rank_posts(const PersicModel& m, int user_index,
                                   const UserFeatureBundle& ub,
                                   const std::vector<PostFeatureBundle>& candidates) {
    const Vec u = m.encode_user(user_index, ub);
    std::vector<double> scores;
    scores.reserve(candidates.size());
    for (const auto& c : candidates) scores.push_back(u.dot(m.encode_post(c)));
    return ranking_order(scores);
}

}  // namespace persic
