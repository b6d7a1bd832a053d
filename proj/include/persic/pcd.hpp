#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "persic/adam.hpp"
#include "persic/bpr.hpp"
#include "persic/dataset.hpp"
#include "persic/nn.hpp"

namespace persic {

struct PcdConfig {
    int n_assoc = 32;     // dictionary rows (attention size per user)
    int latent_dim = 64;  // shared space for users and posts
    int hidden = 64;      // post tower hidden width
    double margin = 0.1;
    double alpha = 0.01;  // L1 weight on the attention entries
    double beta = 1e-5;   // weight on ||theta||_2 (unsquared) over dictionary + tower
    double leaky_slope = 0.01;

    void validate() const {
        if (n_assoc < 1) fail("n_assoc must be >= 1, got ", n_assoc);
        if (latent_dim < 1) fail("latent_dim must be >= 1, got ", latent_dim);
        if (hidden < 1) fail("hidden must be >= 1, got ", hidden);
        if (margin < 0.0) fail("margin must be >= 0");
        if (alpha < 0.0 || beta < 0.0) fail("alpha and beta must be >= 0");
    }
};

// Association-attention model: a shared dictionary A of association vectors
// and per-user attention weights w_u combine into x_u = A^T w_u; posts pass
// through a two-layer leaky-ReLU tower into the same space; affinity is the
// cosine of the two vectors, trained with a margin hinge. The L1 term on the
// attention drives entries to exact zero (applied as a proximal shrink after
// each optimizer step).
class PcdModel {
public:
    PcdModel() = default;

    static PcdModel init(int n_users, int post_dim, const PcdConfig& cfg, std::uint64_t seed) {
        cfg.validate();
        if (n_users < 1) fail("need at least one user");
        if (post_dim < 1) fail("post feature dim must be >= 1");
        PcdModel m;
        m.cfg_ = cfg;
        Rng rng = substream(seed, "init.pcd");
        m.a_.resize(cfg.n_assoc, cfg.latent_dim);
        for (Eigen::Index i = 0; i < m.a_.size(); ++i) m.a_.data()[i] = 0.1 * rng.normal();
        m.w_.resize(n_users, cfg.n_assoc);
        for (Eigen::Index i = 0; i < m.w_.size(); ++i) m.w_.data()[i] = 0.1 * rng.normal();
        m.ga_ = Mat::Zero(cfg.n_assoc, cfg.latent_dim);
        m.gw_ = Mat::Zero(n_users, cfg.n_assoc);
        m.t1_.init(cfg.hidden, post_dim, rng);
        m.t2_.init(cfg.latent_dim, cfg.hidden, rng);
        return m;
    }

    const PcdConfig& config() const { return cfg_; }
    int n_users() const { return static_cast<int>(w_.rows()); }
    Mat& attention() { return w_; }
    const Mat& attention() const { return w_; }
    Mat& dictionary() { return a_; }
    Affine& post_tower_front() { return t1_; }
    Affine& post_tower_back() { return t2_; }

    std::vector<ParamRef> param_refs() {
        std::vector<ParamRef> refs{{"A", a_.data(), ga_.data(), a_.size()},
                                   {"w", w_.data(), gw_.data(), w_.size()}};
        for (auto& r : t1_.refs("t1")) refs.push_back(r);
        for (auto& r : t2_.refs("t2")) refs.push_back(r);
        return refs;
    }

    // theta = dictionary + post tower (the attention has its own L1 term).
    std::vector<ParamRef> theta_refs() {
        std::vector<ParamRef> refs{{"A", a_.data(), ga_.data(), a_.size()}};
        for (auto& r : t1_.refs("t1")) refs.push_back(r);
        for (auto& r : t2_.refs("t2")) refs.push_back(r);
        return refs;
    }

    Vec user_vector(int u) const {
        if (u < 0 || u >= n_users()) fail("unknown user index ", u);
        return a_.transpose() * w_.row(u).transpose();
    }

    Vec post_vector(const Vec& post_input) const {
        const Vec z1 = t1_.forward(post_input);
        const Vec a1 = leaky_relu(z1, cfg_.leaky_slope);
        const Vec z2 = t2_.forward(a1);
        return leaky_relu(z2, cfg_.leaky_slope);
    }

    static double cosine(const Vec& x, const Vec& y) {
        const double nx = x.norm(), ny = y.norm();
        if (nx == 0.0 || ny == 0.0) return 0.0;
        return x.dot(y) / (nx * ny);
    }

    double score(int u, const Vec& post_input) const {
        return cosine(user_vector(u), post_vector(post_input));
    }

    // Batch loss:
    //   mean_t max(0, f(u, neg) - f(u, pos) + margin)
    //   + alpha * sum_{u in batch} ||w_u||_1   (when include_l1)
    //   + beta * ||theta||_2
    // with exact subgradients (sign(w) for the L1 part), so finite-difference
    // checks hold wherever no |w| entry or hinge argument sits at zero.
    double loss_and_grads(const std::vector<Triple>& triples, const Mat& post_inputs,
                          bool include_l1) {
        if (triples.empty()) fail("empty triple batch");
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

        Mat wb(cfg_.n_assoc, nu);
        for (int i = 0; i < nu; ++i) wb.col(i) = w_.row(users[i]).transpose();
        Mat xu = a_.transpose() * wb;  // latent x users

        Mat xp(t1_.in_dim(), np);
        for (int i = 0; i < np; ++i) xp.col(i) = post_inputs.col(posts[i]);
        const Mat z1 = t1_.forward(xp);
        const Mat a1 = leaky_relu(z1, cfg_.leaky_slope);
        const Mat z2 = t2_.forward(a1);
        const Mat yp = leaky_relu(z2, cfg_.leaky_slope);

        const double inv_b = 1.0 / static_cast<double>(triples.size());
        double loss = 0.0;
        Mat dxu = Mat::Zero(xu.rows(), nu);
        Mat dyp = Mat::Zero(yp.rows(), np);
        auto add_cosine_grad = [&](int ui, int pi, double df) {
            const Vec& x = xu.col(ui);
            const Vec& y = yp.col(pi);
            const double nx = x.norm(), ny = y.norm();
            if (nx == 0.0 || ny == 0.0) return;
            const double f = x.dot(y) / (nx * ny);
            dxu.col(ui) += df * (y / (nx * ny) - f * x / (nx * nx));
            dyp.col(pi) += df * (x / (nx * ny) - f * y / (ny * ny));
        };
        for (const auto& t : triples) {
            const int ui = umap[t.user], ai = pmap[t.pos], bi = pmap[t.neg];
            const double f_pos = cosine(xu.col(ui), yp.col(ai));
            const double f_neg = cosine(xu.col(ui), yp.col(bi));
            const double arg = f_neg - f_pos + cfg_.margin;
            if (arg > 0.0) {
                loss += arg * inv_b;
                add_cosine_grad(ui, ai, -inv_b);
                add_cosine_grad(ui, bi, inv_b);
            }
        }

        // post tower backward
        const Mat dz2 = leaky_relu_backward(z2, dyp, cfg_.leaky_slope);
        const Mat da1 = t2_.backward(a1, dz2);
        t1_.backward(xp, leaky_relu_backward(z1, da1, cfg_.leaky_slope));

        // x_u = A^T w_u
        ga_.noalias() += wb * dxu.transpose();
        const Mat dwb = a_ * dxu;
        for (int i = 0; i < nu; ++i) gw_.row(users[i]) += dwb.col(i).transpose();

        if (include_l1 && cfg_.alpha > 0.0) {
            for (int u : users) {
                loss += cfg_.alpha * w_.row(u).cwiseAbs().sum();
                gw_.row(u) += cfg_.alpha * w_.row(u).unaryExpr([](double v) {
                    return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
                });
            }
        }

        if (cfg_.beta > 0.0) {
            auto theta = theta_refs();
            const double norm = std::sqrt(param_sq_norm(theta));
            loss += cfg_.beta * norm;
            if (norm > 0.0)
                for (const auto& r : theta)
                    for (std::ptrdiff_t i = 0; i < r.size; ++i)
                        r.grad[i] += cfg_.beta * r.value[i] / norm;
        }
        return loss;
    }

    // Proximal L1 shrink on the given users' attention rows.
    void shrink_attention(const std::vector<int>& users, double threshold) {
        if (threshold <= 0.0) return;
        for (int u : users)
            w_.row(u) = w_.row(u).unaryExpr([&](double v) {
                const double mag = std::abs(v) - threshold;
                return mag > 0.0 ? (v > 0.0 ? mag : -mag) : 0.0;
            });
    }

    // Fraction of attention entries with |w| below the cutoff.
    double attention_sparsity(double cutoff = 1e-3) const {
        long long small = 0;
        for (Eigen::Index i = 0; i < w_.size(); ++i)
            if (std::abs(w_.data()[i]) < cutoff) ++small;
        return static_cast<double>(small) / static_cast<double>(w_.size());
    }

    Mat post_latents(const Mat& post_inputs) const {
        const Mat z1 = t1_.forward(post_inputs);
        const Mat a1 = leaky_relu(z1, cfg_.leaky_slope);
        return leaky_relu(t2_.forward(a1), cfg_.leaky_slope);
    }

    Json to_json() const {
        Json j;
        j["format_version"] = 1;
        j["model_kind"] = "pcd";
        j["config"] = {{"n_assoc", cfg_.n_assoc},     {"latent_dim", cfg_.latent_dim},
                       {"hidden", cfg_.hidden},       {"margin", cfg_.margin},
                       {"alpha", cfg_.alpha},         {"beta", cfg_.beta},
                       {"leaky_slope", cfg_.leaky_slope}};
        j["A"] = mat_to_json(a_);
        j["w"] = mat_to_json(w_);
        j["t1"] = t1_.to_json();
        j["t2"] = t2_.to_json();
        return j;
    }

    static PcdModel from_json(const Json& j) {
        if (j.at("model_kind").get<std::string>() != "pcd")
            fail("checkpoint model_kind is not pcd");
        PcdModel m;
        const auto& c = j.at("config");
        m.cfg_.n_assoc = c.at("n_assoc").get<int>();
        m.cfg_.latent_dim = c.at("latent_dim").get<int>();
        m.cfg_.hidden = c.at("hidden").get<int>();
        m.cfg_.margin = c.at("margin").get<double>();
        m.cfg_.alpha = c.at("alpha").get<double>();
        m.cfg_.beta = c.at("beta").get<double>();
        m.cfg_.leaky_slope = c.at("leaky_slope").get<double>();
        m.a_ = mat_from_json(j.at("A"));
        m.w_ = mat_from_json(j.at("w"));
        m.t1_ = Affine::from_json(j.at("t1"));
        m.t2_ = Affine::from_json(j.at("t2"));
        m.ga_ = Mat::Zero(m.a_.rows(), m.a_.cols());
        m.gw_ = Mat::Zero(m.w_.rows(), m.w_.cols());
        return m;
    }

private:
    PcdConfig cfg_;
    Mat a_, ga_;  // n_assoc x latent_dim
    Mat w_, gw_;  // n_users x n_assoc
    Affine t1_, t2_;
};

// Hinge training with the L1 term handled proximally: Adam steps on the
// hinge + beta subgradients, then the touched attention rows shrink by
// lr * alpha, which is what produces exact zeros.
inline TrainResult train_pcd(PcdModel& m, const InteractionDataset& data,
                             const DatasetSplit& split, const Mat& post_inputs,
                             const TrainConfig& cfg) {
    cfg.validate();
    Rng rng = substream(cfg.seed, "train.pcd");
    Adam opt(cfg.learning_rate);
    auto refs = m.param_refs();
    TrainResult result;
    result.objective_trace = run_bpr_epochs(
        split.train, split.train_by_user, data.n_posts(), cfg, rng,
        [&](int epoch, const std::vector<Triple>& batch) {
            zero_grads(refs);
            const double loss = m.loss_and_grads(batch, post_inputs, /*include_l1=*/false);
            if (!std::isfinite(loss))
                fail("non-finite loss at epoch ", epoch, " (parameter norm ",
                     std::sqrt(param_sq_norm(refs)), ")");
            opt.step(refs);
            std::vector<int> users;
            for (const auto& t : batch)
                if (users.empty() || users.back() != t.user) users.push_back(t.user);
            std::sort(users.begin(), users.end());
            users.erase(std::unique(users.begin(), users.end()), users.end());
            m.shrink_attention(users, cfg.learning_rate * m.config().alpha);
            return -loss;
        });
    return result;
}

}  // namespace persic
