#pragma once

#include <string>
#include <vector>

#include "persic/adam.hpp"
#include "persic/bpr.hpp"
#include "persic/dataset.hpp"
#include "persic/nn.hpp"

namespace persic {

struct LatentFactorConfig {
    int dim = 32;
    bool fm = false;  // add global bias + per-user/per-item linear terms
};

// Degree-two factorization machine on (user, item) one-hot input:
//   y = w0 + w_u + w_i + p_u . q_i
// The MF variant keeps only w0 + p_u . q_i, so the pairwise embedding term
// is all that separates ranked scores (w0 cancels in score differences).
class LatentFactorModel {
public:
    LatentFactorModel() = default;

    static LatentFactorModel init(int n_users, int n_items, const LatentFactorConfig& cfg,
                                  std::uint64_t seed) {
        if (cfg.dim < 1) fail("latent dim must be >= 1, got ", cfg.dim);
        if (n_users < 1 || n_items < 1) fail("need at least one user and one item");
        LatentFactorModel m;
        m.fm_ = cfg.fm;
        Rng rng = substream(seed, cfg.fm ? "init.fm" : "init.mf");
        auto fill = [&](Mat& x, int r, int c) {
            x.resize(r, c);
            for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = 0.1 * rng.normal();
        };
        fill(m.p_, n_users, cfg.dim);
        fill(m.q_, n_items, cfg.dim);
        m.gp_ = Mat::Zero(n_users, cfg.dim);
        m.gq_ = Mat::Zero(n_items, cfg.dim);
        m.w0_.setZero(1);
        m.gw0_.setZero(1);
        m.wu_ = Vec::Zero(n_users);
        m.wi_ = Vec::Zero(n_items);
        m.gwu_ = Vec::Zero(n_users);
        m.gwi_ = Vec::Zero(n_items);
        return m;
    }

    bool fm() const { return fm_; }
    int n_users() const { return static_cast<int>(p_.rows()); }
    int n_items() const { return static_cast<int>(q_.rows()); }
    int dim() const { return static_cast<int>(p_.cols()); }

    Mat& user_embeddings() { return p_; }
    Mat& item_embeddings() { return q_; }
    Vec& linear_user() { return wu_; }
    Vec& linear_item() { return wi_; }
    double& bias() { return w0_[0]; }

    double score(int u, int i) const {
        if (u < 0 || u >= n_users()) fail("unknown user index ", u);
        if (i < 0 || i >= n_items()) fail("unknown item index ", i);
        double s = w0_[0] + p_.row(u).dot(q_.row(i));
        if (fm_) s += wu_[u] + wi_[i];
        return s;
    }

    std::vector<ParamRef> param_refs() {
        std::vector<ParamRef> refs{{"p", p_.data(), gp_.data(), p_.size()},
                                   {"q", q_.data(), gq_.data(), q_.size()}};
        if (fm_) {
            refs.push_back({"w0", w0_.data(), gw0_.data(), 1});
            refs.push_back({"w_user", wu_.data(), gwu_.data(), wu_.size()});
            refs.push_back({"w_item", wi_.data(), gwi_.data(), wi_.size()});
        }
        return refs;
    }

    double loss_and_grads(const std::vector<Triple>& triples, double lambda) {
        if (triples.empty()) fail("empty triple batch");
        const double inv_b = 1.0 / static_cast<double>(triples.size());
        double data_loss = 0.0;
        for (const auto& t : triples) {
            const Vec diff = (q_.row(t.pos) - q_.row(t.neg)).transpose();
            double delta = p_.row(t.user).dot(diff);
            if (fm_) delta += wi_[t.pos] - wi_[t.neg];
            data_loss += softplus(-delta) * inv_b;
            const double c = stable_sigmoid(-delta) * inv_b;
            gp_.row(t.user) -= c * diff.transpose();
            gq_.row(t.pos) -= c * p_.row(t.user);
            gq_.row(t.neg) += c * p_.row(t.user);
            if (fm_) {
                gwi_[t.pos] -= c;
                gwi_[t.neg] += c;
            }
        }
        auto refs = param_refs();
        add_l2_grad(refs, lambda);
        return data_loss + lambda * param_sq_norm(refs);
    }

    Json to_json() const {
        Json j;
        j["format_version"] = 1;
        j["model_kind"] = fm_ ? "fm" : "mf";
        j["p"] = mat_to_json(p_);
        j["q"] = mat_to_json(q_);
        j["w0"] = w0_[0];
        j["w_user"] = vec_to_json(wu_);
        j["w_item"] = vec_to_json(wi_);
        return j;
    }

    static LatentFactorModel from_json(const Json& j) {
        const auto kind = j.at("model_kind").get<std::string>();
        if (kind != "mf" && kind != "fm") fail("checkpoint model_kind \"", kind, "\" is not mf/fm");
        LatentFactorModel m;
        m.fm_ = kind == "fm";
        m.p_ = mat_from_json(j.at("p"));
        m.q_ = mat_from_json(j.at("q"));
        m.w0_.setZero(1);
        m.w0_[0] = j.at("w0").get<double>();
        m.wu_ = vec_from_json(j.at("w_user"));
        m.wi_ = vec_from_json(j.at("w_item"));
        m.gp_ = Mat::Zero(m.p_.rows(), m.p_.cols());
        m.gq_ = Mat::Zero(m.q_.rows(), m.q_.cols());
        m.gw0_.setZero(1);
        m.gwu_ = Vec::Zero(m.wu_.size());
        m.gwi_ = Vec::Zero(m.wi_.size());
        return m;
    }

private:
    bool fm_ = false;
    Mat p_, q_, gp_, gq_;
    Vec w0_, gw0_;  // single entry, kept as Vec for ParamRef flattening
    Vec wu_, wi_, gwu_, gwi_;
};

inline TrainResult train_latent_factor(LatentFactorModel& m, const InteractionDataset& data,
                                       const DatasetSplit& split, const TrainConfig& cfg) {
    cfg.validate();
    Rng rng = substream(cfg.seed, m.fm() ? "train.fm" : "train.mf");
    Adam opt(cfg.learning_rate);
    auto refs = m.param_refs();
    TrainResult result;
    result.objective_trace = run_bpr_epochs(
        split.train, split.train_by_user, data.n_posts(), cfg, rng,
        [&](int epoch, const std::vector<Triple>& batch) {
            zero_grads(refs);
            const double loss = m.loss_and_grads(batch, cfg.weight_decay);
            if (!std::isfinite(loss))
                fail("non-finite loss at epoch ", epoch, " (parameter norm ",
                     std::sqrt(param_sq_norm(refs)), ")");
            opt.step(refs);
            return -loss;
        });
    return result;
}

}  // namespace persic
