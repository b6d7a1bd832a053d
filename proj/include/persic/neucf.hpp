#pragma once

#include <string>
#include <vector>

#include "persic/adam.hpp"
#include "persic/bpr.hpp"
#include "persic/dataset.hpp"
#include "persic/nn.hpp"

namespace persic {

struct NeucfConfig {
    int dim = 32;                          // GMF and MLP embedding size
    std::vector<int> layers = {64, 32, 16};  // MLP tower widths

    void validate() const {
        if (dim < 1) fail("embedding dim must be >= 1, got ", dim);
        if (layers.empty()) fail("MLP tower needs at least one layer");
        for (int l : layers)
            if (l < 1) fail("MLP layer widths must be >= 1");
    }
};

// Neural collaborative filtering: a GMF path (elementwise product of user
// and item embeddings) and an MLP path over concatenated embeddings, merged
// by one linear output layer. With output weights one on the GMF slice and
// zero on the MLP slice the model degenerates to plain MF.
class NeucfModel {
public:
    NeucfModel() = default;

    static NeucfModel init(int n_users, int n_items, const NeucfConfig& cfg, std::uint64_t seed) {
        cfg.validate();
        if (n_users < 1 || n_items < 1) fail("need at least one user and one item");
        NeucfModel m;
        m.dim_ = cfg.dim;
        Rng rng = substream(seed, "init.neucf");
        auto fill = [&](Mat& x, int r, int c) {
            x.resize(r, c);
            for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = 0.1 * rng.normal();
        };
        fill(m.gmf_p_, n_users, cfg.dim);
        fill(m.gmf_q_, n_items, cfg.dim);
        fill(m.mlp_p_, n_users, cfg.dim);
        fill(m.mlp_q_, n_items, cfg.dim);
        m.g_gmf_p_ = Mat::Zero(n_users, cfg.dim);
        m.g_gmf_q_ = Mat::Zero(n_items, cfg.dim);
        m.g_mlp_p_ = Mat::Zero(n_users, cfg.dim);
        m.g_mlp_q_ = Mat::Zero(n_items, cfg.dim);
        int in = 2 * cfg.dim;
        for (int width : cfg.layers) {
            Affine a;
            a.init(width, in, rng);
            m.tower_.push_back(std::move(a));
            in = width;
        }
        m.out_.init(1, cfg.dim + in, rng);
        return m;
    }

    int n_users() const { return static_cast<int>(gmf_p_.rows()); }
    int n_items() const { return static_cast<int>(gmf_q_.rows()); }
    int dim() const { return dim_; }
    Affine& output_layer() { return out_; }
    std::vector<Affine>& tower() { return tower_; }
    Mat& gmf_user() { return gmf_p_; }
    Mat& gmf_item() { return gmf_q_; }

    std::vector<ParamRef> param_refs() {
        std::vector<ParamRef> refs{
            {"gmf_p", gmf_p_.data(), g_gmf_p_.data(), gmf_p_.size()},
            {"gmf_q", gmf_q_.data(), g_gmf_q_.data(), gmf_q_.size()},
            {"mlp_p", mlp_p_.data(), g_mlp_p_.data(), mlp_p_.size()},
            {"mlp_q", mlp_q_.data(), g_mlp_q_.data(), mlp_q_.size()},
        };
        for (std::size_t l = 0; l < tower_.size(); ++l)
            for (auto& r : tower_[l].refs("tower" + std::to_string(l))) refs.push_back(r);
        for (auto& r : out_.refs("out")) refs.push_back(r);
        return refs;
    }

    double score(int u, int i) const {
        if (u < 0 || u >= n_users()) fail("unknown user index ", u);
        if (i < 0 || i >= n_items()) fail("unknown item index ", i);
        Mat phi = forward_pairs({{u, i}}, nullptr);
        return phi(0, 0);
    }

    // Forward a list of (user, item) pairs; returns 1 x batch scores. When
    // cache is non-null the per-layer activations are kept for backward.
    struct ForwardCache {
        std::vector<std::pair<int, int>> pairs;
        Mat a0;                 // 2d x batch MLP input
        std::vector<Mat> zs;    // pre-activations per tower layer
        std::vector<Mat> as;    // post-ReLU activations per tower layer
        Mat merged;             // (d + top) x batch: [gmf; mlp top]
    };

    Mat forward_pairs(const std::vector<std::pair<int, int>>& pairs, ForwardCache* cache) const {
        const int b = static_cast<int>(pairs.size());
        Mat a0(2 * dim_, b);
        Mat gmf(dim_, b);
        for (int c = 0; c < b; ++c) {
            const auto& [u, i] = pairs[c];
            a0.col(c).head(dim_) = mlp_p_.row(u).transpose();
            a0.col(c).tail(dim_) = mlp_q_.row(i).transpose();
            gmf.col(c) = gmf_p_.row(u).cwiseProduct(gmf_q_.row(i)).transpose();
        }
        Mat a = a0;
        std::vector<Mat> zs, as;
        for (const auto& layer : tower_) {
            Mat z = layer.forward(a);
            a = relu(z);
            if (cache) {
                zs.push_back(std::move(z));
                as.push_back(a);
            }
        }
        Mat merged(dim_ + a.rows(), b);
        merged.topRows(dim_) = gmf;
        merged.bottomRows(a.rows()) = a;
        if (cache) {
            cache->pairs = pairs;
            cache->a0 = std::move(a0);
            cache->zs = std::move(zs);
            cache->as = std::move(as);
            cache->merged = merged;
        }
        return out_.forward(merged);
    }

    // dscore: 1 x batch gradient on the scores.
    void backward_pairs(const ForwardCache& cache, const Mat& dscore) {
        Mat dmerged = out_.backward(cache.merged, dscore);
        const int b = static_cast<int>(cache.pairs.size());
        Mat da = dmerged.bottomRows(dmerged.rows() - dim_);
        for (int l = static_cast<int>(tower_.size()) - 1; l >= 0; --l) {
            const Mat& input = l == 0 ? cache.a0 : cache.as[l - 1];
            da = tower_[l].backward(input, relu_backward(cache.zs[l], da));
        }
        for (int c = 0; c < b; ++c) {
            const auto& [u, i] = cache.pairs[c];
            g_mlp_p_.row(u) += da.col(c).head(dim_).transpose();
            g_mlp_q_.row(i) += da.col(c).tail(dim_).transpose();
            const Vec dgmf = dmerged.col(c).head(dim_);
            g_gmf_p_.row(u) += dgmf.cwiseProduct(gmf_q_.row(i).transpose()).transpose();
            g_gmf_q_.row(i) += dgmf.cwiseProduct(gmf_p_.row(u).transpose()).transpose();
        }
    }

    double loss_and_grads(const std::vector<Triple>& triples, double lambda) {
        if (triples.empty()) fail("empty triple batch");
        std::vector<std::pair<int, int>> pairs;
        pairs.reserve(2 * triples.size());
        for (const auto& t : triples) {
            pairs.emplace_back(t.user, t.pos);
            pairs.emplace_back(t.user, t.neg);
        }
        ForwardCache cache;
        Mat scores = forward_pairs(pairs, &cache);
        const double inv_b = 1.0 / static_cast<double>(triples.size());
        double data_loss = 0.0;
        Mat dscore(1, pairs.size());
        for (std::size_t t = 0; t < triples.size(); ++t) {
            const double delta = scores(0, 2 * t) - scores(0, 2 * t + 1);
            data_loss += softplus(-delta) * inv_b;
            const double c = stable_sigmoid(-delta) * inv_b;
            dscore(0, 2 * t) = -c;
            dscore(0, 2 * t + 1) = c;
        }
        backward_pairs(cache, dscore);
        auto refs = param_refs();
        add_l2_grad(refs, lambda);
        return data_loss + lambda * param_sq_norm(refs);
    }

    Json to_json() const {
        Json j;
        j["format_version"] = 1;
        j["model_kind"] = "neucf";
        j["dim"] = dim_;
        j["gmf_p"] = mat_to_json(gmf_p_);
        j["gmf_q"] = mat_to_json(gmf_q_);
        j["mlp_p"] = mat_to_json(mlp_p_);
        j["mlp_q"] = mat_to_json(mlp_q_);
        j["tower"] = Json::array();
        for (const auto& layer : tower_) j["tower"].push_back(layer.to_json());
        j["out"] = out_.to_json();
        return j;
    }

    static NeucfModel from_json(const Json& j) {
        if (j.at("model_kind").get<std::string>() != "neucf")
            fail("checkpoint model_kind is not neucf");
        NeucfModel m;
        m.dim_ = j.at("dim").get<int>();
        m.gmf_p_ = mat_from_json(j.at("gmf_p"));
        m.gmf_q_ = mat_from_json(j.at("gmf_q"));
        m.mlp_p_ = mat_from_json(j.at("mlp_p"));
        m.mlp_q_ = mat_from_json(j.at("mlp_q"));
        for (const auto& layer : j.at("tower")) m.tower_.push_back(Affine::from_json(layer));
        m.out_ = Affine::from_json(j.at("out"));
        m.g_gmf_p_ = Mat::Zero(m.gmf_p_.rows(), m.gmf_p_.cols());
        m.g_gmf_q_ = Mat::Zero(m.gmf_q_.rows(), m.gmf_q_.cols());
        m.g_mlp_p_ = Mat::Zero(m.mlp_p_.rows(), m.mlp_p_.cols());
        m.g_mlp_q_ = Mat::Zero(m.mlp_q_.rows(), m.mlp_q_.cols());
        return m;
    }

private:
    int dim_ = 32;
    Mat gmf_p_, gmf_q_, mlp_p_, mlp_q_;
    Mat g_gmf_p_, g_gmf_q_, g_mlp_p_, g_mlp_q_;
    std::vector<Affine> tower_;
    Affine out_;
};

inline TrainResult train_neucf(NeucfModel& m, const InteractionDataset& data,
                               const DatasetSplit& split, const TrainConfig& cfg) {
    cfg.validate();
    Rng rng = substream(cfg.seed, "train.neucf");
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
