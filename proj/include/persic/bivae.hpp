#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "persic/adam.hpp"
#include "persic/bpr.hpp"
#include "persic/dataset.hpp"
#include "persic/nn.hpp"

namespace persic {

// KL(N(mu, sigma^2) || N(0, 1)) for one coordinate.
inline double gaussian_kl(double mu, double sigma) {
    return 0.5 * (sigma * sigma + mu * mu - 1.0 - 2.0 * std::log(sigma));
}

struct BivaeConfig {
    int latent_dim = 32;
    int hidden = 64;
    int epochs = 100;
    int batch_size = 64;
    double learning_rate = 1e-2;
    std::uint64_t seed = 0;

    void validate() const {
        if (latent_dim < 1) fail("latent_dim must be >= 1, got ", latent_dim);
        if (hidden < 1) fail("hidden must be >= 1, got ", hidden);
        if (epochs < 1) fail("epochs must be >= 1, got ", epochs);
        if (batch_size < 1) fail("batch_size must be >= 1, got ", batch_size);
        if (learning_rate < 0.0) fail("learning_rate must be >= 0");
    }
};

// Bilateral VAE over the binary interaction matrix: a user encoder reads
// rows of X, an item encoder reads columns, and each side is trained in
// alternation while the other side's posterior means act as the decoder.
// Likelihood is Bernoulli with logit eta = z_u . mu_item, priors N(0, I).
class BivaeModel {
public:
    BivaeModel() = default;

    // One encoder: x -> tanh hidden -> (mu, softplus sigma).
    struct Encoder {
        Affine hidden, mu, sigma;

        void init(int in, int h, int d, Rng& rng) {
            hidden.init(h, in, rng);
            mu.init(d, h, rng);
            sigma.init(d, h, rng);
        }

        std::vector<ParamRef> refs(const std::string& prefix) {
            std::vector<ParamRef> out;
            for (auto& r : hidden.refs(prefix + ".hidden")) out.push_back(r);
            for (auto& r : mu.refs(prefix + ".mu")) out.push_back(r);
            for (auto& r : sigma.refs(prefix + ".sigma")) out.push_back(r);
            return out;
        }

        Json to_json() const {
            return Json{{"hidden", hidden.to_json()}, {"mu", mu.to_json()},
                        {"sigma", sigma.to_json()}};
        }

        static Encoder from_json(const Json& j) {
            Encoder e;
            e.hidden = Affine::from_json(j.at("hidden"));
            e.mu = Affine::from_json(j.at("mu"));
            e.sigma = Affine::from_json(j.at("sigma"));
            return e;
        }
    };

    static BivaeModel init(int n_users, int n_items, const BivaeConfig& cfg, std::uint64_t seed) {
        cfg.validate();
        if (n_users < 1 || n_items < 1) fail("need at least one user and one item");
        BivaeModel m;
        m.d_ = cfg.latent_dim;
        Rng rng = substream(seed, "init.bivae");
        m.user_enc_.init(n_items, cfg.hidden, cfg.latent_dim, rng);
        m.item_enc_.init(n_users, cfg.hidden, cfg.latent_dim, rng);
        m.user_mu_ = Mat::Zero(n_users, cfg.latent_dim);
        m.item_mu_ = Mat::Zero(n_items, cfg.latent_dim);
        return m;
    }

    int latent_dim() const { return d_; }
    Encoder& user_encoder() { return user_enc_; }
    Encoder& item_encoder() { return item_enc_; }
    const Mat& user_means() const { return user_mu_; }
    const Mat& item_means() const { return item_mu_; }

    // Posterior parameters for a batch of inputs (columns). Returns hidden
    // activations too so the backward pass can reuse them.
    struct EncodeState {
        Mat h, mu, sigma_pre, sigma;
    };

    static EncodeState encode(const Encoder& enc, const Mat& inputs) {
        EncodeState s;
        s.h = enc.hidden.forward(inputs).array().tanh();
        s.mu = enc.mu.forward(s.h);
        s.sigma_pre = enc.sigma.forward(s.h);
        s.sigma = s.sigma_pre.unaryExpr([](double v) { return softplus(v); });
        return s;
    }

    // Negated per-user ELBO averaged over the batch, for one side of the
    // alternation. inputs: in_dim x batch (rows or columns of X);
    // x: in_dim x batch slice of the interaction matrix (same thing for this
    // model, kept separate for clarity); decoder: in_dim x d posterior means
    // of the fixed side; eps: d x batch reparameterization noise.
    // Accumulates gradients into enc only.
    static double side_loss_and_grads(Encoder& enc, const Mat& x, const Mat& decoder,
                                      const Mat& eps) {
        const int b = static_cast<int>(x.cols());
        EncodeState s = encode(enc, x);
        const Mat z = s.mu + s.sigma.cwiseProduct(eps);
        const Mat eta = decoder * z;  // in_dim x batch logits
        const double inv_b = 1.0 / static_cast<double>(b);

        double loss = 0.0;
        for (Eigen::Index i = 0; i < eta.size(); ++i)
            loss += (softplus(eta.data()[i]) - x.data()[i] * eta.data()[i]) * inv_b;
        for (Eigen::Index i = 0; i < s.mu.size(); ++i)
            loss += gaussian_kl(s.mu.data()[i], s.sigma.data()[i]) * inv_b;

        Mat deta(eta.rows(), eta.cols());
        for (Eigen::Index i = 0; i < eta.size(); ++i)
            deta.data()[i] = (stable_sigmoid(eta.data()[i]) - x.data()[i]) * inv_b;
        const Mat dz = decoder.transpose() * deta;
        const Mat dmu = dz + inv_b * s.mu;
        const Mat dsigma =
            dz.cwiseProduct(eps) + inv_b * (s.sigma - s.sigma.cwiseInverse());
        const Mat dsigma_pre = dsigma.cwiseProduct(
            s.sigma_pre.unaryExpr([](double v) { return stable_sigmoid(v); }));
        Mat dh = enc.mu.backward(s.h, dmu) + enc.sigma.backward(s.h, dsigma_pre);
        const Mat dh_pre = dh.cwiseProduct((1.0 - s.h.array().square()).matrix());
        enc.hidden.backward(x, dh_pre);
        return loss;
    }

    // Noise-free ELBO of the whole matrix divided by its cell count; used as
    // the deterministic training-progress trace.
    double eval_elbo(const Mat& x) const {
        const Mat eta = user_mu_ * item_mu_.transpose();  // n x m
        double elbo = 0.0;
        for (Eigen::Index i = 0; i < eta.size(); ++i)
            elbo += x.data()[i] * eta.data()[i] - softplus(eta.data()[i]);
        for (Eigen::Index i = 0; i < user_sigma_.size(); ++i)
            elbo -= gaussian_kl(user_mu_.data()[i], user_sigma_.data()[i]);
        for (Eigen::Index i = 0; i < item_sigma_.size(); ++i)
            elbo -= gaussian_kl(item_mu_.data()[i], item_sigma_.data()[i]);
        return elbo / static_cast<double>(x.size());
    }

    void refresh_user_posterior(const Mat& x) {
        EncodeState s = encode(user_enc_, x.transpose());
        user_mu_ = s.mu.transpose();
        user_sigma_ = s.sigma.transpose();
    }

    void refresh_item_posterior(const Mat& x) {
        EncodeState s = encode(item_enc_, x);
        item_mu_ = s.mu.transpose();
        item_sigma_ = s.sigma.transpose();
    }

    // Bernoulli mean, always in (0, 1).
    double score(int u, int i) const {
        if (u < 0 || u >= user_mu_.rows()) fail("unknown user index ", u);
        if (i < 0 || i >= item_mu_.rows()) fail("unknown item index ", i);
        return stable_sigmoid(user_mu_.row(u).dot(item_mu_.row(i)));
    }

    Json to_json() const {
        Json j;
        j["format_version"] = 1;
        j["model_kind"] = "bivae";
        j["latent_dim"] = d_;
        j["user_encoder"] = user_enc_.to_json();
        j["item_encoder"] = item_enc_.to_json();
        j["user_mu"] = mat_to_json(user_mu_);
        j["item_mu"] = mat_to_json(item_mu_);
        j["user_sigma"] = mat_to_json(user_sigma_);
        j["item_sigma"] = mat_to_json(item_sigma_);
        return j;
    }

    static BivaeModel from_json(const Json& j) {
        if (j.at("model_kind").get<std::string>() != "bivae")
            fail("checkpoint model_kind is not bivae");
        BivaeModel m;
        m.d_ = j.at("latent_dim").get<int>();
        m.user_enc_ = Encoder::from_json(j.at("user_encoder"));
        m.item_enc_ = Encoder::from_json(j.at("item_encoder"));
        m.user_mu_ = mat_from_json(j.at("user_mu"));
        m.item_mu_ = mat_from_json(j.at("item_mu"));
        m.user_sigma_ = mat_from_json(j.at("user_sigma"));
        m.item_sigma_ = mat_from_json(j.at("item_sigma"));
        return m;
    }

private:
    int d_ = 32;
    Encoder user_enc_, item_enc_;
    Mat user_mu_, item_mu_;        // cached posterior means for scoring
    Mat user_sigma_, item_sigma_;  // cached posterior scales for the ELBO trace

    friend TrainResult train_bivae(BivaeModel&, const Mat&, const BivaeConfig&);
};

inline Mat interaction_matrix(int n_users, int n_posts,
                              const std::vector<std::pair<int, int>>& interactions) {
    Mat x = Mat::Zero(n_users, n_posts);
    for (const auto& [u, p] : interactions) x(u, p) = 1.0;
    return x;
}

// Alternating optimization: each epoch runs one user-side pass (items fixed
// at their posterior means) over shuffled user minibatches, then the
// symmetric item-side pass. The trace records the noise-free ELBO after
// each epoch.
inline TrainResult train_bivae(BivaeModel& m, const Mat& x, const BivaeConfig& cfg) {
    cfg.validate();
    if ((x.array() != 0.0 && x.array() != 1.0).any())
        fail("interaction matrix must be binary");
    Rng rng = substream(cfg.seed, "train.bivae");
    Adam user_opt(cfg.learning_rate), item_opt(cfg.learning_rate);
    auto user_refs = m.user_enc_.refs("user");
    auto item_refs = m.item_enc_.refs("item");
    const Mat xt = x.transpose();

    // One optimization pass over every column of `cols` (in_dim x count) in
    // shuffled minibatches, against the fixed decoder means.
    auto side_pass = [&](BivaeModel::Encoder& enc, const Mat& cols, const Mat& decoder,
                         std::vector<ParamRef>& refs, Adam& opt, int epoch, const char* side) {
        std::vector<int> order(static_cast<std::size_t>(cols.cols()));
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const auto count = std::min<std::size_t>(cfg.batch_size, order.size() - start);
            Mat batch(cols.rows(), count);
            for (std::size_t c = 0; c < count; ++c)
                batch.col(static_cast<Eigen::Index>(c)) = cols.col(order[start + c]);
            Mat eps(m.d_, count);
            for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = rng.normal();
            zero_grads(refs);
            const double loss = BivaeModel::side_loss_and_grads(enc, batch, decoder, eps);
            if (!std::isfinite(loss))
                fail("non-finite ELBO at epoch ", epoch, " (", side, " pass)");
            opt.step(refs);
        }
    };

    TrainResult result;
    m.refresh_item_posterior(x);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        side_pass(m.user_enc_, xt, m.item_mu_, user_refs, user_opt, epoch, "user");
        m.refresh_user_posterior(x);
        side_pass(m.item_enc_, x, m.user_mu_, item_refs, item_opt, epoch, "item");
        m.refresh_item_posterior(x);
        result.objective_trace.push_back(m.eval_elbo(x));
    }
    return result;
}

}  // namespace persic
