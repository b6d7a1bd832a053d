#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "persic/rng.hpp"
#include "persic/serde.hpp"

namespace persic {

// Flat view of one parameter tensor and its gradient buffer. Models expose
// their full parameter set this way so the optimizer and the tests can walk
// parameters without knowing model internals.
struct ParamRef {
    std::string name;
    double* value = nullptr;
    double* grad = nullptr;
    std::ptrdiff_t size = 0;
};

inline void zero_grads(const std::vector<ParamRef>& refs) {
    for (const auto& r : refs)
        for (std::ptrdiff_t i = 0; i < r.size; ++i) r.grad[i] = 0.0;
}

inline double param_sq_norm(const std::vector<ParamRef>& refs) {
    double s = 0.0;
    for (const auto& r : refs)
        for (std::ptrdiff_t i = 0; i < r.size; ++i) s += r.value[i] * r.value[i];
    return s;
}

// d(lambda * ||theta||^2)/d(theta) = 2 * lambda * theta
inline void add_l2_grad(const std::vector<ParamRef>& refs, double lambda) {
    if (lambda == 0.0) return;
    for (const auto& r : refs)
        for (std::ptrdiff_t i = 0; i < r.size; ++i) r.grad[i] += 2.0 * lambda * r.value[i];
}

inline bool params_finite(const std::vector<ParamRef>& refs) {
    for (const auto& r : refs)
        for (std::ptrdiff_t i = 0; i < r.size; ++i)
            if (!std::isfinite(r.value[i])) return false;
    return true;
}

// Fully connected layer y = W x + b. Batched calls treat columns as samples.
struct Affine {
    Mat w;  // out x in
    Vec b;
    Mat gw;
    Vec gb;

    void init(int out, int in, Rng& rng) {
        w.resize(out, in);
        const double limit = std::sqrt(6.0 / static_cast<double>(in));
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-limit, limit);
        b = Vec::Zero(out);
        gw = Mat::Zero(out, in);
        gb = Vec::Zero(out);
    }

    int out_dim() const { return static_cast<int>(w.rows()); }
    int in_dim() const { return static_cast<int>(w.cols()); }

    Vec forward(const Vec& x) const {
        if (x.size() != w.cols())
            fail("affine layer expects input of length ", w.cols(), ", got ", x.size());
        return w * x + b;
    }

    Mat forward(const Mat& x) const {
        if (x.rows() != w.cols())
            fail("affine layer expects input of length ", w.cols(), ", got ", x.rows());
        return (w * x).colwise() + b;
    }

    // dy: out x batch, x: in x batch. Accumulates parameter grads, returns dx.
    Mat backward(const Mat& x, const Mat& dy) {
        gw.noalias() += dy * x.transpose();
        gb += dy.rowwise().sum();
        return w.transpose() * dy;
    }

    std::vector<ParamRef> refs(const std::string& prefix) {
        return {{prefix + ".w", w.data(), gw.data(), w.size()},
                {prefix + ".b", b.data(), gb.data(), b.size()}};
    }

    Json to_json() const { return Json{{"w", mat_to_json(w)}, {"b", vec_to_json(b)}}; }

    static Affine from_json(const Json& j) {
        Affine a;
        a.w = mat_from_json(j.at("w"));
        a.b = vec_from_json(j.at("b"));
        a.gw = Mat::Zero(a.w.rows(), a.w.cols());
        a.gb = Vec::Zero(a.b.size());
        return a;
    }
};

inline Mat relu(const Mat& z) { return z.cwiseMax(0.0); }
inline Vec relu(const Vec& z) { return z.cwiseMax(0.0); }

// dz = dy where z > 0, else 0.
inline Mat relu_backward(const Mat& z, const Mat& dy) {
    return (z.array() > 0.0).select(dy, Mat::Zero(dy.rows(), dy.cols()));
}

inline Mat leaky_relu(const Mat& z, double slope) {
    return (z.array() > 0.0).select(z, slope * z);
}

inline Mat leaky_relu_backward(const Mat& z, const Mat& dy, double slope) {
    return (z.array() > 0.0).select(dy, slope * dy);
}

// Inverted-dropout mask: entries are 0 with probability rate, else 1/(1-rate),
// so inference needs no rescaling. rate 0 yields an all-ones mask.
inline Mat dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
    Mat m(rows, cols);
    if (rate <= 0.0) {
        m.setOnes();
        return m;
    }
    const double keep = 1.0 - rate;
    for (Eigen::Index i = 0; i < m.size(); ++i)
        m.data()[i] = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
    return m;
}

}  // namespace persic
