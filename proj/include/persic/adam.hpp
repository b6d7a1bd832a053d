#pragma once

#include <cmath>
#include <vector>

#include "persic/nn.hpp"

namespace persic {

// Adam over a model's ParamRef list. The ref list layout must stay stable
// across steps; state is keyed by position.
class Adam {
public:
    Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(const std::vector<ParamRef>& refs) {
        if (m_.empty()) {
            for (const auto& r : refs) {
                m_.emplace_back(r.size, 0.0);
                v_.emplace_back(r.size, 0.0);
            }
        }
        if (m_.size() != refs.size()) fail("optimizer state does not match parameter list");
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (std::size_t p = 0; p < refs.size(); ++p) {
            const ParamRef& r = refs[p];
            auto& m = m_[p];
            auto& v = v_[p];
            if (static_cast<std::ptrdiff_t>(m.size()) != r.size)
                fail("optimizer state size mismatch for ", r.name);
            for (std::ptrdiff_t i = 0; i < r.size; ++i) {
                const double g = r.grad[i];
                m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
                v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
                r.value[i] -= lr_ * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
            }
        }
    }

    double lr() const { return lr_; }
    long long steps_taken() const { return t_; }

private:
    double lr_, beta1_, beta2_, eps_;
    long long t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

}  // namespace persic
