#include "iard/adam.hpp"

#include <cmath>

namespace iard {

AdamState::AdamState(const std::vector<GradTensor*>& params, AdamConfig cfg) : cfg_(cfg) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const GradTensor* p : params) {
        m_.emplace_back(p->size(), 0.0);
        v_.emplace_back(p->size(), 0.0);
    }
}

void AdamState::step(const std::vector<GradTensor*>& params) {
    if (params.size() != m_.size())
        throw DimensionError("adam_step: parameter list does not match optimizer state");
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        GradTensor& p = *params[i];
        if (p.size() != m_[i].size())
            throw DimensionError("adam_step: parameter shape changed under optimizer");
        const auto& g = p.grad();
        auto& val = p.values();
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t j = 0; j < val.size(); ++j) {
            m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
            v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
            const double mh = m[j] / bc1;
            const double vh = v[j] / bc2;
            val[j] -= cfg_.lr * mh / (std::sqrt(vh) + cfg_.eps);
        }
    }
}

}  // namespace iard
