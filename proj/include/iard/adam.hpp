#pragma once

#include <cstdint>
#include <vector>

#include "iard/tensor.hpp"

namespace iard {

struct AdamConfig {
    double lr = 2e-4;
    double beta1 = 0.8;
    double beta2 = 0.9;
    double eps = 1e-8;
};

// Bias-corrected Adam. One state instance owns the moments for a fixed
// parameter list; step() reads each parameter's accumulated grad.
class AdamState {
public:
    AdamState(const std::vector<GradTensor*>& params, AdamConfig cfg = {});

    void step(const std::vector<GradTensor*>& params);
    std::uint64_t steps() const { return step_; }
    const AdamConfig& config() const { return cfg_; }

private:
    AdamConfig cfg_;
    std::uint64_t step_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

}  // namespace iard
