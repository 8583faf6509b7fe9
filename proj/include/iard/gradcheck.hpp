#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "iard/tensor.hpp"

namespace iard {

struct GradCheckResult {
    std::string kernel;
    std::size_t instances = 0;
    double worst_rel_err = 0.0;
    bool passed = false;
};

// Central finite-difference check of one scalar-valued function against the
// recorded-graph gradients. `f` must rebuild its graph from the given leaves
// on every call. Inputs are perturbed in place through the leaf values.
double finite_diff_rel_err(const std::function<GradTensor(std::vector<GradTensor>&)>& f,
                           std::vector<GradTensor>& leaves, double h = 1e-6);

// Randomized suite over every differentiable kernel. Returns one row per
// kernel; pass threshold is rel. err < tol over `instances` random draws.
std::vector<GradCheckResult> run_gradcheck_suite(std::size_t instances = 50, double tol = 1e-4,
                                                 std::uint64_t seed = 1234);

}  // namespace iard
