#include "iard/gradcheck.hpp"

#include <cmath>
#include <random>

#include "iard/ops.hpp"

namespace iard {

namespace {

// Test-harness scalarizer: fixed-coefficient weighted sum. Kept out of the
// op set under check; its gradient is the coefficient vector by definition.
GradTensor weighted_sum(const GradTensor& x, const std::vector<double>& coeffs) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += coeffs[i] * x.values()[i];
    auto n = detail::make_node({1}, {acc}, true);
    n->parents = {x.node()};
    n->backward_fn = [coeffs](detail::Node& self) {
        auto& xn = *self.parents[0];
        for (std::size_t i = 0; i < coeffs.size(); ++i) xn.grad[i] += coeffs[i] * self.grad[0];
    };
    return GradTensor(n);
}

GradTensor rand_leaf(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> v(numel(shape));
    for (double& x : v) x = dist(rng);
    return GradTensor::leaf(std::move(shape), std::move(v), true);
}

std::vector<double> rand_coeffs(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> c(n);
    for (double& x : c) x = dist(rng);
    return c;
}

}  // namespace

double finite_diff_rel_err(const std::function<GradTensor(std::vector<GradTensor>&)>& f,
                           std::vector<GradTensor>& leaves, double h) {
    GradTensor loss = f(leaves);
    backward(loss);
    std::vector<std::vector<double>> analytic;
    analytic.reserve(leaves.size());
    for (auto& l : leaves) analytic.push_back(l.grad());

    double worst = 0.0;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        auto& vals = leaves[li].values();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double saved = vals[i];
            vals[i] = saved + h;
            const double fp = f(leaves).scalar();
            vals[i] = saved - h;
            const double fm = f(leaves).scalar();
            vals[i] = saved;
            const double fd = (fp - fm) / (2.0 * h);
            const double a = analytic[li][i];
            const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6});
            worst = std::max(worst, rel);
        }
        leaves[li].zero_grad();
    }
    return worst;
}

std::vector<GradCheckResult> run_gradcheck_suite(std::size_t instances, double tol,
                                                 std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<GradCheckResult> results;

    auto run = [&](const std::string& name,
                   const std::function<double(std::mt19937_64&)>& one_instance) {
        GradCheckResult r;
        r.kernel = name;
        r.instances = instances;
        for (std::size_t i = 0; i < instances; ++i)
            r.worst_rel_err = std::max(r.worst_rel_err, one_instance(rng));
        r.passed = r.worst_rel_err < tol;
        results.push_back(r);
    };

    run("causal_conv1d", [](std::mt19937_64& g) {
        std::vector<GradTensor> leaves = {rand_leaf({2, 16}, g), rand_leaf({3, 2, 4}, g),
                                          rand_leaf({3}, g)};
        auto c = rand_coeffs(3 * 16, g);
        auto f = [c](std::vector<GradTensor>& l) {
            return weighted_sum(causal_conv1d(l[0], l[1], l[2]), c);
        };
        return finite_diff_rel_err(f, leaves);
    });

    run("down_conv2", [](std::mt19937_64& g) {
        std::vector<GradTensor> leaves = {rand_leaf({2, 12}, g), rand_leaf({3, 2, 2}, g),
                                          rand_leaf({3}, g)};
        auto c = rand_coeffs(3 * 6, g);
        auto f = [c](std::vector<GradTensor>& l) {
            return weighted_sum(down_conv2(l[0], l[1], l[2]), c);
        };
        return finite_diff_rel_err(f, leaves);
    });

    run("upsample2_nn", [](std::mt19937_64& g) {
        std::vector<GradTensor> leaves = {rand_leaf({3, 7}, g)};
        auto c = rand_coeffs(3 * 14, g);
        auto f = [c](std::vector<GradTensor>& l) { return weighted_sum(upsample2_nn(l[0]), c); };
        return finite_diff_rel_err(f, leaves);
    });

    run("conv1x1", [](std::mt19937_64& g) {
        std::vector<GradTensor> leaves = {rand_leaf({3, 9}, g), rand_leaf({2, 3, 1}, g),
                                          rand_leaf({2}, g)};
        auto c = rand_coeffs(2 * 9, g);
        auto f = [c](std::vector<GradTensor>& l) {
            return weighted_sum(conv1x1(l[0], l[1], l[2]), c);
        };
        return finite_diff_rel_err(f, leaves);
    });

    run("concat_channels", [](std::mt19937_64& g) {
        std::vector<GradTensor> leaves = {rand_leaf({2, 5}, g), rand_leaf({1, 5}, g)};
        auto c = rand_coeffs(3 * 5, g);
        auto f = [c](std::vector<GradTensor>& l) {
            return weighted_sum(concat_channels(l[0], l[1]), c);
        };
        return finite_diff_rel_err(f, leaves);
    });

    run("add", [](std::mt19937_64& g) {
        std::vector<GradTensor> leaves = {rand_leaf({2, 6}, g), rand_leaf({2, 6}, g)};
        auto c = rand_coeffs(12, g);
        auto f = [c](std::vector<GradTensor>& l) { return weighted_sum(add(l[0], l[1]), c); };
        return finite_diff_rel_err(f, leaves);
    });

    // Drawn away from the kink at 0 so central differences stay valid.
    run("leaky_relu", [](std::mt19937_64& g) {
        std::uniform_real_distribution<double> mag(0.1, 1.0);
        std::bernoulli_distribution sign(0.5);
        std::vector<double> v(12);
        for (double& x : v) x = (sign(g) ? 1.0 : -1.0) * mag(g);
        std::vector<GradTensor> leaves = {GradTensor::leaf({2, 6}, std::move(v), true)};
        auto c = rand_coeffs(12, g);
        auto f = [c](std::vector<GradTensor>& l) { return weighted_sum(leaky_relu(l[0]), c); };
        return finite_diff_rel_err(f, leaves);
    });

    run("lstm_unroll8", [](std::mt19937_64& g) {
        const std::size_t d = 3, h = 4;
        std::vector<GradTensor> leaves = {rand_leaf({d, 8}, g),       rand_leaf({4 * h, d}, g),
                                          rand_leaf({4 * h, h}, g),   rand_leaf({4 * h}, g),
                                          rand_leaf({h}, g),          rand_leaf({h}, g)};
        auto c = rand_coeffs(h * 8, g);
        auto f = [c](std::vector<GradTensor>& l) {
            LstmParams p{l[1], l[2], l[3]};
            return weighted_sum(lstm_seq(l[0], p, l[4], l[5]), c);
        };
        return finite_diff_rel_err(f, leaves, 1e-6);
    });

    run("l1_loss", [](std::mt19937_64& g) {
        std::vector<GradTensor> leaves = {rand_leaf({10}, g), rand_leaf({10}, g)};
        auto f = [](std::vector<GradTensor>& l) { return l1_loss(l[0], l[1]); };
        return finite_diff_rel_err(f, leaves);
    });

    run("si_snr_loss", [](std::mt19937_64& g) {
        std::vector<GradTensor> leaves = {rand_leaf({12}, g), rand_leaf({12}, g, 0.2, 1.0)};
        auto f = [](std::vector<GradTensor>& l) { return si_snr_loss(l[0], l[1]); };
        return finite_diff_rel_err(f, leaves);
    });

    run("conv_relu_l1_chain", [](std::mt19937_64& g) {
        std::vector<GradTensor> leaves = {rand_leaf({2, 10}, g), rand_leaf({1, 2, 3}, g),
                                          rand_leaf({1}, g), rand_leaf({1, 10}, g)};
        auto f = [](std::vector<GradTensor>& l) {
            return l1_loss(leaky_relu(causal_conv1d(l[0], l[1], l[2])), l[3]);
        };
        return finite_diff_rel_err(f, leaves);
    });

    return results;
}

}  // namespace iard
