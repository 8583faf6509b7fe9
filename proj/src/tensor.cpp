#include "iard/tensor.hpp"

#include <atomic>
#include <sstream>
#include <unordered_set>

namespace iard {

std::size_t numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

namespace detail {

std::shared_ptr<Node> make_node(Shape shape, std::vector<double> value, bool tracked) {
    static std::atomic<std::uint64_t> next_id{1};
    if (value.size() != numel(shape))
        throw DimensionError("tensor value length " + std::to_string(value.size()) +
                             " does not match shape " + shape_str(shape));
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    n->tracked = tracked;
    n->id = next_id.fetch_add(1, std::memory_order_relaxed);
    return n;
}

}  // namespace detail

GradTensor GradTensor::leaf(Shape shape, std::vector<double> value, bool tracked) {
    return GradTensor(detail::make_node(std::move(shape), std::move(value), tracked));
}

GradTensor GradTensor::zeros(Shape shape, bool tracked) {
    std::vector<double> v(numel(shape), 0.0);
    return GradTensor(detail::make_node(std::move(shape), std::move(v), tracked));
}

const std::vector<double>& GradTensor::grad() const {
    node_->ensure_grad();
    return node_->grad;
}

void GradTensor::zero_grad() {
    node_->grad.assign(node_->value.size(), 0.0);
}

double GradTensor::scalar() const {
    if (size() != 1) throw DimensionError("scalar() on tensor of shape " + shape_str(shape()));
    return node_->value[0];
}

void backward(const GradTensor& loss) {
    auto root = loss.node();
    if (!root) throw GraphError("backward on empty tensor");
    if (root->numel() != 1) throw GraphError("backward requires a scalar loss");
    if (root->consumed) throw GraphError("backward called twice on the same recorded graph");

    // Post-order DFS, iterative to survive deep LSTM unrolls.
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> seen;
    std::vector<std::pair<detail::Node*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [n, idx] = stack.back();
        if (idx < n->parents.size()) {
            detail::Node* p = n->parents[idx].get();
            ++idx;
            if (p->backward_fn && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* n = *it;
        if (n->consumed) throw GraphError("graph node already consumed by a previous backward");
        if (n->backward_fn) {
            for (auto& p : n->parents) p->ensure_grad();
            n->backward_fn(*n);
            n->consumed = true;
            n->backward_fn = nullptr;  // release captured parents
        }
    }
}

}  // namespace iard
