#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace iard {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GraphError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // sized lazily, only when tracked
    bool tracked = false;
    bool consumed = false;  // set once backward has run through this node
    std::vector<std::shared_ptr<Node>> parents;
    // Accumulates this node's grad into its parents' grads.
    std::function<void(Node&)> backward_fn;
    std::uint64_t id = 0;

    std::size_t numel() const { return value.size(); }
    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

std::shared_ptr<Node> make_node(Shape shape, std::vector<double> value, bool tracked);

}  // namespace detail

// Dense array participating in a recorded computation. Copies are shallow:
// they alias the same graph node.
class GradTensor {
public:
    GradTensor() = default;

    static GradTensor leaf(Shape shape, std::vector<double> value, bool tracked = false);
    static GradTensor zeros(Shape shape, bool tracked = false);

    const Shape& shape() const { return node_->shape; }
    std::size_t size() const { return node_->value.size(); }
    const std::vector<double>& values() const { return node_->value; }
    std::vector<double>& values() { return node_->value; }
    bool tracked() const { return node_ && node_->tracked; }
    bool valid() const { return node_ != nullptr; }

    // Gradient accumulated by the last backward pass; zero-filled before that.
    const std::vector<double>& grad() const;
    void zero_grad();

    double scalar() const;

    std::shared_ptr<detail::Node> node() const { return node_; }
    explicit GradTensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

private:
    std::shared_ptr<detail::Node> node_;
};

// Reverse topological accumulation from `loss` (which must be scalar).
// The recorded graph is consumed: a second backward through it throws.
void backward(const GradTensor& loss);

}  // namespace iard
