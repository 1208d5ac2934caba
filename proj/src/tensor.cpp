#include "abt/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace abt {

std::int64_t shape_numel(const Shape& shape) {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

namespace {

std::shared_ptr<detail::TensorNode> new_node(Shape shape, std::vector<double> data,
                                             bool requires_grad) {
    for (int d : shape) {
        if (d <= 0) throw ShapeMismatch("non-positive dimension in " + shape_str(shape));
    }
    if (shape_numel(shape) != static_cast<std::int64_t>(data.size())) {
        throw ShapeMismatch("data length " + std::to_string(data.size()) +
                            " does not match shape " + shape_str(shape));
    }
    auto node = std::make_shared<detail::TensorNode>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    return node;
}

}  // namespace

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
    return full(shape, 0.0, requires_grad);
}

Tensor Tensor::full(const Shape& shape, double value, bool requires_grad) {
    std::vector<double> data(static_cast<std::size_t>(shape_numel(shape)), value);
    return Tensor(new_node(shape, std::move(data), requires_grad));
}

Tensor Tensor::from_data(const Shape& shape, std::vector<double> data, bool requires_grad) {
    return Tensor(new_node(shape, std::move(data), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return Tensor(new_node({1}, {value}, requires_grad));
}

double Tensor::item() const {
    if (numel() != 1) throw NotScalar("item() on tensor of shape " + shape_str(shape()));
    return node_->data[0];
}

Tensor Tensor::detach() const {
    return Tensor(new_node(node_->shape, node_->data, false));
}

Tensor Tensor::make_node(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                         std::function<void(detail::TensorNode&)> backward_fn) {
    bool requires_grad = false;
    for (const Tensor& p : parents) requires_grad = requires_grad || p.requires_grad();
    auto node = new_node(std::move(shape), std::move(data), requires_grad);
    if (requires_grad) {
        node->parents.reserve(parents.size());
        for (const Tensor& p : parents) node->parents.push_back(p.node());
        node->backward_fn = std::move(backward_fn);
    }
    return Tensor(node);
}

void Tensor::backward() {
    if (!node_) throw NotScalar("backward() on undefined tensor");
    if (numel() != 1) {
        throw NotScalar("backward() requires a scalar loss, got shape " + shape_str(shape()));
    }
    if (!node_->requires_grad) return;  // nothing tracked, nothing to do

    // Iterative post-order DFS: children are pushed before a node is emitted,
    // so `order` ends child-first and reversing it yields a valid topological
    // sweep (every consumer runs before its producers).
    std::vector<detail::TensorNode*> order;
    std::unordered_set<detail::TensorNode*> visited;
    struct Frame {
        detail::TensorNode* node;
        std::size_t next_parent;
    };
    std::vector<Frame> stack;
    stack.push_back({node_.get(), 0});
    visited.insert(node_.get());
    while (!stack.empty()) {
        Frame& top = stack.back();
        if (top.next_parent < top.node->parents.size()) {
            detail::TensorNode* parent = top.node->parents[top.next_parent++].get();
            if (parent->requires_grad && !visited.count(parent)) {
                visited.insert(parent);
                stack.push_back({parent, 0});
            }
        } else {
            order.push_back(top.node);
            stack.pop_back();
        }
    }

    for (detail::TensorNode* node : order) {
        if (!node->is_leaf() && node->consumed) {
            throw GraphConsumed("backward over a graph that was already swept");
        }
    }

    node_->ensure_grad();
    node_->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::TensorNode* node = *it;
        if (node->is_leaf()) continue;
        for (auto& parent : node->parents) {
            if (parent->requires_grad) parent->ensure_grad();
        }
        node->backward_fn(*node);
        node->consumed = true;
    }
}

}  // namespace abt
