#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "abt/errors.hpp"

namespace abt {

using Shape = std::vector<int>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

// One node of the recorded computation graph. Tensor is a shared handle to
// this; ops build fresh nodes whose backward closures hold the parent handles,
// so the graph is a DAG of shared_ptr with no cycles.
struct TensorNode {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;  // allocated lazily, length == data.size()

    std::vector<std::shared_ptr<TensorNode>> parents;
    // Reads this node's grad and accumulates into the parents' grad arrays.
    std::function<void(TensorNode&)> backward_fn;
    bool consumed = false;  // set once this node's backward has run

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
    bool is_leaf() const { return !backward_fn; }
    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
};

}  // namespace detail

// N-dimensional double tensor with reverse-mode autodiff. Value-semantic
// handle: copies share the underlying node. Forward ops never mutate their
// inputs; the only sanctioned mutation is an optimizer writing into a leaf
// parameter through mutable_data().
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(const Shape& shape, bool requires_grad = false);
    static Tensor full(const Shape& shape, double value, bool requires_grad = false);
    static Tensor from_data(const Shape& shape, std::vector<double> data,
                            bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::int64_t numel() const { return node_->numel(); }
    bool requires_grad() const { return node_->requires_grad; }

    std::span<const double> data() const { return node_->data; }
    // Leaf parameters only; used by the optimizer and by checkpoint loading.
    std::span<double> mutable_data() { return node_->data; }

    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const double> grad() const { return node_->grad; }
    void zero_grad() {
        if (node_->requires_grad) node_->grad.assign(node_->data.size(), 0.0);
    }

    // Scalar readout. Throws NotScalar unless numel() == 1.
    double item() const;

    // Copy of the data with no graph attached.
    Tensor detach() const;

    // Reverse-mode sweep from a scalar loss. Each recorded node may be swept
    // exactly once; a second backward that reaches an already-swept node
    // throws GraphConsumed.
    void backward();

    // --- op-internal API ---
    static Tensor make_node(Shape shape, std::vector<double> data,
                            std::vector<Tensor> parents,
                            std::function<void(detail::TensorNode&)> backward_fn);
    const std::shared_ptr<detail::TensorNode>& node() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}
    std::shared_ptr<detail::TensorNode> node_;
};

}  // namespace abt
