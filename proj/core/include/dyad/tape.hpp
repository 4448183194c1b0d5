#pragma once

#include <functional>
#include <vector>

#include "dyad/tensor.hpp"

namespace dyad {

class Tape;

// Handle to a node on a tape. Plain value, cheap to copy.
struct Value {
    Tape* tape = nullptr;
    int id = -1;
    bool valid() const { return tape != nullptr && id >= 0; }
};

// Recorded computation tape for reverse-mode differentiation.
// Nodes are appended in topological order; backward() runs one reverse
// sweep, accumulating gradients at fan-in by summation in node order.
// Single-threaded per tape.
class Tape {
public:
    struct Node {
        Tensor value;
        std::vector<int> parents;
        bool requires_grad = false;
        // Reads this node's gradient and accumulates into its parents'.
        std::function<void(Tape&, int self)> backward;
    };

    Value leaf(Tensor value, bool requires_grad = false);
    Value constant(Tensor value) { return leaf(std::move(value), false); }

    const Tensor& value(Value v) const { return nodes_[v.id].value; }
    bool requires_grad(Value v) const { return nodes_[v.id].requires_grad; }

    // Gradient of the last backward() target w.r.t. v. Zero tensor if the
    // node was unreachable from the loss.
    const Tensor& grad(Value v);

    // Reverse sweep from a scalar loss node.
    void backward(Value loss);

    size_t size() const { return nodes_.size(); }
    void reserve(size_t n) { nodes_.reserve(n); grads_.reserve(n); }

    // Internal (used by op implementations).
    Value record(Tensor value, std::vector<int> parents,
                 std::function<void(Tape&, int)> backward);
    void accumulate(int id, const Tensor& g);
    void accumulate_scaled(int id, const Tensor& g, double scale);
    const Tensor& node_value(int id) const { return nodes_[id].value; }
    const Tensor& node_grad(int id) const { return grads_[id]; }
    bool has_grad(int id) const { return !grads_[id].data.empty(); }

private:
    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;  // parallel to nodes_, empty until touched
};

// ---- forward operators (each records its backward rule) ----

Value matmul(Value a, Value b);
Value transpose(Value x);  // rank-2 only

Value add(Value a, Value b);  // b may be a trailing-axis broadcast (bias)
Value sub(Value a, Value b);
Value mul(Value a, Value b);

Value tanh_op(Value x);
Value sigmoid(Value x);
Value relu(Value x);
Value exp_op(Value x);
Value log_op(Value x);  // all entries must be > 0

Value softmax(Value x, int axis);
Value concat(const std::vector<Value>& parts, int axis);
Value slice_rows(Value x, int start, int count);
Value mean_pool(Value x, int axis);

Value sum(Value x);            // -> scalar [1]
Value scale(Value x, double c);

}  // namespace dyad
