#pragma once

#include "qig/tensor.hpp"

#include <memory>
#include <span>
#include <string_view>

namespace qig::ad {

class Tape;
using NodeId = std::int32_t;
constexpr NodeId kNoNode = -1;

/// Opaque primitive with a caller-supplied forward and value-mode VJP.
/// Used for the statevector circuit node, whose backward pass is the adjoint
/// sweep rather than a composition of tape primitives.
struct CustomOp {
    virtual ~CustomOp() = default;
    virtual std::string_view name() const = 0;
    virtual Tensor forward(std::span<const Tensor* const> inputs) = 0;
    /// Accumulates d(loss)/d(input_i) += VJP given d(loss)/d(output).
    virtual void vjp(std::span<const Tensor* const> inputs, const Tensor& out_value,
                     const Tensor& out_grad, std::span<Tensor* const> input_grads) = 0;
};

enum class Op : std::uint8_t {
    Leaf,       // trainable input
    Constant,   // non-differentiable input
    Add,        // a + b (same shape, or one side scalar)
    Sub,        // a - b (same shape, or one side scalar)
    Mul,        // a * b elementwise (same shape, or one side scalar)
    Div,        // a / b elementwise (same shape, or b scalar)
    Neg,        // -a
    Scale,      // a * c
    Offset,     // a + c
    Square,     // a^2
    Sqrt,       // sqrt(a); gradient at 0 defined as 0
    Atan2,      // atan2(a, b) elementwise
    Sum,        // sum of all elements -> scalar
    Dot,        // <a, b> -> scalar
    MatMul,     // [m,k] x [k,n] -> [m,n]
    Transpose,  // 2-D transpose
    Gather,     // out[i] = idx[i] < 0 ? 0 : a[idx[i]]
    ScatterAdd, // out[idx[i]] += a[i], out has aux_size elements
    Reshape,    // same data, new shape
    LeakyRelu,  // x > 0 ? x : slope * x; derivative at 0 is slope
    LeakyMask,  // derivative mask of LeakyRelu; constant w.r.t. further diff
    PosMask,    // x > 0 ? 1 : 0; constant w.r.t. further diff
    Relu,       // max(x, 0); derivative at 0 is 0
    MaxReduce,  // max element -> scalar; gradient routed to first argmax
    Custom,
};

struct Node {
    Op op = Op::Constant;
    NodeId a = kNoNode;
    NodeId b = kNoNode;
    Tensor value;
    double scalar = 0.0; // Scale/Offset constant, LeakyRelu slope
    std::shared_ptr<const std::vector<std::int64_t>> index_map; // Gather/ScatterAdd
    std::int64_t aux = 0; // ScatterAdd output size, MaxReduce argmax, Gather source size
    std::vector<int> shape_meta; // Reshape target, Gather output shape
    std::shared_ptr<CustomOp> custom;
    bool requires_grad = false;
};

/// Eagerly evaluated computation record. Creating a node computes its value
/// immediately; the record is kept for reverse sweeps. Single-threaded by
/// construction; independent tapes may run concurrently.
class Tape {
  public:
    NodeId leaf(Tensor v);
    NodeId constant(Tensor v);

    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId div(NodeId a, NodeId b);
    NodeId neg(NodeId a);
    NodeId scale(NodeId a, double c);
    NodeId offset(NodeId a, double c);
    NodeId square(NodeId a);
    NodeId sqrt(NodeId a);
    NodeId atan2(NodeId y, NodeId x);
    NodeId sum(NodeId a);
    NodeId dot(NodeId a, NodeId b);
    NodeId matmul(NodeId a, NodeId b);
    NodeId transpose(NodeId a);
    NodeId gather(NodeId a, std::shared_ptr<const std::vector<std::int64_t>> idx,
                  std::vector<int> out_shape);
    NodeId scatter_add(NodeId a, std::shared_ptr<const std::vector<std::int64_t>> idx,
                       std::vector<int> out_shape);
    NodeId reshape(NodeId a, std::vector<int> shape);
    NodeId leaky_relu(NodeId a, double slope);
    NodeId relu(NodeId a);
    NodeId pos_mask(NodeId a);
    NodeId max_reduce(NodeId a);
    NodeId custom(std::shared_ptr<CustomOp> op, std::span<const NodeId> inputs);

    const Tensor& value(NodeId id) const { return nodes_[check(id)].value; }
    const Node& node(NodeId id) const { return nodes_[check(id)]; }
    std::size_t size() const { return nodes_.size(); }

    /// Reverse-mode gradients of a real scalar output. Leaves not reachable
    /// from the output get zero gradients of their own shape.
    std::vector<Tensor> gradient(NodeId output, std::span<const NodeId> wrt);

    /// Builds nodes computing d(output)/d(wrt) on this tape, so downstream
    /// scalars of the result can be differentiated again. Only primitives on
    /// the output's ancestry need node-mode VJPs; hitting one without (Sqrt,
    /// Atan2, MaxReduce, Custom, ...) is an error.
    NodeId gradient_node(NodeId output, NodeId wrt);

    /// Recomputes every node value from the leaves in record order, returning
    /// the recomputed output value. Used to check record determinism.
    Tensor replay(NodeId output);

  private:
    NodeId push(Node n);
    NodeId binary_elementwise(Op op, NodeId a, NodeId b);
    std::size_t check(NodeId id) const {
        QIG_CHECK(id >= 0 && static_cast<std::size_t>(id) < nodes_.size(),
                  "node id ", id, " out of range");
        return static_cast<std::size_t>(id);
    }
    Tensor eval(const Node& n) const;
    // Value-mode VJP: accumulates input adjoints for node `id` given adjoint g.
    void backward_into(NodeId id, const Tensor& g, std::vector<Tensor>& adjoints,
                       std::vector<bool>& has_adjoint) const;
    // Node-mode VJP: emits tape nodes for the input adjoints of node `id`.
    void emit_backward(NodeId id, NodeId g, std::vector<NodeId>& adjoints);

    std::vector<Node> nodes_;
};

/// Sum of multiple node contributions in fixed order; kNoNode entries skipped.
NodeId accumulate_nodes(Tape& tape, NodeId acc, NodeId g);

} // namespace qig::ad
