#include "qig/tape.hpp"

#include <cmath>

namespace qig::ad {

namespace {

bool broadcast_compatible(const Tensor& a, const Tensor& b) {
    return a.same_shape(b) || a.is_scalar() || b.is_scalar();
}

// Reduces a full-size contribution to the input's shape (scalar inputs
// broadcast on the forward pass, so their adjoint is the sum).
Tensor fit_to(const Tensor& contribution, const std::vector<int>& target_shape) {
    const auto target_numel = Tensor::numel_of(target_shape);
    if (contribution.numel() == target_numel) {
        Tensor out = contribution;
        out.shape = target_shape;
        return out;
    }
    QIG_CHECK(target_numel == 1, "cannot reduce adjoint ", shape_str(contribution.shape),
              " to ", shape_str(target_shape));
    double s = 0.0;
    for (double v : contribution.data) {
        s += v;
    }
    Tensor out = Tensor::zeros(target_shape);
    out.data[0] = s;
    return out;
}

} // namespace

NodeId Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::leaf(Tensor v) {
    Node n;
    n.op = Op::Leaf;
    n.value = std::move(v);
    n.requires_grad = true;
    return push(std::move(n));
}

NodeId Tape::constant(Tensor v) {
    Node n;
    n.op = Op::Constant;
    n.value = std::move(v);
    n.requires_grad = false;
    return push(std::move(n));
}

Tensor Tape::eval(const Node& n) const {
    const auto va = [&]() -> const Tensor& { return nodes_[check(n.a)].value; };
    const auto vb = [&]() -> const Tensor& { return nodes_[check(n.b)].value; };
    switch (n.op) {
    case Op::Leaf:
    case Op::Constant:
        return n.value;
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div: {
        const Tensor& a = va();
        const Tensor& b = vb();
        const Tensor& big = a.numel() >= b.numel() ? a : b;
        Tensor out = Tensor::zeros(big.shape);
        const std::size_t m = out.data.size();
        for (std::size_t i = 0; i < m; ++i) {
            const double x = a.is_scalar() ? a.data[0] : a.data[i];
            const double y = b.is_scalar() ? b.data[0] : b.data[i];
            switch (n.op) {
            case Op::Add: out.data[i] = x + y; break;
            case Op::Sub: out.data[i] = x - y; break;
            case Op::Mul: out.data[i] = x * y; break;
            default: out.data[i] = x / y; break;
            }
        }
        return out;
    }
    case Op::Neg: {
        Tensor out = va();
        for (double& v : out.data) {
            v = -v;
        }
        return out;
    }
    case Op::Scale: {
        Tensor out = va();
        for (double& v : out.data) {
            v *= n.scalar;
        }
        return out;
    }
    case Op::Offset: {
        Tensor out = va();
        for (double& v : out.data) {
            v += n.scalar;
        }
        return out;
    }
    case Op::Square: {
        Tensor out = va();
        for (double& v : out.data) {
            v *= v;
        }
        return out;
    }
    case Op::Sqrt: {
        Tensor out = va();
        for (double& v : out.data) {
            v = std::sqrt(v);
        }
        return out;
    }
    case Op::Atan2: {
        const Tensor& y = va();
        const Tensor& x = vb();
        Tensor out = Tensor::zeros(y.shape);
        for (std::size_t i = 0; i < out.data.size(); ++i) {
            out.data[i] = std::atan2(y.data[i], x.data[i]);
        }
        return out;
    }
    case Op::Sum: {
        double s = 0.0;
        for (double v : va().data) {
            s += v;
        }
        return Tensor::scalar(s);
    }
    case Op::Dot: {
        const Tensor& a = va();
        const Tensor& b = vb();
        double s = 0.0;
        for (std::size_t i = 0; i < a.data.size(); ++i) {
            s += a.data[i] * b.data[i];
        }
        return Tensor::scalar(s);
    }
    case Op::MatMul: {
        const Tensor& a = va();
        const Tensor& b = vb();
        const int m = a.shape[0];
        const int k = a.shape[1];
        const int p = b.shape[1];
        Tensor out = Tensor::zeros({m, p});
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < k; ++j) {
                const double aij = a.data[static_cast<std::size_t>(i) * k + j];
                if (aij == 0.0) {
                    continue;
                }
                const double* brow = &b.data[static_cast<std::size_t>(j) * p];
                double* orow = &out.data[static_cast<std::size_t>(i) * p];
                for (int c = 0; c < p; ++c) {
                    orow[c] += aij * brow[c];
                }
            }
        }
        return out;
    }
    case Op::Transpose: {
        const Tensor& a = va();
        const int r = a.shape[0];
        const int c = a.shape[1];
        Tensor out = Tensor::zeros({c, r});
        for (int i = 0; i < r; ++i) {
            for (int j = 0; j < c; ++j) {
                out.data[static_cast<std::size_t>(j) * r + i] =
                    a.data[static_cast<std::size_t>(i) * c + j];
            }
        }
        return out;
    }
    case Op::Gather: {
        const Tensor& a = va();
        const auto& idx = *n.index_map;
        Tensor out = Tensor::zeros(n.shape_meta);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            out.data[i] = idx[i] < 0 ? 0.0 : a.data[static_cast<std::size_t>(idx[i])];
        }
        return out;
    }
    case Op::ScatterAdd: {
        const Tensor& a = va();
        const auto& idx = *n.index_map;
        Tensor out = Tensor::zeros(n.shape_meta);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            if (idx[i] >= 0) {
                out.data[static_cast<std::size_t>(idx[i])] += a.data[i];
            }
        }
        return out;
    }
    case Op::Reshape: {
        Tensor out = va();
        out.shape = n.shape_meta;
        return out;
    }
    case Op::LeakyRelu: {
        Tensor out = va();
        for (double& v : out.data) {
            if (v <= 0.0) {
                v *= n.scalar;
            }
        }
        return out;
    }
    case Op::LeakyMask: {
        Tensor out = va();
        for (double& v : out.data) {
            v = v > 0.0 ? 1.0 : n.scalar;
        }
        return out;
    }
    case Op::PosMask: {
        Tensor out = va();
        for (double& v : out.data) {
            v = v > 0.0 ? 1.0 : 0.0;
        }
        return out;
    }
    case Op::Relu: {
        Tensor out = va();
        for (double& v : out.data) {
            if (v <= 0.0) {
                v = 0.0;
            }
        }
        return out;
    }
    case Op::MaxReduce: {
        const Tensor& a = va();
        std::size_t arg = 0;
        double best = a.data[0];
        for (std::size_t i = 1; i < a.data.size(); ++i) {
            if (a.data[i] > best) {
                best = a.data[i];
                arg = i;
            }
        }
        const_cast<Node&>(n).aux = static_cast<std::int64_t>(arg);
        return Tensor::scalar(best);
    }
    case Op::Custom: {
        std::vector<const Tensor*> ins;
        if (n.a != kNoNode) {
            ins.push_back(&nodes_[check(n.a)].value);
        }
        if (n.b != kNoNode) {
            ins.push_back(&nodes_[check(n.b)].value);
        }
        return n.custom->forward(std::span<const Tensor* const>(ins));
    }
    }
    fail("unhandled op in eval");
}

NodeId Tape::binary_elementwise(Op op, NodeId a, NodeId b) {
    const Tensor& ta = nodes_[check(a)].value;
    const Tensor& tb = nodes_[check(b)].value;
    QIG_CHECK(broadcast_compatible(ta, tb), "shape mismatch in elementwise op: ",
              shape_str(ta.shape), " vs ", shape_str(tb.shape));
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
    n.value = eval(n);
    return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) { return binary_elementwise(Op::Add, a, b); }
NodeId Tape::sub(NodeId a, NodeId b) { return binary_elementwise(Op::Sub, a, b); }
NodeId Tape::mul(NodeId a, NodeId b) { return binary_elementwise(Op::Mul, a, b); }

NodeId Tape::div(NodeId a, NodeId b) {
    const Tensor& tb = nodes_[check(b)].value;
    const Tensor& ta = nodes_[check(a)].value;
    QIG_CHECK(tb.is_scalar() || tb.same_shape(ta), "div shape mismatch: ",
              shape_str(ta.shape), " vs ", shape_str(tb.shape));
    return binary_elementwise(Op::Div, a, b);
}

NodeId Tape::neg(NodeId a) {
    Node n;
    n.op = Op::Neg;
    n.a = a;
    n.requires_grad = nodes_[check(a)].requires_grad;
    n.value = eval(n);
    return push(std::move(n));
}

NodeId Tape::scale(NodeId a, double c) {
    Node n;
    n.op = Op::Scale;
    n.a = a;
    n.scalar = c;
    n.requires_grad = nodes_[check(a)].requires_grad;
    n.value = eval(n);
    return push(std::move(n));
}

NodeId Tape::offset(NodeId a, double c) {
    Node n;
    n.op = Op::Offset;
    n.a = a;
    n.scalar = c;
    n.requires_grad = nodes_[check(a)].requires_grad;
    n.value = eval(n);
    return push(std::move(n));
}

NodeId Tape::square(NodeId a) {
    Node n;
    n.op = Op::Square;
    n.a = a;
    n.requires_grad = nodes_[check(a)].requires_grad;
    n.value = eval(n);
    return push(std::move(n));
}

NodeId Tape::sqrt(NodeId a) {
    Node n;
    n.op = Op::Sqrt;
    n.a = a;
    n.requires_grad = nodes_[check(a)].requires_grad;
    n.value = eval(n);
    return push(std::move(n));
}

NodeId Tape::atan2(NodeId y, NodeId x) {
    const Tensor& ty = nodes_[check(y)].value;
    const Tensor& tx = nodes_[check(x)].value;
    QIG_CHECK(ty.same_shape(tx), "atan2 shape mismatch: ", shape_str(ty.shape), " vs ",
              shape_str(tx.shape));
    Node n;
    n.op = Op::Atan2;
    n.a = y;
    n.b = x;
    n.requires_grad = nodes_[y].requires_grad || nodes_[x].requires_grad;
    n.value = eval(n);
    return push(std::move(n));
}

NodeId Tape::sum(NodeId a) {
    Node n;
    n.op = Op::Sum;
    n.a = a;
    n.requires_grad = nodes_[check(a)].requires_grad;
    n.value = eval(n);
    return push(std::move(n));
}

NodeId Tape::dot(NodeId a, NodeId b) {
    const Tensor& ta = nodes_[check(a)].value;
    const Tensor& tb = nodes_[check(b)].value;
    QIG_CHECK(ta.numel() == tb.numel(), "dot length mismatch: ", ta.numel(), " vs ",
              tb.numel());
    Node n;
    n.op = Op::Dot;
    n.a = a;
    n.b = b;
    n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
    n.value = eval(n);
    return push(std::move(n));
}

NodeId Tape::matmul(NodeId a, NodeId b) {
    const Tensor& ta = nodes_[check(a)].value;
    const Tensor& tb = nodes_[check(b)].value;
    QIG_CHECK(ta.shape.size() == 2 && tb.shape.size() == 2, "matmul needs 2-D operands, got ",
              shape_str(ta.shape), " and ", shape_str(tb.shape));
    QIG_CHECK(ta.shape[1] == tb.shape[0], "matmul inner dimension mismatch: ",
              shape_str(ta.shape), " x ", shape_str(tb.shape));
    Node n;
    n.op = Op::MatMul;
    n.a = a;
    n.b = b;
    n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
    n.value = eval(n);
    return push(std::move(n));
}

NodeId Tape::transpose(NodeId a) {
    const Tensor& ta = nodes_[check(a)].value;
    QIG_CHECK(ta.shape.size() == 2, "transpose needs a 2-D operand, got ",
              shape_str(ta.shape));
    Node n;
    n.op = Op::Transpose;
    n.a = a;
    n.requires_grad = nodes_[a].requires_grad;
    n.value = eval(n);
    return push(std::move(n));
}

NodeId Tape::gather(NodeId a, std::shared_ptr<const std::vector<std::int64_t>> idx,
                    std::vector<int> out_shape) {
    QIG_CHECK(static_cast<std::int64_t>(idx->size()) == Tensor::numel_of(out_shape),
              "gather index count ", idx->size(), " does not match output shape ",
              shape_str(out_shape));
    const Tensor& ta = nodes_[check(a)].value;
    for (const std::int64_t i : *idx) {
        QIG_CHECK(i < ta.numel(), "gather index ", i, " out of range ", ta.numel());
    }
    Node n;
    n.op = Op::Gather;
    n.a = a;
    n.index_map = std::move(idx);
    n.shape_meta = std::move(out_shape);
    n.aux = ta.numel();
    n.requires_grad = nodes_[a].requires_grad;
    n.value = eval(n);
    return push(std::move(n));
}

NodeId Tape::scatter_add(NodeId a, std::shared_ptr<const std::vector<std::int64_t>> idx,
                         std::vector<int> out_shape) {
    const Tensor& ta = nodes_[check(a)].value;
    QIG_CHECK(static_cast<std::int64_t>(idx->size()) == ta.numel(),
              "scatter index count ", idx->size(), " does not match input ", ta.numel());
    const auto out_numel = Tensor::numel_of(out_shape);
    for (const std::int64_t i : *idx) {
        QIG_CHECK(i < out_numel, "scatter index ", i, " out of range ", out_numel);
    }
    Node n;
    n.op = Op::ScatterAdd;
    n.a = a;
    n.index_map = std::move(idx);
    n.shape_meta = std::move(out_shape);
    n.requires_grad = nodes_[a].requires_grad;
    n.value = eval(n);
    return push(std::move(n));
}

NodeId Tape::reshape(NodeId a, std::vector<int> shape) {
    const Tensor& ta = nodes_[check(a)].value;
    QIG_CHECK(Tensor::numel_of(shape) == ta.numel(), "reshape to ", shape_str(shape),
              " from ", ta.numel(), " elements");
    Node n;
    n.op = Op::Reshape;
    n.a = a;
    n.shape_meta = std::move(shape);
    n.requires_grad = nodes_[a].requires_grad;
    n.value = eval(n);
    return push(std::move(n));
}

NodeId Tape::leaky_relu(NodeId a, double slope) {
    Node n;
    n.op = Op::LeakyRelu;
    n.a = a;
    n.scalar = slope;
    n.requires_grad = nodes_[check(a)].requires_grad;
    n.value = eval(n);
    return push(std::move(n));
}

NodeId Tape::relu(NodeId a) {
    Node n;
    n.op = Op::Relu;
    n.a = a;
    n.requires_grad = nodes_[check(a)].requires_grad;
    n.value = eval(n);
    return push(std::move(n));
}

NodeId Tape::pos_mask(NodeId a) {
    Node n;
    n.op = Op::PosMask;
    n.a = a;
    n.requires_grad = false; // piecewise constant
    n.value = eval(n);
    return push(std::move(n));
}

NodeId Tape::max_reduce(NodeId a) {
    Node n;
    n.op = Op::MaxReduce;
    n.a = a;
    n.requires_grad = nodes_[check(a)].requires_grad;
    n.value = eval(n);
    return push(std::move(n));
}

NodeId Tape::custom(std::shared_ptr<CustomOp> op, std::span<const NodeId> inputs) {
    QIG_CHECK(inputs.size() >= 1 && inputs.size() <= 2, "custom op ", op->name(),
              " supports 1 or 2 inputs, got ", inputs.size());
    Node n;
    n.op = Op::Custom;
    n.a = inputs[0];
    n.b = inputs.size() > 1 ? inputs[1] : kNoNode;
    n.custom = std::move(op);
    n.requires_grad = nodes_[check(n.a)].requires_grad ||
                      (n.b != kNoNode && nodes_[check(n.b)].requires_grad);
    n.value = eval(n);
    return push(std::move(n));
}

void Tape::backward_into(NodeId id, const Tensor& g, std::vector<Tensor>& adjoints,
                         std::vector<bool>& has_adjoint) const {
    const Node& n = nodes_[check(id)];
    const auto deposit = [&](NodeId target, Tensor contribution) {
        if (target == kNoNode || !nodes_[target].requires_grad) {
            return;
        }
        Tensor fitted = fit_to(std::move(contribution), nodes_[target].value.shape);
        if (!has_adjoint[static_cast<std::size_t>(target)]) {
            adjoints[static_cast<std::size_t>(target)] = std::move(fitted);
            has_adjoint[static_cast<std::size_t>(target)] = true;
        } else {
            adjoints[static_cast<std::size_t>(target)].accumulate(fitted);
        }
    };
    const auto va = [&]() -> const Tensor& { return nodes_[n.a].value; };
    const auto vb = [&]() -> const Tensor& { return nodes_[n.b].value; };

    switch (n.op) {
    case Op::Leaf:
    case Op::Constant:
    case Op::LeakyMask:
    case Op::PosMask:
        return;
    case Op::Add:
        deposit(n.a, g);
        deposit(n.b, g);
        return;
    case Op::Sub: {
        deposit(n.a, g);
        Tensor neg_g = g;
        for (double& v : neg_g.data) {
            v = -v;
        }
        deposit(n.b, std::move(neg_g));
        return;
    }
    case Op::Mul: {
        const Tensor& a = va();
        const Tensor& b = vb();
        Tensor ga = Tensor::zeros(g.shape);
        Tensor gb = Tensor::zeros(g.shape);
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            const double x = a.is_scalar() ? a.data[0] : a.data[i];
            const double y = b.is_scalar() ? b.data[0] : b.data[i];
            ga.data[i] = g.data[i] * y;
            gb.data[i] = g.data[i] * x;
        }
        deposit(n.a, std::move(ga));
        deposit(n.b, std::move(gb));
        return;
    }
    case Op::Div: {
        const Tensor& a = va();
        const Tensor& b = vb();
        Tensor ga = Tensor::zeros(g.shape);
        Tensor gb = Tensor::zeros(g.shape);
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            const double x = a.is_scalar() ? a.data[0] : a.data[i];
            const double y = b.is_scalar() ? b.data[0] : b.data[i];
            ga.data[i] = g.data[i] / y;
            gb.data[i] = -g.data[i] * x / (y * y);
        }
        deposit(n.a, std::move(ga));
        deposit(n.b, std::move(gb));
        return;
    }
    case Op::Neg: {
        Tensor ga = g;
        for (double& v : ga.data) {
            v = -v;
        }
        deposit(n.a, std::move(ga));
        return;
    }
    case Op::Scale: {
        Tensor ga = g;
        for (double& v : ga.data) {
            v *= n.scalar;
        }
        deposit(n.a, std::move(ga));
        return;
    }
    case Op::Offset:
        deposit(n.a, g);
        return;
    case Op::Square: {
        const Tensor& a = va();
        Tensor ga = Tensor::zeros(g.shape);
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            ga.data[i] = 2.0 * a.data[i] * g.data[i];
        }
        deposit(n.a, std::move(ga));
        return;
    }
    case Op::Sqrt: {
        // d sqrt / dx at 0 is pinned to 0 so masked-off decode branches and
        // the zero-gradient penalty case stay finite.
        Tensor ga = Tensor::zeros(g.shape);
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            const double r = n.value.data[i];
            ga.data[i] = r > 0.0 ? 0.5 * g.data[i] / r : 0.0;
        }
        deposit(n.a, std::move(ga));
        return;
    }
    case Op::Atan2: {
        const Tensor& y = va();
        const Tensor& x = vb();
        Tensor gy = Tensor::zeros(g.shape);
        Tensor gx = Tensor::zeros(g.shape);
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            const double denom = x.data[i] * x.data[i] + y.data[i] * y.data[i];
            if (denom > 0.0) {
                gy.data[i] = g.data[i] * x.data[i] / denom;
                gx.data[i] = -g.data[i] * y.data[i] / denom;
            }
        }
        deposit(n.a, std::move(gy));
        deposit(n.b, std::move(gx));
        return;
    }
    case Op::Sum: {
        Tensor ga = Tensor::full(va().shape, g.data[0]);
        deposit(n.a, std::move(ga));
        return;
    }
    case Op::Dot: {
        const double s = g.data[0];
        Tensor ga = vb();
        Tensor gb = va();
        for (double& v : ga.data) {
            v *= s;
        }
        for (double& v : gb.data) {
            v *= s;
        }
        ga.shape = va().shape;
        gb.shape = vb().shape;
        deposit(n.a, std::move(ga));
        deposit(n.b, std::move(gb));
        return;
    }
    case Op::MatMul: {
        const Tensor& a = va();
        const Tensor& b = vb();
        const int m = a.shape[0];
        const int k = a.shape[1];
        const int p = b.shape[1];
        if (nodes_[n.a].requires_grad) {
            Tensor ga = Tensor::zeros({m, k});
            for (int i = 0; i < m; ++i) {
                for (int c = 0; c < p; ++c) {
                    const double gic = g.data[static_cast<std::size_t>(i) * p + c];
                    if (gic == 0.0) {
                        continue;
                    }
                    for (int j = 0; j < k; ++j) {
                        ga.data[static_cast<std::size_t>(i) * k + j] +=
                            gic * b.data[static_cast<std::size_t>(j) * p + c];
                    }
                }
            }
            deposit(n.a, std::move(ga));
        }
        if (nodes_[n.b].requires_grad) {
            Tensor gb = Tensor::zeros({k, p});
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < k; ++j) {
                    const double aij = a.data[static_cast<std::size_t>(i) * k + j];
                    if (aij == 0.0) {
                        continue;
                    }
                    for (int c = 0; c < p; ++c) {
                        gb.data[static_cast<std::size_t>(j) * p + c] +=
                            aij * g.data[static_cast<std::size_t>(i) * p + c];
                    }
                }
            }
            deposit(n.b, std::move(gb));
        }
        return;
    }
    case Op::Transpose: {
        const int r = g.shape[0];
        const int c = g.shape[1];
        Tensor ga = Tensor::zeros({c, r});
        for (int i = 0; i < r; ++i) {
            for (int j = 0; j < c; ++j) {
                ga.data[static_cast<std::size_t>(j) * r + i] =
                    g.data[static_cast<std::size_t>(i) * c + j];
            }
        }
        deposit(n.a, std::move(ga));
        return;
    }
    case Op::Gather: {
        const auto& idx = *n.index_map;
        Tensor ga = Tensor::zeros(va().shape);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            if (idx[i] >= 0) {
                ga.data[static_cast<std::size_t>(idx[i])] += g.data[i];
            }
        }
        deposit(n.a, std::move(ga));
        return;
    }
    case Op::ScatterAdd: {
        const auto& idx = *n.index_map;
        Tensor ga = Tensor::zeros(va().shape);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            if (idx[i] >= 0) {
                ga.data[i] = g.data[static_cast<std::size_t>(idx[i])];
            }
        }
        deposit(n.a, std::move(ga));
        return;
    }
    case Op::Reshape: {
        Tensor ga = g;
        ga.shape = va().shape;
        deposit(n.a, std::move(ga));
        return;
    }
    case Op::LeakyRelu: {
        const Tensor& a = va();
        Tensor ga = Tensor::zeros(g.shape);
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            ga.data[i] = g.data[i] * (a.data[i] > 0.0 ? 1.0 : n.scalar);
        }
        deposit(n.a, std::move(ga));
        return;
    }
    case Op::Relu: {
        const Tensor& a = va();
        Tensor ga = Tensor::zeros(g.shape);
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            ga.data[i] = a.data[i] > 0.0 ? g.data[i] : 0.0;
        }
        deposit(n.a, std::move(ga));
        return;
    }
    case Op::MaxReduce: {
        Tensor ga = Tensor::zeros(va().shape);
        ga.data[static_cast<std::size_t>(n.aux)] = g.data[0];
        deposit(n.a, std::move(ga));
        return;
    }
    case Op::Custom: {
        std::vector<const Tensor*> ins;
        std::vector<Tensor> grads;
        std::vector<NodeId> targets;
        for (NodeId in : {n.a, n.b}) {
            if (in != kNoNode) {
                ins.push_back(&nodes_[in].value);
                grads.push_back(Tensor::zeros(nodes_[in].value.shape));
                targets.push_back(in);
            }
        }
        std::vector<Tensor*> grad_ptrs;
        for (auto& t : grads) {
            grad_ptrs.push_back(&t);
        }
        n.custom->vjp(std::span<const Tensor* const>(ins), n.value, g,
                      std::span<Tensor* const>(grad_ptrs));
        for (std::size_t i = 0; i < targets.size(); ++i) {
            deposit(targets[i], std::move(grads[i]));
        }
        return;
    }
    }
}

std::vector<Tensor> Tape::gradient(NodeId output, std::span<const NodeId> wrt) {
    const Node& out = nodes_[check(output)];
    QIG_CHECK(out.value.is_scalar(), "gradient requires a scalar output, got ",
              shape_str(out.value.shape));
    std::vector<Tensor> adjoints(nodes_.size());
    std::vector<bool> has_adjoint(nodes_.size(), false);
    adjoints[static_cast<std::size_t>(output)] = Tensor::scalar(1.0);
    has_adjoint[static_cast<std::size_t>(output)] = true;
    for (NodeId id = output; id >= 0; --id) {
        if (!has_adjoint[static_cast<std::size_t>(id)] ||
            !nodes_[static_cast<std::size_t>(id)].requires_grad) {
            continue;
        }
        backward_into(id, adjoints[static_cast<std::size_t>(id)], adjoints, has_adjoint);
    }
    std::vector<Tensor> result;
    result.reserve(wrt.size());
    for (NodeId id : wrt) {
        check(id);
        if (has_adjoint[static_cast<std::size_t>(id)]) {
            result.push_back(adjoints[static_cast<std::size_t>(id)]);
        } else {
            result.push_back(Tensor::zeros(nodes_[static_cast<std::size_t>(id)].value.shape));
        }
    }
    return result;
}

void Tape::emit_backward(NodeId id, NodeId g, std::vector<NodeId>& adjoints) {
    const auto deposit = [&](NodeId target, NodeId contribution) {
        if (target == kNoNode || !nodes_[target].requires_grad) {
            return;
        }
        // Scalar inputs that broadcast on the forward pass take the summed adjoint.
        if (nodes_[target].value.is_scalar() && !value(contribution).is_scalar()) {
            contribution = sum(contribution);
        }
        auto& slot = adjoints[static_cast<std::size_t>(target)];
        slot = slot == kNoNode ? contribution : add(slot, contribution);
    };
    // Snapshot: ops emitted below must not alias the node being processed.
    const Node n = nodes_[check(id)];
    switch (n.op) {
    case Op::Leaf:
    case Op::Constant:
    case Op::LeakyMask:
    case Op::PosMask:
        return;
    case Op::Add:
        deposit(n.a, g);
        deposit(n.b, g);
        return;
    case Op::Sub:
        deposit(n.a, g);
        deposit(n.b, neg(g));
        return;
    case Op::Mul:
        deposit(n.a, mul(g, n.b));
        deposit(n.b, mul(g, n.a));
        return;
    case Op::Neg:
        deposit(n.a, neg(g));
        return;
    case Op::Scale:
        deposit(n.a, scale(g, n.scalar));
        return;
    case Op::Offset:
        deposit(n.a, g);
        return;
    case Op::Square:
        deposit(n.a, mul(g, scale(n.a, 2.0)));
        return;
    case Op::Sum: {
        NodeId ones = constant(Tensor::full(nodes_[n.a].value.shape, 1.0));
        deposit(n.a, mul(g, ones));
        return;
    }
    case Op::Dot:
        deposit(n.a, reshape(mul(g, n.b), nodes_[n.a].value.shape));
        deposit(n.b, reshape(mul(g, n.a), nodes_[n.b].value.shape));
        return;
    case Op::MatMul:
        deposit(n.a, matmul(g, transpose(n.b)));
        deposit(n.b, matmul(transpose(n.a), g));
        return;
    case Op::Transpose:
        deposit(n.a, transpose(g));
        return;
    case Op::Gather: {
        deposit(n.a, scatter_add(g, n.index_map, nodes_[n.a].value.shape));
        return;
    }
    case Op::ScatterAdd: {
        deposit(n.a, gather(g, n.index_map, nodes_[n.a].value.shape));
        return;
    }
    case Op::Reshape:
        deposit(n.a, reshape(g, nodes_[n.a].value.shape));
        return;
    case Op::LeakyRelu: {
        Node mask;
        mask.op = Op::LeakyMask;
        mask.a = n.a;
        mask.scalar = n.scalar;
        mask.requires_grad = false;
        mask.value = eval(mask);
        const NodeId mask_id = push(std::move(mask));
        deposit(n.a, mul(g, mask_id));
        return;
    }
    case Op::Relu:
        deposit(n.a, mul(g, pos_mask(n.a)));
        return;
    default:
        fail("primitive '", static_cast<int>(n.op),
             "' has no differentiable backward; the input-gradient path must be "
             "built from linear ops and leaky ReLU");
    }
}

NodeId Tape::gradient_node(NodeId output, NodeId wrt) {
    const Node& out = nodes_[check(output)];
    QIG_CHECK(out.value.is_scalar(), "gradient_node requires a scalar output, got ",
              shape_str(out.value.shape));
    check(wrt);
    std::vector<NodeId> adjoints(nodes_.size(), kNoNode);
    // Emitted nodes extend the tape but never need adjoint slots themselves.
    const NodeId limit = output;
    adjoints[static_cast<std::size_t>(output)] = constant(Tensor::scalar(1.0));
    for (NodeId id = limit; id >= 0; --id) {
        if (adjoints[static_cast<std::size_t>(id)] == kNoNode ||
            !nodes_[static_cast<std::size_t>(id)].requires_grad) {
            continue;
        }
        emit_backward(id, adjoints[static_cast<std::size_t>(id)], adjoints);
    }
    if (adjoints[static_cast<std::size_t>(wrt)] == kNoNode) {
        return constant(Tensor::zeros(nodes_[static_cast<std::size_t>(wrt)].value.shape));
    }
    return adjoints[static_cast<std::size_t>(wrt)];
}

Tensor Tape::replay(NodeId output) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        Node& n = nodes_[i];
        if (n.op == Op::Leaf || n.op == Op::Constant) {
            continue;
        }
        n.value = eval(n);
    }
    return nodes_[check(output)].value;
}

NodeId accumulate_nodes(Tape& tape, NodeId acc, NodeId g) {
    if (acc == kNoNode) {
        return g;
    }
    if (g == kNoNode) {
        return acc;
    }
    return tape.add(acc, g);
}

} // namespace qig::ad
