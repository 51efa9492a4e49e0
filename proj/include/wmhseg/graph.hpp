#pragma once

#include <cstdint>
#include <vector>

#include "wmhseg/array4.hpp"
#include "wmhseg/parameter.hpp"

namespace wmhseg {

enum class OpKind { Input, Conv, Relu, MaxPool2, UpConv2, Concat, Add, Sigmoid };

const char* to_string(OpKind kind);

using NodeId = std::size_t;

/// Records operators as they execute and replays their hand-written backward
/// passes in reverse. Nodes may only reference earlier nodes, so the graph is
/// acyclic by construction. Parameters are borrowed and must outlive the graph.
class Graph {
public:
    /// Constant input; receives a gradient but owns no parameter.
    NodeId input(Array4 x);
    /// Input bound to a parameter; backward accumulates into p.grad.
    NodeId input(Parameter& p);

    NodeId conv(NodeId x, Parameter& weight, Parameter& bias);
    NodeId relu(NodeId x);
    NodeId maxpool2(NodeId x);
    NodeId upconv2(NodeId x, Parameter& weight, Parameter& bias);
    NodeId concat(NodeId a, NodeId b);
    NodeId add(NodeId a, NodeId b);
    NodeId sigmoid(NodeId x);

    const Array4& value(NodeId id) const { return nodes_.at(id).value; }
    /// Gradient of the seeded head w.r.t. this node; empty before backward or
    /// when the node does not feed the head.
    const Array4& grad(NodeId id) const { return nodes_.at(id).grad; }
    OpKind kind(NodeId id) const { return nodes_.at(id).kind; }
    std::size_t size() const { return nodes_.size(); }

    /// Seeds d(head) = seed and propagates to every earlier node. Parameter
    /// gradients are accumulated, not overwritten.
    void backward(NodeId head, const Array4& seed);

    /// Drops stored gradients so backward can run again.
    void clear_grads();

    /// When set, backward skips gradients of constant (non-parameter) inputs
    /// that feed a conv or upconv directly. Off by default.
    void set_skip_constant_input_grads(bool skip) { skip_constant_input_grads_ = skip; }

private:
    struct Node {
        OpKind kind = OpKind::Input;
        NodeId a = 0;
        NodeId b = 0;
        Parameter* weight = nullptr;
        Parameter* bias = nullptr;
        Array4 value;
        Array4 grad;
        std::vector<std::uint32_t> argmax;
    };

    NodeId push(Node node);
    Array4& grad_buffer(NodeId id);
    Array4* input_grad(NodeId id);

    std::vector<Node> nodes_;
    bool skip_constant_input_grads_ = false;
};

}  // namespace wmhseg
