#include "wmhseg/graph.hpp"

#include <stdexcept>

#include "wmhseg/ops.hpp"

namespace wmhseg {

const char* to_string(OpKind kind) {
    switch (kind) {
        case OpKind::Input: return "input";
        case OpKind::Conv: return "conv";
        case OpKind::Relu: return "relu";
        case OpKind::MaxPool2: return "maxpool2";
        case OpKind::UpConv2: return "upconv2";
        case OpKind::Concat: return "concat";
        case OpKind::Add: return "add";
        case OpKind::Sigmoid: return "sigmoid";
    }
    return "unknown";
}

NodeId Graph::push(Node node) {
    nodes_.push_back(std::move(node));
    return nodes_.size() - 1;
}

NodeId Graph::input(Array4 x) {
    Node n;
    n.kind = OpKind::Input;
    n.value = std::move(x);
    return push(std::move(n));
}

NodeId Graph::input(Parameter& p) {
    Node n;
    n.kind = OpKind::Input;
    n.weight = &p;
    n.value = p.value;
    return push(std::move(n));
}

NodeId Graph::conv(NodeId x, Parameter& weight, Parameter& bias) {
    Node n;
    n.kind = OpKind::Conv;
    n.a = x;
    n.weight = &weight;
    n.bias = &bias;
    n.value = ops::conv2d(value(x), weight.value, bias.value);
    return push(std::move(n));
}

NodeId Graph::relu(NodeId x) {
    Node n;
    n.kind = OpKind::Relu;
    n.a = x;
    n.value = ops::relu(value(x));
    return push(std::move(n));
}

NodeId Graph::maxpool2(NodeId x) {
    Node n;
    n.kind = OpKind::MaxPool2;
    n.a = x;
    auto r = ops::maxpool2(value(x));
    n.value = std::move(r.out);
    n.argmax = std::move(r.argmax);
    return push(std::move(n));
}

NodeId Graph::upconv2(NodeId x, Parameter& weight, Parameter& bias) {
    Node n;
    n.kind = OpKind::UpConv2;
    n.a = x;
    n.weight = &weight;
    n.bias = &bias;
    n.value = ops::upconv2(value(x), weight.value, bias.value);
    return push(std::move(n));
}

NodeId Graph::concat(NodeId a, NodeId b) {
    Node n;
    n.kind = OpKind::Concat;
    n.a = a;
    n.b = b;
    n.value = ops::concat(value(a), value(b));
    return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
    Node n;
    n.kind = OpKind::Add;
    n.a = a;
    n.b = b;
    n.value = ops::add(value(a), value(b));
    return push(std::move(n));
}

NodeId Graph::sigmoid(NodeId x) {
    Node n;
    n.kind = OpKind::Sigmoid;
    n.a = x;
    n.value = ops::sigmoid(value(x));
    return push(std::move(n));
}

Array4& Graph::grad_buffer(NodeId id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) n.grad = Array4(n.value.shape());
    return n.grad;
}

Array4* Graph::input_grad(NodeId id) {
    const Node& n = nodes_[id];
    // Constant inputs never need their gradient, which saves the first layer's dx pass.
    if (n.kind == OpKind::Input && n.weight == nullptr && skip_constant_input_grads_) return nullptr;
    return &grad_buffer(id);
}

void Graph::clear_grads() {
    for (auto& n : nodes_) n.grad = Array4();
}

void Graph::backward(NodeId head, const Array4& seed) {
    if (head >= nodes_.size()) throw std::out_of_range("backward: unknown head node");
    if (!(seed.shape() == nodes_[head].value.shape())) {
        throw std::invalid_argument("backward: seed shape " + seed.shape().str() +
                                    " does not match head " + nodes_[head].value.shape().str());
    }
    grad_buffer(head).accumulate(seed);

    for (NodeId id = head + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (n.grad.size() == 0) continue;
        const Array4& g = n.grad;
        switch (n.kind) {
            case OpKind::Input:
                if (n.weight != nullptr) n.weight->grad.accumulate(g);
                break;
            case OpKind::Conv:
                ops::conv2d_backward(nodes_[n.a].value, n.weight->value, g, input_grad(n.a),
                                     n.weight->grad, n.bias->grad);
                break;
            case OpKind::Relu:
                ops::relu_backward(nodes_[n.a].value, g, grad_buffer(n.a));
                break;
            case OpKind::MaxPool2:
                ops::maxpool2_backward(n.argmax, g, grad_buffer(n.a));
                break;
            case OpKind::UpConv2:
                ops::upconv2_backward(nodes_[n.a].value, n.weight->value, g, input_grad(n.a),
                                      n.weight->grad, n.bias->grad);
                break;
            case OpKind::Concat:
                ops::concat_backward(g, grad_buffer(n.a), grad_buffer(n.b));
                break;
            case OpKind::Add:
                grad_buffer(n.a).accumulate(g);
                grad_buffer(n.b).accumulate(g);
                break;
            case OpKind::Sigmoid:
                ops::sigmoid_backward(n.value, g, grad_buffer(n.a));
                break;
        }
    }
}

}  // namespace wmhseg
