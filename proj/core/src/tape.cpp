#include "zsretinex/tape.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

namespace zsretinex {

const Tensor& Var::value() const {
    if (!tape_) throw std::logic_error("use of an unbound Var");
    return tape_->value(id_);
}

bool Var::requires_grad() const {
    if (!tape_) throw std::logic_error("use of an unbound Var");
    return tape_->requires_grad(id_);
}

Var Tape::push(Node node) {
    if (consumed_) throw std::logic_error("tape already differentiated; clear() it before recording again");
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

void Tape::check_owned(const Var& v) const {
    if (v.tape() != this || v.id() >= nodes_.size()) throw std::logic_error("Var does not belong to this tape");
}

Var Tape::constant(Tensor value) {
    Node node;
    node.value = std::move(value);
    node.value.set_requires_grad(false);
    node.value.clear_grad();
    return push(std::move(node));
}

Var Tape::parameter(Tensor& param) {
    Node node;
    node.sink = &param;
    node.requires_grad = true;
    return push(std::move(node));
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
    bool needs = false;
    for (const Var& in : inputs) {
        check_owned(in);
        needs = needs || nodes_[in.id()].requires_grad;
    }
    Node node;
    node.value = std::move(value);
    node.requires_grad = needs;
    if (needs) node.backward = std::move(backward);
    return push(std::move(node));
}

const Tensor& Tape::value(std::size_t id) const {
    const Node& node = nodes_.at(id);
    return node.sink ? *node.sink : node.value;
}

std::span<double> Tape::grad_buffer(std::size_t id) {
    Node& node = nodes_.at(id);
    if (!node.requires_grad) return {};
    if (node.grad.empty()) node.grad.assign(value(id).numel(), 0.0);
    return node.grad;
}

void Tape::accumulate(std::size_t id, std::span<const double> g) {
    std::span<double> buf = grad_buffer(id);
    if (buf.empty()) return;
    if (g.size() != buf.size()) throw ShapeError("gradient size mismatch during backward");
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += g[i];
}

void Tape::backward(Var loss) {
    if (consumed_) throw std::logic_error("backward called twice on the same tape");
    check_owned(loss);
    if (value(loss.id()).numel() != 1) {
        throw ShapeError("backward needs a scalar loss, got shape " + to_string(value(loss.id()).shape()));
    }
    consumed_ = true;
    visited_.clear();

    std::span<double> seed = grad_buffer(loss.id());
    if (!seed.empty()) seed[0] = 1.0;

    std::unordered_set<Tensor*> written;
    for (std::size_t id = loss.id() + 1; id-- > 0;) {
        Node& node = nodes_[id];
        if (!node.requires_grad) continue;
        visited_.push_back(id);
        if (node.backward && !node.grad.empty()) node.backward(*this, node.grad);
        node.backward = nullptr;
        if (node.sink) {
            if (node.grad.empty()) node.grad.assign(node.sink->numel(), 0.0);
            if (written.insert(node.sink).second) {
                node.sink->set_grad(node.grad);
            } else {
                std::span<double> dst = node.sink->grad();
                for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += node.grad[i];
            }
        }
    }
    for (Node& node : nodes_) node.backward = nullptr;
}

void Tape::clear() {
    nodes_.clear();
    nodes_.shrink_to_fit();
    visited_.clear();
    consumed_ = false;
}

}  // namespace zsretinex
