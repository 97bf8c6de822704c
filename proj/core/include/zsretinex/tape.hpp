#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "zsretinex/tensor.hpp"

namespace zsretinex {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid as long as the
/// tape is alive and has not been cleared.
class Var {
public:
    Var() = default;

    [[nodiscard]] const Tensor& value() const;
    [[nodiscard]] const Shape& shape() const { return value().shape(); }
    [[nodiscard]] double item() const { return value().item(); }
    [[nodiscard]] bool requires_grad() const;

    [[nodiscard]] Tape* tape() const noexcept { return tape_; }
    [[nodiscard]] std::size_t id() const noexcept { return id_; }
    [[nodiscard]] bool valid() const noexcept { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Reverse-mode differentiation record.
///
/// Nodes are appended in evaluation order, so node ids are already a
/// topological order and backward simply walks them from the loss down to 0.
/// A tape serves one forward/backward pass; it is not thread-safe.
class Tape {
public:
    /// Receives the gradient flowing into a node's output and pushes it into
    /// the node's inputs through Tape::accumulate.
    using BackwardFn = std::function<void(Tape&, std::span<const double>)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Records a value that never receives a gradient.
    Var constant(Tensor value);

    /// Binds a parameter tensor. On backward, d(loss)/d(param) is written into
    /// `param.grad()`. The tensor must outlive the tape's backward pass.
    Var parameter(Tensor& param);

    /// Records the output of an operation. `backward` is dropped when none of
    /// `inputs` requires a gradient.
    Var record(Tensor value, std::span<const Var> inputs, BackwardFn backward);

    [[nodiscard]] const Tensor& value(std::size_t id) const;
    [[nodiscard]] bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

    /// Adds `g` into the gradient buffer of node `id`. No-op for nodes that do
    /// not require a gradient.
    void accumulate(std::size_t id, std::span<const double> g);

    /// Mutable gradient buffer of node `id`, allocated on first use. Returns an
    /// empty span for nodes that do not require a gradient.
    std::span<double> grad_buffer(std::size_t id);

    /// Differentiates the scalar `loss` with respect to every bound parameter.
    /// Consumes the tape: saved intermediates are released and a second call
    /// throws.
    void backward(Var loss);

    /// Releases every recorded node and makes the tape reusable.
    void clear();

    [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }
    [[nodiscard]] bool consumed() const noexcept { return consumed_; }

    /// Ids of nodes visited by the last backward pass, in visiting order.
    [[nodiscard]] const std::vector<std::size_t>& last_backward_order() const noexcept { return visited_; }

private:
    struct Node {
        Tensor value;
        Tensor* sink = nullptr;
        bool requires_grad = false;
        BackwardFn backward;
        Buffer grad;
    };

    Var push(Node node);
    void check_owned(const Var& v) const;

    std::vector<Node> nodes_;
    std::vector<std::size_t> visited_;
    bool consumed_ = false;
};

}  // namespace zsretinex
