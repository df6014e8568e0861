#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "kgntm/tensor.hpp"

namespace kgntm {

// A trainable tensor. Networks own their parameters; the tape only refers to
// them, so a parameter must outlive every tape it is recorded on.
struct Parameter {
    std::string name;
    Tensor value;
};

class Tape;

// Handle to a node on a tape.
class Var {
public:
    Var() = default;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    const Tensor& value() const;
    Tape& tape() const { return *tape_; }
    std::size_t id() const noexcept { return id_; }
    bool valid() const noexcept { return tape_ != nullptr; }
    bool requires_grad() const;

    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }

private:
    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

class Gradients {
public:
    const Tensor& of(const Parameter& p) const;
    bool has(const Parameter& p) const { return grads_.count(&p) != 0; }
    std::size_t size() const noexcept { return grads_.size(); }
    void set(const Parameter& p, Tensor g) { grads_[&p] = std::move(g); }

private:
    std::unordered_map<const Parameter*, Tensor> grads_;
};

// Reverse-mode recorder. Single-threaded; use one tape per batch.
class Tape {
public:
    // Receives the output gradient and accumulates into the parent gradients
    // through Tape::accumulate.
    using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

    Var constant(Tensor value);
    Var parameter(const Parameter& p);
    // Records a derived node. `backward` is dropped when no parent needs a
    // gradient.
    Var record(Tensor value, const std::vector<Var>& parents, BackwardFn backward);

    // Runs the reverse sweep from a scalar and returns the gradient of every
    // parameter reachable from it (zeros for recorded but unreachable ones).
    Gradients backward(const Var& loss);

    void accumulate(const Var& target, const Tensor& grad);
    void accumulate(const Var& target, std::size_t index, double grad);

    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        BackwardFn backward;
        const Parameter* param = nullptr;
        bool requires_grad = false;
    };
    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
};

// Differentiable operations. Binary elementwise ops broadcast 2-D operands
// whose dimensions are equal or 1.
namespace ad {

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var one_minus(const Var& a);

Var relu(const Var& a);
Var sigmoid(const Var& a);
Var softplus(const Var& a);
Var exp(const Var& a);
// Natural log with inputs clamped from below at `floor`; clamped entries
// pass no gradient and bump log_clamp_count().
Var log(const Var& a, double floor = 1e-300);
Var square(const Var& a);
Var softmax_rows(const Var& a);

Var sum(const Var& a);
Var sum_rows(const Var& a); // r x c -> r x 1
Var sum_cols(const Var& a); // r x c -> 1 x c
// Euclidean norm of each row; the gradient at a zero row is zero.
Var row_norm(const Var& a);
Var reshape(const Var& a, std::size_t rows, std::size_t cols);
Var normalize_rows(const Var& a);
Var transpose(const Var& a);
// Σ_i w_i log(max(p_i, floor)) over entries with w_i != 0; clamped entries
// pass no gradient and bump log_clamp_count().
Var weighted_log_sum(const Var& p, const Tensor& weights, double floor = 1e-300);

std::size_t log_clamp_count();
void reset_log_clamp_count();

} // namespace ad

// Elementwise broadcast helpers shared with non-taped code.
Shape broadcast_shape(const Tensor& a, const Tensor& b);
Tensor reduce_to_shape(const Tensor& grad, std::size_t rows, std::size_t cols);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

} // namespace kgntm
