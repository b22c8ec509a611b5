#pragma once

#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "memda/tensor.hpp"

namespace memda {

/// A named trainable tensor with its gradient accumulator.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    Parameter() = default;
    Parameter(std::string n, Tensor v)
        : name(std::move(n)), value(std::move(v)), grad(Tensor(value.shape())) {}

    void zero_grad() { grad.fill(0.0); }
};

/// Reverse-mode autodiff tape over Tensor values.
///
/// Ops append nodes in topological order; backward() runs the recorded
/// closures in reverse. Gradients of nodes created via param() are added
/// into the bound Parameter's grad buffer, so one tape per sample with
/// gradient accumulation across a batch works out of the box.
class Tape {
public:
    struct Var {
        int idx = -1;
        bool valid() const { return idx >= 0; }
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Constant leaf; no gradient is tracked for it.
    Var leaf(Tensor v);
    /// Leaf bound to a Parameter; backward adds into p.grad.
    Var param(Parameter& p);

    /// References stay valid for the tape's lifetime (deque storage).
    const Tensor& value(Var v) const { return nodes_[static_cast<std::size_t>(v.idx)].value; }
    const Tensor& grad(Var v) const { return nodes_[static_cast<std::size_t>(v.idx)].grad; }

    // ---- elementwise / linear algebra ----
    Var matmul(Var a, Var b);     // (m,k) x (k,n) -> (m,n)
    Var matmul_nt(Var a, Var b);  // (m,k) x (n,k)^T -> (m,n)
    Var add(Var a, Var b);        // same shape
    Var add_rows(Var a, Var bias);  // (m,n) + (n,) broadcast over rows
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);  // elementwise
    Var scale(Var a, double c);
    Var tanh(Var a);
    Var sigmoid(Var a);
    Var relu(Var a);
    Var softmax_rows(Var a);  // rowwise over last dim of (m,n)
    Var softmax(Var a);       // flat vector
    Var mean_rows(Var a);     // (m,n) -> (n,) mean over rows
    Var sum(Var a);           // scalar sum over all elements
    Var concat(Var a, Var b);            // flat vectors
    Var reshape(Var a, std::vector<int> shape);

    // ---- model-specific kernels ----
    /// Causal dilated 1-d convolution along the middle axis.
    /// x: (N,T,Ci), w: (k,Ci,Co), b: (Co) -> (N,T,Co); indices before the
    /// window start read as zero.
    Var conv1d_causal(Var x, Var w, Var b, int dilation);
    /// y[s] = sum_{a,b} w[s,a,b] * zi[a] * zj[b];  w: (S,d,d), zi/zj: (d,).
    Var bilinear(Var zi, Var zj, Var w);
    /// y = W x + b;  W: (o,i), x: (i,), b: (o,).
    Var affine(Var w, Var x, Var b);
    /// sum_i w[i] * h[i] with each h[i] of identical shape, w: (len(h),).
    Var weighted_sum(const std::vector<Var>& hs, Var w);
    /// Mean absolute error against a target (usually a leaf). Scalar output.
    Var mae(Var pred, Var target);

    /// Run reverse sweep from a scalar root (seed gradient 1).
    void backward(Var root);
    /// Drop all nodes, keep allocation capacity.
    void reset();
    std::size_t node_count() const { return nodes_.size(); }

private:
    // closure args: (tape, index of the node being differentiated)
    using BackFn = std::function<void(Tape&, int)>;

    struct Node {
        Tensor value;
        Tensor grad;
        Parameter* bound = nullptr;
        BackFn back;  // empty for leaves
    };

    Var push(Tensor value, BackFn back);
    Tensor& grad_mut(int idx) { return nodes_[static_cast<std::size_t>(idx)].grad; }
    const Tensor& val(int idx) const { return nodes_[static_cast<std::size_t>(idx)].value; }

    std::deque<Node> nodes_;
};

}  // namespace memda
