#pragma once

#include <functional>
#include <vector>

#include "noisec/tensor.hpp"

namespace noisec {

// Handle into a Tape.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode tape over a fixed op set: conv2d (3x3, stride 1/2, zero pad),
// transposed conv2d, linear, relu, reshape, softmax, fused softmax +
// cross-entropy, mse, elementwise add/sub/mul, scalar ops and reductions.
//
// Nodes are appended in forward order, so reverse creation order is a valid
// reverse topological order; backward() visits each node exactly once and
// consumes the tape. Every op validates shapes up front and checks its
// output for NaN/Inf.
class Tape {
public:
    Var input(Tensor value, bool requires_grad = false);

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, float s);
    Var relu(Var a);
    Var reshape(Var a, std::vector<int> shape);

    // x:[N,I] w:[I,O] b:[O] -> [N,O]
    Var linear(Var x, Var w, Var b);
    // x:[N,C,H,W] w:[K,C,3,3] b:[K], zero padding 1 -> [N,K,(H-1)/s+1,(W-1)/s+1]
    Var conv2d(Var x, Var w, Var b, int stride);
    // x:[N,C,H,W] w:[C,K,3,3] b:[K], padding 1, output padding s-1 -> [N,K,H*s,W*s]
    Var conv2d_transpose(Var x, Var w, Var b, int stride);

    // Row-wise softmax over [N,C].
    Var softmax(Var logits);
    // Fused stable softmax + cross-entropy, mean over the batch -> scalar.
    Var cross_entropy(Var logits, std::vector<int> labels);
    // Mean squared error over all entries -> scalar.
    Var mse(Var a, Var b);

    Var sum(Var a);
    Var mean(Var a);
    // Scalar selector a[row,col] from a [N,C] tensor; used to build Jacobians.
    Var pick(Var a, int row, int col);

    // Seeds d(loss)/d(loss)=1 and accumulates grads into every node with
    // requires_grad. loss must be scalar. The tape is consumed.
    void backward(Var loss);

    const Tensor& value(Var v) const;
    const Tensor& grad(Var v) const;
    bool has_grad(Var v) const;
    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        bool has_grad = false;
        std::function<void(Tape&, int)> backprop;  // nullptr for leaves
    };

    Node& node(Var v);
    const Node& node(Var v) const;
    void check(Var v) const;
    Var push(Tensor value, bool requires_grad, std::function<void(Tape&, int)> backprop,
             const char* op_name);
    void accumulate(int id, const Tensor& g);
    float* grad_buffer(int id);

    std::vector<Node> nodes_;
    bool consumed_ = false;
};

// Central-difference gradient estimate (f(x+h e_i) - f(x-h e_i)) / (2h),
// the independent oracle used by the gradient tests. The divisor is the
// perturbation actually applied after f32 rounding of x +/- h.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x, float h);

// Max-norm relative disagreement ||a-b||_inf / ||b||_inf, the gradient-check
// metric; returns the absolute disagreement when b is the zero vector.
float grad_rel_error(const Tensor& a, const Tensor& b);

}  // namespace noisec
