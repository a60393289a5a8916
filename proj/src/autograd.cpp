#include "noisec/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <utility>

namespace noisec {

namespace {

struct ConvDims {
    int n, c, h, w;
};

ConvDims dims4(const Tensor& t, const char* op) {
    if (t.rank() != 4) throw TensorError(std::string(op) + ": expected rank-4 input, got " + t.shape_str());
    return {t.dim(0), t.dim(1), t.dim(2), t.dim(3)};
}

// Valid output range [lo, hi) for a padded 3x3 window position: the set of
// o with 0 <= o*stride - 1 + k < extent.
void window_bounds(int k, int stride, int extent, int out_extent, int& lo, int& hi) {
    int num = 1 - k;  // o*stride >= 1-k
    lo = num <= 0 ? 0 : (num + stride - 1) / stride;
    int top = extent - k;  // o*stride <= extent-k, exclusive upper from o*stride-1+k <= extent-1
    hi = top / stride + 1;
    if (hi > out_extent) hi = out_extent;
    if (lo > hi) lo = hi;
}

}  // namespace

Tape::Node& Tape::node(Var v) { return nodes_[static_cast<size_t>(v.id)]; }
const Tape::Node& Tape::node(Var v) const { return nodes_[static_cast<size_t>(v.id)]; }

void Tape::check(Var v) const {
    if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
        throw TensorError("variable is not on this tape");
}

Var Tape::push(Tensor value, bool requires_grad, std::function<void(Tape&, int)> backprop,
               const char* op_name) {
    value.require_finite(op_name);
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

void Tape::accumulate(int id, const Tensor& g) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.requires_grad) return;
    if (!n.has_grad) {
        n.grad = Tensor::zeros(n.value.shape);
        n.has_grad = true;
    }
    for (std::int64_t i = 0; i < g.numel(); ++i) n.grad[i] += g[i];
}

float* Tape::grad_buffer(int id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.has_grad) {
        n.grad = Tensor::zeros(n.value.shape);
        n.has_grad = true;
    }
    return n.grad.data.data();
}

Var Tape::input(Tensor value, bool requires_grad) {
    return push(std::move(value), requires_grad, nullptr, "input");
}

const Tensor& Tape::value(Var v) const {
    check(v);
    return node(v).value;
}

const Tensor& Tape::grad(Var v) const {
    check(v);
    const Node& n = node(v);
    if (!n.has_grad) throw TensorError("no gradient recorded for this variable");
    return n.grad;
}

bool Tape::has_grad(Var v) const {
    check(v);
    return node(v).has_grad;
}

Var Tape::add(Var a, Var b) {
    check(a);
    check(b);
    const Tensor& ta = node(a).value;
    const Tensor& tb = node(b).value;
    if (!ta.same_shape(tb)) throw TensorError("add: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
    Tensor out = ta;
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] += tb[i];
    bool rg = node(a).requires_grad || node(b).requires_grad;
    int ia = a.id, ib = b.id;
    return push(std::move(out), rg,
                [ia, ib](Tape& t, int self) {
                    const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
                    t.accumulate(ia, g);
                    t.accumulate(ib, g);
                },
                "add");
}

Var Tape::sub(Var a, Var b) {
    check(a);
    check(b);
    const Tensor& ta = node(a).value;
    const Tensor& tb = node(b).value;
    if (!ta.same_shape(tb)) throw TensorError("sub: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
    Tensor out = ta;
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] -= tb[i];
    bool rg = node(a).requires_grad || node(b).requires_grad;
    int ia = a.id, ib = b.id;
    return push(std::move(out), rg,
                [ia, ib](Tape& t, int self) {
                    const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
                    t.accumulate(ia, g);
                    Node& nb = t.nodes_[static_cast<size_t>(ib)];
                    if (nb.requires_grad) {
                        float* gb = t.grad_buffer(ib);
                        for (std::int64_t i = 0; i < g.numel(); ++i) gb[i] -= g[i];
                    }
                },
                "sub");
}

Var Tape::mul(Var a, Var b) {
    check(a);
    check(b);
    const Tensor& ta = node(a).value;
    const Tensor& tb = node(b).value;
    if (!ta.same_shape(tb)) throw TensorError("mul: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
    Tensor out = ta;
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= tb[i];
    bool rg = node(a).requires_grad || node(b).requires_grad;
    int ia = a.id, ib = b.id;
    return push(std::move(out), rg,
                [ia, ib](Tape& t, int self) {
                    const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
                    const Tensor& va = t.nodes_[static_cast<size_t>(ia)].value;
                    const Tensor& vb = t.nodes_[static_cast<size_t>(ib)].value;
                    if (t.nodes_[static_cast<size_t>(ia)].requires_grad) {
                        float* ga = t.grad_buffer(ia);
                        for (std::int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * vb[i];
                    }
                    if (t.nodes_[static_cast<size_t>(ib)].requires_grad) {
                        float* gb = t.grad_buffer(ib);
                        for (std::int64_t i = 0; i < g.numel(); ++i) gb[i] += g[i] * va[i];
                    }
                },
                "mul");
}

Var Tape::scale(Var a, float s) {
    check(a);
    Tensor out = node(a).value;
    for (float& v : out.data) v *= s;
    int ia = a.id;
    return push(std::move(out), node(a).requires_grad,
                [ia, s](Tape& t, int self) {
                    const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
                    Node& na = t.nodes_[static_cast<size_t>(ia)];
                    if (na.requires_grad) {
                        float* ga = t.grad_buffer(ia);
                        for (std::int64_t i = 0; i < g.numel(); ++i) ga[i] += s * g[i];
                    }
                },
                "scale");
}

Var Tape::relu(Var a) {
    check(a);
    Tensor out = node(a).value;
    for (float& v : out.data) v = v > 0.0f ? v : 0.0f;
    int ia = a.id;
    return push(std::move(out), node(a).requires_grad,
                [ia](Tape& t, int self) {
                    const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
                    Node& na = t.nodes_[static_cast<size_t>(ia)];
                    if (!na.requires_grad) return;
                    const Tensor& x = na.value;
                    float* ga = t.grad_buffer(ia);
                    for (std::int64_t i = 0; i < g.numel(); ++i)
                        if (x[i] > 0.0f) ga[i] += g[i];
                },
                "relu");
}

Var Tape::reshape(Var a, std::vector<int> shape) {
    check(a);
    if (shape_numel(shape) != node(a).value.numel())
        throw TensorError("reshape: numel mismatch " + node(a).value.shape_str() + " -> " +
                          shape_to_string(shape));
    Tensor out;
    out.shape = std::move(shape);
    out.data = node(a).value.data;
    int ia = a.id;
    return push(std::move(out), node(a).requires_grad,
                [ia](Tape& t, int self) {
                    const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
                    Node& na = t.nodes_[static_cast<size_t>(ia)];
                    if (!na.requires_grad) return;
                    float* ga = t.grad_buffer(ia);
                    for (std::int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
                },
                "reshape");
}

Var Tape::linear(Var x, Var w, Var b) {
    check(x);
    check(w);
    check(b);
    const Tensor& tx = node(x).value;
    const Tensor& tw = node(w).value;
    const Tensor& tb = node(b).value;
    if (tx.rank() != 2 || tw.rank() != 2 || tb.rank() != 1)
        throw TensorError("linear: expected x[N,I] w[I,O] b[O]");
    const int N = tx.dim(0), I = tx.dim(1), O = tw.dim(1);
    if (tw.dim(0) != I || tb.dim(0) != O)
        throw TensorError("linear: shape mismatch x" + tx.shape_str() + " w" + tw.shape_str());

    Tensor out = Tensor::zeros({N, O});
    for (int n = 0; n < N; ++n) {
        float* orow = out.data.data() + static_cast<std::int64_t>(n) * O;
        for (int o = 0; o < O; ++o) orow[o] = tb[o];
        const float* xrow = tx.data.data() + static_cast<std::int64_t>(n) * I;
        for (int i = 0; i < I; ++i) {
            const float xv = xrow[i];
            const float* wrow = tw.data.data() + static_cast<std::int64_t>(i) * O;
            for (int o = 0; o < O; ++o) orow[o] += xv * wrow[o];
        }
    }
    bool rg = node(x).requires_grad || node(w).requires_grad || node(b).requires_grad;
    int ix = x.id, iw = w.id, ib = b.id;
    return push(std::move(out), rg,
                [ix, iw, ib, N, I, O](Tape& t, int self) {
                    const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
                    const Tensor& tx = t.nodes_[static_cast<size_t>(ix)].value;
                    const Tensor& tw = t.nodes_[static_cast<size_t>(iw)].value;
                    if (t.nodes_[static_cast<size_t>(ix)].requires_grad) {
                        float* gx = t.grad_buffer(ix);
                        for (int n = 0; n < N; ++n) {
                            const float* grow = g.data.data() + static_cast<std::int64_t>(n) * O;
                            float* gxrow = gx + static_cast<std::int64_t>(n) * I;
                            for (int i = 0; i < I; ++i) {
                                const float* wrow = tw.data.data() + static_cast<std::int64_t>(i) * O;
                                float acc = 0.0f;
                                for (int o = 0; o < O; ++o) acc += grow[o] * wrow[o];
                                gxrow[i] += acc;
                            }
                        }
                    }
                    if (t.nodes_[static_cast<size_t>(iw)].requires_grad) {
                        float* gw = t.grad_buffer(iw);
                        for (int n = 0; n < N; ++n) {
                            const float* grow = g.data.data() + static_cast<std::int64_t>(n) * O;
                            const float* xrow = tx.data.data() + static_cast<std::int64_t>(n) * I;
                            for (int i = 0; i < I; ++i) {
                                const float xv = xrow[i];
                                float* gwrow = gw + static_cast<std::int64_t>(i) * O;
                                for (int o = 0; o < O; ++o) gwrow[o] += xv * grow[o];
                            }
                        }
                    }
                    if (t.nodes_[static_cast<size_t>(ib)].requires_grad) {
                        float* gb = t.grad_buffer(ib);
                        for (int n = 0; n < N; ++n) {
                            const float* grow = g.data.data() + static_cast<std::int64_t>(n) * O;
                            for (int o = 0; o < O; ++o) gb[o] += grow[o];
                        }
                    }
                },
                "linear");
}

Var Tape::conv2d(Var x, Var w, Var b, int stride) {
    check(x);
    check(w);
    check(b);
    if (stride != 1 && stride != 2) throw TensorError("conv2d: stride must be 1 or 2");
    const Tensor& tx = node(x).value;
    const Tensor& tw = node(w).value;
    const Tensor& tb = node(b).value;
    auto [N, C, H, W] = dims4(tx, "conv2d");
    if (tw.rank() != 4 || tw.dim(1) != C || tw.dim(2) != 3 || tw.dim(3) != 3)
        throw TensorError("conv2d: weight must be [K," + std::to_string(C) + ",3,3], got " + tw.shape_str());
    const int K = tw.dim(0);
    if (tb.rank() != 1 || tb.dim(0) != K) throw TensorError("conv2d: bias must be [K]");
    const int OH = (H - 1) / stride + 1;
    const int OW = (W - 1) / stride + 1;

    Tensor out = Tensor::zeros({N, K, OH, OW});
    for (int n = 0; n < N; ++n) {
        for (int k = 0; k < K; ++k) {
            float* oplane = out.data.data() + (static_cast<std::int64_t>(n) * K + k) * OH * OW;
            const float bias = tb[k];
            for (int i = 0; i < OH * OW; ++i) oplane[i] = bias;
            for (int c = 0; c < C; ++c) {
                const float* xplane = tx.data.data() + (static_cast<std::int64_t>(n) * C + c) * H * W;
                const float* wk = tw.data.data() + (static_cast<std::int64_t>(k) * C + c) * 9;
                for (int kh = 0; kh < 3; ++kh) {
                    int oh_lo, oh_hi;
                    window_bounds(kh, stride, H, OH, oh_lo, oh_hi);
                    for (int kw = 0; kw < 3; ++kw) {
                        const float wv = wk[kh * 3 + kw];
                        int ow_lo, ow_hi;
                        window_bounds(kw, stride, W, OW, ow_lo, ow_hi);
                        for (int oh = oh_lo; oh < oh_hi; ++oh) {
                            const int ih = oh * stride - 1 + kh;
                            const float* xrow = xplane + static_cast<std::int64_t>(ih) * W;
                            float* orow = oplane + static_cast<std::int64_t>(oh) * OW;
                            for (int ow = ow_lo; ow < ow_hi; ++ow)
                                orow[ow] += wv * xrow[ow * stride - 1 + kw];
                        }
                    }
                }
            }
        }
    }

    bool rg = node(x).requires_grad || node(w).requires_grad || node(b).requires_grad;
    int ix = x.id, iw = w.id, ib = b.id;
    return push(std::move(out), rg,
                [ix, iw, ib, stride, N, C, H, W, K, OH, OW](Tape& t, int self) {
                    const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
                    const Tensor& tx = t.nodes_[static_cast<size_t>(ix)].value;
                    const Tensor& tw = t.nodes_[static_cast<size_t>(iw)].value;
                    const bool need_x = t.nodes_[static_cast<size_t>(ix)].requires_grad;
                    const bool need_w = t.nodes_[static_cast<size_t>(iw)].requires_grad;
                    const bool need_b = t.nodes_[static_cast<size_t>(ib)].requires_grad;
                    float* gx = need_x ? t.grad_buffer(ix) : nullptr;
                    float* gw = need_w ? t.grad_buffer(iw) : nullptr;
                    float* gb = need_b ? t.grad_buffer(ib) : nullptr;
                    for (int n = 0; n < N; ++n) {
                        for (int k = 0; k < K; ++k) {
                            const float* gplane =
                                g.data.data() + (static_cast<std::int64_t>(n) * K + k) * OH * OW;
                            if (need_b) {
                                float acc = 0.0f;
                                for (int i = 0; i < OH * OW; ++i) acc += gplane[i];
                                gb[k] += acc;
                            }
                            if (!need_x && !need_w) continue;
                            for (int c = 0; c < C; ++c) {
                                const float* xplane =
                                    tx.data.data() + (static_cast<std::int64_t>(n) * C + c) * H * W;
                                float* gxplane =
                                    need_x ? gx + (static_cast<std::int64_t>(n) * C + c) * H * W : nullptr;
                                const float* wk = tw.data.data() + (static_cast<std::int64_t>(k) * C + c) * 9;
                                float* gwk = need_w ? gw + (static_cast<std::int64_t>(k) * C + c) * 9 : nullptr;
                                for (int kh = 0; kh < 3; ++kh) {
                                    int oh_lo, oh_hi;
                                    window_bounds(kh, stride, H, OH, oh_lo, oh_hi);
                                    for (int kw = 0; kw < 3; ++kw) {
                                        int ow_lo, ow_hi;
                                        window_bounds(kw, stride, W, OW, ow_lo, ow_hi);
                                        const float wv = wk[kh * 3 + kw];
                                        float wacc = 0.0f;
                                        for (int oh = oh_lo; oh < oh_hi; ++oh) {
                                            const int ih = oh * stride - 1 + kh;
                                            const float* grow = gplane + static_cast<std::int64_t>(oh) * OW;
                                            const float* xrow = xplane + static_cast<std::int64_t>(ih) * W;
                                            float* gxrow =
                                                need_x ? gxplane + static_cast<std::int64_t>(ih) * W : nullptr;
                                            for (int ow = ow_lo; ow < ow_hi; ++ow) {
                                                const int iw_idx = ow * stride - 1 + kw;
                                                const float gv = grow[ow];
                                                if (need_x) gxrow[iw_idx] += wv * gv;
                                                wacc += xrow[iw_idx] * gv;
                                            }
                                        }
                                        if (need_w) gwk[kh * 3 + kw] += wacc;
                                    }
                                }
                            }
                        }
                    }
                },
                "conv2d");
}

Var Tape::conv2d_transpose(Var x, Var w, Var b, int stride) {
    check(x);
    check(w);
    check(b);
    if (stride != 1 && stride != 2) throw TensorError("conv2d_transpose: stride must be 1 or 2");
    const Tensor& tx = node(x).value;
    const Tensor& tw = node(w).value;
    const Tensor& tb = node(b).value;
    auto [N, C, H, W] = dims4(tx, "conv2d_transpose");
    if (tw.rank() != 4 || tw.dim(0) != C || tw.dim(2) != 3 || tw.dim(3) != 3)
        throw TensorError("conv2d_transpose: weight must be [" + std::to_string(C) + ",K,3,3], got " +
                          tw.shape_str());
    const int K = tw.dim(1);
    if (tb.rank() != 1 || tb.dim(0) != K) throw TensorError("conv2d_transpose: bias must be [K]");
    const int OH = H * stride;
    const int OW = W * stride;

    Tensor out = Tensor::zeros({N, K, OH, OW});
    for (int n = 0; n < N; ++n) {
        for (int k = 0; k < K; ++k) {
            float* oplane = out.data.data() + (static_cast<std::int64_t>(n) * K + k) * OH * OW;
            const float bias = tb[k];
            for (int i = 0; i < OH * OW; ++i) oplane[i] = bias;
            for (int c = 0; c < C; ++c) {
                const float* xplane = tx.data.data() + (static_cast<std::int64_t>(n) * C + c) * H * W;
                const float* wck = tw.data.data() + (static_cast<std::int64_t>(c) * K + k) * 9;
                for (int kh = 0; kh < 3; ++kh) {
                    int ih_lo, ih_hi;
                    window_bounds(kh, stride, OH, H, ih_lo, ih_hi);
                    for (int kw = 0; kw < 3; ++kw) {
                        const float wv = wck[kh * 3 + kw];
                        int iw_lo, iw_hi;
                        window_bounds(kw, stride, OW, W, iw_lo, iw_hi);
                        for (int ih = ih_lo; ih < ih_hi; ++ih) {
                            const int oh = ih * stride - 1 + kh;
                            const float* xrow = xplane + static_cast<std::int64_t>(ih) * W;
                            float* orow = oplane + static_cast<std::int64_t>(oh) * OW;
                            for (int iw = iw_lo; iw < iw_hi; ++iw)
                                orow[iw * stride - 1 + kw] += wv * xrow[iw];
                        }
                    }
                }
            }
        }
    }

    bool rg = node(x).requires_grad || node(w).requires_grad || node(b).requires_grad;
    int ix = x.id, iw_id = w.id, ib = b.id;
    return push(std::move(out), rg,
                [ix, iw_id, ib, stride, N, C, H, W, K, OH, OW](Tape& t, int self) {
                    const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
                    const Tensor& tx = t.nodes_[static_cast<size_t>(ix)].value;
                    const Tensor& tw = t.nodes_[static_cast<size_t>(iw_id)].value;
                    const bool need_x = t.nodes_[static_cast<size_t>(ix)].requires_grad;
                    const bool need_w = t.nodes_[static_cast<size_t>(iw_id)].requires_grad;
                    const bool need_b = t.nodes_[static_cast<size_t>(ib)].requires_grad;
                    float* gx = need_x ? t.grad_buffer(ix) : nullptr;
                    float* gw = need_w ? t.grad_buffer(iw_id) : nullptr;
                    float* gb = need_b ? t.grad_buffer(ib) : nullptr;
                    if (need_b) {
                        for (int n = 0; n < N; ++n)
                            for (int k = 0; k < K; ++k) {
                                const float* gplane =
                                    g.data.data() + (static_cast<std::int64_t>(n) * K + k) * OH * OW;
                                float acc = 0.0f;
                                for (int i = 0; i < OH * OW; ++i) acc += gplane[i];
                                gb[k] += acc;
                            }
                    }
                    if (!need_x && !need_w) return;
                    for (int n = 0; n < N; ++n) {
                        for (int k = 0; k < K; ++k) {
                            const float* gplane =
                                g.data.data() + (static_cast<std::int64_t>(n) * K + k) * OH * OW;
                            for (int c = 0; c < C; ++c) {
                                const float* xplane =
                                    tx.data.data() + (static_cast<std::int64_t>(n) * C + c) * H * W;
                                float* gxplane =
                                    need_x ? gx + (static_cast<std::int64_t>(n) * C + c) * H * W : nullptr;
                                const float* wck =
                                    tw.data.data() + (static_cast<std::int64_t>(c) * K + k) * 9;
                                float* gwck =
                                    need_w ? gw + (static_cast<std::int64_t>(c) * K + k) * 9 : nullptr;
                                for (int kh = 0; kh < 3; ++kh) {
                                    int ih_lo, ih_hi;
                                    window_bounds(kh, stride, OH, H, ih_lo, ih_hi);
                                    for (int kw = 0; kw < 3; ++kw) {
                                        int iw_lo, iw_hi;
                                        window_bounds(kw, stride, OW, W, iw_lo, iw_hi);
                                        const float wv = wck[kh * 3 + kw];
                                        float wacc = 0.0f;
                                        for (int ih = ih_lo; ih < ih_hi; ++ih) {
                                            const int oh = ih * stride - 1 + kh;
                                            const float* grow = gplane + static_cast<std::int64_t>(oh) * OW;
                                            const float* xrow = xplane + static_cast<std::int64_t>(ih) * W;
                                            float* gxrow =
                                                need_x ? gxplane + static_cast<std::int64_t>(ih) * W : nullptr;
                                            for (int iw = iw_lo; iw < iw_hi; ++iw) {
                                                const float gv = grow[iw * stride - 1 + kw];
                                                if (need_x) gxrow[iw] += wv * gv;
                                                wacc += xrow[iw] * gv;
                                            }
                                        }
                                        if (need_w) gwck[kh * 3 + kw] += wacc;
                                    }
                                }
                            }
                        }
                    }
                },
                "conv2d_transpose");
}

Var Tape::softmax(Var logits) {
    check(logits);
    const Tensor& tz = node(logits).value;
    if (tz.rank() != 2) throw TensorError("softmax: expected [N,C], got " + tz.shape_str());
    const int N = tz.dim(0), C = tz.dim(1);
    Tensor out = Tensor::zeros({N, C});
    for (int n = 0; n < N; ++n) {
        const float* z = tz.data.data() + static_cast<std::int64_t>(n) * C;
        float* p = out.data.data() + static_cast<std::int64_t>(n) * C;
        float m = z[0];
        for (int c = 1; c < C; ++c) m = std::max(m, z[c]);
        float s = 0.0f;
        for (int c = 0; c < C; ++c) {
            p[c] = std::exp(z[c] - m);
            s += p[c];
        }
        for (int c = 0; c < C; ++c) p[c] /= s;
    }
    int iz = logits.id;
    return push(std::move(out), node(logits).requires_grad,
                [iz, N, C](Tape& t, int self) {
                    Node& nz = t.nodes_[static_cast<size_t>(iz)];
                    if (!nz.requires_grad) return;
                    const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
                    const Tensor& p = t.nodes_[static_cast<size_t>(self)].value;
                    float* gz = t.grad_buffer(iz);
                    for (int n = 0; n < N; ++n) {
                        const float* gr = g.data.data() + static_cast<std::int64_t>(n) * C;
                        const float* pr = p.data.data() + static_cast<std::int64_t>(n) * C;
                        float dot = 0.0f;
                        for (int c = 0; c < C; ++c) dot += gr[c] * pr[c];
                        float* gzr = gz + static_cast<std::int64_t>(n) * C;
                        for (int c = 0; c < C; ++c) gzr[c] += pr[c] * (gr[c] - dot);
                    }
                },
                "softmax");
}

Var Tape::cross_entropy(Var logits, std::vector<int> labels) {
    check(logits);
    const Tensor& tz = node(logits).value;
    if (tz.rank() != 2) throw TensorError("cross_entropy: expected [N,C], got " + tz.shape_str());
    const int N = tz.dim(0), C = tz.dim(1);
    if (static_cast<int>(labels.size()) != N) throw TensorError("cross_entropy: label count mismatch");
    for (int y : labels)
        if (y < 0 || y >= C) throw TensorError("cross_entropy: label out of range");

    Tensor probs = Tensor::zeros({N, C});
    std::vector<float> losses(static_cast<size_t>(N));
    for (int n = 0; n < N; ++n) {
        const float* z = tz.data.data() + static_cast<std::int64_t>(n) * C;
        float* p = probs.data.data() + static_cast<std::int64_t>(n) * C;
        float m = z[0];
        for (int c = 1; c < C; ++c) m = std::max(m, z[c]);
        float s = 0.0f;
        for (int c = 0; c < C; ++c) {
            p[c] = std::exp(z[c] - m);
            s += p[c];
        }
        for (int c = 0; c < C; ++c) p[c] /= s;
        losses[static_cast<size_t>(n)] = std::log(s) + m - z[labels[static_cast<size_t>(n)]];
    }
    Tensor out = Tensor::scalar(pairwise_sum(losses.data(), N) / static_cast<float>(N));
    int iz = logits.id;
    auto saved = std::make_shared<std::pair<Tensor, std::vector<int>>>(std::move(probs), std::move(labels));
    return push(std::move(out), node(logits).requires_grad,
                [iz, N, C, saved](Tape& t, int self) {
                    Node& nz = t.nodes_[static_cast<size_t>(iz)];
                    if (!nz.requires_grad) return;
                    const float gs = t.nodes_[static_cast<size_t>(self)].grad[0];
                    const Tensor& p = saved->first;
                    const std::vector<int>& y = saved->second;
                    float* gz = t.grad_buffer(iz);
                    const float inv = gs / static_cast<float>(N);
                    for (int n = 0; n < N; ++n) {
                        const float* pr = p.data.data() + static_cast<std::int64_t>(n) * C;
                        float* gzr = gz + static_cast<std::int64_t>(n) * C;
                        for (int c = 0; c < C; ++c) gzr[c] += inv * pr[c];
                        gzr[y[static_cast<size_t>(n)]] -= inv;
                    }
                },
                "cross_entropy");
}

Var Tape::mse(Var a, Var b) {
    check(a);
    check(b);
    const Tensor& ta = node(a).value;
    const Tensor& tb = node(b).value;
    if (!ta.same_shape(tb)) throw TensorError("mse: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
    const std::int64_t n = ta.numel();
    std::vector<float> sq(static_cast<size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        float d = ta[i] - tb[i];
        sq[static_cast<size_t>(i)] = d * d;
    }
    Tensor out = Tensor::scalar(pairwise_sum(sq.data(), n) / static_cast<float>(n));
    bool rg = node(a).requires_grad || node(b).requires_grad;
    int ia = a.id, ib = b.id;
    return push(std::move(out), rg,
                [ia, ib, n](Tape& t, int self) {
                    const float gs = t.nodes_[static_cast<size_t>(self)].grad[0];
                    const Tensor& ta = t.nodes_[static_cast<size_t>(ia)].value;
                    const Tensor& tb = t.nodes_[static_cast<size_t>(ib)].value;
                    const float k = 2.0f * gs / static_cast<float>(n);
                    if (t.nodes_[static_cast<size_t>(ia)].requires_grad) {
                        float* ga = t.grad_buffer(ia);
                        for (std::int64_t i = 0; i < n; ++i) ga[i] += k * (ta[i] - tb[i]);
                    }
                    if (t.nodes_[static_cast<size_t>(ib)].requires_grad) {
                        float* gb = t.grad_buffer(ib);
                        for (std::int64_t i = 0; i < n; ++i) gb[i] -= k * (ta[i] - tb[i]);
                    }
                },
                "mse");
}

Var Tape::sum(Var a) {
    check(a);
    const Tensor& ta = node(a).value;
    Tensor out = Tensor::scalar(pairwise_sum(ta.data.data(), ta.numel()));
    int ia = a.id;
    return push(std::move(out), node(a).requires_grad,
                [ia](Tape& t, int self) {
                    Node& na = t.nodes_[static_cast<size_t>(ia)];
                    if (!na.requires_grad) return;
                    const float gs = t.nodes_[static_cast<size_t>(self)].grad[0];
                    float* ga = t.grad_buffer(ia);
                    for (std::int64_t i = 0; i < na.value.numel(); ++i) ga[i] += gs;
                },
                "sum");
}

Var Tape::mean(Var a) {
    check(a);
    const Tensor& ta = node(a).value;
    const std::int64_t n = ta.numel();
    Tensor out = Tensor::scalar(pairwise_sum(ta.data.data(), n) / static_cast<float>(n));
    int ia = a.id;
    return push(std::move(out), node(a).requires_grad,
                [ia, n](Tape& t, int self) {
                    Node& na = t.nodes_[static_cast<size_t>(ia)];
                    if (!na.requires_grad) return;
                    const float gs = t.nodes_[static_cast<size_t>(self)].grad[0] / static_cast<float>(n);
                    float* ga = t.grad_buffer(ia);
                    for (std::int64_t i = 0; i < n; ++i) ga[i] += gs;
                },
                "mean");
}

Var Tape::pick(Var a, int row, int col) {
    check(a);
    const Tensor& ta = node(a).value;
    if (ta.rank() != 2) throw TensorError("pick: expected [N,C], got " + ta.shape_str());
    const int N = ta.dim(0), C = ta.dim(1);
    if (row < 0 || row >= N || col < 0 || col >= C) throw TensorError("pick: index out of range");
    Tensor out = Tensor::scalar(ta[static_cast<std::int64_t>(row) * C + col]);
    int ia = a.id;
    return push(std::move(out), node(a).requires_grad,
                [ia, row, col, C](Tape& t, int self) {
                    Node& na = t.nodes_[static_cast<size_t>(ia)];
                    if (!na.requires_grad) return;
                    const float gs = t.nodes_[static_cast<size_t>(self)].grad[0];
                    float* ga = t.grad_buffer(ia);
                    ga[static_cast<std::int64_t>(row) * C + col] += gs;
                },
                "pick");
}

void Tape::backward(Var loss) {
    check(loss);
    if (consumed_) throw TensorError("backward: tape already consumed");
    Node& ln = node(loss);
    if (ln.value.numel() != 1) throw TensorError("backward: loss is not scalar, shape " + ln.value.shape_str());
    consumed_ = true;
    ln.grad = Tensor::scalar(1.0f);
    ln.has_grad = true;
    for (int id = loss.id; id >= 0; --id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (!n.has_grad || !n.backprop || !n.requires_grad) continue;
        n.backprop(*this, id);
    }
    for (auto& n : nodes_)
        if (n.has_grad) n.grad.require_finite("gradient");
}

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x, float h) {
    if (!(h > 0.0f)) throw TensorError("finite_diff_grad: h must be positive");
    Tensor g = Tensor::zeros(x.shape);
    Tensor probe = x;
    for (std::int64_t i = 0; i < x.numel(); ++i) {
        const float orig = probe[i];
        const float xp = orig + h;
        const float xm = orig - h;
        probe[i] = xp;
        const double fp = f(probe);
        probe[i] = xm;
        const double fm = f(probe);
        probe[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NumericError("finite_diff_grad: non-finite function evaluation");
        // Divide by the perturbation actually applied after f32 rounding.
        g[i] = static_cast<float>((fp - fm) / (static_cast<double>(xp) - static_cast<double>(xm)));
    }
    return g;
}

float grad_rel_error(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw TensorError("grad_rel_error: shape mismatch");
    float num = 0.0f, den = 0.0f;
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        num = std::max(num, std::fabs(a[i] - b[i]));
        den = std::max(den, std::fabs(b[i]));
    }
    return den > 0.0f ? num / den : num;
}

}  // namespace noisec
