#ifndef V4E_AUTODIFF_HPP
#define V4E_AUTODIFF_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "v4e/tensor.hpp"

namespace v4e {

// Reverse-mode autodiff over Tensor<T>. A Tape owns the nodes of one forward
// pass; ops append nodes eagerly and record backward closures. Nodes are
// created in topological order, so backward() is a single reverse sweep.
// Subgraphs whose inputs never require gradients (e.g. the frozen teacher)
// carry no closures and allocate no gradient buffers.
template <typename T>
class Tape;

template <typename T>
struct Var {
    Tape<T>* tape = nullptr;
    int id = -1;
    bool valid() const { return tape != nullptr && id >= 0; }
};

template <typename T>
class Tape {
public:
    using BackFn = std::function<void(Tape&, int self)>;

    Var<T> leaf(Tensor<T> value, bool requires_grad = false) {
        return push(std::move(value), requires_grad, {});
    }

    Var<T> push(Tensor<T> value, bool requires_grad, BackFn back) {
        nodes_.push_back(Node{std::move(value), Tensor<T>{}, requires_grad,
                              requires_grad ? std::move(back) : BackFn{}});
        return Var<T>{this, static_cast<int>(nodes_.size()) - 1};
    }

    const Tensor<T>& val(Var<T> v) const { return nodes_[check(v)].value; }
    const Tensor<T>& val(int id) const { return nodes_[static_cast<size_t>(id)].value; }

    bool requires_grad(Var<T> v) const { return nodes_[check(v)].requires_grad; }
    bool requires_grad(int id) const { return nodes_[static_cast<size_t>(id)].requires_grad; }

    // Zero tensor if nothing flowed into this node.
    Tensor<T> grad(Var<T> v) const {
        const Node& n = nodes_[check(v)];
        if (n.grad.data.empty()) return Tensor<T>::zeros(n.value.shape);
        return n.grad;
    }

    Tensor<T>& ensure_grad(int id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (n.grad.data.empty()) n.grad = Tensor<T>::zeros(n.value.shape);
        return n.grad;
    }

    // Incoming cotangent of a node; only meaningful inside backward closures.
    const Tensor<T>& grad_of(int id) const { return nodes_[static_cast<size_t>(id)].grad; }

    bool has_grad(int id) const { return !nodes_[static_cast<size_t>(id)].grad.data.empty(); }

    void backward(Var<T> root) {
        size_t r = check(root);
        if (nodes_[r].value.numel() != 1) throw std::logic_error("backward: root must be scalar");
        if (!nodes_[r].requires_grad) throw std::logic_error("backward: root does not require grad");
        ensure_grad(static_cast<int>(r)).data[0] = T(1);
        for (int i = static_cast<int>(r); i >= 0; --i) {
            Node& n = nodes_[static_cast<size_t>(i)];
            if (n.requires_grad && !n.grad.data.empty() && n.backward) n.backward(*this, i);
        }
    }

    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        bool requires_grad;
        BackFn backward;
    };

    size_t check(Var<T> v) const {
        if (v.tape != this || v.id < 0 || static_cast<size_t>(v.id) >= nodes_.size())
            throw std::logic_error("var does not belong to this tape");
        return static_cast<size_t>(v.id);
    }

    std::vector<Node> nodes_;
};

// Differentiable ops. Each returns a new node; backward closures capture
// parent ids plus whatever saved tensors the vjp needs.
namespace ad {

template <typename T>
Tape<T>& tape_of(Var<T> a, Var<T> b) {
    if (a.tape != b.tape) throw std::logic_error("vars from different tapes");
    return *a.tape;
}

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape != b.shape)
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape) +
                                    " vs " + shape_str(b.shape));
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
    Tape<T>& tp = tape_of(a, b);
    check_same_shape(tp.val(a), tp.val(b), "add");
    Tensor<T> y = tp.val(a);
    y.add_(tp.val(b));
    int ia = a.id, ib = b.id;
    return tp.push(std::move(y), tp.requires_grad(a) || tp.requires_grad(b),
                   [ia, ib](Tape<T>& t, int self) {
                       const Tensor<T>& g = t.grad_of(self);
                       if (t.requires_grad(ia)) t.ensure_grad(ia).add_(g);
                       if (t.requires_grad(ib)) t.ensure_grad(ib).add_(g);
                   });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
    Tape<T>& tp = tape_of(a, b);
    check_same_shape(tp.val(a), tp.val(b), "sub");
    Tensor<T> y = tp.val(a);
    y.add_(tp.val(b), T(-1));
    int ia = a.id, ib = b.id;
    return tp.push(std::move(y), tp.requires_grad(a) || tp.requires_grad(b),
                   [ia, ib](Tape<T>& t, int self) {
                       const Tensor<T>& g = t.grad_of(self);
                       if (t.requires_grad(ia)) t.ensure_grad(ia).add_(g);
                       if (t.requires_grad(ib)) t.ensure_grad(ib).add_(g, T(-1));
                   });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
    Tape<T>& tp = tape_of(a, b);
    check_same_shape(tp.val(a), tp.val(b), "mul");
    Tensor<T> y = tp.val(a);
    const Tensor<T>& bv = tp.val(b);
    for (size_t i = 0; i < y.data.size(); ++i) y.data[i] *= bv.data[i];
    int ia = a.id, ib = b.id;
    return tp.push(std::move(y), tp.requires_grad(a) || tp.requires_grad(b),
                   [ia, ib](Tape<T>& t, int self) {
                       const Tensor<T>& g = t.grad_of(self);
                       if (t.requires_grad(ia)) {
                           Tensor<T>& da = t.ensure_grad(ia);
                           const Tensor<T>& bv = t.val(ib);
                           for (size_t i = 0; i < g.data.size(); ++i) da.data[i] += g.data[i] * bv.data[i];
                       }
                       if (t.requires_grad(ib)) {
                           Tensor<T>& db = t.ensure_grad(ib);
                           const Tensor<T>& av = t.val(ia);
                           for (size_t i = 0; i < g.data.size(); ++i) db.data[i] += g.data[i] * av.data[i];
                       }
                   });
}

template <typename T>
Var<T> scale(Var<T> a, T c) {
    Tape<T>& tp = *a.tape;
    Tensor<T> y = tp.val(a);
    y.scale_(c);
    int ia = a.id;
    return tp.push(std::move(y), tp.requires_grad(a), [ia, c](Tape<T>& t, int self) {
        if (t.requires_grad(ia)) t.ensure_grad(ia).add_(t.grad_of(self), c);
    });
}

template <typename T>
Var<T> add_scalar(Var<T> a, T c) {
    Tape<T>& tp = *a.tape;
    Tensor<T> y = tp.val(a);
    for (auto& v : y.data) v += c;
    int ia = a.id;
    return tp.push(std::move(y), tp.requires_grad(a), [ia](Tape<T>& t, int self) {
        if (t.requires_grad(ia)) t.ensure_grad(ia).add_(t.grad_of(self));
    });
}

template <typename T>
Var<T> neg(Var<T> a) {
    return scale(a, T(-1));
}

// y[m,n] = a[m,k] * b[k,n]
template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
    Tape<T>& tp = tape_of(a, b);
    const Tensor<T>& av = tp.val(a);
    const Tensor<T>& bv = tp.val(b);
    if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0))
        throw std::invalid_argument("matmul: bad shapes " + shape_str(av.shape) + " x " + shape_str(bv.shape));
    int64_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
    Tensor<T> y({m, n});
    gemm(av.data.data(), bv.data.data(), y.data.data(), m, k, n);
    int ia = a.id, ib = b.id;
    return tp.push(std::move(y), tp.requires_grad(a) || tp.requires_grad(b),
                   [ia, ib, m, k, n](Tape<T>& t, int self) {
                       const Tensor<T>& g = t.grad_of(self);
                       if (t.requires_grad(ia))
                           gemm(g.data.data(), t.val(ib).data.data(), t.ensure_grad(ia).data.data(),
                                m, n, k, true, false, true);  // da += g * b^T
                       if (t.requires_grad(ib))
                           gemm(t.val(ia).data.data(), g.data.data(), t.ensure_grad(ib).data.data(),
                                k, m, n, true, true, false);  // db += a^T * g
                   });
}

// Batched matmul. a[B,m,k]; b[B,k,n] (or b[B,n,k] when trans_b).
template <typename T>
Var<T> bmm(Var<T> a, Var<T> b, bool trans_b = false) {
    Tape<T>& tp = tape_of(a, b);
    const Tensor<T>& av = tp.val(a);
    const Tensor<T>& bv = tp.val(b);
    if (av.rank() != 3 || bv.rank() != 3 || av.dim(0) != bv.dim(0))
        throw std::invalid_argument("bmm: bad shapes");
    int64_t B = av.dim(0), m = av.dim(1), k = av.dim(2);
    int64_t n = trans_b ? bv.dim(1) : bv.dim(2);
    if ((trans_b ? bv.dim(2) : bv.dim(1)) != k) throw std::invalid_argument("bmm: inner dim mismatch");
    Tensor<T> y({B, m, n});
    for (int64_t i = 0; i < B; ++i)
        gemm(av.data.data() + i * m * k, bv.data.data() + i * (trans_b ? n * k : k * n),
             y.data.data() + i * m * n, m, k, n, false, false, trans_b);
    int ia = a.id, ib = b.id;
    return tp.push(std::move(y), tp.requires_grad(a) || tp.requires_grad(b),
                   [ia, ib, B, m, k, n, trans_b](Tape<T>& t, int self) {
                       const Tensor<T>& g = t.grad_of(self);
                       const Tensor<T>& av = t.val(ia);
                       const Tensor<T>& bv = t.val(ib);
                       if (t.requires_grad(ia)) {
                           Tensor<T>& da = t.ensure_grad(ia);
                           for (int64_t i = 0; i < B; ++i) {
                               // da += g * b^T   (or g * b when b is already [n,k])
                               gemm(g.data.data() + i * m * n,
                                    bv.data.data() + i * (trans_b ? n * k : k * n),
                                    da.data.data() + i * m * k, m, n, k, true, false, !trans_b);
                           }
                       }
                       if (t.requires_grad(ib)) {
                           Tensor<T>& db = t.ensure_grad(ib);
                           for (int64_t i = 0; i < B; ++i) {
                               if (trans_b)  // db[n,k] += g^T[n,m] * a[m,k]
                                   gemm(g.data.data() + i * m * n, av.data.data() + i * m * k,
                                        db.data.data() + i * n * k, n, m, k, true, true, false);
                               else  // db[k,n] += a^T[k,m] * g[m,n]
                                   gemm(av.data.data() + i * m * k, g.data.data() + i * m * n,
                                        db.data.data() + i * k * n, k, m, n, true, true, false);
                           }
                       }
                   });
}

template <typename T>
Var<T> silu(Var<T> a) {
    Tape<T>& tp = *a.tape;
    const Tensor<T>& x = tp.val(a);
    Tensor<T> y(x.shape);
    Tensor<T> sig(x.shape);
    for (size_t i = 0; i < x.data.size(); ++i) {
        T s = T(1) / (T(1) + std::exp(-x.data[i]));
        sig.data[i] = s;
        y.data[i] = x.data[i] * s;
    }
    int ia = a.id;
    return tp.push(std::move(y), tp.requires_grad(a),
                   [ia, sig = std::move(sig)](Tape<T>& t, int self) {
                       if (!t.requires_grad(ia)) return;
                       const Tensor<T>& g = t.grad_of(self);
                       const Tensor<T>& x = t.val(ia);
                       Tensor<T>& da = t.ensure_grad(ia);
                       for (size_t i = 0; i < g.data.size(); ++i) {
                           T s = sig.data[i];
                           da.data[i] += g.data[i] * s * (T(1) + x.data[i] * (T(1) - s));
                       }
                   });
}

template <typename T>
Var<T> sigmoid(Var<T> a) {
    Tape<T>& tp = *a.tape;
    const Tensor<T>& x = tp.val(a);
    Tensor<T> y(x.shape);
    for (size_t i = 0; i < x.data.size(); ++i) y.data[i] = T(1) / (T(1) + std::exp(-x.data[i]));
    int ia = a.id;
    return tp.push(std::move(y), tp.requires_grad(a), [ia](Tape<T>& t, int self) {
        if (!t.requires_grad(ia)) return;
        const Tensor<T>& g = t.grad_of(self);
        const Tensor<T>& y = t.val(self);
        Tensor<T>& da = t.ensure_grad(ia);
        for (size_t i = 0; i < g.data.size(); ++i)
            da.data[i] += g.data[i] * y.data[i] * (T(1) - y.data[i]);
    });
}

// Softmax over the last dimension.
template <typename T>
Var<T> softmax_lastdim(Var<T> a) {
    Tape<T>& tp = *a.tape;
    const Tensor<T>& x = tp.val(a);
    if (x.rank() < 1) throw std::invalid_argument("softmax: rank 0");
    int64_t n = x.shape.back();
    int64_t rows = x.numel() / n;
    Tensor<T> y(x.shape);
    for (int64_t r = 0; r < rows; ++r) {
        const T* xi = x.data.data() + r * n;
        T* yi = y.data.data() + r * n;
        T mx = xi[0];
        for (int64_t i = 1; i < n; ++i) mx = std::max(mx, xi[i]);
        T denom = T(0);
        for (int64_t i = 0; i < n; ++i) {
            yi[i] = std::exp(xi[i] - mx);
            denom += yi[i];
        }
        T inv = T(1) / denom;
        for (int64_t i = 0; i < n; ++i) yi[i] *= inv;
    }
    int ia = a.id;
    return tp.push(std::move(y), tp.requires_grad(a), [ia, n, rows](Tape<T>& t, int self) {
        if (!t.requires_grad(ia)) return;
        const Tensor<T>& g = t.grad_of(self);
        const Tensor<T>& y = t.val(self);
        Tensor<T>& da = t.ensure_grad(ia);
        for (int64_t r = 0; r < rows; ++r) {
            const T* gi = g.data.data() + r * n;
            const T* yi = y.data.data() + r * n;
            T* di = da.data.data() + r * n;
            T dot = T(0);
            for (int64_t i = 0; i < n; ++i) dot += gi[i] * yi[i];
            for (int64_t i = 0; i < n; ++i) di[i] += yi[i] * (gi[i] - dot);
        }
    });
}

// LayerNorm over the last dimension with affine parameters gamma/beta [n].
template <typename T>
Var<T> layer_norm(Var<T> a, Var<T> gamma, Var<T> beta, T eps = T(1e-5)) {
    Tape<T>& tp = *a.tape;
    const Tensor<T>& x = tp.val(a);
    const Tensor<T>& gv = tp.val(gamma);
    const Tensor<T>& bv = tp.val(beta);
    int64_t n = x.shape.back();
    if (gv.numel() != n || bv.numel() != n) throw std::invalid_argument("layer_norm: affine size mismatch");
    int64_t rows = x.numel() / n;
    Tensor<T> y(x.shape);
    Tensor<T> xhat(x.shape);
    Tensor<T> rstd({rows});
    for (int64_t r = 0; r < rows; ++r) {
        const T* xi = x.data.data() + r * n;
        T mean = T(0);
        for (int64_t i = 0; i < n; ++i) mean += xi[i];
        mean /= static_cast<T>(n);
        T var = T(0);
        for (int64_t i = 0; i < n; ++i) {
            T d = xi[i] - mean;
            var += d * d;
        }
        var /= static_cast<T>(n);
        T rs = T(1) / std::sqrt(var + eps);
        rstd.data[static_cast<size_t>(r)] = rs;
        T* xh = xhat.data.data() + r * n;
        T* yi = y.data.data() + r * n;
        for (int64_t i = 0; i < n; ++i) {
            xh[i] = (xi[i] - mean) * rs;
            yi[i] = gv.data[static_cast<size_t>(i)] * xh[i] + bv.data[static_cast<size_t>(i)];
        }
    }
    int ia = a.id, ig = gamma.id, ib = beta.id;
    bool rg = tp.requires_grad(a) || tp.requires_grad(gamma) || tp.requires_grad(beta);
    return tp.push(std::move(y), rg,
                   [ia, ig, ib, n, rows, xhat = std::move(xhat), rstd = std::move(rstd)](Tape<T>& t, int self) {
                       const Tensor<T>& g = t.grad_of(self);
                       const Tensor<T>& gv = t.val(ig);
                       if (t.requires_grad(ig)) {
                           Tensor<T>& dg = t.ensure_grad(ig);
                           for (int64_t r = 0; r < rows; ++r)
                               for (int64_t i = 0; i < n; ++i)
                                   dg.data[static_cast<size_t>(i)] +=
                                       g.data[static_cast<size_t>(r * n + i)] * xhat.data[static_cast<size_t>(r * n + i)];
                       }
                       if (t.requires_grad(ib)) {
                           Tensor<T>& db = t.ensure_grad(ib);
                           for (int64_t r = 0; r < rows; ++r)
                               for (int64_t i = 0; i < n; ++i)
                                   db.data[static_cast<size_t>(i)] += g.data[static_cast<size_t>(r * n + i)];
                       }
                       if (t.requires_grad(ia)) {
                           Tensor<T>& da = t.ensure_grad(ia);
                           for (int64_t r = 0; r < rows; ++r) {
                               const T* gi = g.data.data() + r * n;
                               const T* xh = xhat.data.data() + r * n;
                               T rs = rstd.data[static_cast<size_t>(r)];
                               T m1 = T(0), m2 = T(0);
                               for (int64_t i = 0; i < n; ++i) {
                                   T gg = gi[i] * gv.data[static_cast<size_t>(i)];
                                   m1 += gg;
                                   m2 += gg * xh[i];
                               }
                               m1 /= static_cast<T>(n);
                               m2 /= static_cast<T>(n);
                               T* di = da.data.data() + r * n;
                               for (int64_t i = 0; i < n; ++i) {
                                   T gg = gi[i] * gv.data[static_cast<size_t>(i)];
                                   di[i] += rs * (gg - m1 - xh[i] * m2);
                               }
                           }
                       }
                   });
}

template <typename T>
Var<T> sum(Var<T> a) {
    Tape<T>& tp = *a.tape;
    const Tensor<T>& x = tp.val(a);
    T s = T(0);
    for (T v : x.data) s += v;
    int ia = a.id;
    return tp.push(Tensor<T>::scalar(s), tp.requires_grad(a), [ia](Tape<T>& t, int self) {
        if (!t.requires_grad(ia)) return;
        T g = t.grad_of(self).data[0];
        Tensor<T>& da = t.ensure_grad(ia);
        for (auto& v : da.data) v += g;
    });
}

template <typename T>
Var<T> mean(Var<T> a) {
    const Tensor<T>& x = a.tape->val(a);
    return scale(sum(a), T(1) / static_cast<T>(x.numel()));
}

// sum of squares
template <typename T>
Var<T> sum_sq(Var<T> a) {
    Tape<T>& tp = *a.tape;
    const Tensor<T>& x = tp.val(a);
    T s = T(0);
    for (T v : x.data) s += v * v;
    int ia = a.id;
    return tp.push(Tensor<T>::scalar(s), tp.requires_grad(a), [ia](Tape<T>& t, int self) {
        if (!t.requires_grad(ia)) return;
        T g = t.grad_of(self).data[0];
        const Tensor<T>& x = t.val(ia);
        Tensor<T>& da = t.ensure_grad(ia);
        for (size_t i = 0; i < da.data.size(); ++i) da.data[i] += T(2) * x.data[i] * g;
    });
}

// sum of absolute values; subgradient 0 at 0
template <typename T>
Var<T> abs_sum(Var<T> a) {
    Tape<T>& tp = *a.tape;
    const Tensor<T>& x = tp.val(a);
    T s = T(0);
    for (T v : x.data) s += std::abs(v);
    int ia = a.id;
    return tp.push(Tensor<T>::scalar(s), tp.requires_grad(a), [ia](Tape<T>& t, int self) {
        if (!t.requires_grad(ia)) return;
        T g = t.grad_of(self).data[0];
        const Tensor<T>& x = t.val(ia);
        Tensor<T>& da = t.ensure_grad(ia);
        for (size_t i = 0; i < da.data.size(); ++i) {
            T v = x.data[i];
            da.data[i] += g * (v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)));
        }
    });
}

template <typename T>
Var<T> reshape(Var<T> a, Shape s) {
    Tape<T>& tp = *a.tape;
    Tensor<T> y = tp.val(a).reshaped(std::move(s));
    int ia = a.id;
    Shape orig = tp.val(a).shape;
    return tp.push(std::move(y), tp.requires_grad(a), [ia, orig](Tape<T>& t, int self) {
        if (!t.requires_grad(ia)) return;
        t.ensure_grad(ia).add_(t.grad_of(self).reshaped(orig));
    });
}

namespace detail {

inline std::vector<int64_t> row_major_strides(const Shape& s) {
    std::vector<int64_t> st(s.size());
    int64_t acc = 1;
    for (size_t i = s.size(); i-- > 0;) {
        st[i] = acc;
        acc *= s[i];
    }
    return st;
}

}  // namespace detail

// y has dims reordered so that y.shape[d] = x.shape[perm[d]].
template <typename T>
Var<T> permute(Var<T> a, std::vector<int> perm) {
    Tape<T>& tp = *a.tape;
    const Tensor<T>& x = tp.val(a);
    if (perm.size() != x.rank()) throw std::invalid_argument("permute: rank mismatch");
    Shape yshape(perm.size());
    for (size_t d = 0; d < perm.size(); ++d) yshape[d] = x.dim(static_cast<size_t>(perm[d]));
    Tensor<T> y(yshape);
    // iterate over x linearly, scatter into y
    auto ystrides = detail::row_major_strides(yshape);
    std::vector<int64_t> idx(x.rank(), 0);
    for (int64_t lin = 0; lin < x.numel(); ++lin) {
        int64_t yoff = 0;
        for (size_t d = 0; d < perm.size(); ++d) yoff += idx[static_cast<size_t>(perm[d])] * ystrides[d];
        y.data[static_cast<size_t>(yoff)] = x.data[static_cast<size_t>(lin)];
        for (size_t d = x.rank(); d-- > 0;) {
            if (++idx[d] < x.shape[d]) break;
            idx[d] = 0;
        }
    }
    int ia = a.id;
    Shape xshape = x.shape;
    return tp.push(std::move(y), tp.requires_grad(a), [ia, perm, xshape](Tape<T>& t, int self) {
        if (!t.requires_grad(ia)) return;
        const Tensor<T>& g = t.grad_of(self);
        Tensor<T>& da = t.ensure_grad(ia);
        auto xstrides = detail::row_major_strides(xshape);
        auto ystrides = detail::row_major_strides(g.shape);
        std::vector<int64_t> idx(xshape.size(), 0);
        for (int64_t lin = 0; lin < da.numel(); ++lin) {
            int64_t yoff = 0;
            for (size_t d = 0; d < perm.size(); ++d) yoff += idx[static_cast<size_t>(perm[d])] * ystrides[d];
            da.data[static_cast<size_t>(lin)] += g.data[static_cast<size_t>(yoff)];
            for (size_t d = xshape.size(); d-- > 0;) {
                if (++idx[d] < xshape[d]) break;
                idx[d] = 0;
            }
        }
    });
}

template <typename T>
Var<T> slice(Var<T> a, size_t axis, int64_t start, int64_t len) {
    Tape<T>& tp = *a.tape;
    const Tensor<T>& x = tp.val(a);
    if (axis >= x.rank() || start < 0 || start + len > x.dim(axis))
        throw std::invalid_argument("slice: out of range");
    Shape yshape = x.shape;
    yshape[axis] = len;
    int64_t outer = 1, inner = 1;
    for (size_t d = 0; d < axis; ++d) outer *= x.dim(d);
    for (size_t d = axis + 1; d < x.rank(); ++d) inner *= x.dim(d);
    int64_t xa = x.dim(axis);
    Tensor<T> y(yshape);
    for (int64_t o = 0; o < outer; ++o)
        std::copy_n(x.data.data() + (o * xa + start) * inner, len * inner,
                    y.data.data() + o * len * inner);
    int ia = a.id;
    return tp.push(std::move(y), tp.requires_grad(a),
                   [ia, outer, inner, xa, start, len](Tape<T>& t, int self) {
                       if (!t.requires_grad(ia)) return;
                       const Tensor<T>& g = t.grad_of(self);
                       Tensor<T>& da = t.ensure_grad(ia);
                       for (int64_t o = 0; o < outer; ++o) {
                           const T* gs = g.data.data() + o * len * inner;
                           T* ds = da.data.data() + (o * xa + start) * inner;
                           for (int64_t i = 0; i < len * inner; ++i) ds[i] += gs[i];
                       }
                   });
}

template <typename T>
Var<T> concat(size_t axis, const std::vector<Var<T>>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat: empty");
    Tape<T>& tp = *parts[0].tape;
    const Tensor<T>& first = tp.val(parts[0]);
    Shape yshape = first.shape;
    int64_t total = 0;
    bool rg = false;
    for (const auto& p : parts) {
        const Tensor<T>& v = tp.val(p);
        if (v.rank() != first.rank()) throw std::invalid_argument("concat: rank mismatch");
        for (size_t d = 0; d < v.rank(); ++d)
            if (d != axis && v.dim(d) != first.dim(d)) throw std::invalid_argument("concat: shape mismatch");
        total += v.dim(axis);
        rg = rg || tp.requires_grad(p);
    }
    yshape[axis] = total;
    int64_t outer = 1, inner = 1;
    for (size_t d = 0; d < axis; ++d) outer *= yshape[d];
    for (size_t d = axis + 1; d < yshape.size(); ++d) inner *= yshape[d];
    Tensor<T> y(yshape);
    std::vector<int> ids;
    std::vector<int64_t> lens;
    int64_t off = 0;
    for (const auto& p : parts) {
        const Tensor<T>& v = tp.val(p);
        int64_t la = v.dim(axis);
        for (int64_t o = 0; o < outer; ++o)
            std::copy_n(v.data.data() + o * la * inner, la * inner,
                        y.data.data() + (o * total + off) * inner);
        ids.push_back(p.id);
        lens.push_back(la);
        off += la;
    }
    return tp.push(std::move(y), rg, [ids, lens, outer, inner, total](Tape<T>& t, int self) {
        const Tensor<T>& g = t.grad_of(self);
        int64_t off = 0;
        for (size_t pi = 0; pi < ids.size(); ++pi) {
            int64_t la = lens[pi];
            if (t.requires_grad(ids[pi])) {
                Tensor<T>& da = t.ensure_grad(ids[pi]);
                for (int64_t o = 0; o < outer; ++o) {
                    const T* gs = g.data.data() + (o * total + off) * inner;
                    T* ds = da.data.data() + o * la * inner;
                    for (int64_t i = 0; i < la * inner; ++i) ds[i] += gs[i];
                }
            }
            off += la;
        }
    });
}

// y[k, ...] = x[...] repeated k times along a new leading axis.
template <typename T>
Var<T> tile0(Var<T> a, int64_t k) {
    Tape<T>& tp = *a.tape;
    const Tensor<T>& x = tp.val(a);
    Shape yshape;
    yshape.push_back(k);
    for (int64_t d : x.shape) yshape.push_back(d);
    Tensor<T> y(yshape);
    int64_t n = x.numel();
    for (int64_t i = 0; i < k; ++i) std::copy_n(x.data.data(), n, y.data.data() + i * n);
    int ia = a.id;
    return tp.push(std::move(y), tp.requires_grad(a), [ia, k, n](Tape<T>& t, int self) {
        if (!t.requires_grad(ia)) return;
        const Tensor<T>& g = t.grad_of(self);
        Tensor<T>& da = t.ensure_grad(ia);
        for (int64_t i = 0; i < k; ++i) {
            const T* gs = g.data.data() + i * n;
            for (int64_t j = 0; j < n; ++j) da.data[static_cast<size_t>(j)] += gs[j];
        }
    });
}

// a[R,n] + b[n] broadcast over rows.
template <typename T>
Var<T> add_rowbcast(Var<T> a, Var<T> b) {
    Tape<T>& tp = tape_of(a, b);
    const Tensor<T>& av = tp.val(a);
    const Tensor<T>& bv = tp.val(b);
    int64_t n = av.shape.back();
    if (bv.numel() != n) throw std::invalid_argument("add_rowbcast: size mismatch");
    int64_t rows = av.numel() / n;
    Tensor<T> y = av;
    for (int64_t r = 0; r < rows; ++r)
        for (int64_t i = 0; i < n; ++i) y.data[static_cast<size_t>(r * n + i)] += bv.data[static_cast<size_t>(i)];
    int ia = a.id, ib = b.id;
    return tp.push(std::move(y), tp.requires_grad(a) || tp.requires_grad(b),
                   [ia, ib, rows, n](Tape<T>& t, int self) {
                       const Tensor<T>& g = t.grad_of(self);
                       if (t.requires_grad(ia)) t.ensure_grad(ia).add_(g);
                       if (t.requires_grad(ib)) {
                           Tensor<T>& db = t.ensure_grad(ib);
                           for (int64_t r = 0; r < rows; ++r)
                               for (int64_t i = 0; i < n; ++i)
                                   db.data[static_cast<size_t>(i)] += g.data[static_cast<size_t>(r * n + i)];
                       }
                   });
}

struct Conv3dSpec {
    int64_t kd = 1, kh = 1, kw = 1;
    int64_t sd = 1, sh = 1, sw = 1;
    int64_t pad_d_left = 0;  // causal: temporal padding on the past side only
    int64_t pad_h = 0, pad_w = 0;
};

// x[D,H,W,Ci] * w[kd,kh,kw,Ci,Co] + b[Co] -> y[D',H',W',Co], via im2col + gemm.
template <typename T>
Var<T> conv3d(Var<T> x, Var<T> w, Var<T> b, const Conv3dSpec& sp) {
    Tape<T>& tp = *x.tape;
    const Tensor<T>& xv = tp.val(x);
    const Tensor<T>& wv = tp.val(w);
    const Tensor<T>& bv = tp.val(b);
    if (xv.rank() != 4 || wv.rank() != 5) throw std::invalid_argument("conv3d: bad ranks");
    int64_t D = xv.dim(0), H = xv.dim(1), W = xv.dim(2), Ci = xv.dim(3);
    if (wv.dim(0) != sp.kd || wv.dim(1) != sp.kh || wv.dim(2) != sp.kw || wv.dim(3) != Ci)
        throw std::invalid_argument("conv3d: weight shape mismatch");
    int64_t Co = wv.dim(4);
    if (bv.numel() != Co) throw std::invalid_argument("conv3d: bias size mismatch");
    int64_t outD = (D + sp.pad_d_left - sp.kd) / sp.sd + 1;
    int64_t outH = (H + 2 * sp.pad_h - sp.kh) / sp.sh + 1;
    int64_t outW = (W + 2 * sp.pad_w - sp.kw) / sp.sw + 1;
    if (outD < 1 || outH < 1 || outW < 1) throw std::invalid_argument("conv3d: empty output");
    int64_t P = outD * outH * outW;
    int64_t K = sp.kd * sp.kh * sp.kw * Ci;

    Tensor<T> cols({P, K});
    int64_t p = 0;
    for (int64_t od = 0; od < outD; ++od)
        for (int64_t oh = 0; oh < outH; ++oh)
            for (int64_t ow = 0; ow < outW; ++ow, ++p) {
                T* row = cols.data.data() + p * K;
                int64_t c = 0;
                for (int64_t a = 0; a < sp.kd; ++a) {
                    int64_t id = od * sp.sd + a - sp.pad_d_left;
                    for (int64_t bb = 0; bb < sp.kh; ++bb) {
                        int64_t ih = oh * sp.sh + bb - sp.pad_h;
                        for (int64_t cc = 0; cc < sp.kw; ++cc, c += Ci) {
                            int64_t iw = ow * sp.sw + cc - sp.pad_w;
                            if (id >= 0 && id < D && ih >= 0 && ih < H && iw >= 0 && iw < W)
                                std::copy_n(xv.data.data() + ((id * H + ih) * W + iw) * Ci, Ci, row + c);
                            else
                                std::fill_n(row + c, Ci, T(0));
                        }
                    }
                }
            }

    Tensor<T> y({outD, outH, outW, Co});
    gemm(cols.data.data(), wv.data.data(), y.data.data(), P, K, Co);
    for (int64_t i = 0; i < P; ++i)
        for (int64_t co = 0; co < Co; ++co) y.data[static_cast<size_t>(i * Co + co)] += bv.data[static_cast<size_t>(co)];

    int ix = x.id, iw = w.id, ib = b.id;
    bool rg = tp.requires_grad(x) || tp.requires_grad(w) || tp.requires_grad(b);
    Shape xshape = xv.shape;
    return tp.push(std::move(y), rg,
                   [ix, iw, ib, sp, xshape, cols = std::move(cols), P, K, Co, outD, outH, outW](Tape<T>& t, int self) {
                       const Tensor<T>& g = t.grad_of(self);  // [outD,outH,outW,Co]
                       if (t.requires_grad(ib)) {
                           Tensor<T>& db = t.ensure_grad(ib);
                           for (int64_t i = 0; i < P; ++i)
                               for (int64_t co = 0; co < Co; ++co)
                                   db.data[static_cast<size_t>(co)] += g.data[static_cast<size_t>(i * Co + co)];
                       }
                       if (t.requires_grad(iw)) {
                           // dw[K,Co] += cols^T[K,P] * g[P,Co]
                           gemm(cols.data.data(), g.data.data(), t.ensure_grad(iw).data.data(),
                                K, P, Co, true, true, false);
                       }
                       if (t.requires_grad(ix)) {
                           Tensor<T> dcols({P, K});
                           gemm(g.data.data(), t.val(iw).data.data(), dcols.data.data(),
                                P, Co, K, false, false, true);  // dcols = g * w^T
                           Tensor<T>& dx = t.ensure_grad(ix);
                           int64_t D = xshape[0], H = xshape[1], W = xshape[2], Ci = xshape[3];
                           int64_t p = 0;
                           for (int64_t od = 0; od < outD; ++od)
                               for (int64_t oh = 0; oh < outH; ++oh)
                                   for (int64_t ow = 0; ow < outW; ++ow, ++p) {
                                       const T* row = dcols.data.data() + p * K;
                                       int64_t c = 0;
                                       for (int64_t a = 0; a < sp.kd; ++a) {
                                           int64_t id = od * sp.sd + a - sp.pad_d_left;
                                           for (int64_t bb = 0; bb < sp.kh; ++bb) {
                                               int64_t ih = oh * sp.sh + bb - sp.pad_h;
                                               for (int64_t cc = 0; cc < sp.kw; ++cc, c += Ci) {
                                                   int64_t iw2 = ow * sp.sw + cc - sp.pad_w;
                                                   if (id >= 0 && id < D && ih >= 0 && ih < H && iw2 >= 0 && iw2 < W) {
                                                       T* dst = dx.data.data() + ((id * H + ih) * W + iw2) * Ci;
                                                       for (int64_t ci = 0; ci < Ci; ++ci) dst[ci] += row[c + ci];
                                                   }
                                               }
                                           }
                                       }
                                   }
                       }
                   });
}

// Nearest-neighbour upsample of x[D,H,W,C] by integer factors.
template <typename T>
Var<T> upsample_nearest3d(Var<T> a, int64_t fd, int64_t fh, int64_t fw) {
    Tape<T>& tp = *a.tape;
    const Tensor<T>& x = tp.val(a);
    if (x.rank() != 4) throw std::invalid_argument("upsample: rank != 4");
    int64_t D = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
    Tensor<T> y({D * fd, H * fh, W * fw, C});
    for (int64_t d = 0; d < D * fd; ++d)
        for (int64_t h = 0; h < H * fh; ++h)
            for (int64_t w = 0; w < W * fw; ++w)
                std::copy_n(x.data.data() + (((d / fd) * H + h / fh) * W + w / fw) * C, C,
                            y.data.data() + ((d * H * fh + h) * W * fw + w) * C);
    int ia = a.id;
    return tp.push(std::move(y), tp.requires_grad(a), [ia, fd, fh, fw, D, H, W, C](Tape<T>& t, int self) {
        if (!t.requires_grad(ia)) return;
        const Tensor<T>& g = t.grad_of(self);
        Tensor<T>& da = t.ensure_grad(ia);
        for (int64_t d = 0; d < D * fd; ++d)
            for (int64_t h = 0; h < H * fh; ++h)
                for (int64_t w = 0; w < W * fw; ++w) {
                    const T* gs = g.data.data() + ((d * H * fh + h) * W * fw + w) * C;
                    T* ds = da.data.data() + (((d / fd) * H + h / fh) * W + w / fw) * C;
                    for (int64_t c = 0; c < C; ++c) ds[c] += gs[c];
                }
    });
}

}  // namespace ad

}  // namespace v4e

#endif
