#ifndef V4E_TENSOR_HPP
#define V4E_TENSOR_HPP

#include <Eigen/Core>

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "v4e/rng.hpp"

namespace v4e {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

// Dense row-major tensor with value semantics. The scalar type is a template
// parameter: training runs in float, the 64-bit correctness checks in double.
template <typename T>
struct Tensor {
    Shape shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(Shape s) : shape(std::move(s)), data(static_cast<size_t>(shape_numel(shape)), T(0)) {}
    Tensor(Shape s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        if (static_cast<int64_t>(data.size()) != shape_numel(shape))
            throw std::invalid_argument("tensor: data size does not match shape " + shape_str(shape));
    }

    static Tensor zeros(Shape s) { return Tensor(std::move(s)); }

    static Tensor full(Shape s, T v) {
        Tensor t(std::move(s));
        std::fill(t.data.begin(), t.data.end(), v);
        return t;
    }

    static Tensor scalar(T v) { return full({}, v); }

    static Tensor randn(Shape s, Rng& rng, T stddev = T(1)) {
        Tensor t(std::move(s));
        for (auto& v : t.data) v = static_cast<T>(rng.normal()) * stddev;
        return t;
    }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    size_t rank() const { return shape.size(); }
    int64_t dim(size_t i) const { return shape.at(i); }

    T& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
    const T& operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

    T item() const {
        if (numel() != 1) throw std::logic_error("item() on non-scalar tensor " + shape_str(shape));
        return data[0];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    Tensor reshaped(Shape s) const {
        if (shape_numel(s) != numel())
            throw std::invalid_argument("reshape: numel mismatch " + shape_str(shape) + " -> " + shape_str(s));
        Tensor t;
        t.shape = std::move(s);
        t.data = data;
        return t;
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> t;
        t.shape = shape;
        t.data.resize(data.size());
        for (size_t i = 0; i < data.size(); ++i) t.data[i] = static_cast<U>(data[i]);
        return t;
    }

    void add_(const Tensor& o, T scale = T(1)) {
        if (!same_shape(o)) throw std::invalid_argument("add_: shape mismatch");
        for (size_t i = 0; i < data.size(); ++i) data[i] += scale * o.data[i];
    }

    void scale_(T s) {
        for (auto& v : data) v *= s;
    }
};

template <typename T>
using EigenMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<EigenMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const EigenMat<T>>;

// c[m,n] (+)= a[m,k] * b[k,n]
template <typename T>
void gemm(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n, bool accumulate = false,
          bool transpose_a = false, bool transpose_b = false) {
    auto run = [&](const auto& ae, const auto& be) {
        MatMap<T> cm(c, m, n);
        if (accumulate)
            cm.noalias() += ae * be;
        else
            cm.noalias() = ae * be;
    };
    if (!transpose_a && !transpose_b)
        run(ConstMatMap<T>(a, m, k), ConstMatMap<T>(b, k, n));
    else if (transpose_a && !transpose_b)
        run(ConstMatMap<T>(a, k, m).transpose(), ConstMatMap<T>(b, k, n));
    else if (!transpose_a && transpose_b)
        run(ConstMatMap<T>(a, m, k), ConstMatMap<T>(b, n, k).transpose());
    else
        run(ConstMatMap<T>(a, k, m).transpose(), ConstMatMap<T>(b, n, k).transpose());
}

}  // namespace v4e

#endif
