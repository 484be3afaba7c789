#ifndef V4E_TESTS_FINITE_DIFF_HPP
#define V4E_TESTS_FINITE_DIFF_HPP

#include <cmath>
#include <functional>

#include "v4e/tensor.hpp"

// Test-only oracle: central finite differences of a scalar function with
// respect to one input tensor. Independent of the autodiff path it checks.
namespace v4e::testing {

template <typename T>
Tensor<T> numeric_grad(const std::function<T(const Tensor<T>&)>& f, const Tensor<T>& x,
                       T eps = T(1e-5)) {
    Tensor<T> g(x.shape);
    Tensor<T> probe = x;
    for (int64_t i = 0; i < x.numel(); ++i) {
        T orig = probe[i];
        probe[i] = orig + eps;
        T hi = f(probe);
        probe[i] = orig - eps;
        T lo = f(probe);
        probe[i] = orig;
        g[i] = (hi - lo) / (T(2) * eps);
    }
    return g;
}

// Symmetric relative error with an absolute floor for near-zero pairs.
template <typename T>
T rel_err(T a, T b, T floor = T(1e-8)) {
    T denom = std::max({std::abs(a), std::abs(b), floor});
    return std::abs(a - b) / denom;
}

template <typename T>
T max_rel_err(const Tensor<T>& a, const Tensor<T>& b, T floor = T(1e-6)) {
    T worst = T(0);
    for (int64_t i = 0; i < a.numel(); ++i) worst = std::max(worst, rel_err(a[i], b[i], floor));
    return worst;
}

}  // namespace v4e::testing

#endif
