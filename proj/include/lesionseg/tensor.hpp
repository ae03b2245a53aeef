#ifndef LESIONSEG_TENSOR_HPP
#define LESIONSEG_TENSOR_HPP

#include <vector>

#include "lesionseg/errors.hpp"

namespace lesionseg {

// Dense NCHW tensor of doubles.
struct Tensor4 {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<double> v;

    Tensor4() = default;
    Tensor4(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_), v(std::size_t(n_) * c_ * h_ * w_, 0.0) {}

    std::size_t size() const { return v.size(); }
    std::size_t idx(int in, int ic, int ih, int iw) const {
        return ((std::size_t(in) * c + ic) * h + ih) * w + iw;
    }
    double at(int in, int ic, int ih, int iw) const { return v[idx(in, ic, ih, iw)]; }
    double& at(int in, int ic, int ih, int iw) { return v[idx(in, ic, ih, iw)]; }

    double* plane(int in, int ic) { return v.data() + idx(in, ic, 0, 0); }
    const double* plane(int in, int ic) const { return v.data() + idx(in, ic, 0, 0); }

    bool same_shape(const Tensor4& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
    void zero() { std::fill(v.begin(), v.end(), 0.0); }
};

} // namespace lesionseg

#endif
