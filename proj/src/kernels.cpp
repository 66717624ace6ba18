#include "recoverl/kernels.hpp"

#include <cassert>
#include <cstring>

namespace recoverl::kernels {

// Row counts below this stay on one thread; spawning a team costs more than
// the work saves (single-state forwards hit this path constantly).
static constexpr int kParallelCutoff = 64;

void linear_forward(Matrix& y, const Matrix& x, const Matrix& w, const std::vector<double>& bias) {
    const int b = x.rows, k_dim = x.cols, o_dim = w.cols;
    assert(w.rows == k_dim && int(bias.size()) == o_dim);
    y.resize(b, o_dim);
#pragma omp parallel for schedule(static) if (b >= kParallelCutoff)
    for (int i = 0; i < b; ++i) {
        double* yi = y.row(i);
        const double* xi = x.row(i);
        std::memcpy(yi, bias.data(), sizeof(double) * o_dim);
        for (int k = 0; k < k_dim; ++k) {
            const double xk = xi[k];
            const double* wk = w.row(k);
            for (int o = 0; o < o_dim; ++o)
                yi[o] += xk * wk[o];
        }
    }
}

void linear_backward_input(Matrix& dx, const Matrix& dy, const Matrix& wt) {
    const int b = dy.rows, o_dim = dy.cols, k_dim = wt.cols;
    assert(wt.rows == o_dim);
    dx.resize(b, k_dim);
#pragma omp parallel for schedule(static) if (b >= kParallelCutoff)
    for (int i = 0; i < b; ++i) {
        double* dxi = dx.row(i);
        const double* dyi = dy.row(i);
        for (int o = 0; o < o_dim; ++o) {
            const double g = dyi[o];
            const double* wo = wt.row(o);
            for (int k = 0; k < k_dim; ++k)
                dxi[k] += g * wo[k];
        }
    }
}

void linear_backward_params(Matrix& dw, std::vector<double>& dbias, const Matrix& x, const Matrix& dy) {
    const int b = x.rows, k_dim = x.cols, o_dim = dy.cols;
    assert(dy.rows == b);
    dw.resize(k_dim, o_dim);
    dbias.assign(o_dim, 0.0);
#pragma omp parallel for schedule(static) if (k_dim >= kParallelCutoff)
    for (int k = 0; k < k_dim; ++k) {
        double* dwk = dw.row(k);
        for (int i = 0; i < b; ++i) {
            const double xik = x.at(i, k);
            const double* dyi = dy.row(i);
            for (int o = 0; o < o_dim; ++o)
                dwk[o] += xik * dyi[o];
        }
    }
    for (int i = 0; i < b; ++i) {
        const double* dyi = dy.row(i);
        for (int o = 0; o < o_dim; ++o)
            dbias[o] += dyi[o];
    }
}

void relu_forward(Matrix& y, const Matrix& x) {
    y.resize(x.rows, x.cols);
    const std::size_t n = x.data.size();
#pragma omp parallel for schedule(static) if (x.rows >= kParallelCutoff)
    for (std::ptrdiff_t j = 0; j < std::ptrdiff_t(n); ++j)
        y.data[j] = x.data[j] > 0.0 ? x.data[j] : 0.0;
}

void relu_backward_inplace(Matrix& d, const Matrix& post) {
    assert(d.rows == post.rows && d.cols == post.cols);
    const std::size_t n = d.data.size();
#pragma omp parallel for schedule(static) if (d.rows >= kParallelCutoff)
    for (std::ptrdiff_t j = 0; j < std::ptrdiff_t(n); ++j)
        if (!(post.data[j] > 0.0))
            d.data[j] = 0.0;
}

namespace ref {

void linear_forward(Matrix& y, const Matrix& x, const Matrix& w, const std::vector<double>& bias) {
    const int b = x.rows, k_dim = x.cols, o_dim = w.cols;
    assert(w.rows == k_dim && int(bias.size()) == o_dim);
    y.resize(b, o_dim);
    for (int i = 0; i < b; ++i)
        for (int o = 0; o < o_dim; ++o) {
            double acc = bias[o];
            for (int k = 0; k < k_dim; ++k)
                acc += x.at(i, k) * w.at(k, o);
            y.at(i, o) = acc;
        }
}

void linear_backward_input(Matrix& dx, const Matrix& dy, const Matrix& wt) {
    const int b = dy.rows, o_dim = dy.cols, k_dim = wt.cols;
    assert(wt.rows == o_dim);
    dx.resize(b, k_dim);
    for (int i = 0; i < b; ++i)
        for (int k = 0; k < k_dim; ++k) {
            double acc = 0.0;
            for (int o = 0; o < o_dim; ++o)
                acc += dy.at(i, o) * wt.at(o, k);
            dx.at(i, k) = acc;
        }
}

void linear_backward_params(Matrix& dw, std::vector<double>& dbias, const Matrix& x, const Matrix& dy) {
    const int b = x.rows, k_dim = x.cols, o_dim = dy.cols;
    assert(dy.rows == b);
    dw.resize(k_dim, o_dim);
    dbias.assign(o_dim, 0.0);
    for (int k = 0; k < k_dim; ++k)
        for (int o = 0; o < o_dim; ++o) {
            double acc = 0.0;
            for (int i = 0; i < b; ++i)
                acc += x.at(i, k) * dy.at(i, o);
            dw.at(k, o) = acc;
        }
    for (int o = 0; o < o_dim; ++o) {
        double acc = 0.0;
        for (int i = 0; i < b; ++i)
            acc += dy.at(i, o);
        dbias[o] = acc;
    }
}

void relu_forward(Matrix& y, const Matrix& x) {
    y.resize(x.rows, x.cols);
    for (std::size_t j = 0; j < x.data.size(); ++j)
        y.data[j] = x.data[j] > 0.0 ? x.data[j] : 0.0;
}

void relu_backward_inplace(Matrix& d, const Matrix& post) {
    assert(d.rows == post.rows && d.cols == post.cols);
    for (std::size_t j = 0; j < d.data.size(); ++j)
        if (!(post.data[j] > 0.0))
            d.data[j] = 0.0;
}

} // namespace ref

} // namespace recoverl::kernels
