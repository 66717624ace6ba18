#pragma once
#include <vector>

#include "recoverl/mat.hpp"

namespace recoverl::kernels {

// Batched dense-layer kernels. Weights are stored input-major, w(k, o) for
// input k and output o, which lets every loop below run with a contiguous
// unit-stride inner dimension.
//
// The fast versions vectorize and split work across OpenMP threads, but each
// output element is still accumulated in the same fixed index order as the
// ref:: versions. Results are bitwise identical to ref:: for any shape and
// any thread count; the tests assert exactly that.

// y(b, o) = sum_k x(b, k) * w(k, o) + bias(o)
void linear_forward(Matrix& y, const Matrix& x, const Matrix& w, const std::vector<double>& bias);

// dx(b, k) = sum_o dy(b, o) * wt(o, k), with wt the output-major transpose
// of w (layers keep both layouts so every pass has a unit-stride inner loop)
void linear_backward_input(Matrix& dx, const Matrix& dy, const Matrix& wt);

// dw(k, o) = sum_b x(b, k) * dy(b, o);  dbias(o) = sum_b dy(b, o)
void linear_backward_params(Matrix& dw, std::vector<double>& dbias, const Matrix& x, const Matrix& dy);

void relu_forward(Matrix& y, const Matrix& x);

// d(b, j) *= (post(b, j) > 0), where post is the relu output
void relu_backward_inplace(Matrix& d, const Matrix& post);

namespace ref {
// Textbook serial loops, kept as the comparison oracle and for the benchmark.
void linear_forward(Matrix& y, const Matrix& x, const Matrix& w, const std::vector<double>& bias);
void linear_backward_input(Matrix& dx, const Matrix& dy, const Matrix& wt);
void linear_backward_params(Matrix& dw, std::vector<double>& dbias, const Matrix& x, const Matrix& dy);
void relu_forward(Matrix& y, const Matrix& x);
void relu_backward_inplace(Matrix& d, const Matrix& post);
} // namespace ref

} // namespace recoverl::kernels
