#include <doctest.h>

#include <cstring>
#include <omp.h>

#include "recoverl/kernels.hpp"
#include "recoverl/rng.hpp"

using namespace recoverl;

namespace {

Matrix rand_mat(int r, int c, Rng& rng) {
    Matrix m(r, c);
    for (double& v : m.data)
        v = rng.uniform(-2.0, 2.0);
    return m;
}

std::vector<double> rand_vec(int n, Rng& rng) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (double& x : v)
        x = rng.uniform(-2.0, 2.0);
    return v;
}

bool same_bits(const Matrix& a, const Matrix& b) {
    return a.rows == b.rows && a.cols == b.cols &&
           std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(double)) == 0;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

void check_all_kernels_match(int batch, int in, int out, Rng& rng) {
    CAPTURE(batch);
    CAPTURE(in);
    CAPTURE(out);
    Matrix x = rand_mat(batch, in, rng);
    Matrix w = rand_mat(in, out, rng);
    Matrix wt(out, in);
    for (int k = 0; k < in; ++k)
        for (int o = 0; o < out; ++o)
            wt.at(o, k) = w.at(k, o);
    Matrix dy = rand_mat(batch, out, rng);
    std::vector<double> bias = rand_vec(out, rng);

    Matrix y1, y2;
    kernels::linear_forward(y1, x, w, bias);
    kernels::ref::linear_forward(y2, x, w, bias);
    CHECK(same_bits(y1, y2));

    Matrix dx1, dx2;
    kernels::linear_backward_input(dx1, dy, wt);
    kernels::ref::linear_backward_input(dx2, dy, wt);
    CHECK(same_bits(dx1, dx2));

    Matrix dw1, dw2;
    std::vector<double> db1, db2;
    kernels::linear_backward_params(dw1, db1, x, dy);
    kernels::ref::linear_backward_params(dw2, db2, x, dy);
    CHECK(same_bits(dw1, dw2));
    CHECK(same_bits(db1, db2));

    Matrix r1, r2;
    kernels::relu_forward(r1, y1);
    kernels::ref::relu_forward(r2, y2);
    CHECK(same_bits(r1, r2));

    Matrix d1 = dy, d2 = dy;
    kernels::relu_backward_inplace(d1, r1);
    kernels::ref::relu_backward_inplace(d2, r2);
    CHECK(same_bits(d1, d2));
}

} // namespace

TEST_CASE("fast kernels match the serial reference bit for bit") {
    Rng rng(101);
    // below, at, and above the parallel cutoff, plus ragged shapes
    for (auto [b, i, o] : {std::tuple{1, 1, 1}, {3, 7, 5}, {63, 17, 9}, {64, 32, 8}, {65, 8, 31},
                           {256, 5, 256}, {256, 256, 256}, {256, 256, 2}, {301, 129, 77}})
        check_all_kernels_match(b, i, o, rng);
}

TEST_CASE("thread count does not change results") {
    const int saved = omp_get_max_threads();
    Rng rng(202);
    for (int threads : {1, 2, 3, 7}) {
        omp_set_num_threads(threads);
        Rng r2(303);  // identical inputs each pass
        check_all_kernels_match(256, 64, 64, r2);
        check_all_kernels_match(100, 30, 40, r2);
    }
    omp_set_num_threads(saved);
    (void)rng;
}

TEST_CASE("forward computes x w + bias") {
    // 1x2 times 2x2 done by hand
    Matrix x(1, 2);
    x.at(0, 0) = 2.0;
    x.at(0, 1) = -3.0;
    Matrix w(2, 2);
    w.at(0, 0) = 1.0;
    w.at(0, 1) = 0.5;
    w.at(1, 0) = -1.0;
    w.at(1, 1) = 4.0;
    std::vector<double> bias = {10.0, 20.0};
    Matrix y;
    kernels::linear_forward(y, x, w, bias);
    CHECK(y.at(0, 0) == doctest::Approx(10.0 + 2.0 + 3.0));
    CHECK(y.at(0, 1) == doctest::Approx(20.0 + 1.0 - 12.0));
}

TEST_CASE("relu zeroes negatives and passes gradients only through positives") {
    Matrix x(1, 3);
    x.at(0, 0) = -1.0;
    x.at(0, 1) = 0.0;
    x.at(0, 2) = 2.5;
    Matrix y;
    kernels::relu_forward(y, x);
    CHECK(y.at(0, 0) == 0.0);
    CHECK(y.at(0, 1) == 0.0);
    CHECK(y.at(0, 2) == 2.5);

    Matrix d(1, 3);
    d.fill(7.0);
    kernels::relu_backward_inplace(d, y);
    CHECK(d.at(0, 0) == 0.0);
    CHECK(d.at(0, 1) == 0.0);  // dead at exactly zero
    CHECK(d.at(0, 2) == 7.0);
}
