// Times the OpenMP layer kernels against their serial reference counterparts
// at training-typical shapes and checks the outputs stay bitwise identical.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>

#include <omp.h>

#include "recoverl/kernels.hpp"
#include "recoverl/rng.hpp"

using namespace recoverl;

namespace {

Matrix random_matrix(int rows, int cols, Rng& rng) {
    Matrix m;
    m.resize(rows, cols);
    for (double& v : m.data)
        v = rng.uniform(-1.0, 1.0);
    return m;
}

std::vector<double> random_vec(int n, Rng& rng) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (double& x : v)
        x = rng.uniform(-1.0, 1.0);
    return v;
}

double gflops_of(double flops, const std::function<void()>& fn) {
    fn();  // warm up, also materializes outputs
    long iters = 1;
    for (;;) {
        auto t0 = std::chrono::steady_clock::now();
        for (long i = 0; i < iters; ++i)
            fn();
        double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (dt >= 0.2)
            return flops * double(iters) / dt / 1e9;
        iters *= 4;
    }
}

bool bitwise_equal(const Matrix& a, const Matrix& b) {
    return a.rows == b.rows && a.cols == b.cols &&
           std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(double)) == 0;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

int failures = 0;

void report(const char* name, double fast, double slow, bool equal) {
    std::printf("  %-16s fast %7.2f GF/s   ref %7.2f GF/s   x%-5.1f %s\n", name, fast, slow, fast / slow,
                equal ? "bitwise equal" : "MISMATCH");
    if (!equal)
        ++failures;
}

void bench_shape(int batch, int in, int out, Rng& rng) {
    std::printf("batch %d, %d -> %d\n", batch, in, out);
    Matrix x = random_matrix(batch, in, rng);
    Matrix w = random_matrix(in, out, rng);
    Matrix wt = random_matrix(out, in, rng);
    Matrix dy = random_matrix(batch, out, rng);
    std::vector<double> bias = random_vec(out, rng);

    Matrix y_fast, y_ref;
    double f = gflops_of(2.0 * batch * in * out, [&] { kernels::linear_forward(y_fast, x, w, bias); });
    double s = gflops_of(2.0 * batch * in * out, [&] { kernels::ref::linear_forward(y_ref, x, w, bias); });
    report("forward", f, s, bitwise_equal(y_fast, y_ref));

    Matrix dx_fast, dx_ref;
    f = gflops_of(2.0 * batch * in * out, [&] { kernels::linear_backward_input(dx_fast, dy, wt); });
    s = gflops_of(2.0 * batch * in * out, [&] { kernels::ref::linear_backward_input(dx_ref, dy, wt); });
    report("backward_input", f, s, bitwise_equal(dx_fast, dx_ref));

    Matrix dw_fast, dw_ref;
    std::vector<double> db_fast, db_ref;
    f = gflops_of(2.0 * batch * in * out, [&] { kernels::linear_backward_params(dw_fast, db_fast, x, dy); });
    s = gflops_of(2.0 * batch * in * out, [&] { kernels::ref::linear_backward_params(dw_ref, db_ref, x, dy); });
    report("backward_params", f, s, bitwise_equal(dw_fast, dw_ref) && bitwise_equal(db_fast, db_ref));
}

} // namespace

int main() {
    std::printf("omp threads: %d\n", omp_get_max_threads());
    Rng rng(12345);
    bench_shape(256, 5, 256, rng);    // first critic layer, cartpole dims
    bench_shape(256, 256, 256, rng);  // hidden layer
    bench_shape(256, 256, 2, rng);    // policy head
    bench_shape(1024, 512, 512, rng);
    if (failures) {
        std::printf("%d kernel(s) diverged from the reference\n", failures);
        return 1;
    }
    return 0;
}
