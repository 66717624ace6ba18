#pragma once
#include <algorithm>
#include <cassert>
#include <cstddef>
#include <vector>

namespace recoverl {

// Dense row-major matrix of doubles. Plain data holder, no arithmetic of its
// own; the kernels operate on these.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(std::size_t(r) * c, 0.0) {}

    void resize(int r, int c) {
        rows = r;
        cols = c;
        data.assign(std::size_t(r) * c, 0.0);
    }

    double* row(int i) { return data.data() + std::size_t(i) * cols; }
    const double* row(int i) const { return data.data() + std::size_t(i) * cols; }

    double& at(int i, int j) {
        assert(i >= 0 && i < rows && j >= 0 && j < cols);
        return data[std::size_t(i) * cols + j];
    }
    double at(int i, int j) const {
        assert(i >= 0 && i < rows && j >= 0 && j < cols);
        return data[std::size_t(i) * cols + j];
    }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

} // namespace recoverl
