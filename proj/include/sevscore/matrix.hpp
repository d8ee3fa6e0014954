#pragma once

#include <cstddef>
#include <vector>

namespace sevscore {

/// Dense row-major matrix of doubles. Deliberately minimal: the scoring
/// networks in this project are small enough that plain loops beat any
/// BLAS call overhead.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double value = 0.0)
        : rows(r), cols(c), data(r * c, value) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::size_t size() const { return data.size(); }

    void fill(double value) { data.assign(data.size(), value); }
};

}  // namespace sevscore
