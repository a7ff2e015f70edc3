#ifndef MEDNER_NERCORE_MATRIX_HPP
#define MEDNER_NERCORE_MATRIX_HPP

#include <cstddef>
#include <span>
#include <vector>

namespace medner {

/// Dense row-major matrix of doubles. Vectors are 1 x n matrices.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) { return std::span<double>(data).subspan(r * cols, cols); }
    std::span<const double> row(std::size_t r) const { return std::span<const double>(data).subspan(r * cols, cols); }

    std::size_t size() const noexcept { return data.size(); }
    void fill(double v) { data.assign(data.size(), v); }

    bool operator==(const Matrix&) const = default;
};

/// y += A x
inline void gemv_add(const Matrix& a, std::span<const double> x, std::span<double> y) {
    for (std::size_t r = 0; r < a.rows; ++r) {
        const double* ar = a.data.data() + r * a.cols;
        double s = 0.0;
        for (std::size_t c = 0; c < a.cols; ++c) s += ar[c] * x[c];
        y[r] += s;
    }
}

/// x_grad += A^T g
inline void gemv_t_add(const Matrix& a, std::span<const double> g, std::span<double> x_grad) {
    for (std::size_t r = 0; r < a.rows; ++r) {
        const double gr = g[r];
        if (gr == 0.0) continue;
        const double* ar = a.data.data() + r * a.cols;
        for (std::size_t c = 0; c < a.cols; ++c) x_grad[c] += ar[c] * gr;
    }
}

/// A_grad += g x^T
inline void outer_add(std::span<const double> g, std::span<const double> x, Matrix& a_grad) {
    for (std::size_t r = 0; r < a_grad.rows; ++r) {
        const double gr = g[r];
        if (gr == 0.0) continue;
        double* ar = a_grad.data.data() + r * a_grad.cols;
        for (std::size_t c = 0; c < a_grad.cols; ++c) ar[c] += gr * x[c];
    }
}

}  // namespace medner

#endif  // MEDNER_NERCORE_MATRIX_HPP
