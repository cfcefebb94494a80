#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace slim {

// Dense row-major matrix of doubles. Entries are finite.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix zeros(std::size_t rows, std::size_t cols) { return Matrix(rows, cols); }
    static Matrix identity(std::size_t n);
    static Matrix diagonal(std::span<const double> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }

    Matrix transposed() const;
    // Rows [first, first + count).
    Matrix row_block(std::size_t first, std::size_t count) const;
    // Columns [first, first + count).
    Matrix col_block(std::size_t first, std::size_t count) const;
    Matrix select_rows(std::span<const std::size_t> indices) const;
    Matrix select_cols(std::span<const std::size_t> indices) const;

    // Appends the rows of `other` (same column count) below this matrix.
    void append_rows(const Matrix& other);

    double frobenius_norm() const;
    double max_abs() const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

enum class Axis { kRow, kCol };

// Plain triple loop; every output element is summed in ascending k.
Matrix matmul(const Matrix& a, const Matrix& b);
// a * b^T without materialising the transpose. Same summation order as
// matmul(a, b.transposed()).
Matrix matmul_bt(const Matrix& a, const Matrix& b);

Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double factor);

// Largest elementwise |a - b|. Shapes must match.
double max_abs_diff(const Matrix& a, const Matrix& b);
// Mean of squared elementwise differences.
double mean_squared_error(const Matrix& a, const Matrix& b);

double sigmoid(double x) noexcept;
double silu(double x) noexcept;
Matrix silu(const Matrix& x);

// Max-shifted softmax along each row (kRow) or column (kCol).
Matrix softmax(const Matrix& v, Axis axis = Axis::kRow);
std::vector<double> softmax(std::span<const double> v);

// Round half away from zero, used for every quantisation step.
double round_half_away(double x) noexcept;

struct SvdResult {
    Matrix u;               // rows x r, orthonormal columns
    std::vector<double> s;  // r singular values, nonincreasing
    Matrix v;               // cols x r, orthonormal columns
};

// Rank-r truncation of the thin SVD (one-sided Jacobi).
SvdResult truncated_svd(const Matrix& m, std::size_t rank);
// U * diag(S) * V^T
Matrix reconstruct(const SvdResult& svd);

// 8-bit symmetric per-row quantisation. Row max-abs maps to 127; an all-zero
// row gets scale 1.
struct QuantizedMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::int8_t> values;
    std::vector<double> scales;

    std::int8_t at(std::size_t r, std::size_t c) const noexcept { return values[r * cols + c]; }
};

QuantizedMatrix quantize_i8(const Matrix& m);
Matrix dequantize(const QuantizedMatrix& q);

}  // namespace slim
