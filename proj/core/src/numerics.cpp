#include "slim/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "slim/error.hpp"

namespace slim {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
    }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw ShapeError("Matrix: data length " + std::to_string(data_.size()) + " != " +
                         std::to_string(rows_) + "x" + std::to_string(cols_));
    }
    for (double x : data_) {
        if (!std::isfinite(x)) throw NumericError("Matrix: non-finite entry");
    }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw ShapeError("Matrix: ragged initializer");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::diagonal(std::span<const double> values) {
    Matrix m(values.size(), values.size());
    for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
    return m;
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    }
    return t;
}

Matrix Matrix::row_block(std::size_t first, std::size_t count) const {
    if (first + count > rows_) throw ShapeError("row_block: out of range");
    Matrix out(count, cols_);
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(first * cols_), count * cols_,
                out.data_.begin());
    return out;
}

Matrix Matrix::col_block(std::size_t first, std::size_t count) const {
    if (first + count > cols_) throw ShapeError("col_block: out of range");
    Matrix out(rows_, count);
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t c = 0; c < count; ++c) out(r, c) = (*this)(r, first + c);
    }
    return out;
}

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
    Matrix out(indices.size(), cols_);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= rows_) throw ShapeError("select_rows: index out of range");
        auto src = row(indices[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

Matrix Matrix::select_cols(std::span<const std::size_t> indices) const {
    Matrix out(rows_, indices.size());
    for (std::size_t j = 0; j < indices.size(); ++j) {
        if (indices[j] >= cols_) throw ShapeError("select_cols: index out of range");
    }
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t j = 0; j < indices.size(); ++j) out(r, j) = (*this)(r, indices[j]);
    }
    return out;
}

void Matrix::append_rows(const Matrix& other) {
    if (empty() && rows_ == 0) {
        *this = other;
        return;
    }
    if (other.cols_ != cols_) throw ShapeError("append_rows: column mismatch");
    data_.insert(data_.end(), other.data_.begin(), other.data_.end());
    rows_ += other.rows_;
}

double Matrix::frobenius_norm() const {
    double sum = 0.0;
    for (double x : data_) sum += x * x;
    return std::sqrt(sum);
}

double Matrix::max_abs() const {
    double m = 0.0;
    for (double x : data_) m = std::max(m, std::abs(x));
    return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " * " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    }
    Matrix c(a.rows(), b.cols());
    const std::size_t n = b.cols();
    // i-k-j order keeps the per-element accumulation in ascending k.
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* out = c.row(i).data();
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            const double* brow = b.row(k).data();
            for (std::size_t j = 0; j < n; ++j) out[j] += aik * brow[j];
        }
    }
    return c;
}

Matrix matmul_bt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw ShapeError("matmul_bt: " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " * (" + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + ")^T");
    }
    Matrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* arow = a.row(i).data();
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double* brow = b.row(j).data();
            double sum = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) sum += arow[k] * brow[k];
            c(i, j) = sum;
        }
    }
    return c;
}

Matrix add(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add");
    Matrix c = a;
    auto out = c.data();
    auto rhs = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += rhs[i];
    return c;
}

Matrix subtract(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "subtract");
    Matrix c = a;
    auto out = c.data();
    auto rhs = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= rhs[i];
    return c;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "hadamard");
    Matrix c = a;
    auto out = c.data();
    auto rhs = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= rhs[i];
    return c;
}

Matrix scale(const Matrix& a, double factor) {
    Matrix c = a;
    for (double& x : c.data()) x *= factor;
    return c;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    auto lhs = a.data();
    auto rhs = b.data();
    for (std::size_t i = 0; i < lhs.size(); ++i) m = std::max(m, std::abs(lhs[i] - rhs[i]));
    return m;
}

double mean_squared_error(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "mean_squared_error");
    if (a.size() == 0) return 0.0;
    double sum = 0.0;
    auto lhs = a.data();
    auto rhs = b.data();
    for (std::size_t i = 0; i < lhs.size(); ++i) {
        const double d = lhs[i] - rhs[i];
        sum += d * d;
    }
    return sum / static_cast<double>(a.size());
}

double sigmoid(double x) noexcept {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double silu(double x) noexcept { return x * sigmoid(x); }

Matrix silu(const Matrix& x) {
    Matrix y = x;
    for (double& v : y.data()) v = silu(v);
    return y;
}

std::vector<double> softmax(std::span<const double> v) {
    std::vector<double> out(v.size());
    if (v.empty()) return out;
    const double shift = *std::max_element(v.begin(), v.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - shift);
        sum += out[i];
    }
    for (double& x : out) x /= sum;
    return out;
}

Matrix softmax(const Matrix& v, Axis axis) {
    Matrix out(v.rows(), v.cols());
    if (axis == Axis::kRow) {
        for (std::size_t r = 0; r < v.rows(); ++r) {
            auto p = softmax(v.row(r));
            std::copy(p.begin(), p.end(), out.row(r).begin());
        }
    } else {
        std::vector<double> column(v.rows());
        for (std::size_t c = 0; c < v.cols(); ++c) {
            for (std::size_t r = 0; r < v.rows(); ++r) column[r] = v(r, c);
            auto p = softmax(column);
            for (std::size_t r = 0; r < v.rows(); ++r) out(r, c) = p[r];
        }
    }
    return out;
}

double round_half_away(double x) noexcept { return std::round(x); }

QuantizedMatrix quantize_i8(const Matrix& m) {
    QuantizedMatrix q;
    q.rows = m.rows();
    q.cols = m.cols();
    q.values.resize(m.size());
    q.scales.resize(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        double max_abs = 0.0;
        for (double x : m.row(r)) {
            if (!std::isfinite(x)) throw NumericError("quantize_i8: non-finite entry");
            max_abs = std::max(max_abs, std::abs(x));
        }
        if (max_abs == 0.0) {
            q.scales[r] = 1.0;
            continue;
        }
        q.scales[r] = max_abs / 127.0;
        for (std::size_t c = 0; c < m.cols(); ++c) {
            // x * 127 / max keeps exact halves exact (0.5 of max -> 63.5 -> 64).
            double v = round_half_away(m(r, c) * 127.0 / max_abs);
            v = std::clamp(v, -127.0, 127.0);
            q.values[r * q.cols + c] = static_cast<std::int8_t>(v);
        }
    }
    return q;
}

Matrix dequantize(const QuantizedMatrix& q) {
    Matrix m(q.rows, q.cols);
    for (std::size_t r = 0; r < q.rows; ++r) {
        for (std::size_t c = 0; c < q.cols; ++c) {
            m(r, c) = static_cast<double>(q.at(r, c)) * q.scales[r];
        }
    }
    return m;
}

}  // namespace slim
