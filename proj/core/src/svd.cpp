#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "slim/error.hpp"
#include "slim/numerics.hpp"

namespace slim {

namespace {

constexpr int kMaxSweeps = 80;
constexpr double kOrthTol = 1e-15;

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Hestenes one-sided Jacobi on a tall matrix. `cols` holds the columns of A as
// rows (n x m, n <= m). On return the rows of `cols` are mutually orthogonal
// and `vt` holds the accumulated rotations (rows are columns of V).
void orthogonalize_columns(Matrix& cols, Matrix& vt) {
    const std::size_t n = cols.rows();
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                auto up = cols.row(p);
                auto uq = cols.row(q);
                const double alpha = dot(up, up);
                const double beta = dot(uq, uq);
                const double gamma = dot(up, uq);
                if (gamma == 0.0 || std::abs(gamma) <= kOrthTol * std::sqrt(alpha * beta)) {
                    continue;
                }
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
                const double c = 1.0 / std::hypot(1.0, t);
                const double s = c * t;
                for (std::size_t i = 0; i < up.size(); ++i) {
                    const double a = up[i];
                    const double b = uq[i];
                    up[i] = c * a - s * b;
                    uq[i] = s * a + c * b;
                }
                auto vp = vt.row(p);
                auto vq = vt.row(q);
                for (std::size_t i = 0; i < vp.size(); ++i) {
                    const double a = vp[i];
                    const double b = vq[i];
                    vp[i] = c * a - s * b;
                    vq[i] = s * a + c * b;
                }
            }
        }
        if (!rotated) return;
    }
}

// Replace rows not marked valid with unit vectors orthogonal to every valid
// row, via Gram-Schmidt on the standard basis.
void complete_orthonormal(Matrix& basis, std::vector<bool>& valid) {
    const std::size_t dim = basis.cols();
    std::size_t candidate = 0;
    for (std::size_t r = 0; r < basis.rows(); ++r) {
        if (valid[r]) continue;
        while (candidate < dim) {
            std::vector<double> e(dim, 0.0);
            e[candidate++] = 1.0;
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t k = 0; k < basis.rows(); ++k) {
                    if (!valid[k]) continue;
                    const double proj = dot(basis.row(k), e);
                    for (std::size_t i = 0; i < dim; ++i) e[i] -= proj * basis(k, i);
                }
            }
            const double norm = std::sqrt(dot(e, e));
            if (norm > 1e-8) {
                for (std::size_t i = 0; i < dim; ++i) basis(r, i) = e[i] / norm;
                valid[r] = true;
                break;
            }
        }
    }
}

SvdResult thin_svd_tall(const Matrix& a) {
    // a is m x n with m >= n.
    const std::size_t n = a.cols();
    Matrix cols = a.transposed();
    Matrix vt = Matrix::identity(n);
    orthogonalize_columns(cols, vt);

    std::vector<double> sigma(n);
    for (std::size_t j = 0; j < n; ++j) sigma[j] = std::sqrt(dot(cols.row(j), cols.row(j)));

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

    const double cutoff = (sigma.empty() ? 0.0 : sigma[order[0]]) * 1e-14;
    Matrix ut(n, a.rows());
    Matrix vt_sorted(n, n);
    std::vector<double> s(n);
    std::vector<bool> valid(n, false);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t j = order[k];
        s[k] = sigma[j];
        auto src_v = vt.row(j);
        std::copy(src_v.begin(), src_v.end(), vt_sorted.row(k).begin());
        if (sigma[j] > cutoff && sigma[j] > 0.0) {
            auto src_u = cols.row(j);
            for (std::size_t i = 0; i < src_u.size(); ++i) ut(k, i) = src_u[i] / sigma[j];
            valid[k] = true;
        }
    }
    complete_orthonormal(ut, valid);
    return {ut.transposed(), std::move(s), vt_sorted.transposed()};
}

}  // namespace

SvdResult truncated_svd(const Matrix& m, std::size_t rank) {
    const std::size_t max_rank = std::min(m.rows(), m.cols());
    if (rank < 1 || rank > max_rank) {
        throw RankError("truncated_svd: rank " + std::to_string(rank) + " outside [1, " +
                        std::to_string(max_rank) + "]");
    }
    SvdResult full;
    if (m.rows() >= m.cols()) {
        full = thin_svd_tall(m);
    } else {
        SvdResult t = thin_svd_tall(m.transposed());
        full = {std::move(t.v), std::move(t.s), std::move(t.u)};
    }
    SvdResult out;
    out.u = full.u.col_block(0, rank);
    out.v = full.v.col_block(0, rank);
    out.s.assign(full.s.begin(), full.s.begin() + static_cast<std::ptrdiff_t>(rank));
    return out;
}

Matrix reconstruct(const SvdResult& svd) {
    Matrix us = svd.u;
    for (std::size_t r = 0; r < us.rows(); ++r) {
        for (std::size_t c = 0; c < us.cols(); ++c) us(r, c) *= svd.s[c];
    }
    return matmul_bt(us, svd.v);
}

}  // namespace slim
