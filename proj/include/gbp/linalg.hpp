#pragma once

#include <cmath>
#include <numeric>
#include <vector>

namespace gbp::linalg {

// Dense row-major matrix, sized for desk-scale least-squares problems.
struct Matrix {
    int rows = 0, cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}
    double& at(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
    double at(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }
};

inline std::vector<double> matvec(const Matrix& m, const std::vector<double>& x) {
    std::vector<double> y(m.rows, 0.0);
    for (int i = 0; i < m.rows; ++i) {
        double s = 0.0;
        for (int j = 0; j < m.cols; ++j) s += m.at(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

inline double norm2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

struct LstsqResult {
    std::vector<double> x;
    double residual_norm = 0.0;  // ||A x - b||_2
    int rank = 0;
};

// Least squares min ||A x - b||_2 via column-pivoted Householder QR.
// Rank-deficient systems get a basic solution (free variables zero); the
// residual norm is what callers certify against.
inline LstsqResult lstsq(Matrix A, std::vector<double> b, double rank_tol = 1e-10) {
    const int m = A.rows, n = A.cols;
    const int kmax = std::min(m, n);
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<double> colnorm(n, 0.0);
    int rank = 0;
    double r00 = 0.0;

    for (int k = 0; k < kmax; ++k) {
        for (int j = k; j < n; ++j) {
            double s = 0.0;
            for (int i = k; i < m; ++i) s += A.at(i, j) * A.at(i, j);
            colnorm[j] = std::sqrt(s);
        }
        int piv = k;
        for (int j = k + 1; j < n; ++j)
            if (colnorm[j] > colnorm[piv]) piv = j;
        if (piv != k) {
            for (int i = 0; i < m; ++i) std::swap(A.at(i, k), A.at(i, piv));
            std::swap(perm[k], perm[piv]);
        }
        double alpha = colnorm[piv];
        if (k == 0) r00 = alpha;
        if (alpha <= rank_tol * std::max(r00, 1.0)) break;
        ++rank;
        // Householder vector v stored in column k below the diagonal.
        double akk = A.at(k, k);
        double beta = (akk >= 0.0) ? -alpha : alpha;
        double vkk = akk - beta;
        A.at(k, k) = beta;
        // v = (vkk, A(k+1..,k)); apply I - 2 v v^T / (v^T v) to trailing cols and b.
        double vtv = vkk * vkk;
        for (int i = k + 1; i < m; ++i) vtv += A.at(i, k) * A.at(i, k);
        if (vtv > 0.0) {
            for (int j = k + 1; j < n; ++j) {
                double dot = vkk * A.at(k, j);
                for (int i = k + 1; i < m; ++i) dot += A.at(i, k) * A.at(i, j);
                double f = 2.0 * dot / vtv;
                A.at(k, j) -= f * vkk;
                for (int i = k + 1; i < m; ++i) A.at(i, j) -= f * A.at(i, k);
            }
            double dot = vkk * b[k];
            for (int i = k + 1; i < m; ++i) dot += A.at(i, k) * b[i];
            double f = 2.0 * dot / vtv;
            b[k] -= f * vkk;
            for (int i = k + 1; i < m; ++i) b[i] -= f * A.at(i, k);
        }
    }

    LstsqResult out;
    out.rank = rank;
    out.x.assign(n, 0.0);
    std::vector<double> y(rank, 0.0);
    for (int i = rank - 1; i >= 0; --i) {
        double s = b[i];
        for (int j = i + 1; j < rank; ++j) s -= A.at(i, j) * y[j];
        y[i] = s / A.at(i, i);
    }
    for (int i = 0; i < rank; ++i) out.x[perm[i]] = y[i];
    double res = 0.0;
    for (int i = rank; i < m; ++i) res += b[i] * b[i];
    out.residual_norm = std::sqrt(res);
    return out;
}

// Orthonormal basis (rows of the result) of the nullspace {x : A x = 0},
// via Gaussian elimination with partial pivoting + modified Gram-Schmidt.
inline std::vector<std::vector<double>> nullspace(Matrix A, double rank_tol = 1e-10) {
    const int m = A.rows, n = A.cols;
    std::vector<int> pivot_col;
    int row = 0;
    double scale = 0.0;
    for (double v : A.a) scale = std::max(scale, std::fabs(v));
    const double tol = rank_tol * std::max(scale, 1.0);
    for (int col = 0; col < n && row < m; ++col) {
        int piv = row;
        for (int i = row + 1; i < m; ++i)
            if (std::fabs(A.at(i, col)) > std::fabs(A.at(piv, col))) piv = i;
        if (std::fabs(A.at(piv, col)) <= tol) continue;
        if (piv != row)
            for (int j = 0; j < n; ++j) std::swap(A.at(row, j), A.at(piv, j));
        double d = A.at(row, col);
        for (int j = 0; j < n; ++j) A.at(row, j) /= d;
        for (int i = 0; i < m; ++i) {
            if (i == row) continue;
            double f = A.at(i, col);
            if (f == 0.0) continue;
            for (int j = 0; j < n; ++j) A.at(i, j) -= f * A.at(row, j);
        }
        pivot_col.push_back(col);
        ++row;
    }
    std::vector<bool> is_pivot(n, false);
    for (int c : pivot_col) is_pivot[c] = true;
    std::vector<std::vector<double>> basis;
    for (int free = 0; free < n; ++free) {
        if (is_pivot[free]) continue;
        std::vector<double> v(n, 0.0);
        v[free] = 1.0;
        for (size_t r = 0; r < pivot_col.size(); ++r) v[pivot_col[r]] = -A.at(static_cast<int>(r), free);
        basis.push_back(std::move(v));
    }
    // modified Gram-Schmidt
    std::vector<std::vector<double>> ortho;
    for (auto& v : basis) {
        for (const auto& q : ortho) {
            double dot = 0.0;
            for (int j = 0; j < n; ++j) dot += v[j] * q[j];
            for (int j = 0; j < n; ++j) v[j] -= dot * q[j];
        }
        double nv = norm2(v);
        if (nv <= rank_tol) continue;
        for (int j = 0; j < n; ++j) v[j] /= nv;
        ortho.push_back(std::move(v));
    }
    return ortho;
}

}  // namespace gbp::linalg
