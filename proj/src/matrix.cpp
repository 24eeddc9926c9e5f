#include "cdstack/matrix.hpp"

#include <cmath>
#include <string>

#include "cdstack/errors.hpp"
#include "cdstack/kernels.hpp"

namespace cdstack {

bool Matrix::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw NumericError("matmul: shape mismatch");
    return matmul_nt(a, b.transposed());
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw NumericError("matmul_nt: shape mismatch");
    Matrix c(a.rows(), b.rows());
    const std::size_t n = a.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* arow = a.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            c.at(i, j) = kernels::dot(arow, b.row(j), n);
        }
    }
    return c;
}

bool cholesky_factor(Matrix& a, double tol) {
    const std::size_t n = a.rows();
    if (a.cols() != n) throw NumericError("cholesky: not square");
    for (std::size_t j = 0; j < n; ++j) {
        double d = a.at(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= a.at(j, k) * a.at(j, k);
        if (d <= tol) return false;
        const double l = std::sqrt(d);
        a.at(j, j) = l;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a.at(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= a.at(i, k) * a.at(j, k);
            a.at(i, j) = s / l;
        }
    }
    // zero the upper triangle so the factor is unambiguous
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) a.at(i, j) = 0.0;
    return true;
}

std::vector<double> cholesky_solve(const Matrix& chol, const std::vector<double>& b) {
    const std::size_t n = chol.rows();
    std::vector<double> y(b);
    for (std::size_t i = 0; i < n; ++i) {
        double s = y[i];
        for (std::size_t k = 0; k < i; ++k) s -= chol.at(i, k) * y[k];
        y[i] = s / chol.at(i, i);
    }
    for (std::size_t ii = n; ii > 0; --ii) {
        const std::size_t i = ii - 1;
        double s = y[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= chol.at(k, i) * y[k];
        y[i] = s / chol.at(i, i);
    }
    return y;
}

Matrix cholesky_inverse(const Matrix& chol) {
    const std::size_t n = chol.rows();
    Matrix inv(n, n);
    std::vector<double> e(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        e[j] = 1.0;
        std::vector<double> x = cholesky_solve(chol, e);
        for (std::size_t i = 0; i < n; ++i) inv.at(i, j) = x[i];
        e[j] = 0.0;
    }
    return inv;
}

double cholesky_logdet(const Matrix& chol) {
    double s = 0.0;
    for (std::size_t i = 0; i < chol.rows(); ++i) s += std::log(chol.at(i, i));
    return 2.0 * s;
}

std::vector<double> solve_spd(Matrix a, std::vector<double> b) {
    if (!cholesky_factor(a)) throw NumericError("solve_spd: matrix not positive definite");
    return cholesky_solve(a, b);
}

ColumnStats column_stats(const Matrix& x) {
    const std::size_t n = x.rows(), p = x.cols();
    ColumnStats st;
    st.mean.assign(p, 0.0);
    st.sd.assign(p, 0.0);
    if (n == 0) return st;
    for (std::size_t i = 0; i < n; ++i) {
        const double* r = x.row(i);
        for (std::size_t j = 0; j < p; ++j) st.mean[j] += r[j];
    }
    for (std::size_t j = 0; j < p; ++j) st.mean[j] /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* r = x.row(i);
        for (std::size_t j = 0; j < p; ++j) {
            const double d = r[j] - st.mean[j];
            st.sd[j] += d * d;
        }
    }
    for (std::size_t j = 0; j < p; ++j) st.sd[j] = std::sqrt(st.sd[j] / static_cast<double>(n));
    return st;
}

Matrix standardize_columns(const Matrix& x, const ColumnStats& stats, double eps) {
    Matrix out(x.rows(), x.cols());
    for (std::size_t j = 0; j < x.cols(); ++j) {
        if (stats.sd[j] <= eps)
            throw NumericError("zero-variance column at index " + std::to_string(j));
    }
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double* in = x.row(i);
        double* o = out.row(i);
        for (std::size_t j = 0; j < x.cols(); ++j) o[j] = (in[j] - stats.mean[j]) / stats.sd[j];
    }
    return out;
}

}  // namespace cdstack
