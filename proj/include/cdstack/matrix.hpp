#pragma once

#include <cstddef>
#include <vector>

namespace cdstack {

// Dense row-major matrix of doubles.
class Matrix {
  public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double& at(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* row(std::size_t i) { return data_.data() + i * cols_; }
    const double* row(std::size_t i) const { return data_.data() + i * cols_; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    std::vector<double> col_copy(std::size_t j) const {
        std::vector<double> out(rows_);
        for (std::size_t i = 0; i < rows_; ++i) out[i] = data_[i * cols_ + j];
        return out;
    }

    Matrix transposed() const {
        Matrix t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t.at(j, i) = at(i, j);
        return t;
    }

    bool all_finite() const;

  private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

// C = A * B
Matrix matmul(const Matrix& a, const Matrix& b);
// C = A * B^T  (rows of both operands are contiguous, feeds the dot kernel)
Matrix matmul_nt(const Matrix& a, const Matrix& b);

// In-place Cholesky factorization of a small SPD matrix (lower triangle).
// Returns false if a pivot drops below tol.
bool cholesky_factor(Matrix& a, double tol = 1e-12);
// Solves L L^T x = b given the factor from cholesky_factor.
std::vector<double> cholesky_solve(const Matrix& chol, const std::vector<double>& b);
// Inverse from the Cholesky factor.
Matrix cholesky_inverse(const Matrix& chol);
// log det(A) = 2 * sum(log diag(L))
double cholesky_logdet(const Matrix& chol);

// Solves the SPD system A x = b; throws NumericError if not positive definite.
std::vector<double> solve_spd(Matrix a, std::vector<double> b);

// Per-column mean and population standard deviation.
struct ColumnStats {
    std::vector<double> mean;
    std::vector<double> sd;
};
ColumnStats column_stats(const Matrix& x);

// (x - mean) / sd per column; sd below eps raises NumericError naming the column.
Matrix standardize_columns(const Matrix& x, const ColumnStats& stats, double eps = 1e-12);

}  // namespace cdstack
