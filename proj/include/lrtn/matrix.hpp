#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace lrtn {

/// Error type for all numerical failures (non-convergence, shape mismatch, ...).
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Dense real matrix, column-major storage. vec(M) stacks columns vertically.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), a_(rows * cols, fill) {}

    static DenseMatrix identity(std::size_t n) {
        DenseMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return a_.size(); }

    double& operator()(std::size_t i, std::size_t j) { return a_[j * rows_ + i]; }
    double operator()(std::size_t i, std::size_t j) const { return a_[j * rows_ + i]; }

    double* data() { return a_.data(); }
    const double* data() const { return a_.data(); }
    double* col(std::size_t j) { return a_.data() + j * rows_; }
    const double* col(std::size_t j) const { return a_.data() + j * rows_; }

    bool all_finite() const;

    DenseMatrix& operator+=(const DenseMatrix& o);
    DenseMatrix& operator-=(const DenseMatrix& o);
    DenseMatrix& operator*=(double c);

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> a_;
};

DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b);
DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b);
DenseMatrix operator*(double c, DenseMatrix a);

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
// a^T * b without forming the transpose
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);
// a * b^T
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix transpose(const DenseMatrix& a);

double frobenius_norm(const DenseMatrix& a);
double inner(const DenseMatrix& a, const DenseMatrix& b);
double column_norm(const DenseMatrix& a, std::size_t j);
double max_abs(const DenseMatrix& a);

}  // namespace lrtn
