#pragma once

#include "fedma/common.hpp"

#include <algorithm>
#include <vector>

namespace fedma {

// Lower-triangular matrix with structurally enforced zeros above the
// diagonal. Backed by a dense Eigen matrix; dims stay in the low
// thousands so the O(dim^2) storage is a non-issue.
class LowerTriangular {
public:
    LowerTriangular() = default;
    explicit LowerTriangular(Eigen::Index dim) : data_(Matrix::Zero(dim, dim)) {}

    Eigen::Index dim() const { return data_.rows(); }

    double operator()(Eigen::Index i, Eigen::Index j) const { return data_(i, j); }

    void set(Eigen::Index i, Eigen::Index j, double v) {
        require(j <= i, "LowerTriangular: write above diagonal");
        data_(i, j) = v;
    }
    void add(Eigen::Index i, Eigen::Index j, double v) {
        require(j <= i, "LowerTriangular: write above diagonal");
        data_(i, j) += v;
    }

    // First t rows/cols as a dense block.
    Matrix top_left(Eigen::Index t) const { return data_.topLeftCorner(t, t); }
    Vector row(Eigen::Index i) const { return data_.row(i).transpose(); }
    Vector row_prefix(Eigen::Index i, Eigen::Index t) const {
        return data_.row(i).head(t).transpose();
    }
    double row_sum(Eigen::Index i) const { return data_.row(i).sum(); }

    const Matrix& dense() const { return data_; }
    Matrix& dense_mutable() { return data_; }

private:
    Matrix data_;
};

struct SvdFactorization {
    Matrix u;                 // left singular vectors (thin)
    Vector singular_values;   // non-increasing, >= 0
    Matrix v;                 // right singular vectors (thin)
    Eigen::Index rank = 0;    // numerical rank under the tolerance below
    double tolerance = 0.0;   // absolute cut on singular values
};

// Thin SVD with numerical rank reported under
// tol = svd_rank_rel * sigma_max * max(rows, cols).
SvdFactorization svd(const Matrix& a);

// Minimum-norm x minimizing ||x^T A - b^T||_2 (truncated-pseudoinverse
// solution; singular values below ls_truncation_rel * sigma_max *
// max(rows, cols) are treated as zero). A is m x n, b has length n,
// x has length m.
Vector least_squares_min_norm(const Matrix& a, const Vector& b);

inline double frobenius_sq(const Matrix& a) { return a.squaredNorm(); }

// Rank via the same SVD tolerance, convenience for diagnostics.
Eigen::Index numerical_rank(const Matrix& a);

// Rank at the least-squares truncation level: the number of singular
// directions the solver actually uses.
Eigen::Index solver_rank(const Matrix& a);

// Absolute singular-value cut used by least_squares_min_norm.
inline double solver_truncation(const SvdFactorization& f, Eigen::Index rows, Eigen::Index cols) {
    const double smax = f.singular_values.size() > 0 ? f.singular_values(0) : 0.0;
    return Tolerances::ls_truncation_rel * smax * static_cast<double>(std::max(rows, cols));
}

}  // namespace fedma
