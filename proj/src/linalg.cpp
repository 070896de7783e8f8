#include "fedma/linalg.hpp"

#include <Eigen/SVD>

#include <algorithm>

namespace fedma {

namespace {

constexpr Eigen::Index kMaxSvdDim = 8192;

}  // namespace

SvdFactorization svd(const Matrix& a) {
    require(all_finite(a), "svd: non-finite entries");
    require(std::max(a.rows(), a.cols()) <= kMaxSvdDim, "svd: dimension above configured max");

    SvdFactorization f;
    if (a.rows() == 0 || a.cols() == 0) return f;

    // BDCSVD falls back to Jacobi internally for small blocks; both are
    // backward stable, which is all the reconstruction invariant needs.
    Eigen::BDCSVD<Matrix> dec(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (dec.info() != Eigen::Success)
        throw numerical_error("svd: decomposition did not converge, matrix sum hash " +
                              std::to_string(std::hash<double>{}(a.sum())));

    f.u = dec.matrixU();
    f.singular_values = dec.singularValues();
    f.v = dec.matrixV();
    double smax = f.singular_values.size() > 0 ? f.singular_values(0) : 0.0;
    f.tolerance = Tolerances::svd_rank_rel * smax *
                  static_cast<double>(std::max(a.rows(), a.cols()));
    f.rank = (f.singular_values.array() > f.tolerance).count();
    return f;
}

Eigen::Index numerical_rank(const Matrix& a) { return svd(a).rank; }

Eigen::Index solver_rank(const Matrix& a) {
    SvdFactorization f = svd(a);
    const double cut = solver_truncation(f, a.rows(), a.cols());
    return (f.singular_values.array() > cut).count();
}

Vector least_squares_min_norm(const Matrix& a, const Vector& b) {
    require(a.cols() == b.size(), "least_squares_min_norm: dimension mismatch");
    require(b.size() >= 1, "least_squares_min_norm: empty right-hand side");
    if (!all_finite(a) || !all_finite(b))
        throw contract_error("least_squares_min_norm: non-finite input");

    // min_x ||x^T A - b^T|| == min_x ||A^T x - b||; the SVD route keeps
    // the minimum-norm behavior on rank-deficient A.
    SvdFactorization f = svd(Matrix(a.transpose()));
    const double cut = solver_truncation(f, a.rows(), a.cols());
    Vector x = Vector::Zero(a.rows());
    for (Eigen::Index i = 0; i < f.singular_values.size(); ++i) {
        if (f.singular_values(i) <= cut) break;
        x += (f.u.col(i).dot(b) / f.singular_values(i)) * f.v.col(i);
    }
    return x;
}

}  // namespace fedma
