#include "fedma/momentum.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace fedma {

MomentumMatrix::MomentumMatrix(double beta, Eigen::Index horizon) : beta_(beta), m_(horizon) {
    require(beta >= 0.0 && beta < 1.0, "MomentumMatrix: beta must be in [0, 1)");
    require(horizon >= 1, "MomentumMatrix: horizon must be >= 1");
    for (Eigen::Index t = 0; t < horizon; ++t) {
        double w = 1.0 - beta;
        for (Eigen::Index s = t; s >= 0; --s) {
            m_.set(t, s, w);
            w *= beta;
        }
    }
}

Vector unrolled_momentum_update(const Vector& theta1, const Matrix& update_history,
                                const MomentumMatrix& m, double eta) {
    const Eigen::Index horizon = m.horizon();
    require(update_history.cols() == horizon, "unrolled_momentum_update: R must have T columns");
    // column sums of M: sum_{i>=s} beta^(i-s)(1-beta) = 1 - beta^(T-s+1)
    Vector col_weights(horizon);
    for (Eigen::Index s = 0; s < horizon; ++s)
        col_weights(s) = 1.0 - std::pow(m.beta(), static_cast<double>(horizon - s));
    return theta1 - eta * (update_history * col_weights);
}

WeightVector solve_ma_weights(const StalenessMatrix& w, const MomentumMatrix& m,
                              Eigen::Index t, double* residual_sq) {
    require(t >= 1 && t <= w.horizon(), "solve_ma_weights: t out of horizon");
    require(m.horizon() >= t, "solve_ma_weights: momentum matrix shorter than t");

    const Matrix wt = w.top_left(t);
    const Vector target = m.row_prefix(t, t);
    Vector a = least_squares_min_norm(wt, target);

    if (residual_sq != nullptr)
        *residual_sq = (wt.transpose() * a - target).squaredNorm();

    WeightVector out = WeightVector::zeros(w.horizon());
    out.active = t;
    out.coeffs.head(t) = a;
    return out;
}

Vector ma_momentum(const Matrix& update_history, const WeightVector& a) {
    require(a.active <= update_history.cols(), "ma_momentum: weights longer than history");
    if (a.active == 0) return Vector::Zero(update_history.rows());
    return update_history.leftCols(a.active) * a.coeffs.head(a.active);
}

std::pair<double, double> solve_lightweight(const LightweightState& state, const StalenessMatrix& w,
                                            const MomentumMatrix& m, Eigen::Index t,
                                            double* residual_sq) {
    require(t >= 1 && t <= w.horizon(), "solve_lightweight: t out of horizon");
    require(state.a_tilde.active == t - 1, "solve_lightweight: state not at step t-1");

    Matrix basis = Matrix::Zero(t, 2);
    basis.col(0) = w.row_prefix(t, t);                        // e_t^T W
    if (t > 1) basis.col(1).head(t - 1) = state.target_row_image.head(t - 1);  // a~_{t-1}^T W
    const Vector target = m.row_prefix(t, t);

    Eigen::JacobiSVD<Matrix> dec(basis, Eigen::ComputeThinU | Eigen::ComputeThinV);
    dec.setThreshold(1e-12);
    Vector z = dec.solve(target);

    if (residual_sq != nullptr)
        *residual_sq = (basis * z - target).squaredNorm();
    return {z(0), z(1)};
}

void lightweight_step(LightweightState& state, const Vector& r_t, double u, double v,
                      const StalenessMatrix& w, Eigen::Index t) {
    require(state.a_tilde.active == t - 1, "lightweight_step: state not at step t-1");
    require(r_t.size() == state.momentum_buffer.size(), "lightweight_step: dimension mismatch");

    state.momentum_buffer = u * r_t + v * state.momentum_buffer;

    state.a_tilde.coeffs.head(t - 1) *= v;
    state.a_tilde.coeffs(t - 1) = u;
    state.a_tilde.active = t;

    Vector image = Vector::Zero(t);
    if (t > 1) image.head(t - 1) = v * state.target_row_image.head(t - 1);
    image += u * w.row_prefix(t, t);
    state.target_row_image.head(t) = image;

    state.last_u = u;
    state.last_v = v;
}

BiasDecomposition bias_decomposition(const StalenessMatrix& w, const MomentumMatrix& m,
                                     const Matrix* solved_a) {
    require(w.horizon() == m.horizon(), "bias_decomposition: W and M horizons differ");
    BiasDecomposition out;
    const Matrix& wd = w.matrix().dense();
    const Matrix& md = m.matrix().dense();
    out.implicit_bias = md * wd - md;
    out.implicit_bias_frob_sq = out.implicit_bias.squaredNorm();
    if (solved_a != nullptr) {
        require(solved_a->rows() == wd.rows() && solved_a->cols() == wd.cols(),
                "bias_decomposition: A dimensions differ from W");
        out.residual_bias = *solved_a * wd - md;
        out.residual_bias_frob_sq = out.residual_bias->squaredNorm();
    }
    return out;
}

MaDiagnostics compute_diagnostics(const StalenessMatrix& w, const MomentumMatrix& m,
                                  Eigen::Index t_max, Eigen::Index cohort) {
    require(t_max >= 1 && t_max <= w.horizon(), "compute_diagnostics: t_max out of horizon");

    MaDiagnostics d;
    d.residual_sq.reserve(t_max);
    double cum_residual = 0.0;
    double cum_m_norm = 0.0;
    double cum_a_frob = 0.0;

    for (Eigen::Index t = 1; t <= t_max; ++t) {
        const Matrix wt = w.top_left(t);
        const Vector target = m.row_prefix(t, t);

        const SvdFactorization f = svd(wt);
        d.nullity.push_back(t - f.rank);

        // alpha_t: squared projection of the target row onto the row
        // space of W_{:t,:t}, normalized by the full row norm
        const double m_norm_sq = target.squaredNorm();
        double proj_sq = 0.0;
        for (Eigen::Index i = 0; i < f.rank; ++i) {
            const double c = f.v.col(i).dot(target);
            proj_sq += c * c;
        }
        double one_minus_alpha = m_norm_sq > 0.0 ? 1.0 - proj_sq / m_norm_sq : 0.0;
        one_minus_alpha = std::min(1.0, std::max(0.0, one_minus_alpha));
        d.one_minus_alpha.push_back(one_minus_alpha);

        // minimum-norm solve from the same factorization, at the
        // solver's truncation level so the series matches what the
        // training loop computed:
        // min ||W^T a - target|| with W = U S V^T gives a = U S^+ V^T target
        const double cut = solver_truncation(f, t, t);
        Vector a = Vector::Zero(t);
        for (Eigen::Index i = 0; i < f.singular_values.size(); ++i) {
            if (f.singular_values(i) <= cut) break;
            a += (f.v.col(i).dot(target) / f.singular_values(i)) * f.u.col(i);
        }

        const double res = (wt.transpose() * a - target).squaredNorm();
        d.residual_sq.push_back(res);
        cum_residual += res;
        cum_m_norm += m_norm_sq;
        d.cumulative_rel.push_back(cum_m_norm > 0.0 ? std::sqrt(cum_residual / cum_m_norm) : 0.0);

        cum_a_frob += a.squaredNorm();
        d.a_frob_sq.push_back(cum_a_frob);
        const double denom = std::log(static_cast<double>(cohort) * static_cast<double>(t) *
                                      static_cast<double>(t));
        d.log_ratio.push_back((cum_a_frob > 0.0 && denom > 0.0) ? std::log(cum_a_frob) / denom : 0.0);
    }
    return d;
}

}  // namespace fedma
