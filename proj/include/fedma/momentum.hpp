#pragma once

#include "fedma/linalg.hpp"
#include "fedma/staleness.hpp"

#include <optional>
#include <vector>

namespace fedma {

// Lower-triangular matrix of exponential momentum weights
// beta^(t-s) * (1-beta). Row t sums to 1 - beta^t.
class MomentumMatrix {
public:
    MomentumMatrix() = default;
    MomentumMatrix(double beta, Eigen::Index horizon);

    double beta() const { return beta_; }
    Eigen::Index horizon() const { return m_.dim(); }

    Vector row_prefix(Eigen::Index t, Eigen::Index len) const { return m_.row_prefix(t - 1, len); }
    Matrix top_left(Eigen::Index t) const { return m_.top_left(t); }
    const LowerTriangular& matrix() const { return m_; }

private:
    double beta_ = 0.0;
    LowerTriangular m_;
};

// Coefficients a_t of the full momentum-approximation solve; entries
// beyond the active length are structurally zero.
struct WeightVector {
    Eigen::Index horizon = 0;
    Eigen::Index active = 0;
    Vector coeffs;  // length horizon, zeros beyond `active`

    static WeightVector zeros(Eigen::Index horizon) {
        return {horizon, 0, Vector::Zero(horizon)};
    }
    Vector head() const { return coeffs.head(active); }
};

// theta_1 - eta * R * M^T * 1: the unrolled form of T momentum steps.
Vector unrolled_momentum_update(const Vector& theta1, const Matrix& update_history,
                                const MomentumMatrix& m, double eta);

// Full MA: minimum-norm minimizer of ||a^T W_{:t,:t} - M_{t,:t}||_2.
// Also reports the squared residual at the optimum.
WeightVector solve_ma_weights(const StalenessMatrix& w, const MomentumMatrix& m,
                              Eigen::Index t, double* residual_sq = nullptr);

// m_tilde = R * a  (columns of R beyond a.active are ignored).
Vector ma_momentum(const Matrix& update_history, const WeightVector& a);

// State of the light-weight recursion a~_t = u_t e_t + v_t a~_{t-1}.
// `target_row_image` caches a~_{t}^T W_{:t,:t}, which makes each solve
// O(t) instead of O(t^2).
struct LightweightState {
    WeightVector a_tilde;
    Vector momentum_buffer;    // m~_t, model dimension
    Vector target_row_image;   // a~^T W over the first `a_tilde.active` columns
    double last_u = 0.0;
    double last_v = 0.0;

    static LightweightState init(Eigen::Index horizon, Eigen::Index model_dim) {
        LightweightState s;
        s.a_tilde = WeightVector::zeros(horizon);
        s.momentum_buffer = Vector::Zero(model_dim);
        s.target_row_image = Vector::Zero(horizon);
        return s;
    }
};

// Two-variable least squares min_{u,v} ||(u e_t + v a~_{t-1})^T W - M_{t,:t}||_2,
// minimum-(u^2+v^2) on ties/degeneracy. Reports the squared residual.
std::pair<double, double> solve_lightweight(const LightweightState& state, const StalenessMatrix& w,
                                            const MomentumMatrix& m, Eigen::Index t,
                                            double* residual_sq = nullptr);

// Apply one light-weight step: m~ <- u r_t + v m~, a~ <- u e_t + v a~.
void lightweight_step(LightweightState& state, const Vector& r_t, double u, double v,
                      const StalenessMatrix& w, Eigen::Index t);

// Bias matrices (MW - M) and, when a solved A is given, (AW - M).
struct BiasDecomposition {
    Matrix implicit_bias;                 // MW - M
    double implicit_bias_frob_sq = 0.0;
    std::optional<Matrix> residual_bias;  // AW - M
    double residual_bias_frob_sq = 0.0;
};

BiasDecomposition bias_decomposition(const StalenessMatrix& w, const MomentumMatrix& m,
                                     const Matrix* solved_a = nullptr);

// Per-iteration diagnostic series from a completed run (or prefix).
struct MaDiagnostics {
    std::vector<double> residual_sq;       // ||a_t^T W_{:t,:t} - M_{t,:t}||^2
    std::vector<double> cumulative_rel;    // ||A W - M||_F / ||M||_F over the prefix
    std::vector<Eigen::Index> nullity;     // t - rank(W_{:t,:t})
    std::vector<double> one_minus_alpha;   // 1 - projection of M row onto col space of W
    std::vector<double> a_frob_sq;         // running ||A_{:t,:t}||_F^2
    std::vector<double> log_ratio;         // log ||A||_F^2 / log(C t^2)
};

// Recompute the full-MA weights row by row and derive all five series.
// O(sum t^3); intended for offline diagnosis, not the training loop.
MaDiagnostics compute_diagnostics(const StalenessMatrix& w, const MomentumMatrix& m,
                                  Eigen::Index t_max, Eigen::Index cohort);

}  // namespace fedma
