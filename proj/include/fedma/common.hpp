#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace fedma {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Contract violations: caller passed arguments that break a documented
// precondition (dimension mismatch, parameter out of range).
class contract_error : public std::invalid_argument {
public:
    explicit contract_error(const std::string& what) : std::invalid_argument(what) {}
};

// Protocol errors: a sequence of otherwise-valid calls violated the
// simulated protocol (causality, over-full buffer row, ...).
class protocol_error : public std::runtime_error {
public:
    explicit protocol_error(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failures (non-convergence, non-finite state).
class numerical_error : public std::runtime_error {
public:
    explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw contract_error(msg);
}

inline bool all_finite(const Matrix& a) { return a.allFinite(); }
inline bool all_finite(const Vector& v) { return v.allFinite(); }

// Centralized tolerance constants.
struct Tolerances {
    static constexpr double svd_rank_rel = 1e-10;       // rank cut, scaled by sigma_max * max(rows, cols)
    // Truncation for least-squares solves, same scaling. Looser than
    // the rank cut on purpose: near-null singular directions of ill-
    // conditioned staleness matrices otherwise blow up the minimum-norm
    // coefficients (and with them the simulated trajectory) while
    // contributing almost nothing to the residual.
    static constexpr double ls_truncation_rel = 1e-5;
    static constexpr double row_sum = 1e-12;
    static constexpr double lightweight_consistency = 1e-8;
    static constexpr double full_rank_residual = 1e-8;
};

}  // namespace fedma
