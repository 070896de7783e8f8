#pragma once

#include "fedma/common.hpp"

namespace fedma {

enum class ServerOptKind { FedAvg, FedAvgM, FedAdam };

// Server-side optimizer state. The second moment (FedAdam) is always
// fed the raw aggregate r_t, even when the first-moment drive comes
// from momentum approximation.
class ServerOptState {
public:
    ServerOptState() = default;
    ServerOptState(ServerOptKind kind, Eigen::Index dim, double beta, double beta2,
                   double adaptivity)
        : kind_(kind), beta_(beta), beta2_(beta2), adaptivity_(adaptivity) {
        require(beta >= 0.0 && beta < 1.0, "ServerOptState: beta in [0,1)");
        require(beta2 >= 0.0 && beta2 < 1.0, "ServerOptState: beta' in [0,1)");
        if (kind != ServerOptKind::FedAvg) first_moment_ = Vector::Zero(dim);
        if (kind == ServerOptKind::FedAdam) second_moment_ = Vector::Zero(dim);
    }

    ServerOptKind kind() const { return kind_; }
    double beta() const { return beta_; }
    const Vector& first_moment() const { return first_moment_; }
    const Vector& second_moment() const { return second_moment_; }

    // Baseline step: momentum recursion runs inside the state.
    // No bias-correction terms anywhere.
    Vector step(const Vector& theta, const Vector& raw_aggregate, double eta) {
        check_drive(raw_aggregate);
        update_second_moment(raw_aggregate);
        const Vector* drive = &raw_aggregate;
        if (kind_ != ServerOptKind::FedAvg) {
            first_moment_ = beta_ * first_moment_ + (1.0 - beta_) * raw_aggregate;
            drive = &first_moment_;
        }
        return apply(theta, *drive, eta);
    }

    // MA step: the first moment is supplied ready-made; the internal
    // recursion is bypassed while the preconditioner still sees r_t.
    Vector step_preformed(const Vector& theta, const Vector& momentum_drive,
                          const Vector& raw_aggregate, double eta) {
        check_drive(momentum_drive);
        update_second_moment(raw_aggregate);
        return apply(theta, momentum_drive, eta);
    }

private:
    void check_drive(const Vector& v) const {
        if (!all_finite(v)) throw numerical_error("server_step: non-finite drive, run diverged");
    }

    void update_second_moment(const Vector& raw) {
        if (kind_ == ServerOptKind::FedAdam)
            second_moment_ = beta2_ * second_moment_ + (1.0 - beta2_) * raw.array().square().matrix();
    }

    Vector apply(const Vector& theta, const Vector& drive, double eta) const {
        if (kind_ == ServerOptKind::FedAdam) {
            Vector h = second_moment_.array().sqrt() + adaptivity_;
            return theta - eta * (drive.array() / h.array()).matrix();
        }
        return theta - eta * drive;
    }

    ServerOptKind kind_ = ServerOptKind::FedAvg;
    double beta_ = 0.0;
    double beta2_ = 0.99;
    double adaptivity_ = 0.01;
    Vector first_moment_;
    Vector second_moment_;
};

inline Vector ema_update(const Vector& ema, const Vector& theta, double decay) {
    require(decay >= 0.0 && decay < 1.0, "ema_update: decay in [0,1)");
    return decay * ema + (1.0 - decay) * theta;
}

}  // namespace fedma
